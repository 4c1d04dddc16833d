//! Discrete backward and forward Lax-Oleinik operators at a cohomology class.
//!
//! `T⁻[u](y) = inf_x { u(x) + S_c(x, y) }` and
//! `T⁺[u](x) = sup_y { u(y) - S_c(x, y) }`, taken over the coercivity window.
//! The coarse minimization over grid-aligned candidates exploits the Monge
//! structure implied by the non-crossing inequality: the leftmost minimizer
//! is non-decreasing in the node index, so a divide-and-conquer sweep finds
//! all `n` argmins in `O((n + window) log n)` objective evaluations. A ternary
//! search inside the winning cells then refines each argmin to 1e-10.

use rayon::prelude::*;

use crate::error::{Result, TwistError};
use crate::generating::{CohomologyClass, GeneratingFunction};
use crate::grid::GridFunction;

/// Ties in the coarse scan closer than this are broken toward smaller x.
const TIE_TOL: f64 = 1e-12;
/// Refinement target in the x variable.
const REFINE_TOL: f64 = 1e-10;

/// Image of a Lax-Oleinik application together with its optimizer sample and
/// a multi-valuedness diagnostic.
#[derive(Debug, Clone)]
pub struct OperatorResult {
    /// `T∓[u]` on the grid.
    pub image: GridFunction,
    /// Per node: the optimizing x (for `T⁻` at node y) or y (for `T⁺` at
    /// node x), as a real number (not reduced mod 1).
    pub arg_map: Vec<f64>,
    /// Per node: best objective outside the two cells neighboring the winner
    /// minus the best objective. Small gaps flag near-multi-valued optima.
    pub gap: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq)]
enum Direction {
    /// Minimize `u(x) + S_c(x, y_i)` over x.
    Backward,
    /// Minimize `S_c(x_i, y) - u(y)` over y (i.e. maximize the T⁺ objective).
    Forward,
}

struct Kernel<'a> {
    u: &'a GridFunction,
    gf: &'a GeneratingFunction,
    c: CohomologyClass,
    dir: Direction,
    n: usize,
    radius: i64,
    window: f64,
}

impl<'a> Kernel<'a> {
    fn new(
        u: &'a GridFunction,
        gf: &'a GeneratingFunction,
        c: CohomologyClass,
        dir: Direction,
    ) -> Self {
        let n = u.n();
        let window = gf.window(c);
        let radius = (window * n as f64).floor() as i64;
        Kernel {
            u,
            gf,
            c,
            dir,
            n,
            radius,
            window,
        }
    }

    /// Objective at an arbitrary point `t` for node `i`.
    fn obj(&self, i: usize, t: f64) -> f64 {
        let node = i as f64 / self.n as f64;
        match self.dir {
            Direction::Backward => self.u.eval(t) + self.gf.s_c(self.c, t, node),
            Direction::Forward => self.gf.s_c(self.c, node, t) - self.u.eval(t),
        }
    }

    /// Objective at grid candidate `k` for node `i`; exact node lookup of u.
    fn obj_at(&self, i: usize, k: i64) -> f64 {
        let n = self.n as i64;
        let uv = self.u.node(k.rem_euclid(n) as usize);
        let t = k as f64 / self.n as f64;
        let node = i as f64 / self.n as f64;
        match self.dir {
            Direction::Backward => uv + self.gf.s_c(self.c, t, node),
            Direction::Forward => self.gf.s_c(self.c, node, t) - uv,
        }
    }

    /// Leftmost coarse argmin over `[lo, hi]` for node `i`.
    fn scan(&self, i: usize, lo: i64, hi: i64) -> i64 {
        let mut best = f64::INFINITY;
        for k in lo..=hi {
            best = best.min(self.obj_at(i, k));
        }
        let cutoff = best + TIE_TOL;
        for k in lo..=hi {
            if self.obj_at(i, k) <= cutoff {
                return k;
            }
        }
        unreachable!("scan over a non-empty range")
    }

    /// Divide-and-conquer argmin sweep over all rows; exact for Monge costs.
    fn monotone_argmins(&self) -> Vec<i64> {
        let n = self.n;
        let mut out = vec![0i64; n];
        let mut stack = vec![(0usize, n - 1, -self.radius, (n as i64 - 1) + self.radius)];
        while let Some((r_lo, r_hi, c_lo, c_hi)) = stack.pop() {
            let mid = (r_lo + r_hi) / 2;
            let lo = c_lo.max(mid as i64 - self.radius);
            let hi = c_hi.min(mid as i64 + self.radius);
            let k = self.scan(mid, lo, hi);
            out[mid] = k;
            if mid > r_lo {
                stack.push((r_lo, mid - 1, c_lo, k));
            }
            if mid < r_hi {
                stack.push((mid + 1, r_hi, k, c_hi));
            }
        }
        out
    }

    /// Refines a coarse argmin by ternary search in the two adjacent cells.
    fn refine(&self, i: usize, k: i64) -> (f64, f64) {
        let h = 1.0 / self.n as f64;
        let x0 = k as f64 * h;
        let mut best_x = x0;
        let mut best_v = self.obj_at(i, k);
        for (a, b) in [(x0 - h, x0), (x0, x0 + h)] {
            let (x, v) = self.ternary(i, a, b);
            if v < best_v {
                best_v = v;
                best_x = x;
            }
        }
        (best_x, best_v)
    }

    fn ternary(&self, i: usize, mut lo: f64, mut hi: f64) -> (f64, f64) {
        while hi - lo > REFINE_TOL {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if self.obj(i, m1) <= self.obj(i, m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let x = 0.5 * (lo + hi);
        (x, self.obj(i, x))
    }

    fn check_window(&self, i: usize, k: i64) -> Result<()> {
        if (k - i as i64).abs() >= self.radius - 1 {
            return Err(TwistError::WindowExhausted {
                node: i,
                window: self.window,
            });
        }
        Ok(())
    }

    /// Fast path: image and argmap only.
    fn apply(&self) -> Result<(GridFunction, Vec<f64>)> {
        let coarse = self.monotone_argmins();
        for (i, &k) in coarse.iter().enumerate() {
            self.check_window(i, k)?;
        }
        let refined: Vec<(f64, f64)> = (0..self.n)
            .into_par_iter()
            .map(|i| self.refine(i, coarse[i]))
            .collect();
        let sign = match self.dir {
            Direction::Backward => 1.0,
            Direction::Forward => -1.0,
        };
        let image = GridFunction::new(refined.iter().map(|&(_, v)| sign * v).collect())?;
        let args = refined.iter().map(|&(x, _)| x).collect();
        Ok((image, args))
    }

    /// Multi-valuedness gap per node from a full coarse scan.
    fn gaps(&self, coarse: &[i64]) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let lo = i as i64 - self.radius;
                let hi = i as i64 + self.radius;
                let k_star = coarse[i];
                let best = self.obj_at(i, k_star);
                let mut second = f64::INFINITY;
                for k in lo..=hi {
                    if (k - k_star).abs() >= 2 {
                        second = second.min(self.obj_at(i, k));
                    }
                }
                second - best
            })
            .collect()
    }

    fn apply_full(&self) -> Result<OperatorResult> {
        let coarse = self.monotone_argmins();
        for (i, &k) in coarse.iter().enumerate() {
            self.check_window(i, k)?;
        }
        let gap = self.gaps(&coarse);
        let refined: Vec<(f64, f64)> = (0..self.n)
            .into_par_iter()
            .map(|i| self.refine(i, coarse[i]))
            .collect();
        let sign = match self.dir {
            Direction::Backward => 1.0,
            Direction::Forward => -1.0,
        };
        let image = GridFunction::new(refined.iter().map(|&(_, v)| sign * v).collect())?;
        let arg_map = refined.iter().map(|&(x, _)| x).collect();
        Ok(OperatorResult {
            image,
            arg_map,
            gap,
        })
    }
}

/// Backward operator with optimizer sample and gap diagnostic.
pub fn t_minus(
    u: &GridFunction,
    gf: &GeneratingFunction,
    c: CohomologyClass,
) -> Result<OperatorResult> {
    Kernel::new(u, gf, c, Direction::Backward).apply_full()
}

/// Forward operator; `arg_map` is the `Σ₊[u]` sample.
pub fn t_plus(
    u: &GridFunction,
    gf: &GeneratingFunction,
    c: CohomologyClass,
) -> Result<OperatorResult> {
    Kernel::new(u, gf, c, Direction::Forward).apply_full()
}

/// Backward image only; same optimizer path as `t_minus`, no gap scan.
pub fn t_minus_image(
    u: &GridFunction,
    gf: &GeneratingFunction,
    c: CohomologyClass,
) -> Result<(GridFunction, Vec<f64>)> {
    Kernel::new(u, gf, c, Direction::Backward).apply()
}

/// Forward image only; same optimizer path as `t_plus`, no gap scan.
pub fn t_plus_image(
    u: &GridFunction,
    gf: &GeneratingFunction,
    c: CohomologyClass,
) -> Result<(GridFunction, Vec<f64>)> {
    Kernel::new(u, gf, c, Direction::Forward).apply()
}

/// `T⁻ⁿ[u]` by n-fold composition.
pub fn t_minus_n(
    u: &GridFunction,
    gf: &GeneratingFunction,
    c: CohomologyClass,
    n_steps: usize,
) -> Result<GridFunction> {
    assert!(n_steps >= 1, "n_steps must be at least 1");
    let mut v = u.clone();
    for _ in 0..n_steps {
        v = t_minus_image(&v, gf, c)?.0;
    }
    Ok(v)
}

/// `T⁺ⁿ[u]` by n-fold composition.
pub fn t_plus_n(
    u: &GridFunction,
    gf: &GeneratingFunction,
    c: CohomologyClass,
    n_steps: usize,
) -> Result<GridFunction> {
    assert!(n_steps >= 1, "n_steps must be at least 1");
    let mut v = u.clone();
    for _ in 0..n_steps {
        v = t_plus_image(&v, gf, c)?.0;
    }
    Ok(v)
}

/// Grid indices where `|T⁺ⁿ∘T⁻ⁿ[u] - u| <= delta`, the coincidence set.
pub fn o_n_set(
    u: &GridFunction,
    gf: &GeneratingFunction,
    c: CohomologyClass,
    n_steps: usize,
    delta: f64,
) -> Result<Vec<usize>> {
    assert!(delta > 0.0, "delta must be positive");
    let down = t_minus_n(u, gf, c, n_steps)?;
    let back = t_plus_n(&down, gf, c, n_steps)?;
    Ok(u.values()
        .iter()
        .zip(back.values())
        .enumerate()
        .filter(|(_, (a, b))| (*a - *b).abs() <= delta)
        .map(|(i, _)| i)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generating::TAU;

    fn c(v: f64) -> CohomologyClass {
        CohomologyClass::new(v).unwrap()
    }

    #[test]
    fn integrable_constant_backward() {
        let gf = GeneratingFunction::integrable();
        let u = GridFunction::constant(512, 0.0);
        let res = t_minus(&u, &gf, c(0.5)).unwrap();
        for (i, v) in res.image.values().iter().enumerate() {
            assert!((v + 0.125).abs() < 1e-6, "node {i}: {v}");
            let y = i as f64 / 512.0;
            assert!((res.arg_map[i] - (y - 0.5)).abs() < 1e-6);
        }
    }

    #[test]
    fn integrable_constant_forward() {
        let gf = GeneratingFunction::integrable();
        let u = GridFunction::constant(512, 0.0);
        let res = t_plus(&u, &gf, c(0.5)).unwrap();
        for (i, v) in res.image.values().iter().enumerate() {
            assert!((v - 0.125).abs() < 1e-6);
            let x = i as f64 / 512.0;
            assert!((res.arg_map[i] - (x + 0.5)).abs() < 1e-6);
        }
    }

    #[test]
    fn constants_commute_with_inf() {
        let gf = GeneratingFunction::frenkel_kontorova(1.0);
        let u = GridFunction::from_fn(256, |x| 0.3 * (TAU * x).sin()).unwrap();
        let a = 1.7;
        let lhs = t_minus(&u.shifted(a), &gf, c(0.2)).unwrap().image;
        let rhs = t_minus(&u, &gf, c(0.2)).unwrap().image.shifted(a);
        assert!(lhs.sup_dist(&rhs) < 1e-9);
        let lhs = t_plus(&u.shifted(a), &gf, c(0.2)).unwrap().image;
        let rhs = t_plus(&u, &gf, c(0.2)).unwrap().image.shifted(a);
        assert!(lhs.sup_dist(&rhs) < 1e-9);
    }

    #[test]
    fn brute_force_agreement_fk() {
        let n = 512;
        let gf = GeneratingFunction::frenkel_kontorova(1.0);
        let cc = c(0.0);
        let u = GridFunction::from_fn(n, |x| 0.2 * (TAU * x).cos()).unwrap();
        let res = t_minus(&u, &gf, cc).unwrap();
        let w = gf.window(cc);
        let step = 1e-4;
        for i in (0..n).step_by(7) {
            let y = i as f64 / n as f64;
            let mut best = f64::INFINITY;
            let mut t = y - w;
            while t <= y + w {
                best = best.min(u.eval(t) + gf.s_c(cc, t, y));
                t += step;
            }
            assert!(
                (res.image.node(i) - best).abs() < 1e-6,
                "node {i}: {} vs {best}",
                res.image.node(i)
            );
        }
    }

    #[test]
    fn chain_inequality() {
        let gf = GeneratingFunction::frenkel_kontorova(1.0);
        let cc = c(0.3);
        let u = GridFunction::from_fn(512, |x| 0.3 * (TAU * x).sin() - 0.1 * (2.0 * TAU * x).cos())
            .unwrap();
        let down = t_minus(&u, &gf, cc).unwrap().image;
        let back = t_plus(&down, &gf, cc).unwrap().image;
        let up = t_plus(&u, &gf, cc).unwrap().image;
        let forth = t_minus(&up, &gf, cc).unwrap().image;
        for i in 0..512 {
            assert!(back.node(i) <= u.node(i) + 1e-6);
            assert!(forth.node(i) >= u.node(i) - 1e-6);
        }
    }

    #[test]
    fn composition_is_iteration() {
        let gf = GeneratingFunction::integrable();
        let cc = c(0.0);
        let u = GridFunction::from_fn(256, |x| (TAU * x).cos()).unwrap();
        let once = t_minus_n(&u, &gf, cc, 1).unwrap();
        assert_eq!(once, t_minus_image(&u, &gf, cc).unwrap().0);
        let twice = t_minus_n(&u, &gf, cc, 2).unwrap();
        let manual = t_minus_image(&t_minus_image(&u, &gf, cc).unwrap().0, &gf, cc)
            .unwrap()
            .0;
        assert_eq!(twice, manual);
    }

    #[test]
    fn fast_and_full_paths_share_image() {
        let gf = GeneratingFunction::frenkel_kontorova(1.0);
        let cc = c(0.4);
        let u = GridFunction::from_fn(256, |x| 0.2 * (TAU * x).sin()).unwrap();
        let full = t_minus(&u, &gf, cc).unwrap();
        let (fast, args) = t_minus_image(&u, &gf, cc).unwrap();
        assert_eq!(full.image, fast);
        assert_eq!(full.arg_map, args);
    }

    #[test]
    fn integrable_fixed_point_o_n_set() {
        let gf = GeneratingFunction::integrable();
        let cc = c(0.0);
        let n = 256;
        let u = GridFunction::constant(n, 0.0);
        for steps in [1, 3] {
            let set = o_n_set(&u, &gf, cc, steps, 1e-8).unwrap();
            assert_eq!(set.len(), n);
        }
        // vacuous threshold keeps everything
        let v = GridFunction::from_fn(n, |x| 0.3 * (TAU * x).sin()).unwrap();
        assert_eq!(o_n_set(&v, &gf, cc, 1, 1e9).unwrap().len(), n);
    }

    #[test]
    fn order_preservation() {
        let gf = GeneratingFunction::frenkel_kontorova(1.0);
        let cc = c(0.1);
        let u = GridFunction::from_fn(256, |x| 0.2 * (TAU * x).sin()).unwrap();
        let v = GridFunction::from_fn(256, |x| 0.2 * (TAU * x).sin() + 0.05 * (1.0 + (2.0 * TAU * x).cos()))
            .unwrap();
        let tu = t_minus(&u, &gf, cc).unwrap().image;
        let tv = t_minus(&v, &gf, cc).unwrap().image;
        for i in 0..256 {
            assert!(tu.node(i) <= tv.node(i) + 1e-9);
        }
    }

    #[test]
    fn window_exhaustion_is_an_error() {
        // tiny window cannot hold the minimizer displaced by c
        let gf = GeneratingFunction::new(
            crate::generating::Family::Integrable,
            0.5,
            Some(0.6),
        )
        .unwrap();
        let u = GridFunction::constant(128, 0.0);
        let err = t_minus(&u, &gf, c(0.75)).unwrap_err();
        assert!(matches!(err, TwistError::WindowExhausted { .. }));
    }

    #[test]
    fn output_is_semiconcave() {
        let gf = GeneratingFunction::frenkel_kontorova(1.0);
        let cc = c(0.0);
        // kinked input: image must still be semiconcave with constant near
        // the d2s bound (1 for these families)
        let u = GridFunction::from_fn(1024, |x| (x - 0.3).abs().min(1.0 - (x - 0.3).abs()))
            .unwrap();
        let img = t_minus(&u, &gf, cc).unwrap().image;
        assert!(img.semiconcavity_constant() < 1.5);
    }
}
