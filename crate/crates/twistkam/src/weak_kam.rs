//! The additive (min-plus) eigenproblem `T⁻[u] = u + S̄_c`: effective
//! interaction, backward/forward solutions, conjugate pairs, the projected
//! Aubry set, and the α-function sweep.

use crate::error::Result;
use crate::generating::{CohomologyClass, GeneratingFunction};
use crate::grid::GridFunction;
use crate::lax_oleinik::{t_minus_image, t_plus_image};
use crate::singular::{rotation_number, sigma_plus_lift};

/// Outcome of a value-iteration run.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Estimated effective interaction `S̄_c`.
    pub s_bar: f64,
    pub iterations: usize,
    /// `osc(T⁻[u_k] - u_k)` at termination.
    pub residual: f64,
    /// `(iteration, s_bar estimate, residual)` per recorded step.
    pub history: Vec<(usize, f64, f64)>,
    pub converged: bool,
}

/// A backward solution together with its forward conjugate.
#[derive(Debug, Clone)]
pub struct ConjugatePair {
    pub u_minus: GridFunction,
    pub u_plus: GridFunction,
}

fn backward_iteration(
    gf: &GeneratingFunction,
    c: CohomologyClass,
    u0: &GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, SolveReport)> {
    assert!(tol > 0.0, "tol must be positive");
    let mut u = u0.clone();
    let mut history = Vec::new();
    let mut s_bar = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for k in 1..=max_iter {
        let (tu, _) = t_minus_image(&u, gf, c)?;
        let diff = GridFunction::new(
            tu.values()
                .iter()
                .zip(u.values())
                .map(|(a, b)| a - b)
                .collect(),
        )?;
        s_bar = diff.mean();
        residual = diff.oscillation();
        iterations = k;
        history.push((k, s_bar, residual));
        u = tu.shifted(-s_bar);
        if residual <= tol {
            break;
        }
    }
    let report = SolveReport {
        s_bar,
        iterations,
        residual,
        history,
        converged: residual <= tol,
    };
    Ok((u, report))
}

/// Estimates `S̄_c` by value iteration `u ← T⁻[u] - mean(T⁻[u] - u)`,
/// stopping when the oscillation of the difference drops below `tol`.
/// Non-convergence is flagged in the report, not thrown.
pub fn effective_interaction(
    gf: &GeneratingFunction,
    c: CohomologyClass,
    u0: &GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    Ok(backward_iteration(gf, c, u0, tol, max_iter)?.1)
}

/// Backward solution `u₋` with `‖T⁻[u₋] - S̄_c - u₋‖∞ ≤ tol`, gauged by
/// `u₋(0) = 0`.
pub fn weak_kam_backward(
    gf: &GeneratingFunction,
    c: CohomologyClass,
    n: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, SolveReport)> {
    let u0 = GridFunction::constant(n, 0.0);
    let (u, report) = backward_iteration(gf, c, &u0, tol, max_iter)?;
    Ok((u.shifted(-u.node(0)), report))
}

/// Warm-started variant of [`weak_kam_backward`]: continues the value
/// iteration from `u0` instead of zero. Sweeping the cohomology class with
/// the previous solution as the seed converges far faster than cold starts,
/// since neighbouring solutions differ by `O(Δc)`.
pub fn weak_kam_backward_from(
    gf: &GeneratingFunction,
    c: CohomologyClass,
    u0: &GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, SolveReport)> {
    let (u, report) = backward_iteration(gf, c, u0, tol, max_iter)?;
    Ok((u.shifted(-u.node(0)), report))
}

/// Forward conjugate of a converged backward solution: the uniform limit of
/// `T⁺ᵏ[u₋] + k·S̄_c`. Keeps the gauge of `u₋` so that `u₊ ≤ u₋` with
/// equality on the Aubry approximation.
pub fn conjugate_plus(
    u_minus: &GridFunction,
    gf: &GeneratingFunction,
    c: CohomologyClass,
    s_bar: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, SolveReport)> {
    assert!(tol > 0.0, "tol must be positive");
    let mut v = u_minus.clone();
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for k in 1..=max_iter {
        let (tv, _) = t_plus_image(&v, gf, c)?;
        let next = tv.shifted(s_bar);
        residual = v.sup_dist(&next);
        iterations = k;
        history.push((k, s_bar, residual));
        v = next;
        if residual <= tol {
            break;
        }
    }
    let report = SolveReport {
        s_bar,
        iterations,
        residual,
        history,
        converged: residual <= tol,
    };
    Ok((v, report))
}

/// Solves for the full conjugate pair at class `c`.
pub fn conjugate_pair(
    gf: &GeneratingFunction,
    c: CohomologyClass,
    n: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(ConjugatePair, SolveReport)> {
    let (u_minus, report) = weak_kam_backward(gf, c, n, tol, max_iter)?;
    let (u_plus, _) = conjugate_plus(&u_minus, gf, c, report.s_bar, tol, max_iter)?;
    Ok((ConjugatePair { u_minus, u_plus }, report))
}

/// Grid indices with `u₋ - u₊ ≤ delta`: an over-approximation of the
/// projected Aubry set (exact when the solution is unique up to constants).
pub fn projected_aubry(pair: &ConjugatePair, delta: f64) -> Vec<usize> {
    assert!(delta > 0.0, "delta must be positive");
    pair.u_minus
        .values()
        .iter()
        .zip(pair.u_plus.values())
        .enumerate()
        .filter(|(_, (m, p))| *m - *p <= delta)
        .map(|(i, _)| i)
        .collect()
}

/// One row of the α-function sweep. Failed solves carry NaN sentinels in
/// every numeric column except `c`.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub c: f64,
    /// `α(c) = -S̄_c`.
    pub alpha: f64,
    pub s_bar: f64,
    /// Centered finite difference of the `alpha` column (one-sided at the
    /// ends of the sweep).
    pub alpha_prime_fd: f64,
    /// Rotation number of the optimal forward map of `u₋`.
    pub rho_sigma: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Sweeps the α-function over sorted classes. Per-class failures are
/// recorded in the row and the sweep continues.
pub fn alpha_sweep(
    gf: &GeneratingFunction,
    c_values: &[f64],
    n: usize,
    tol: f64,
    max_iter: usize,
    n_iter_rotation: usize,
) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = c_values
        .iter()
        .map(|&cv| {
            let failed = |c: f64| SweepRow {
                c,
                alpha: f64::NAN,
                s_bar: f64::NAN,
                alpha_prime_fd: f64::NAN,
                rho_sigma: f64::NAN,
                residual: f64::NAN,
                iterations: 0,
            };
            let cc = match CohomologyClass::new(cv) {
                Ok(cc) => cc,
                Err(_) => return failed(cv),
            };
            let (u, report) = match weak_kam_backward(gf, cc, n, tol, max_iter) {
                Ok(r) => r,
                Err(_) => return failed(cv),
            };
            if !report.converged {
                return failed(cv);
            }
            let rho = sigma_plus_lift(&u, gf, cc)
                .map(|lift| rotation_number(&lift, 0.0, n_iter_rotation).0)
                .unwrap_or(f64::NAN);
            SweepRow {
                c: cv,
                alpha: -report.s_bar,
                s_bar: report.s_bar,
                alpha_prime_fd: f64::NAN,
                rho_sigma: rho,
                residual: report.residual,
                iterations: report.iterations,
            }
        })
        .collect();

    let alphas: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
    let cs: Vec<f64> = rows.iter().map(|r| r.c).collect();
    let m = rows.len();
    for i in 0..m {
        let (a, b) = if m < 2 {
            continue;
        } else if i == 0 {
            (0, 1)
        } else if i == m - 1 {
            (m - 2, m - 1)
        } else {
            (i - 1, i + 1)
        };
        rows[i].alpha_prime_fd = (alphas[b] - alphas[a]) / (cs[b] - cs[a]);
    }
    rows
}

/// CSV serialization of a sweep, one row per class.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("c,alpha,s_bar,alpha_prime_fd,rho_sigma,residual,iterations\n");
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            r.c, r.alpha, r.s_bar, r.alpha_prime_fd, r.rho_sigma, r.residual, r.iterations
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generating::TAU;

    fn c(v: f64) -> CohomologyClass {
        CohomologyClass::new(v).unwrap()
    }

    #[test]
    fn integrable_effective_interaction_closed_form() {
        let gf = GeneratingFunction::integrable();
        for cv in [0.0, 0.3, 0.7] {
            let u0 = GridFunction::constant(512, 0.0);
            let rep = effective_interaction(&gf, c(cv), &u0, 1e-9, 100).unwrap();
            assert!(rep.converged);
            assert!(
                (rep.s_bar + cv * cv / 2.0).abs() < 1e-5,
                "c={cv}: s_bar={}",
                rep.s_bar
            );
        }
    }

    #[test]
    fn fk_zero_class_has_zero_interaction() {
        let gf = GeneratingFunction::frenkel_kontorova(1.0);
        let u0 = GridFunction::constant(1024, 0.0);
        let rep = effective_interaction(&gf, c(0.0), &u0, 1e-7, 2000).unwrap();
        assert!(rep.converged, "residual {}", rep.residual);
        assert!(rep.s_bar.abs() < 1e-5, "s_bar = {}", rep.s_bar);
    }

    #[test]
    fn residual_history_tail_is_monotone() {
        let gf = GeneratingFunction::frenkel_kontorova(1.0);
        let u0 = GridFunction::from_fn(512, |x| 0.2 * (TAU * x).sin()).unwrap();
        let rep = effective_interaction(&gf, c(0.0), &u0, 1e-7, 2000).unwrap();
        let tail = &rep.history[rep.history.len().saturating_sub(20)..];
        for w in tail.windows(2) {
            assert!(w[1].2 <= w[0].2 + 1e-12);
        }
    }

    #[test]
    fn gauge_independence_of_s_bar() {
        let gf = GeneratingFunction::frenkel_kontorova(1.0);
        let cc = c(0.1);
        let tol = 1e-7;
        let a = effective_interaction(&gf, cc, &GridFunction::constant(512, 0.0), tol, 3000)
            .unwrap();
        let u0 = GridFunction::from_fn(512, |x| {
            0.3 * (TAU * x).sin() + 0.1 * (3.0 * TAU * x).cos()
        })
        .unwrap();
        let b = effective_interaction(&gf, cc, &u0, tol, 3000).unwrap();
        assert!(a.converged && b.converged);
        assert!((a.s_bar - b.s_bar).abs() <= 10.0 * tol, "{} {}", a.s_bar, b.s_bar);
    }

    #[test]
    fn warm_start_from_a_solution_converges_immediately() {
        let gf = GeneratingFunction::frenkel_kontorova(1.0);
        let cc = c(0.0);
        let (u, rep) = weak_kam_backward(&gf, cc, 256, 1e-9, 500).unwrap();
        assert!(rep.converged);
        let (v, rep2) = weak_kam_backward_from(&gf, cc, &u, 1e-9, 500).unwrap();
        assert!(rep2.converged);
        assert!(rep2.iterations <= 2, "{}", rep2.iterations);
        assert!(u.sup_dist(&v) <= 1e-8);
    }

    #[test]
    fn integrable_backward_solution_is_constant() {
        let gf = GeneratingFunction::integrable();
        let (u, rep) = weak_kam_backward(&gf, c(0.3), 512, 1e-9, 100).unwrap();
        assert!(rep.converged);
        assert_eq!(u.node(0), 0.0);
        assert!(u.oscillation() < 1e-5);
    }

    #[test]
    fn backward_solution_is_fixed_point() {
        let gf = GeneratingFunction::frenkel_kontorova(1.0);
        let cc = c(0.0);
        let tol = 1e-7;
        let (u, rep) = weak_kam_backward(&gf, cc, 1024, tol, 3000).unwrap();
        assert!(rep.converged);
        let (tu, _) = t_minus_image(&u, &gf, cc).unwrap();
        assert!(tu.shifted(-rep.s_bar).sup_dist(&u) <= tol + 1e-9);
    }

    #[test]
    fn sub_action_property() {
        let gf = GeneratingFunction::frenkel_kontorova(1.0);
        let cc = c(0.0);
        let (u, rep) = weak_kam_backward(&gf, cc, 1024, 1e-7, 3000).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let x = i as f64 * 0.047 - 1.0;
                let y = j as f64 * 0.031;
                assert!(u.eval(y) - u.eval(x) <= gf.s_c(cc, x, y) - rep.s_bar + 1e-6);
            }
        }
    }

    #[test]
    fn conjugate_pair_order_and_contact() {
        let gf = GeneratingFunction::frenkel_kontorova(1.0);
        let (pair, rep) = conjugate_pair(&gf, c(0.0), 1024, 1e-7, 3000).unwrap();
        assert!(rep.converged);
        let mut min_gap = f64::INFINITY;
        for i in 0..1024 {
            let d = pair.u_minus.node(i) - pair.u_plus.node(i);
            assert!(d >= -1e-5, "u_plus exceeds u_minus at node {i} by {}", -d);
            min_gap = min_gap.min(d);
        }
        assert!(min_gap.abs() < 1e-4, "no contact: min gap {min_gap}");
    }

    #[test]
    fn fk_aubry_clusters_at_potential_minimum() {
        let n = 1024;
        let gf = GeneratingFunction::frenkel_kontorova(1.0);
        let (pair, _) = conjugate_pair(&gf, c(0.0), n, 1e-7, 3000).unwrap();
        let idx = projected_aubry(&pair, 1e-5);
        assert!(!idx.is_empty());
        for i in &idx {
            let x = *i as f64 / n as f64;
            let d = x.min(1.0 - x);
            assert!(d <= 6.0 / n as f64, "Aubry index at x={x}");
        }
    }

    #[test]
    fn integrable_aubry_is_everything() {
        let gf = GeneratingFunction::integrable();
        let (pair, _) = conjugate_pair(&gf, c(0.3), 256, 1e-9, 200).unwrap();
        assert_eq!(projected_aubry(&pair, 1e-6).len(), 256);
        assert_eq!(projected_aubry(&pair, 1e9).len(), 256);
    }

    #[test]
    fn conjugate_limits_agree() {
        // forward iteration of u_minus equals the double-limit construction
        let gf = GeneratingFunction::frenkel_kontorova(1.0);
        let cc = c(0.0);
        let tol = 1e-7;
        let (u, rep) = weak_kam_backward(&gf, cc, 1024, tol, 3000).unwrap();
        let (u_plus, prep) = conjugate_plus(&u, &gf, cc, rep.s_bar, tol, 3000).unwrap();
        assert!(prep.converged);
        let k = prep.iterations;
        let down = crate::lax_oleinik::t_minus_n(&u, &gf, cc, k).unwrap();
        let both = crate::lax_oleinik::t_plus_n(&down, &gf, cc, k).unwrap();
        assert!(u_plus.sup_dist(&both) <= 2.0 * tol + 1e-6);
    }

    #[test]
    fn integrable_sweep_closed_forms() {
        let gf = GeneratingFunction::integrable();
        let cs: Vec<f64> = (0..=10).map(|i| -0.5 + i as f64 * 0.1).collect();
        let rows = alpha_sweep(&gf, &cs, 256, 1e-8, 200, 400);
        for r in &rows {
            assert!((r.alpha - r.c * r.c / 2.0).abs() < 1e-5, "c={}", r.c);
            assert!((r.rho_sigma - r.c).abs() < 1e-2, "c={}: rho={}", r.c, r.rho_sigma);
        }
        for r in rows.iter().take(rows.len() - 1).skip(1) {
            assert!((r.alpha_prime_fd - r.c).abs() < 1e-3, "c={}", r.c);
        }
        let csv = sweep_to_csv(&rows);
        assert!(csv.starts_with("c,alpha,s_bar,alpha_prime_fd,rho_sigma,residual,iterations\n"));
        assert_eq!(csv.lines().count(), rows.len() + 1);
    }
}
