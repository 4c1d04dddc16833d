//! 1-periodic real functions sampled on a uniform grid.
//!
//! `GridFunction` stores values at `x_i = i/n` and extends to the line by
//! periodic linear interpolation. One-sided derivative estimators and the
//! sampled semiconcavity constant live here; singularity thresholds belong
//! to the singular-dynamics layer.

use crate::error::{Result, TwistError};

/// A 1-periodic function on a uniform grid with linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

/// The superdifferential interval `[D⁺u(x), D⁻u(x)]` of a (numerically)
/// semiconcave function; `lo` is the right derivative, `hi` the left one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperdiffInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SuperdiffInterval {
    /// Slope jump `D⁻ - D⁺`; positive at concave kinks.
    pub fn gap(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(TwistError::InvalidModel(
                "grid function needs at least 2 samples".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TwistError::InvalidModel(
                "grid function values must be finite".into(),
            ));
        }
        Ok(GridFunction { values })
    }

    pub fn constant(n: usize, value: f64) -> Self {
        GridFunction::new(vec![value; n]).unwrap()
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        GridFunction::new((0..n).map(|i| f(i as f64 / n as f64)).collect())
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn h(&self) -> f64 {
        1.0 / self.values.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, i: usize) -> f64 {
        self.values[i % self.values.len()]
    }

    /// Periodic linear interpolation; exact at grid nodes.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let t = x.rem_euclid(1.0);
        let pos = t * n as f64;
        let mut i = pos.floor() as usize;
        let mut frac = pos - i as f64;
        if i >= n {
            i = 0;
            frac = 0.0;
        }
        let a = self.values[i];
        let b = self.values[(i + 1) % n];
        a + frac * (b - a)
    }

    /// Index of the grid node nearest to `x` (periodic).
    pub fn nearest_node(&self, x: f64) -> usize {
        let n = self.values.len();
        ((x.rem_euclid(1.0) * n as f64).round() as usize) % n
    }

    pub fn oscillation(&self) -> f64 {
        let max = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn shifted(&self, a: f64) -> GridFunction {
        GridFunction {
            values: self.values.iter().map(|v| v + a).collect(),
        }
    }

    /// Sup-norm distance to another grid function of the same size.
    pub fn sup_dist(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// One-sided slope estimates at the node nearest `x`, from least-squares
    /// line fits over `stencil` grid cells on each side. The fits damp
    /// interpolation noise that single differences would amplify.
    pub fn superdifferential(&self, x: f64, stencil: usize) -> SuperdiffInterval {
        let stencil = stencil.max(1);
        let i = self.nearest_node(x) as isize;
        let d_plus = self.ls_slope(i, i + stencil as isize);
        let d_minus = self.ls_slope(i - stencil as isize, i);
        SuperdiffInterval {
            lo: d_plus,
            hi: d_minus,
        }
    }

    /// Least-squares slope of the samples at nodes `a..=b` (periodic lift:
    /// node `i` sits at `i*h` with values unwrapped by periodicity).
    fn ls_slope(&self, a: isize, b: isize) -> f64 {
        let n = self.values.len() as isize;
        let h = self.h();
        let m = (b - a + 1) as f64;
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for k in a..=b {
            let x = k as f64 * h;
            let y = self.values[k.rem_euclid(n) as usize];
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        (m * sxy - sx * sy) / (m * sxx - sx * sx)
    }

    /// Largest centered second-difference quotient
    /// `(u(x+h) + u(x-h) - 2u(x)) / h²` over grid nodes and grid-multiple
    /// offsets `h <= 1/4`, clamped at zero.
    pub fn semiconcavity_constant(&self) -> f64 {
        let n = self.values.len();
        let h = self.h();
        let mut worst: f64 = 0.0;
        for m in 1..=(n / 4).max(1) {
            let hh = m as f64 * h;
            let inv = 1.0 / (hh * hh);
            for i in 0..n {
                let plus = self.values[(i + m) % n];
                let minus = self.values[(i + n - m) % n];
                worst = worst.max((plus + minus - 2.0 * self.values[i]) * inv);
            }
        }
        worst
    }

    /// Largest |second difference| / h² at the finest grid scale; the
    /// two-sided counterpart used by the C^{1,1} refinement check.
    pub fn second_difference_bound(&self) -> f64 {
        let n = self.values.len();
        let inv = 1.0 / (self.h() * self.h());
        (0..n)
            .map(|i| {
                (self.values[(i + 1) % n] + self.values[(i + n - 1) % n]
                    - 2.0 * self.values[i])
                    .abs()
                    * inv
            })
            .fold(0.0, f64::max)
    }

    /// One-sided (semiconcavity-direction) second-difference bound at the
    /// finest scale: only upward curvature violations count.
    pub fn one_sided_second_difference_bound(&self) -> f64 {
        let n = self.values.len();
        let inv = 1.0 / (self.h() * self.h());
        (0..n)
            .map(|i| {
                ((self.values[(i + 1) % n] + self.values[(i + n - 1) % n]
                    - 2.0 * self.values[i])
                    * inv)
                    .max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// Serializes as CSV with header `x,u`, ascending x from 0.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,u\n");
        let n = self.values.len();
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{:.16e},{:.16e}\n", i as f64 / n as f64, v));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<GridFunction> {
        let mut values = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if k == 0 {
                if line.trim() != "x,u" {
                    return Err(TwistError::Config(format!(
                        "expected grid-function header `x,u`, got `{line}`"
                    )));
                }
                continue;
            }
            let (_, u) = line
                .split_once(',')
                .ok_or_else(|| TwistError::Config(format!("bad CSV row `{line}`")))?;
            values.push(u.trim().parse::<f64>().map_err(|e| {
                TwistError::Config(format!("bad value in row `{line}`: {e}"))
            })?);
        }
        GridFunction::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generating::TAU;

    #[test]
    fn constant_eval() {
        let u = GridFunction::constant(128, 3.0);
        assert_eq!(u.eval(0.37), 3.0);
        assert_eq!(u.oscillation(), 0.0);
    }

    #[test]
    fn sine_interpolation_error() {
        let u = GridFunction::from_fn(1024, |x| (TAU * x).sin()).unwrap();
        assert!((u.eval(0.25) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn periodic_eval() {
        let u = GridFunction::from_fn(256, |x| (TAU * x).cos() + 0.3 * (2.0 * TAU * x).sin())
            .unwrap();
        let mut state: u64 = 12345;
        for _ in 0..1000 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let x = (state >> 11) as f64 / (1u64 << 53) as f64;
            assert!((u.eval(x + 1.0) - u.eval(x)).abs() <= 1e-12);
            assert!((u.eval(x - 2.0) - u.eval(x)).abs() <= 1e-12);
        }
        // exact at dyadic nodes
        assert_eq!(u.eval(3.0 / 256.0 + 1.0), u.eval(3.0 / 256.0));
    }

    #[test]
    fn eval_is_nonexpansive_in_values() {
        let n = 64;
        let u = GridFunction::from_fn(n, |x| (TAU * x).sin()).unwrap();
        let v = GridFunction::from_fn(n, |x| (TAU * x).sin() + 0.01 * (3.0 * TAU * x).cos())
            .unwrap();
        let bound = u.sup_dist(&v);
        for i in 0..500 {
            let x = i as f64 / 500.0;
            assert!((u.eval(x) - v.eval(x)).abs() <= bound + 1e-15);
        }
    }

    #[test]
    fn tent_superdifferential() {
        let n = 1024;
        let u = GridFunction::from_fn(n, |x| x.min(1.0 - x)).unwrap();
        let sd = u.superdifferential(0.5, 3);
        assert!((sd.lo + 1.0).abs() <= 2.0 / n as f64 + 1e-12);
        assert!((sd.hi - 1.0).abs() <= 2.0 / n as f64 + 1e-12);
        assert!(sd.gap() > 1.9);
    }

    #[test]
    fn smooth_superdifferential() {
        let n = 1024;
        let u = GridFunction::from_fn(n, |x| (TAU * x).cos()).unwrap();
        let sd = u.superdifferential(0.25, 3);
        assert!((sd.lo + TAU).abs() <= 10.0 / n as f64);
        assert!((sd.hi + TAU).abs() <= 10.0 / n as f64);
    }

    #[test]
    fn constant_superdifferential() {
        let u = GridFunction::constant(64, 5.0);
        let sd = u.superdifferential(0.3, 3);
        assert_eq!(sd.lo, 0.0);
        assert_eq!(sd.hi, 0.0);
    }

    #[test]
    fn oscillation_of_cosine() {
        let u = GridFunction::from_fn(1024, |x| (TAU * x).cos()).unwrap();
        assert!((u.oscillation() - 2.0).abs() < 1e-5);
        let v = u.shifted(4.2);
        assert!((v.oscillation() - u.oscillation()).abs() < 1e-14);
    }

    #[test]
    fn semiconcavity_of_cosine() {
        let u = GridFunction::from_fn(1024, |x| (TAU * x).cos()).unwrap();
        let c = u.semiconcavity_constant();
        assert!((c - TAU * TAU).abs() < 0.05 * TAU * TAU, "c = {c}");
        assert_eq!(GridFunction::constant(64, 1.0).semiconcavity_constant(), 0.0);
        // translation invariance
        assert!((u.shifted(-2.0).semiconcavity_constant() - c).abs() < 1e-9);
    }

    #[test]
    fn convex_kink_semiconcavity_grows_with_n() {
        // tent has its convex kink at the minimum; the constant scales like n
        let c1 = GridFunction::from_fn(256, |x| x.min(1.0 - x))
            .unwrap()
            .semiconcavity_constant();
        let c2 = GridFunction::from_fn(512, |x| x.min(1.0 - x))
            .unwrap()
            .semiconcavity_constant();
        let c3 = GridFunction::from_fn(1024, |x| x.min(1.0 - x))
            .unwrap()
            .semiconcavity_constant();
        assert!(c2 > 1.5 * c1 && c3 > 1.5 * c2, "{c1} {c2} {c3}");
    }

    #[test]
    fn csv_round_trip() {
        let u = GridFunction::from_fn(64, |x| (TAU * x).sin()).unwrap();
        let back = GridFunction::from_csv(&u.to_csv()).unwrap();
        assert_eq!(u, back);
    }
}
