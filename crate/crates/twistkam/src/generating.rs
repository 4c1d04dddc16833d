//! Generating functions of exact twist maps of the annulus.
//!
//! A generating function `S(x, y)` is diagonal-periodic, coercive and
//! ferromagnetic (`-∂₁₂S ≥ ε > 0`). It encodes the lift `F` of the twist map
//! through `p = -∂₁S(x, y)`, `p' = ∂₂S(x, y)`. A cohomology class `c` shifts
//! it to `S_c(x, y) = S(x, y) + c(x - y)`.

use crate::error::{Result, TwistError};

pub const TAU: f64 = std::f64::consts::TAU;

/// Built-in generating-function families.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `S(x, y) = (x - y)^2 / 2`: the integrable shear.
    Integrable,
    /// `S(x, y) = (x - y)^2 / 2 + (K / (2π)^2) (1 - cos 2πx)`.
    FrenkelKontorova { k: f64 },
    /// Quadratic coupling plus a finite cosine series:
    /// an on-site potential `Σ aⱼ (1 - cos 2πjx) / (2πj)^2` and an optional
    /// displacement series `Σ bⱼ cos 2πj(x - y)` that perturbs the twist.
    Custom {
        potential_cos: Vec<f64>,
        cross_cos: Vec<f64>,
    },
}

/// Cohomology class of the circle, as a plain real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohomologyClass(pub f64);

impl CohomologyClass {
    pub fn new(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(TwistError::InvalidModel(format!(
                "cohomology class must be finite, got {c}"
            )));
        }
        Ok(CohomologyClass(c))
    }
}

/// An evaluable generating function together with its certified twist margin
/// and the coercivity window used by the minimization kernels.
#[derive(Debug, Clone)]
pub struct GeneratingFunction {
    family: Family,
    twist_eps: f64,
    window: Option<f64>,
}

impl GeneratingFunction {
    pub fn new(family: Family, twist_eps: f64, window: Option<f64>) -> Result<Self> {
        if !(twist_eps.is_finite() && twist_eps > 0.0) {
            return Err(TwistError::InvalidModel(format!(
                "twist lower bound must be a positive real, got {twist_eps}"
            )));
        }
        if let Some(w) = window {
            if !(w.is_finite() && w > 0.0) {
                return Err(TwistError::InvalidModel(format!(
                    "window must be a positive real, got {w}"
                )));
            }
        }
        let finite = match &family {
            Family::Integrable => true,
            Family::FrenkelKontorova { k } => k.is_finite(),
            Family::Custom {
                potential_cos,
                cross_cos,
            } => {
                potential_cos.iter().all(|a| a.is_finite())
                    && cross_cos.iter().all(|b| b.is_finite())
            }
        };
        if !finite {
            return Err(TwistError::InvalidModel(
                "non-finite family parameter".into(),
            ));
        }
        Ok(GeneratingFunction {
            family,
            twist_eps,
            window,
        })
    }

    pub fn integrable() -> Self {
        GeneratingFunction::new(Family::Integrable, 0.5, None).unwrap()
    }

    pub fn frenkel_kontorova(k: f64) -> Self {
        GeneratingFunction::new(Family::FrenkelKontorova { k }, 0.5, None).unwrap()
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn twist_eps(&self) -> f64 {
        self.twist_eps
    }

    /// Coercivity window: `|x - y| <= W` is guaranteed to contain all
    /// minimizers of `u + S_c`. Defaults to `2 + |c| / ε`.
    pub fn window(&self, c: CohomologyClass) -> f64 {
        self.window.unwrap_or(2.0 + c.0.abs() / self.twist_eps)
    }

    /// On-site potential value (zero for the integrable shear).
    fn potential(&self, x: f64) -> f64 {
        match &self.family {
            Family::Integrable => 0.0,
            Family::FrenkelKontorova { k } => k / (TAU * TAU) * (1.0 - (TAU * x).cos()),
            Family::Custom { potential_cos, .. } => potential_cos
                .iter()
                .enumerate()
                .map(|(j, a)| {
                    let w = TAU * (j + 1) as f64;
                    a / (w * w) * (1.0 - (w * x).cos())
                })
                .sum(),
        }
    }

    fn potential_prime(&self, x: f64) -> f64 {
        match &self.family {
            Family::Integrable => 0.0,
            Family::FrenkelKontorova { k } => k / TAU * (TAU * x).sin(),
            Family::Custom { potential_cos, .. } => potential_cos
                .iter()
                .enumerate()
                .map(|(j, a)| {
                    let w = TAU * (j + 1) as f64;
                    a / w * (w * x).sin()
                })
                .sum(),
        }
    }

    fn cross(&self, d: f64) -> f64 {
        match &self.family {
            Family::Custom { cross_cos, .. } => cross_cos
                .iter()
                .enumerate()
                .map(|(j, b)| b * (TAU * (j + 1) as f64 * d).cos())
                .sum(),
            _ => 0.0,
        }
    }

    fn cross_prime(&self, d: f64) -> f64 {
        match &self.family {
            Family::Custom { cross_cos, .. } => cross_cos
                .iter()
                .enumerate()
                .map(|(j, b)| {
                    let w = TAU * (j + 1) as f64;
                    -b * w * (w * d).sin()
                })
                .sum(),
            _ => 0.0,
        }
    }

    fn cross_second(&self, d: f64) -> f64 {
        match &self.family {
            Family::Custom { cross_cos, .. } => cross_cos
                .iter()
                .enumerate()
                .map(|(j, b)| {
                    let w = TAU * (j + 1) as f64;
                    -b * w * w * (w * d).cos()
                })
                .sum(),
            _ => 0.0,
        }
    }

    /// `S(x, y)` without the cohomology shift.
    pub fn s(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        0.5 * d * d + self.potential(x) + self.cross(d)
    }

    /// `∂₁S(x, y)`.
    pub fn d1s(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        d + self.potential_prime(x) + self.cross_prime(d)
    }

    /// `∂₂S(x, y)`.
    pub fn d2s(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        -d - self.cross_prime(d)
    }

    /// `∂₁₂S(x, y)` (analytic; used for Newton polishing and margins).
    pub fn d12s(&self, x: f64, y: f64) -> f64 {
        -1.0 - self.cross_second(x - y)
    }

    /// `S_c(x, y) = S(x, y) + c (x - y)`.
    pub fn s_c(&self, c: CohomologyClass, x: f64, y: f64) -> f64 {
        self.s(x, y) + c.0 * (x - y)
    }

    /// `∂₁S_c = ∂₁S + c`.
    pub fn d1s_c(&self, c: CohomologyClass, x: f64, y: f64) -> f64 {
        self.d1s(x, y) + c.0
    }

    /// `∂₂S_c = ∂₂S - c`.
    pub fn d2s_c(&self, c: CohomologyClass, x: f64, y: f64) -> f64 {
        self.d2s(x, y) - c.0
    }

    /// The lift `F_c(x, p) = (y, p')` with `p = -∂₁S_c(x, y)`,
    /// `p' = ∂₂S_c(x, y)`. The map `y ↦ -∂₁S_c(x, y)` is strictly increasing
    /// with slope at least `ε`, so the root is found by bracket expansion and
    /// bisection, then polished by Newton.
    pub fn standard_map(&self, c: CohomologyClass, x: f64, p: f64) -> Result<(f64, f64)> {
        // Shear predictor: for the integrable part, y = x + p + c exactly.
        let y0 = x + p + c.0;
        let g = |y: f64| -self.d1s_c(c, x, y) - p;
        let y = self.solve_increasing(g, |y| -self.d12s(x, y), y0)?;
        Ok((y, self.d2s_c(c, x, y)))
    }

    /// Inverse lift: given `(y, p')` returns `(x, p)`. The map
    /// `x ↦ ∂₂S_c(x, y)` is strictly decreasing by the twist condition.
    pub fn standard_map_inv(&self, c: CohomologyClass, y: f64, p2: f64) -> Result<(f64, f64)> {
        let x0 = y - p2 - c.0;
        let g = |x: f64| -(self.d2s_c(c, x, y) - p2);
        let x = self.solve_increasing(g, |x| -self.d12s(x, y), x0)?;
        Ok((x, -self.d1s_c(c, x, y)))
    }

    /// Finds the root of a strictly increasing `g` near `t0`: doubling bracket
    /// expansion, bisection to 1e-12, then a few Newton steps with slope `gp`.
    fn solve_increasing(
        &self,
        g: impl Fn(f64) -> f64,
        gp: impl Fn(f64) -> f64,
        t0: f64,
    ) -> Result<f64> {
        let mut step = 0.5;
        let (mut lo, mut hi) = (t0, t0);
        let mut expansions = 0;
        while g(lo) > 0.0 {
            lo -= step;
            step *= 2.0;
            expansions += 1;
            if expansions > 64 {
                return Err(TwistError::TwistViolation(
                    "no sign change while expanding the root bracket downward".into(),
                ));
            }
        }
        step = 0.5;
        while g(hi) < 0.0 {
            hi += step;
            step *= 2.0;
            expansions += 1;
            if expansions > 64 {
                return Err(TwistError::TwistViolation(
                    "no sign change while expanding the root bracket upward".into(),
                ));
            }
        }
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..3 {
            let slope = gp(t);
            if slope.abs() < self.twist_eps * 0.5 {
                break;
            }
            t -= g(t) / slope;
        }
        Ok(t)
    }
}

/// Per-hypothesis sampled verification result with worst-case margins.
#[derive(Debug, Clone)]
pub struct HypothesisReport {
    /// Worst `|S(x+1, y+1) - S(x, y)|` over samples.
    pub periodicity_defect: f64,
    /// Smallest excess of the window-boundary values over the in-window
    /// minimum; positive means the coercivity window is certified.
    pub coercivity_margin: f64,
    /// Smallest sampled `-∂₁₂S` (finite differences of `∂₁S` in `y`).
    pub twist_margin: f64,
    /// Smallest `S(x₁,y₁)+S(x₂,y₂) - S(x₁,y₂) - S(x₂,y₁)` over sampled
    /// crossing quadruples.
    pub non_crossing_margin: f64,
    pub h1_pass: bool,
    pub h2_pass: bool,
    pub h3_pass: bool,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.h1_pass && self.h2_pass && self.h3_pass
    }
}

/// Samples the three hypotheses on a uniform lattice. Failures are reported,
/// never thrown.
pub fn verify_hypotheses(
    gf: &GeneratingFunction,
    c: CohomologyClass,
    n_samples: usize,
) -> HypothesisReport {
    let m = (n_samples as f64).sqrt().ceil().max(4.0) as usize;
    let w = gf.window(c);
    let eps = gf.twist_eps();

    let mut periodicity_defect: f64 = 0.0;
    let mut twist_margin = f64::INFINITY;
    let mut coercivity_margin = f64::INFINITY;

    let h = 1e-5;
    for i in 0..m {
        let x = i as f64 / m as f64;
        let mut interior_min = f64::INFINITY;
        for j in 0..m {
            let s = -w + 2.0 * w * (j as f64 + 0.5) / m as f64;
            let y = x + s;
            let v = gf.s(x, y);
            interior_min = interior_min.min(v);
            periodicity_defect = periodicity_defect
                .max((gf.s(x + 1.0, y + 1.0) - v).abs() / (1.0 + v.abs()));
            let d12_fd = (gf.d1s(x, y + h) - gf.d1s(x, y - h)) / (2.0 * h);
            twist_margin = twist_margin.min(-d12_fd);
        }
        let boundary = gf.s(x, x + w).min(gf.s(x, x - w));
        coercivity_margin = coercivity_margin.min(boundary - interior_min);
    }

    // Non-crossing on crossing quadruples: x1 < x2 paired with y1 > y2.
    let mut non_crossing_margin = f64::INFINITY;
    for i in 0..m {
        for j in 0..m {
            let x1 = i as f64 / m as f64;
            let x2 = x1 + 0.13 + j as f64 / (2.0 * m as f64);
            let y2 = j as f64 / m as f64 - 0.31;
            let y1 = y2 + 0.17 + i as f64 / (3.0 * m as f64);
            let margin = gf.s(x1, y1) + gf.s(x2, y2) - gf.s(x1, y2) - gf.s(x2, y1);
            non_crossing_margin = non_crossing_margin.min(margin);
        }
    }

    HypothesisReport {
        periodicity_defect,
        coercivity_margin,
        twist_margin,
        non_crossing_margin,
        h1_pass: periodicity_defect <= 1e-12 && coercivity_margin > 0.0,
        h2_pass: twist_margin >= eps - 1e-6,
        h3_pass: non_crossing_margin > 0.0,
    }
}
