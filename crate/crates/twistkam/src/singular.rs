//! Singular dynamics of the optimal forward map `Σ₊` of a backward solution:
//! the map as a monotone degree-1 circle-map lift, rotation numbers,
//! singularity detection and forward propagation, the smoothing property of
//! the composed operators, the full pseudo-graph with its commutative
//! diagram, the induced dynamics `Λ` on the pseudo-graph, and the α-limit
//! approximation through the coincidence sets.

use crate::error::{Result, TwistError};
use crate::generating::{CohomologyClass, GeneratingFunction};
use crate::grid::GridFunction;
use crate::lax_oleinik::{o_n_set, t_minus_image, t_plus_image};

/// Superdifferential stencil used throughout this module.
const STENCIL: usize = 3;
/// Slack allowed on sampled monotonicity of the lift.
const MONOTONE_SLACK: f64 = 1e-6;

/// Default slope-jump threshold separating kinks from interpolation noise.
pub fn default_delta_sing(n: usize) -> f64 {
    20.0 / n as f64
}

/// A monotone lift `Φ` of a degree-1 circle map, sampled at grid nodes and
/// extended by `Φ(x + 1) = Φ(x) + 1` with linear interpolation in between.
#[derive(Debug, Clone)]
pub struct CircleMapLift {
    samples: Vec<f64>,
    lip_estimate: f64,
}

impl CircleMapLift {
    /// Wraps samples after checking monotonicity across the period and the
    /// degree-1 wrap `Φ(x_{n-1}) ≤ Φ(x_0) + 1` (small slack for ties).
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(TwistError::InvalidModel(
                "circle map lift needs at least 2 samples".into(),
            ));
        }
        let mut worst = 0.0f64;
        let mut lip = 0.0f64;
        let h = 1.0 / n as f64;
        for i in 0..n {
            let step = if i + 1 < n {
                samples[i + 1] - samples[i]
            } else {
                samples[0] + 1.0 - samples[i]
            };
            worst = worst.max(-step);
            lip = lip.max(step / h);
        }
        if worst > MONOTONE_SLACK {
            return Err(TwistError::TheoryViolation(format!(
                "circle map samples decrease by {worst:.3e}; input outside the valid class or under-resolved"
            )));
        }
        Ok(CircleMapLift {
            samples,
            lip_estimate: lip,
        })
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Largest adjacent difference quotient of the samples.
    pub fn lip_estimate(&self) -> f64 {
        self.lip_estimate
    }

    /// `Φ(x)`, evaluated through the degree-1 extension: the integer part of
    /// x shifts the output exactly, the fractional part interpolates.
    pub fn eval(&self, x: f64) -> f64 {
        let m = x.floor();
        let t = x - m;
        let n = self.samples.len();
        let pos = t * n as f64;
        let mut i = pos.floor() as usize;
        let mut frac = pos - i as f64;
        if i >= n {
            i = 0;
            frac = 0.0;
        }
        let a = self.samples[i];
        let b = if i + 1 < n {
            self.samples[i + 1]
        } else {
            self.samples[0] + 1.0
        };
        m + a + frac * (b - a)
    }

    /// `Φ^k(x)`.
    pub fn iterate(&self, x: f64, k: usize) -> f64 {
        let mut t = x;
        for _ in 0..k {
            t = self.eval(t);
        }
        t
    }
}

/// Builds the lift of `Σ₊[u](x) = argmax_y { u(y) - S_c(x, y) }`. If the raw
/// argmax samples fail monotonicity (input outside the image of the backward
/// operator), the input is preprocessed once by `u ← T⁻[u] - mean(T⁻[u]-u)`;
/// a second failure is a theory violation.
pub fn sigma_plus_lift(
    u: &GridFunction,
    gf: &GeneratingFunction,
    c: CohomologyClass,
) -> Result<CircleMapLift> {
    let (_, args) = t_plus_image(u, gf, c)?;
    match CircleMapLift::from_samples(args) {
        Ok(lift) => Ok(lift),
        Err(TwistError::TheoryViolation(_)) => {
            let (tu, _) = t_minus_image(u, gf, c)?;
            let diff_mean = tu
                .values()
                .iter()
                .zip(u.values())
                .map(|(a, b)| a - b)
                .sum::<f64>()
                / u.n() as f64;
            let v = tu.shifted(-diff_mean);
            let (_, args) = t_plus_image(&v, gf, c)?;
            CircleMapLift::from_samples(args)
        }
        Err(e) => Err(e),
    }
}

/// Birkhoff average `(Φ^N(x0) - x0)/N` with the a-priori bracket width `1/N`
/// as the error bound.
pub fn rotation_number(lift: &CircleMapLift, x0: f64, n_iter: usize) -> (f64, f64) {
    assert!(n_iter >= 1, "n_iter must be at least 1");
    let end = lift.iterate(x0, n_iter);
    ((end - x0) / n_iter as f64, 1.0 / n_iter as f64)
}

/// Result of running both singularity detectors on one solution.
#[derive(Debug, Clone)]
pub struct SingularityReport {
    /// Merged singular points per period, ascending in [0, 1).
    pub points: Vec<f64>,
    /// Detector A: peaks of the superdifferential gap above the threshold.
    pub gap_points: Vec<f64>,
    /// Detector B: values of the lift over preimage plateaus longer than 2/n.
    pub plateau_points: Vec<f64>,
    /// Symmetric Hausdorff distance (periodic) between the two detections;
    /// infinite when exactly one detector fires.
    pub max_disagreement: f64,
}

fn periodic_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Maximal circular runs of flagged indices, as (start, len) with len ≤ n.
fn circular_runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let n = flags.len();
    if flags.iter().all(|&f| f) {
        return vec![(0, n)];
    }
    let mut runs = Vec::new();
    for start in 0..n {
        if flags[start] && !flags[(start + n - 1) % n] {
            let mut len = 1;
            while flags[(start + len) % n] {
                len += 1;
            }
            runs.push((start, len));
        }
    }
    runs.sort_unstable();
    runs
}

fn hausdorff(a: &[f64], b: &[f64]) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => {
            let one_way = |from: &[f64], to: &[f64]| {
                from.iter()
                    .map(|&x| {
                        to.iter()
                            .map(|&y| periodic_dist(x, y))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .fold(0.0, f64::max)
            };
            one_way(a, b).max(one_way(b, a))
        }
    }
}

/// Runs both detectors: (A) superdifferential-gap peaks of `u` above
/// `delta_sing`, and (B) values of `lift` over constancy plateaus of
/// x-length > 2/n (the preimage-interval characterization). The returned
/// `points` merge both detections; `max_disagreement` quantifies their
/// mismatch.
pub fn detect_singularities(
    u: &GridFunction,
    lift: &CircleMapLift,
    delta_sing: f64,
) -> SingularityReport {
    assert!(delta_sing > 0.0, "delta_sing must be positive");
    let n = u.n();
    let h = u.h();

    let gaps: Vec<f64> = (0..n)
        .map(|i| u.superdifferential(i as f64 * h, STENCIL).gap())
        .collect();
    let flags: Vec<bool> = gaps.iter().map(|&g| g > delta_sing).collect();
    let gap_points: Vec<f64> = circular_runs(&flags)
        .into_iter()
        .map(|(start, len)| {
            let peak = (0..len)
                .max_by(|&a, &b| {
                    gaps[(start + a) % n]
                        .partial_cmp(&gaps[(start + b) % n])
                        .unwrap()
                })
                .unwrap();
            ((start + peak) % n) as f64 * h
        })
        .collect();

    let m = lift.n();
    let hl = 1.0 / m as f64;
    let flat: Vec<bool> = (0..m)
        .map(|i| {
            let step = if i + 1 < m {
                lift.samples()[i + 1] - lift.samples()[i]
            } else {
                lift.samples()[0] + 1.0 - lift.samples()[i]
            };
            step <= 0.1 * hl
        })
        .collect();
    let plateau_points: Vec<f64> = circular_runs(&flat)
        .into_iter()
        .filter(|&(_, len)| len as f64 * hl > 2.0 / m as f64)
        .map(|(start, len)| {
            let mid = (start + len / 2) % m;
            lift.samples()[mid].rem_euclid(1.0)
        })
        .collect();

    let max_disagreement = hausdorff(&gap_points, &plateau_points);

    let mut all: Vec<f64> = gap_points
        .iter()
        .chain(plateau_points.iter())
        .cloned()
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut points: Vec<f64> = Vec::new();
    for x in all {
        match points.last() {
            Some(&last) if periodic_dist(last, x) <= 2.0 / n as f64 => {}
            _ => points.push(x),
        }
    }
    // wrap merge: first and last may be the same point across 1
    if points.len() > 1 {
        let first = points[0];
        let last = *points.last().unwrap();
        if periodic_dist(first, last) <= 2.0 / n as f64 {
            points.pop();
        }
    }

    SingularityReport {
        points,
        gap_points,
        plateau_points,
        max_disagreement,
    }
}

/// A forward orbit of the lift started at a singular point.
#[derive(Debug, Clone)]
pub struct SingularOrbit {
    /// `x₀, Φ(x₀), ..., Φ^N(x₀)` on the line.
    pub points: Vec<f64>,
    /// Superdifferential gap of the solution at each orbit point.
    pub gaps: Vec<f64>,
    pub rho_estimate: f64,
    /// `1/N` bracket width.
    pub rho_error_bound: f64,
    /// `(p, q)` if some pair of orbit points differs by an integer `p` over
    /// `q` steps (within 1e-4), certifying a rational rotation number `p/q`.
    pub rational: Option<(i64, usize)>,
}

/// Gap of `u` near `x`, maximized over the nearest node and its neighbors
/// (one-node slack against orbit drift off the kink node).
fn gap_near(u: &GridFunction, x: f64) -> f64 {
    let h = u.h();
    [-1.0, 0.0, 1.0]
        .iter()
        .map(|&o| u.superdifferential(x + o * h, STENCIL).gap())
        .fold(0.0, f64::max)
}

/// Iterates the lift from a detected singular point, asserting that the
/// singularity persists along the forward orbit.
pub fn propagate_singularity(
    x0: f64,
    u: &GridFunction,
    lift: &CircleMapLift,
    n_steps: usize,
    delta_sing: f64,
) -> Result<SingularOrbit> {
    assert!(n_steps >= 1, "n_steps must be at least 1");
    let mut points = Vec::with_capacity(n_steps + 1);
    let mut gaps = Vec::with_capacity(n_steps + 1);
    let mut x = x0;
    for k in 0..=n_steps {
        let gap = gap_near(u, x);
        if gap <= delta_sing {
            return Err(TwistError::ResolutionInsufficient { step: k, gap });
        }
        points.push(x);
        gaps.push(gap);
        if k < n_steps {
            x = lift.eval(x);
        }
    }
    let rho_estimate = (points[n_steps] - points[0]) / n_steps as f64;

    let mut rational = None;
    'outer: for q in 1..=n_steps {
        for k in 0..=(n_steps - q) {
            let d = points[k + q] - points[k];
            let p = d.round();
            if (d - p).abs() < 1e-4 {
                rational = Some((p as i64, q));
                break 'outer;
            }
        }
    }

    Ok(SingularOrbit {
        points,
        gaps,
        rho_estimate,
        rho_error_bound: 1.0 / n_steps as f64,
        rational,
    })
}

/// Forward orbit of the lift from an arbitrary point, recording gaps without
/// asserting that they persist (for generic, non-singular starting points).
pub fn free_orbit(x0: f64, u: &GridFunction, lift: &CircleMapLift, n_steps: usize) -> SingularOrbit {
    assert!(n_steps >= 1, "n_steps must be at least 1");
    let mut points = Vec::with_capacity(n_steps + 1);
    let mut gaps = Vec::with_capacity(n_steps + 1);
    let mut x = x0;
    for k in 0..=n_steps {
        points.push(x);
        gaps.push(gap_near(u, x));
        if k < n_steps {
            x = lift.eval(x);
        }
    }
    SingularOrbit {
        rho_estimate: (points[n_steps] - points[0]) / n_steps as f64,
        points,
        gaps,
        rho_error_bound: 1.0 / n_steps as f64,
        rational: None,
    }
}

/// Second-difference bounds before and after smoothing by the composed
/// operators.
#[derive(Debug, Clone)]
pub struct RegularizationReport {
    /// Two-sided bound of the input at the finest scale.
    pub input_bound: f64,
    /// One-sided (semiconcavity-direction) bound of the once-smoothed
    /// backward image.
    pub backward_one_sided: f64,
    /// Two-sided bound of the forward-backward-backward composition; stable
    /// under refinement exactly when the composition is C^{1,1}.
    pub smoothed_bound: f64,
}

/// Computes `w = T⁺[T⁻[T⁻[u0]]]` and reports curvature bounds of the input,
/// the intermediate backward image, and `w`.
pub fn regularization_check(
    u0: &GridFunction,
    gf: &GeneratingFunction,
    c: CohomologyClass,
) -> Result<RegularizationReport> {
    let (t1, _) = t_minus_image(u0, gf, c)?;
    let (t2, _) = t_minus_image(&t1, gf, c)?;
    let (w, _) = t_plus_image(&t2, gf, c)?;
    Ok(RegularizationReport {
        input_bound: u0.second_difference_bound(),
        backward_one_sided: t1.one_sided_second_difference_bound(),
        smoothed_bound: w.second_difference_bound(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    GraphArc,
    VerticalSegment,
}

/// The full pseudo-graph of a backward solution: the graph of `c + du`
/// completed by vertical segments over the singular points, as an x-ordered
/// polyline.
#[derive(Debug, Clone)]
pub struct PseudoGraph {
    /// `(x, p)` vertices, x non-decreasing over one period.
    pub vertices: Vec<(f64, f64)>,
    /// Kind of the edge joining vertex `k` to vertex `k + 1`.
    pub kinds: Vec<SegmentKind>,
}

impl PseudoGraph {
    /// Distance from `p` to the admissible momentum interval over `x`,
    /// measured against the superdifferential of the generating solution;
    /// recomputed here from the stored vertical segments and arcs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,p,kind\n");
        let vertical: Vec<bool> = (0..self.vertices.len())
            .map(|i| {
                (i > 0 && self.kinds[i - 1] == SegmentKind::VerticalSegment)
                    || (i < self.kinds.len() && self.kinds[i] == SegmentKind::VerticalSegment)
            })
            .collect();
        for (i, (x, p)) in self.vertices.iter().enumerate() {
            let kind = if vertical[i] { "vertical" } else { "arc" };
            out.push_str(&format!("{x:.16e},{p:.16e},{kind}\n"));
        }
        out
    }
}

/// Builds the pseudo-graph from a converged backward solution. Regular nodes
/// contribute `(x, c + du(x))` with `du` the superdifferential midpoint;
/// each detected kink contributes the vertical segment
/// `{x*} × [c + D⁺u, c + D⁻u]`, traversed downward (left slope first).
pub fn pseudo_graph(
    u: &GridFunction,
    gf: &GeneratingFunction,
    c: CohomologyClass,
    delta_sing: f64,
) -> Result<PseudoGraph> {
    let _ = gf;
    assert!(delta_sing > 0.0, "delta_sing must be positive");
    let n = u.n();
    let h = u.h();
    let gaps: Vec<f64> = (0..n)
        .map(|i| u.superdifferential(i as f64 * h, STENCIL).gap())
        .collect();
    let flags: Vec<bool> = gaps.iter().map(|&g| g > delta_sing).collect();
    let runs = circular_runs(&flags);
    // one kink node per run: the gap peak; remaining run nodes are skipped
    // since their one-sided fits straddle the kink
    let mut kink = vec![false; n];
    let mut skip = vec![false; n];
    for (start, len) in runs {
        let peak = (0..len)
            .max_by(|&a, &b| {
                gaps[(start + a) % n]
                    .partial_cmp(&gaps[(start + b) % n])
                    .unwrap()
            })
            .unwrap();
        for k in 0..len {
            skip[(start + k) % n] = true;
        }
        kink[(start + peak) % n] = true;
    }

    let mut vertices = Vec::new();
    let mut kinds = Vec::new();
    for i in 0..n {
        let x = i as f64 * h;
        let sd = u.superdifferential(x, STENCIL);
        if kink[i] {
            if !vertices.is_empty() {
                kinds.push(SegmentKind::GraphArc);
            }
            vertices.push((x, c.0 + sd.hi));
            kinds.push(SegmentKind::VerticalSegment);
            vertices.push((x, c.0 + sd.lo));
        } else if !skip[i] {
            if !vertices.is_empty() {
                kinds.push(SegmentKind::GraphArc);
            }
            vertices.push((x, c.0 + sd.midpoint()));
        }
    }
    Ok(PseudoGraph { vertices, kinds })
}

/// Residuals of the commutative diagram linking the pseudo-graph maps and
/// the twist map.
#[derive(Debug, Clone)]
pub struct DiagramReport {
    /// Worst mismatch between `(Σ₊(x), ∂₂S(x, Σ₊(x)))` and the twist map
    /// applied to `(x, -∂₁S(x, Σ₊(x)))`; round-off scale by construction.
    pub max_map_residual: f64,
    /// Worst distance of `-∂₁S(x, Σ₊(x))` from `c + d(T⁺[u])(x)`.
    pub max_backward_membership: f64,
    /// Worst distance of `∂₂S(x, Σ₊(x))` from the momentum interval of the
    /// pseudo-graph of `u` over `Σ₊(x)`.
    pub max_forward_membership: f64,
}

/// Checks that the two factorizations of the forward dynamics agree at every
/// node and that both legs land on the expected graphs.
pub fn diagram_check(
    u: &GridFunction,
    gf: &GeneratingFunction,
    c: CohomologyClass,
    lift: &CircleMapLift,
) -> Result<DiagramReport> {
    let n = u.n();
    let h = u.h();
    let zero = CohomologyClass::new(0.0).unwrap();
    let (tplus, _) = t_plus_image(u, gf, c)?;

    let mut max_map_residual = 0.0f64;
    let mut max_backward_membership = 0.0f64;
    let mut max_forward_membership = 0.0f64;
    for i in 0..n {
        let x = i as f64 * h;
        let y = lift.samples()[i];
        let p_minus = -gf.d1s(x, y);
        let p_plus = gf.d2s(x, y);

        let (y_f, p_f) = gf.standard_map(zero, x, p_minus)?;
        max_map_residual = max_map_residual
            .max((y_f - y).abs())
            .max((p_f - p_plus).abs());

        let slope = tplus.superdifferential(x, STENCIL).midpoint();
        max_backward_membership = max_backward_membership.max((p_minus - (c.0 + slope)).abs());

        let sd = u.superdifferential(y, STENCIL);
        let (lo, hi) = (c.0 + sd.lo.min(sd.hi), c.0 + sd.lo.max(sd.hi));
        let dist = if p_plus < lo {
            lo - p_plus
        } else if p_plus > hi {
            p_plus - hi
        } else {
            0.0
        };
        max_forward_membership = max_forward_membership.max(dist);
    }
    Ok(DiagramReport {
        max_map_residual,
        max_backward_membership,
        max_forward_membership,
    })
}

/// One step of the pseudo-graph dynamics: `(x, p) ↦ (Σ₊(x), ∂₂S(x, Σ₊(x)))`.
/// The image ignores `p`, so whole vertical segments collapse to a point.
/// Inputs off the pseudo-graph (momentum outside the superdifferential
/// interval at `x`, with grid slack) are rejected.
pub fn lambda_map(
    point: (f64, f64),
    u: &GridFunction,
    gf: &GeneratingFunction,
    c: CohomologyClass,
    lift: &CircleMapLift,
) -> Result<(f64, f64)> {
    let (x, p) = point;
    let m = x.floor();
    let xr = x - m;
    let sd = u.superdifferential(xr, STENCIL);
    let (lo, hi) = (c.0 + sd.lo.min(sd.hi), c.0 + sd.lo.max(sd.hi));
    let tol = 20.0 / u.n() as f64 + 1e-6;
    let residual = if p < lo {
        lo - p
    } else if p > hi {
        p - hi
    } else {
        0.0
    };
    if residual > tol {
        return Err(TwistError::OffGraph { x, p, residual });
    }
    let y = lift.eval(xr);
    Ok((m + y, gf.d2s(xr, y)))
}

/// One point of the α-limit approximation with its invariance residual.
#[derive(Debug, Clone, Copy)]
pub struct AlphaLimitPoint {
    pub x: f64,
    pub p: f64,
    /// Distance from the image of this point under the shifted twist map to
    /// the rest of the set (cylinder metric).
    pub inv_residual: f64,
}

/// The graph of `du` over the n-step coincidence set: the computable
/// truncation of the α-limit of the solution's graph. Also reports, per
/// point, how far its image under the c-shifted twist map falls from the
/// set.
pub fn alpha_limit_set(
    u: &GridFunction,
    gf: &GeneratingFunction,
    c: CohomologyClass,
    n_steps: usize,
    delta: f64,
) -> Result<Vec<AlphaLimitPoint>> {
    let idx = o_n_set(u, gf, c, n_steps, delta)?;
    let h = u.h();
    let base: Vec<(f64, f64)> = idx
        .iter()
        .map(|&i| {
            let x = i as f64 * h;
            (x, u.superdifferential(x, STENCIL).midpoint())
        })
        .collect();
    let mut points = Vec::with_capacity(base.len());
    for &(x, p) in &base {
        let (y, q) = gf.standard_map(c, x, p)?;
        let inv_residual = base
            .iter()
            .map(|&(bx, bp)| {
                let dx = periodic_dist(y, bx);
                let dp = q - bp;
                (dx * dx + dp * dp).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        points.push(AlphaLimitPoint { x, p, inv_residual });
    }
    Ok(points)
}

/// CSV for the α-limit set: `x,p,inv_residual`.
pub fn alpha_limit_csv(points: &[AlphaLimitPoint]) -> String {
    let mut out = String::from("x,p,inv_residual\n");
    for pt in points {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            pt.x, pt.p, pt.inv_residual
        ));
    }
    out
}

/// CSV for the forward map samples: `x,sigma_x,gap` (gap from the operator's
/// multi-valuedness diagnostic).
pub fn sigma_csv(lift: &CircleMapLift, gap: &[f64]) -> String {
    let mut out = String::from("x,sigma_x,gap\n");
    let n = lift.n();
    for i in 0..n {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            i as f64 / n as f64,
            lift.samples()[i],
            gap[i]
        ));
    }
    out
}

/// CSV for a singular orbit: `k,x_k,gap_k`.
pub fn orbit_csv(orbit: &SingularOrbit) -> String {
    let mut out = String::from("k,x_k,gap_k\n");
    for (k, (x, g)) in orbit.points.iter().zip(&orbit.gaps).enumerate() {
        out.push_str(&format!("{k},{x:.16e},{g:.16e}\n"));
    }
    out
}
