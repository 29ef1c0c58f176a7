//! Independent optimality checks for a candidate approximant.
//!
//! * [`l1_error`]: `||f - g||_1` split at 0, the knots and the residual roots.
//! * [`characterization_check`]: signed moments `int sign(f - g) phi_j dnu`,
//!   compared against the zero-set bound when the residual vanishes on an
//!   interval.
//! * [`grid_oracle`]: discretized L1 minimization that never looks at
//!   canonical points.
//! * [`gibbs_metrics`]: overshoot of `g` next to the jump.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::approx::{collapse_tiny_zero_runs, residual_at, residual_transitions, Approximant, ZERO_RESIDUAL};
use crate::error::{Error, Result};
use crate::functions::{Measure, NormalizedProblem};
use crate::lp::weighted_l1_regression;
use crate::poly::PiecewisePoly;
use crate::quadrature::{integrate, QuadratureOptions};
use crate::spaces::{exact_moment, BasisSpace, SpaceKind};

/// Certificate threshold on the largest signed moment.
pub const CERTIFICATE_TOL: f64 = 1e-8;
/// `characterization_max` at or above this counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-6;
/// Oracle improvement that counts as a genuine failure.
pub const ORACLE_GAP_TOL: f64 = 5e-3;

const ZERO_PROBES: usize = 32;

fn scan_cells(g: &Approximant) -> usize {
    (200 * g.space().dimension()).max(2000)
}

/// Sorted breakpoints splitting `[-1, 1]` into pieces on which `f - g` is
/// smooth and of one sign class.
fn residual_segments(problem: &NormalizedProblem, g: &Approximant) -> Vec<f64> {
    let (_, transitions) = residual_transitions(problem, g, scan_cells(g));
    let mut cuts: Vec<f64> = vec![-1.0, 0.0, 1.0];
    cuts.extend(collapse_tiny_zero_runs(&transitions));
    cuts.extend(g.space().breakpoints().iter().copied());
    cuts.extend(g.as_piecewise().breaks().iter().copied());
    cuts.retain(|c| (-1.0..=1.0).contains(c));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

fn quad_opts(pieces: usize) -> QuadratureOptions {
    QuadratureOptions {
        abs_tol: 1e-13 / pieces.max(1) as f64,
        rel_tol: 1e-13,
        max_panels: 20_000,
    }
}

/// `||f - g||_1` under the problem's measure on `[-1, 1]`.
pub fn l1_error(problem: &NormalizedProblem, g: &Approximant) -> Result<f64> {
    let cuts = residual_segments(problem, g);
    let f = problem.function();
    let exact = match (problem.measure(), f.left_branch().as_polynomial(), f.right_branch().as_polynomial()) {
        (Measure::Lebesgue, Some(l), Some(r)) => Some((l, r)),
        _ => None,
    };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let right = a >= 0.0;
        let mid = 0.5 * (a + b);
        total += match &exact {
            Some((l, r)) => {
                let target = if right { r } else { l };
                let residual = target.add(&g.as_piecewise().piece_at(mid).scale(-1.0));
                residual.integrate(a, b).abs()
            }
            None => {
                let mut breaks = g.as_piecewise().breaks().to_vec();
                breaks.push(0.0);
                integrate(
                    |x| residual_at(problem, g, x, right).abs() * problem.measure().density(x),
                    a,
                    b,
                    &breaks,
                    quad_opts(cuts.len()),
                )?
            }
        };
    }
    Ok(total)
}

/// Which form of the characterization applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// The residual vanishes only on a null set: all signed moments must be 0.
    Equality,
    /// The residual vanishes on intervals: signed moments are bounded by the
    /// zero-set integral.
    Inequality,
}

/// Signed moment of one basis function.
#[derive(Debug, Clone, Serialize)]
pub struct BasisMoment {
    pub label: String,
    pub moment: f64,
    /// `int_Z |phi_j| dnu` over the zero set of the residual.
    pub zero_set_bound: f64,
}

/// Output of [`characterization_check`].
#[derive(Debug, Clone, Serialize)]
pub struct Characterization {
    pub moments: Vec<BasisMoment>,
    pub max: f64,
    pub zero_set_measure: f64,
    pub regime: Regime,
    pub certified: bool,
}

fn measure_of(measure: &Measure, a: f64, b: f64) -> Result<f64> {
    exact_moment(&PiecewisePoly::from(crate::poly::Polynomial::constant(1.0)), a, b, measure)
}

fn abs_moment(phi: &PiecewisePoly, a: f64, b: f64, measure: &Measure) -> Result<f64> {
    let mut breaks = phi.breaks().to_vec();
    breaks.push(0.0);
    integrate(|x| phi.eval(x).abs() * measure.density(x), a, b, &breaks, quad_opts(1))
}

/// Signed moments `int sign(f - g) phi_j dnu` for every basis function.
pub fn characterization_check(problem: &NormalizedProblem, g: &Approximant) -> Result<Characterization> {
    let cuts = residual_segments(problem, g);
    let measure = problem.measure();
    let functions = g.space().functions();
    let mut moments = vec![0.0; functions.len()];
    let mut bounds = vec![0.0; functions.len()];
    let mut zero_measure = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let right = a >= 0.0;
        let (mut peak, mut sign) = (0.0_f64, 0.0);
        for i in 0..ZERO_PROBES {
            let x = a + (b - a) * (i as f64 + 0.5) / ZERO_PROBES as f64;
            let r = residual_at(problem, g, x, right);
            if r.abs() > peak {
                peak = r.abs();
                sign = r.signum();
            }
        }
        if peak < ZERO_RESIDUAL {
            zero_measure += measure_of(measure, a, b)?;
            for (bound, phi) in bounds.iter_mut().zip(functions) {
                *bound += abs_moment(phi, a, b, measure)?;
            }
            continue;
        }
        for (m, phi) in moments.iter_mut().zip(functions) {
            *m += sign * exact_moment(phi, a, b, measure)?;
        }
    }
    let max = moments.iter().fold(0.0_f64, |acc, m| acc.max(m.abs()));
    let regime = if zero_measure > ZERO_RESIDUAL {
        Regime::Inequality
    } else {
        Regime::Equality
    };
    let certified = match regime {
        Regime::Equality => max < CERTIFICATE_TOL,
        Regime::Inequality => moments
            .iter()
            .zip(&bounds)
            .all(|(m, b)| m.abs() <= b + CERTIFICATE_TOL),
    };
    let moments = moments
        .into_iter()
        .zip(bounds)
        .zip(g.space().labels())
        .map(|((moment, zero_set_bound), label)| BasisMoment {
            label: label.clone(),
            moment,
            zero_set_bound,
        })
        .collect();
    Ok(Characterization {
        moments,
        max,
        zero_set_measure: zero_measure,
        regime,
        certified,
    })
}

/// Discretized L1 optimum found by [`grid_oracle`].
#[derive(Debug, Clone, Serialize)]
pub struct OracleFit {
    pub grid: usize,
    pub coefficients: Vec<f64>,
    /// Weighted discrete objective `sum_k w_k |f(x_k) - g(x_k)|`.
    pub objective: f64,
    pub iterations: usize,
}

/// Cell-centred nodes and weights, `cells / 2` cells left of 0 and the rest
/// right of it, so no node sits on the jump.
pub fn oracle_grid(measure: &Measure, cells: usize) -> Vec<(f64, f64, bool)> {
    let left = cells / 2;
    let right = cells - left;
    let side = |count: usize, start: f64, is_right: bool| {
        (0..count).map(move |i| {
            let h = 1.0 / count as f64;
            let x = start + (i as f64 + 0.5) * h;
            (x, h, is_right)
        })
    };
    side(left, -1.0, false)
        .chain(side(right, 0.0, true))
        .map(|(x, h, r)| (x, h * measure.density(x), r))
        .collect()
}

/// Minimizes the discretized L1 error over the whole space with a simplex
/// solver. Needs at least `50 n` grid cells.
pub fn grid_oracle(problem: &NormalizedProblem, space: &BasisSpace, grid: usize) -> Result<OracleFit> {
    let n = space.dimension();
    if grid < 50 * n {
        return Err(Error::InvalidArgument(format!("oracle grid {grid} is below 50 n = {}", 50 * n)));
    }
    let nodes = oracle_grid(problem.measure(), grid);
    let rows: Vec<(Vec<f64>, f64, f64)> = nodes
        .par_iter()
        .map(|(x, w, right)| {
            let row = space.functions().iter().map(|g| g.eval(*x)).collect();
            (row, problem.function().eval_side(*x, *right), *w)
        })
        .collect();
    let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i].0[j]);
    let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let w: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let fit = weighted_l1_regression(&a, &b, &w)?;
    Ok(OracleFit {
        grid,
        coefficients: fit.coefficients,
        objective: fit.objective,
        iterations: fit.iterations,
    })
}

/// Overshoot of `g` beyond the high side of the jump and undershoot below
/// the low side, each within `window` of 0.
#[derive(Debug, Clone, Serialize)]
pub struct GibbsMetrics {
    pub window: f64,
    pub overshoot: f64,
    pub overshoot_location: Option<f64>,
    pub undershoot: f64,
    pub undershoot_location: Option<f64>,
}

fn golden_max<F: Fn(f64) -> f64>(h: &F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut hc, mut hd) = (h(c), h(d));
    while b - a > tol {
        if hc >= hd {
            b = d;
            d = c;
            hd = hc;
            c = b - ratio * (b - a);
            hc = h(c);
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + ratio * (b - a);
            hd = h(d);
        }
    }
    0.5 * (a + b)
}

/// Largest value of `h` on `[lo, hi]`: grid scan, then golden-section refinement.
fn side_peak<F: Fn(f64) -> f64>(h: &F, lo: f64, hi: f64) -> (f64, f64) {
    const SAMPLES: usize = 2000;
    let step = (hi - lo) / SAMPLES as f64;
    let (mut best_x, mut best) = (lo, f64::NEG_INFINITY);
    for i in 0..=SAMPLES {
        let x = lo + i as f64 * step;
        let v = h(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let a = (best_x - step).max(lo);
    let b = (best_x + step).min(hi);
    let x = golden_max(h, a, b, 1e-8);
    if h(x) > best {
        (x, h(x))
    } else {
        (best_x, best)
    }
}

/// Gibbs overshoot and undershoot within `window` of the jump.
pub fn gibbs_metrics(problem: &NormalizedProblem, g: &Approximant, window: f64) -> Result<GibbsMetrics> {
    if !(window > 0.0) {
        return Err(Error::InvalidArgument("window must be positive".into()));
    }
    let w = window.min(1.0);
    let f = problem.function();
    let rising = f.right_limit() >= f.left_limit();
    // excess of g above f on the high side, deficit below f on the low side
    let right_sign = if rising { -1.0 } else { 1.0 };
    let right = |x: f64| right_sign * residual_at(problem, g, x, true);
    let left = |x: f64| -right_sign * residual_at(problem, g, x, false);
    let (xr, vr) = side_peak(&right, 0.0, w);
    let (xl, vl) = side_peak(&left, -w, 0.0);
    let (over, under) = if rising { ((xr, vr), (xl, vl)) } else { ((xl, vl), (xr, vr)) };
    let pick = |(x, v): (f64, f64)| if v > 0.0 { (v, Some(x)) } else { (0.0, None) };
    let (overshoot, overshoot_location) = pick(over);
    let (undershoot, undershoot_location) = pick(under);
    Ok(GibbsMetrics {
        window: w,
        overshoot,
        overshoot_location,
        undershoot,
        undershoot_location,
    })
}

/// Overall verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimality {
    /// Chebyshev space and the characterization certificate holds.
    Certified,
    /// Weak-Chebyshev space and the certificate holds numerically.
    VerifiedNumerically,
    /// The certificate fails but no better element was found.
    Unverified,
    /// The certificate fails and the oracle beats the candidate.
    NotOptimal,
}

/// Oracle comparison inside a report.
#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub fit: OracleFit,
    /// `l1_error` of the oracle coefficients.
    pub l1_error: f64,
    /// `l1_error(candidate) - l1_error(oracle)`.
    pub gap: f64,
}

/// Everything [`verify`] measures.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalityReport {
    pub l1_error: f64,
    /// `l1_error` in the coordinates of the original domain.
    pub l1_error_original: f64,
    pub characterization_max: f64,
    pub characterization: Characterization,
    pub zero_set_measure_estimate: f64,
    pub oracle: Option<OracleComparison>,
    pub oracle_gap: Option<f64>,
    pub gibbs: GibbsMetrics,
    pub gibbs_overshoot: f64,
    pub optimality: Optimality,
}

impl OptimalityReport {
    /// Certificate violated and a strictly better element exists.
    pub fn is_failure(&self) -> bool {
        self.characterization_max >= VIOLATION_TOL && self.oracle_gap.is_some_and(|g| g > ORACLE_GAP_TOL)
    }
}

/// Settings for [`verify`].
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub oracle_grid: Option<usize>,
    pub gibbs_window: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            oracle_grid: None,
            gibbs_window: 0.5,
        }
    }
}

/// Default oracle grid for a space of dimension `n`.
pub fn default_oracle_grid(n: usize) -> usize {
    (50 * n).max(4000)
}

/// Runs every check on `g`.
pub fn verify(problem: &NormalizedProblem, g: &Approximant, opts: &VerifyOptions) -> Result<OptimalityReport> {
    let l1 = l1_error(problem, g)?;
    let characterization = characterization_check(problem, g)?;
    let oracle = match opts.oracle_grid {
        Some(grid) => {
            let fit = grid_oracle(problem, g.space(), grid)?;
            let candidate = Approximant::from_coefficients(problem, Arc::clone(g.space()), fit.coefficients.clone(), None)?;
            let oracle_l1 = l1_error(problem, &candidate)?;
            Some(OracleComparison {
                fit,
                l1_error: oracle_l1,
                gap: l1 - oracle_l1,
            })
        }
        None => None,
    };
    let gibbs = gibbs_metrics(problem, g, opts.gibbs_window)?;
    let oracle_gap = oracle.as_ref().map(|o| o.gap);
    let optimality = if characterization.certified {
        match g.space().kind() {
            SpaceKind::Chebyshev => Optimality::Certified,
            SpaceKind::WeakChebyshev => Optimality::VerifiedNumerically,
        }
    } else if oracle_gap.is_some_and(|gap| gap > ORACLE_GAP_TOL) {
        Optimality::NotOptimal
    } else {
        Optimality::Unverified
    };
    Ok(OptimalityReport {
        l1_error: l1,
        l1_error_original: l1 * problem.original_l1_factor(),
        characterization_max: characterization.max,
        zero_set_measure_estimate: characterization.zero_set_measure,
        characterization,
        oracle,
        oracle_gap,
        gibbs_overshoot: gibbs.overshoot,
        gibbs,
        optimality,
    })
}
