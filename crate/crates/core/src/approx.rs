//! Best L1 approximants by interpolation at canonical points.
//!
//! For even `n = 2m` the approximant interpolates the target at the `2m`
//! nonzero canonical points. The jump point itself is never a node.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::LocalSpan;
use crate::functions::{normalize, HeavisideTypeFunction, NormalizedProblem};
use crate::hobbyrice::{oscillating_moment, solve_canonical_points_with, CanonicalPointSet, SolverOptions};
use crate::linalg::solve_square;
use crate::poly::PiecewisePoly;
use crate::spaces::{BasisSpace, SpaceKind, SpaceSpec};

/// Absolute residual level treated as zero when classifying signs.
pub const ZERO_RESIDUAL: f64 = 1e-12;

/// Distance within which a residual sign change counts as a canonical point.
pub const PATTERN_TOL: f64 = 1e-7;

/// Element `g* = sum c_j phi_j` of a space, in normalized coordinates.
#[derive(Debug, Clone)]
pub struct Approximant {
    space: Arc<BasisSpace>,
    coefficients: Vec<f64>,
    combined: PiecewisePoly,
    canonical_points: Option<CanonicalPointSet>,
    interpolation_residual: f64,
    rcond: Option<f64>,
}

impl Approximant {
    /// Wraps given coefficients; the interpolation residual is measured
    /// against `problem` at the nonzero canonical points when present.
    pub fn from_coefficients(
        problem: &NormalizedProblem,
        space: Arc<BasisSpace>,
        coefficients: Vec<f64>,
        canonical_points: Option<CanonicalPointSet>,
    ) -> Result<Self> {
        if coefficients.len() != space.dimension() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                space.dimension(),
                coefficients.len()
            )));
        }
        let combined = space.combination(&coefficients);
        Ok(Self::with_representation(problem, space, coefficients, combined, canonical_points))
    }

    /// `combined` is the element itself; `coefficients` are its weights in
    /// the space's basis, possibly only up to the conditioning of that basis.
    fn with_representation(
        problem: &NormalizedProblem,
        space: Arc<BasisSpace>,
        coefficients: Vec<f64>,
        combined: PiecewisePoly,
        canonical_points: Option<CanonicalPointSet>,
    ) -> Self {
        let interpolation_residual = canonical_points
            .as_ref()
            .map(|p| {
                p.interpolation_nodes()
                    .iter()
                    .map(|x| (combined.eval(*x) - problem.function().eval_side(*x, *x > 0.0)).abs())
                    .fold(0.0, f64::max)
            })
            .unwrap_or(0.0);
        Self {
            space,
            coefficients,
            combined,
            canonical_points,
            interpolation_residual,
            rcond: None,
        }
    }

    pub fn space(&self) -> &Arc<BasisSpace> {
        &self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn canonical_points(&self) -> Option<&CanonicalPointSet> {
        self.canonical_points.as_ref()
    }

    /// `max |g*(alpha_i) - f(alpha_i)|` over the interpolation nodes.
    pub fn interpolation_residual(&self) -> f64 {
        self.interpolation_residual
    }

    /// Reciprocal condition number of the collocation matrix, when built by interpolation.
    pub fn rcond(&self) -> Option<f64> {
        self.rcond
    }

    pub fn as_piecewise(&self) -> &PiecewisePoly {
        &self.combined
    }

    /// `g*(x)` on `[-1, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        self.combined.eval(x)
    }

    /// `g*` at a point of the original domain.
    pub fn eval_original(&self, problem: &NormalizedProblem, x: f64) -> f64 {
        self.eval(problem.transform().to_normalized(x))
    }

    /// Same space and points with the coefficients replaced.
    pub fn with_coefficients(&self, problem: &NormalizedProblem, coefficients: Vec<f64>) -> Result<Self> {
        Self::from_coefficients(problem, self.space.clone(), coefficients, self.canonical_points.clone())
    }
}

/// Solves the collocation system at the `2m` nonzero canonical points.
pub fn interpolate_at_canonical(
    problem: &NormalizedProblem,
    space: Arc<BasisSpace>,
    points: &CanonicalPointSet,
) -> Result<Approximant> {
    let n = space.dimension();
    if n % 2 == 1 {
        return Err(Error::OddDimension { n });
    }
    if points.m() * 2 != n {
        return Err(Error::InvalidPoints(format!(
            "{} nonzero points cannot determine {n} coefficients",
            2 * points.m()
        )));
    }
    let nodes = points.interpolation_nodes();
    let f = problem.function();
    // collocate in a local basis of the same span; the reference basis can
    // be too ill-conditioned to hold the interpolant to rounding accuracy
    let refs: Vec<&PiecewisePoly> = space.functions().iter().collect();
    let span = LocalSpan::new(&refs, -1.0, 1.0);
    let local = span.basis();
    let matrix = DMatrix::from_fn(n, n, |i, j| local[j].eval(nodes[i]));
    let rhs: Vec<f64> = nodes.iter().map(|x| f.eval_side(*x, *x > 0.0)).collect();
    let report = solve_square(&matrix, &rhs)?;
    let v = span.combine(&report.solution);
    let coefficients = span
        .coordinates(&v)
        .ok_or_else(|| Error::InvalidArgument("basis functions are linearly dependent".into()))?;
    let mut approximant =
        Approximant::with_representation(problem, space, coefficients, span.function(&v), Some(points.clone()));
    approximant.rcond = Some(report.rcond);
    Ok(approximant)
}

/// Residual `f - g*` seen from one side of the jump.
pub(crate) fn residual_at(problem: &NormalizedProblem, g: &Approximant, x: f64, right: bool) -> f64 {
    problem.function().eval_side(x, right) - g.eval(x)
}

fn class_of(r: f64) -> i8 {
    if r > ZERO_RESIDUAL {
        1
    } else if r < -ZERO_RESIDUAL {
        -1
    } else {
        0
    }
}

/// Point where the sign class of the residual changes between `a` and `b`.
fn bisect_transition<F: Fn(f64) -> f64>(r: &F, mut a: f64, mut b: f64) -> f64 {
    let class_a = class_of(r(a));
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b || b - a <= 1e-15 {
            break;
        }
        if class_of(r(mid)) == class_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Root of `r` between points of opposite sign.
fn bisect_root<F: Fn(f64) -> f64>(r: &F, mut a: f64, mut b: f64) -> f64 {
    let positive_a = r(a) > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let v = r(mid);
        if v == 0.0 {
            return mid;
        }
        if (v > 0.0) == positive_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Zero runs shorter than this are treated as isolated roots.
pub(crate) const TINY_ZERO_RUN: f64 = 1e-9;

/// Transition positions with every tiny zero run collapsed to its midpoint.
pub(crate) fn collapse_tiny_zero_runs(transitions: &[Transition]) -> Vec<f64> {
    let mut out = Vec::with_capacity(transitions.len());
    let mut i = 0;
    while i < transitions.len() {
        let t = transitions[i];
        if let Some(next) = transitions.get(i + 1) {
            if t.to == 0 && next.from == 0 && next.position - t.position < TINY_ZERO_RUN {
                out.push(0.5 * (t.position + next.position));
                i += 2;
                continue;
            }
        }
        out.push(t.position);
        i += 1;
    }
    out
}

/// Change of the sign class of `f - g*` at `position`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Transition {
    pub position: f64,
    pub from: i8,
    pub to: i8,
}

/// Samples `f - g*` on each side of the jump (the side limits at 0
/// included) and bisects every change of the three-way sign class.
pub(crate) fn residual_transitions(
    problem: &NormalizedProblem,
    g: &Approximant,
    per_side: usize,
) -> (i8, Vec<Transition>) {
    let per_side = per_side.max(2);
    let mut samples: Vec<(f64, bool, i8)> = Vec::with_capacity(2 * per_side + 2);
    for i in 0..=per_side {
        let x = -1.0 + i as f64 / per_side as f64;
        samples.push((x, false, class_of(residual_at(problem, g, x, false))));
    }
    for i in 0..=per_side {
        let x = i as f64 / per_side as f64;
        samples.push((x, true, class_of(residual_at(problem, g, x, true))));
    }
    let mut transitions = Vec::new();
    for w in samples.windows(2) {
        let ((xa, side_a, ca), (xb, side_b, cb)) = (w[0], w[1]);
        if ca == cb {
            continue;
        }
        let position = if side_a == side_b {
            let r = |x: f64| residual_at(problem, g, x, side_a);
            if ca * cb < 0 {
                bisect_root(&r, xa, xb)
            } else {
                bisect_transition(&r, xa, xb)
            }
        } else {
            0.0
        };
        transitions.push(Transition {
            position,
            from: ca,
            to: cb,
        });
    }
    (samples[0].2, transitions)
}

/// Strict sign changes, a zero run between opposite signs reported at its middle.
pub(crate) fn sign_changes_from(initial: i8, transitions: &[Transition]) -> Vec<f64> {
    let mut current = initial;
    let mut exit = -1.0;
    let mut changes = Vec::new();
    for t in transitions {
        if t.from != 0 {
            exit = t.position;
        }
        if t.to != 0 {
            if current != 0 && t.to != current {
                changes.push(0.5 * (exit + t.position));
            }
            current = t.to;
        }
    }
    changes
}

/// Sign changes of `f - g*` on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignPattern {
    pub changes: Vec<f64>,
    pub includes_zero: bool,
}

/// Locates the sign changes of `f - g*` from a uniform grid of `grid_size`
/// cells, refined by bisection. Grids below `10 n` cells are enlarged.
pub fn residual_sign_pattern(problem: &NormalizedProblem, g: &Approximant, grid_size: usize) -> SignPattern {
    let grid_size = grid_size.max(10 * g.space().dimension());
    let (initial, transitions) = residual_transitions(problem, g, grid_size.div_ceil(2));
    let changes = sign_changes_from(initial, &transitions);
    let includes_zero = changes.iter().any(|c| c.abs() < PATTERN_TOL);
    SignPattern { changes, includes_zero }
}

/// Warnings attached to a constructed approximant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// The target has no jump.
    DegenerateJump,
    /// The residual changes sign away from the canonical points.
    SignPatternViolation,
    /// The residual does not change sign at the jump.
    MissingSignChangeAtJump,
    /// Weak-Chebyshev space: optimality needs numerical verification.
    VerifiedNumericallyOnly,
}

/// Checks run along the pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub dimension: usize,
    pub even_dimension: usize,
    pub kind: SpaceKind,
    /// `dim Z = ceil(n / 2)`.
    pub balanced_parity: bool,
    pub even_dimension_count: bool,
    pub solver_residual: f64,
    pub solver_iterations: usize,
    pub solver_attempts: usize,
    /// Largest oscillating moment over all basis functions.
    pub moment_residual: f64,
    pub interpolation_residual: f64,
    pub rcond: f64,
    pub sign_changes: Vec<f64>,
    pub sign_change_at_zero: bool,
    /// Sign changes that are not canonical points.
    pub extra_sign_changes: Vec<f64>,
    pub flags: Vec<Flag>,
}

impl Diagnostics {
    pub fn sign_pattern_clean(&self) -> bool {
        self.extra_sign_changes.is_empty() && self.sign_change_at_zero
    }
}

/// Output of [`best_l1_approximation`].
#[derive(Debug, Clone)]
pub struct Approximation {
    pub problem: NormalizedProblem,
    pub approximant: Approximant,
    pub diagnostics: Diagnostics,
}

/// Pipeline settings.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub solver: SolverOptions,
    pub sign_grid: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            sign_grid: 4000,
        }
    }
}

/// Normalizes `f`, builds the space, solves for the canonical points,
/// interpolates and checks the residual sign pattern.
pub fn best_l1_approximation(f: &HeavisideTypeFunction, space_spec: &SpaceSpec) -> Result<Approximation> {
    best_l1_approximation_with(f, space_spec, &PipelineOptions::default())
}

pub fn best_l1_approximation_with(
    f: &HeavisideTypeFunction,
    space_spec: &SpaceSpec,
    opts: &PipelineOptions,
) -> Result<Approximation> {
    let problem = normalize(f)?;
    let space = Arc::new(space_spec.build()?);
    approximate_normalized(problem, space, opts)
}

/// Pipeline on an already normalized problem.
pub fn approximate_normalized(
    problem: NormalizedProblem,
    space: Arc<BasisSpace>,
    opts: &PipelineOptions,
) -> Result<Approximation> {
    let n = space.dimension();
    if n % 2 == 1 {
        return Err(Error::OddDimension { n });
    }
    let solution = solve_canonical_points_with(&space, problem.measure(), None, &opts.solver)?;
    let moment_residual = space
        .functions()
        .iter()
        .map(|g| oscillating_moment(&solution.points, g, problem.measure()).map(f64::abs))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let approximant = interpolate_at_canonical(&problem, space.clone(), &solution.points)?;
    let pattern = residual_sign_pattern(&problem, &approximant, opts.sign_grid);
    let full = solution.points.full_points();
    let extra: Vec<f64> = pattern
        .changes
        .iter()
        .copied()
        .filter(|c| full.iter().all(|p| (p - c).abs() > PATTERN_TOL))
        .collect();

    let mut flags = Vec::new();
    if problem.function().is_degenerate() {
        flags.push(Flag::DegenerateJump);
    }
    if !extra.is_empty() {
        log::warn!("residual has {} sign change(s) away from the canonical points", extra.len());
        flags.push(Flag::SignPatternViolation);
    }
    if !pattern.includes_zero {
        flags.push(Flag::MissingSignChangeAtJump);
    }
    if space.kind() == SpaceKind::WeakChebyshev {
        flags.push(Flag::VerifiedNumericallyOnly);
    }
    let diagnostics = Diagnostics {
        dimension: n,
        even_dimension: space.even_dimension(),
        kind: space.kind(),
        balanced_parity: space.has_balanced_parity(),
        even_dimension_count: n.is_multiple_of(2),
        solver_residual: solution.residual_inf_norm,
        solver_iterations: solution.iterations,
        solver_attempts: solution.attempts,
        moment_residual,
        interpolation_residual: approximant.interpolation_residual(),
        rcond: approximant.rcond().unwrap_or(f64::NAN),
        sign_changes: pattern.changes,
        sign_change_at_zero: pattern.includes_zero,
        extra_sign_changes: extra,
        flags,
    };
    Ok(Approximation {
        problem,
        approximant,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{heaviside, Branch};
    use crate::hobbyrice::polynomial_canonical_points;
    use crate::spaces::polynomial_space;

    fn h_problem() -> NormalizedProblem {
        normalize(&heaviside(0.0, 1.0)).unwrap()
    }

    #[test]
    fn cubic_heaviside_coefficients() {
        let p = h_problem();
        let pts = polynomial_canonical_points(4).unwrap();
        let g = interpolate_at_canonical(&p, Arc::new(polynomial_space(3)), &pts).unwrap();
        let b = 2.0 / 3f64.sqrt() - 2.0;
        let a = 1.0 - b / 4.0;
        let expected = [0.5, a, 0.0, b];
        for (c, e) in g.coefficients().iter().zip(expected) {
            assert!((c - e).abs() < 1e-13, "{c} vs {e}");
        }
        assert!(g.interpolation_residual() < 1e-14);
    }

    #[test]
    fn odd_dimension_refused() {
        let p = h_problem();
        let pts = polynomial_canonical_points(3).unwrap();
        assert!(matches!(
            interpolate_at_canonical(&p, Arc::new(polynomial_space(2)), &pts),
            Err(Error::OddDimension { n: 3 })
        ));
    }

    #[test]
    fn planted_residual_roots() {
        let p = h_problem();
        let space = Arc::new(polynomial_space(3));
        let g = Approximant::from_coefficients(&p, space.clone(), vec![0.0, 0.3, 0.0, -0.1], None).unwrap();
        let coeffs = g.coefficients().to_vec();
        let f = HeavisideTypeFunction::new(
            (-1.0, 1.0),
            0.0,
            Branch::custom(move |x| coeffs[1] * x + coeffs[3] * x.powi(3) + x * x - 0.25),
            Branch::custom(|x| 0.3 * x - 0.1 * x.powi(3) + x * x - 0.25),
        )
        .unwrap();
        let q = normalize(&f).unwrap();
        let pattern = residual_sign_pattern(&q, &g, 400);
        assert_eq!(pattern.changes.len(), 2);
        assert!((pattern.changes[0] + 0.5).abs() < 1e-10);
        assert!((pattern.changes[1] - 0.5).abs() < 1e-10);
        assert!(!pattern.includes_zero);
    }

    #[test]
    fn transitions_skip_zero_runs() {
        let t = |position, from, to| Transition { position, from, to };
        let changes = sign_changes_from(1, &[t(0.2, 1, 0), t(0.4, 0, -1), t(0.6, -1, 0), t(0.8, 0, -1)]);
        assert_eq!(changes.len(), 1);
        assert!((changes[0] - 0.3).abs() < 1e-15);
    }
}
