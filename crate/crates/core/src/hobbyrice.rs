//! Symmetric canonical sign-change points.
//!
//! For a space whose even subspace has dimension `ceil(n / 2)` there is a
//! sign-change function `s`, odd about 0, with a sign change at 0 and at
//! `+-alpha_1, ..., +-alpha_m` (`m = floor(n / 2)`), that is orthogonal to
//! the whole space. Even basis functions are orthogonal to any odd `s`
//! automatically, so only the `m` reduced functions `g(x) - g(-x)` of an odd
//! complement enter the square nonlinear system solved here.
//!
//! Sign convention: on `[alpha_{i-1}, alpha_i)` the function equals
//! `(-1)^i`, with `alpha_0 = 0` and `alpha_{m+1} = 1`, so `s = -1` just right
//! of the jump.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::Measure;
use crate::exact;
use crate::linalg::solve_square;
use crate::lp::weighted_l1_regression;
use crate::poly::PiecewisePoly;
use crate::spaces::{exact_moment, parity_split, BasisSpace, SpaceKind};

/// Alternating `+-1` step function on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignChangeFunction {
    breakpoints: Vec<f64>,
    leading_sign: f64,
}

impl SignChangeFunction {
    pub fn new(breakpoints: Vec<f64>, leading_sign: f64) -> Result<Self> {
        if leading_sign != 1.0 && leading_sign != -1.0 {
            return Err(Error::InvalidPoints("leading sign must be +1 or -1".into()));
        }
        if !breakpoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidPoints("breakpoints must be strictly increasing".into()));
        }
        if breakpoints.iter().any(|b| !(*b > -1.0 && *b < 1.0)) {
            return Err(Error::InvalidPoints("breakpoints must lie in (-1, 1)".into()));
        }
        Ok(Self {
            breakpoints,
            leading_sign,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Sign on `[-1, first breakpoint)`.
    pub fn leading_sign(&self) -> f64 {
        self.leading_sign
    }

    /// Number of sign changes.
    pub fn changes(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|b| *b <= x);
        if k % 2 == 0 {
            self.leading_sign
        } else {
            -self.leading_sign
        }
    }

    /// `int s g dnu` over `[-1, 1]`.
    pub fn moment(&self, g: &PiecewisePoly, measure: &Measure) -> Result<f64> {
        let mut total = 0.0;
        let mut sign = self.leading_sign;
        let mut left = -1.0;
        for right in self.breakpoints.iter().copied().chain(std::iter::once(1.0)) {
            total += sign * exact_moment(g, left, right, measure)?;
            sign = -sign;
            left = right;
        }
        Ok(total)
    }
}

/// Symmetric abscissae `-alpha_m < ... < -alpha_1 < 0 < alpha_1 < ... < alpha_m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicalPointSet {
    positive: Vec<f64>,
}

impl CanonicalPointSet {
    /// Takes the positive half `0 < alpha_1 < ... < alpha_m < 1`.
    pub fn new(positive: Vec<f64>) -> Result<Self> {
        if positive.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::InvalidPoints("positive points must lie in (0, 1)".into()));
        }
        if !positive.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidPoints("positive points must be strictly increasing".into()));
        }
        Ok(Self { positive })
    }

    pub fn m(&self) -> usize {
        self.positive.len()
    }

    pub fn positive_points(&self) -> &[f64] {
        &self.positive
    }

    /// Full ordered set including the mirrored points and 0.
    pub fn full_points(&self) -> Vec<f64> {
        self.positive
            .iter()
            .rev()
            .map(|a| -a)
            .chain(std::iter::once(0.0))
            .chain(self.positive.iter().copied())
            .collect()
    }

    /// Nonzero points `-alpha_m, ..., -alpha_1, alpha_1, ..., alpha_m`.
    pub fn interpolation_nodes(&self) -> Vec<f64> {
        self.full_points().into_iter().filter(|x| *x != 0.0).collect()
    }

    /// The odd sign-change function with `(-1)^i` on `[alpha_{i-1}, alpha_i)`.
    pub fn sign_function(&self) -> SignChangeFunction {
        let leading = if self.m().is_multiple_of(2) { 1.0 } else { -1.0 };
        SignChangeFunction {
            breakpoints: self.full_points(),
            leading_sign: leading,
        }
    }
}

/// `sum_i (-1)^i int_{alpha_{i-1}}^{alpha_i} g dnu` over the full symmetric partition.
pub fn oscillating_moment(points: &CanonicalPointSet, g: &PiecewisePoly, measure: &Measure) -> Result<f64> {
    points.sign_function().moment(g, measure)
}

/// Second-kind Chebyshev polynomial `U_degree(x)` by the three-term recurrence.
pub fn chebyshev_u(degree: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    if degree == 0 {
        return prev;
    }
    for _ in 1..degree {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Closed-form points for polynomials of dimension `n`:
/// `alpha_i = cos((m + 1 - i) pi / (2m + 2))`, `m = floor(n / 2)`, the
/// positive zeros of `U_{2m+1}`.
pub fn polynomial_canonical_points(n: usize) -> Result<CanonicalPointSet> {
    if n < 1 {
        return Err(Error::InvalidArgument("space dimension must be at least 1".into()));
    }
    let m = n / 2;
    let positive = (1..=m)
        .map(|i| ((m + 1 - i) as f64 * std::f64::consts::PI / (2 * m + 2) as f64).cos())
        .collect();
    CanonicalPointSet::new(positive)
}

/// Newton solver settings.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Convergence threshold on `max_j |F_j|`.
    pub tolerance: f64,
    /// Residual accepted when the line search stagnates (rounding floor).
    pub stagnation_tolerance: f64,
    pub max_iterations: usize,
    /// Random ordered restarts after the initial guess fails.
    pub restarts: usize,
    pub seed: u64,
    /// Try starts derived from a discrete L1 fit before the random restarts.
    pub discrete_seed: bool,
    /// Minimum gap kept between consecutive points and the ends of `(0, 1)`.
    pub ordering_epsilon: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            stagnation_tolerance: 1e-11,
            max_iterations: 100,
            restarts: 20,
            seed: 0,
            discrete_seed: true,
            ordering_epsilon: 1e-9,
        }
    }
}

/// Converged canonical points with solver diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct CanonicalSolution {
    pub points: CanonicalPointSet,
    pub residual_inf_norm: f64,
    pub iterations: usize,
    /// 1 when the initial guess converged, more when restarts were needed.
    pub attempts: usize,
}

struct ReducedSystem<'a> {
    reduced: Vec<PiecewisePoly>,
    measure: &'a Measure,
}

impl ReducedSystem<'_> {
    fn residual(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        self.reduced
            .iter()
            .map(|g| {
                let mut total = 0.0;
                let mut left = 0.0;
                for (i, right) in alpha.iter().copied().chain(std::iter::once(1.0)).enumerate() {
                    let sign = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
                    total += sign * exact_moment(g, left, right, self.measure)?;
                    left = right;
                }
                Ok(total)
            })
            .collect()
    }

    /// `dF_j / d alpha_i = 2 (-1)^i g_j(alpha_i) w(alpha_i)`.
    fn jacobian(&self, alpha: &[f64]) -> DMatrix<f64> {
        let m = alpha.len();
        DMatrix::from_fn(m, m, |j, i| {
            let sign = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
            2.0 * sign * self.reduced[j].eval(alpha[i]) * self.measure.density(alpha[i])
        })
    }
}

fn project(alpha: &mut [f64], eps: f64) -> Result<()> {
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::OrderingViolation("non-finite iterate".into()));
    }
    let m = alpha.len();
    if (m as f64 + 1.0) * eps >= 1.0 {
        return Err(Error::OrderingViolation("too many points for the ordering margin".into()));
    }
    let mut floor = eps;
    for a in alpha.iter_mut() {
        *a = a.max(floor);
        floor = *a + eps;
    }
    let mut ceil = 1.0 - eps;
    for a in alpha.iter_mut().rev() {
        *a = a.min(ceil);
        ceil = *a - eps;
    }
    if alpha.first().is_some_and(|a| *a < eps) {
        return Err(Error::OrderingViolation("projection onto the ordered simplex failed".into()));
    }
    Ok(())
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn merit(v: &[f64], scales: &[f64]) -> f64 {
    v.iter().zip(scales).map(|(f, s)| (f / s).powi(2)).sum()
}

struct NewtonOutcome {
    alpha: Vec<f64>,
    residual: f64,
    iterations: usize,
    converged: bool,
}

fn newton(system: &ReducedSystem<'_>, start: &[f64], opts: &SolverOptions) -> Result<NewtonOutcome> {
    let mut alpha = start.to_vec();
    project(&mut alpha, opts.ordering_epsilon)?;
    // equations are weighed by the size of their reduced function
    let scales: Vec<f64> = system
        .reduced
        .iter()
        .map(|g| exact_abs_scale(g).max(f64::MIN_POSITIVE))
        .collect();
    let mut f = system.residual(&alpha)?;
    let mut iterations = 0;
    let mut polish_left = 2;
    while iterations < opts.max_iterations {
        let r = inf_norm(&f);
        let converged = r < opts.tolerance;
        if converged && polish_left == 0 {
            break;
        }
        iterations += 1;
        let mut jac = system.jacobian(&alpha);
        let mut rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        for (j, s) in scales.iter().enumerate() {
            jac.row_mut(j).scale_mut(1.0 / s);
            rhs[j] /= s;
        }
        let current = merit(&f, &scales);
        if converged {
            // polishing: plain Newton steps kept only while they do not hurt
            polish_left -= 1;
            let Ok(sol) = solve_square(&jac, &rhs) else { break };
            let mut trial: Vec<f64> = alpha.iter().zip(&sol.solution).map(|(a, d)| a + d).collect();
            project(&mut trial, opts.ordering_epsilon)?;
            let f_trial = system.residual(&trial)?;
            if merit(&f_trial, &scales) <= current {
                alpha = trial;
                f = f_trial;
                continue;
            }
            break;
        }
        let mut accepted = false;
        if let Ok(sol) = solve_square(&jac, &rhs) {
            let mut lambda = 1.0;
            while lambda > 1e-6 {
                let mut trial: Vec<f64> =
                    alpha.iter().zip(&sol.solution).map(|(a, d)| a + lambda * d).collect();
                project(&mut trial, opts.ordering_epsilon)?;
                let f_trial = system.residual(&trial)?;
                if merit(&f_trial, &scales) < (1.0 - 1e-4 * lambda) * current {
                    alpha = trial;
                    f = f_trial;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
        }
        if !accepted {
            // Levenberg-Marquardt fallback for a degenerate or misleading Jacobian
            let jt = jac.transpose();
            let normal = &jt * &jac;
            let grad = &jt * nalgebra::DVector::from_column_slice(&rhs);
            let diag_max = normal.diagonal().amax().max(f64::MIN_POSITIVE);
            let mut mu = 1e-6 * diag_max;
            for _ in 0..16 {
                let mut damped = normal.clone();
                for k in 0..damped.nrows() {
                    damped[(k, k)] += mu;
                }
                if let Some(step) = damped.lu().solve(&grad) {
                    let mut trial: Vec<f64> = alpha.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
                    project(&mut trial, opts.ordering_epsilon)?;
                    let f_trial = system.residual(&trial)?;
                    if merit(&f_trial, &scales) < current {
                        alpha = trial;
                        f = f_trial;
                        accepted = true;
                        break;
                    }
                }
                mu *= 10.0;
            }
        }
        if !accepted {
            break;
        }
        log::trace!("newton iteration {iterations}: |F| = {:e}", inf_norm(&f));
    }
    let r = inf_norm(&f);
    Ok(NewtonOutcome {
        converged: r < opts.tolerance || r < opts.stagnation_tolerance,
        alpha,
        residual: r,
        iterations,
    })
}

/// Scale of a reduced function on `[0, 1]` (sup over a coarse grid).
fn exact_abs_scale(g: &PiecewisePoly) -> f64 {
    (0..=64).map(|i| g.eval(i as f64 / 64.0).abs()).fold(0.0, f64::max)
}

/// Point counts per cell tried besides the allocated one.
const COUNT_VARIANTS: usize = 24;

/// Starting guesses from a discrete L1 fit of the unit step. Its residual
/// changes sign close to the canonical points wherever it does not vanish;
/// the count in each interval between breakpoints is completed from the
/// bounds at its edges, and nearby feasible counts are offered as further
/// guesses.
fn discrete_seeds(space: &BasisSpace, measure: &Measure, m: usize) -> Vec<Vec<f64>> {
    let half = (40 * space.dimension()).max(200);
    let h = 1.0 / half as f64;
    let nodes: Vec<f64> = (0..2 * half).map(|i| -1.0 + (i as f64 + 0.5) * h).collect();
    let a = DMatrix::from_fn(nodes.len(), space.dimension(), |i, j| space.functions()[j].eval(nodes[i]));
    let b: Vec<f64> = nodes.iter().map(|x| if *x > 0.0 { 1.0 } else { 0.0 }).collect();
    let w: Vec<f64> = nodes.iter().map(|x| h * measure.density(*x)).collect();
    let mut changes = Vec::new();
    if let Ok(fit) = weighted_l1_regression(&a, &b, &w) {
        let mut last: Option<(f64, f64)> = None;
        for x in nodes.iter().copied().filter(|x| *x > 0.0) {
            let r = 1.0 - space.eval_combination(&fit.coefficients, x);
            if r.abs() < 1e-9 {
                continue;
            }
            if let Some((px, pr)) = last {
                if pr.signum() != r.signum() {
                    changes.push(0.5 * (px + x));
                }
            }
            last = Some((x, r));
        }
    }
    changes.truncate(m);
    let complement: Vec<&PiecewisePoly> = space.complement_indices().iter().map(|i| &space.functions()[*i]).collect();
    let cells = Cells::new(&complement, &space_cuts(space), changes, m);
    let counts = cells.allocate();
    let mut seeds = vec![if cells.changes.len() == m && cells.feasible(&cells.found) {
        cells.changes.clone()
    } else {
        cells.place(&counts, true)
    }];
    // fitted points can cluster where the fit residual is pure noise
    let spread = cells.place(&counts, false);
    if spread != seeds[0] {
        seeds.push(spread);
    }
    // feasible counts nearest to the allocation, one moved point at a time
    let mut seen = vec![counts.clone()];
    let mut queue = std::collections::VecDeque::from([counts]);
    while let Some(c) = queue.pop_front() {
        for from in 0..c.len() {
            for to in (0..c.len()).filter(|t| *t != from && c[from] > 0) {
                let mut next = c.clone();
                next[from] -= 1;
                next[to] += 1;
                if seen.contains(&next) || !cells.feasible(&next) {
                    continue;
                }
                if seen.len() > COUNT_VARIANTS {
                    return seeds;
                }
                seeds.push(cells.place(&next, true));
                seen.push(next.clone());
                queue.push_back(next);
            }
        }
    }
    seeds
}

/// Positive breakpoints of the space inside `(0, 1)`.
fn space_cuts(space: &BasisSpace) -> Vec<f64> {
    space.breakpoints().iter().copied().filter(|b| *b > 1e-12 && *b < 1.0 - 1e-12).collect()
}

/// Number of independent reduced functions vanishing on `[0, cut]`, from the
/// complement `W` they come from. Any sign
/// function orthogonal to them changes sign at least that often in `(cut, 1)`.
fn tail_dimension(complement: &[&PiecewisePoly], cut: f64) -> usize {
    complement.len() - exact::rank(&exact::columns(complement, 0.0, cut, true))
}

/// Same for functions vanishing on `[cut, 1]`, which force sign changes in
/// `(0, cut)`.
fn head_dimension(complement: &[&PiecewisePoly], cut: f64) -> usize {
    complement.len() - exact::rank(&exact::columns(complement, cut, 1.0, true))
}

/// Intervals of `[0, 1]` between breakpoints, with lower bounds on the
/// number of points on either side of each interior edge.
struct Cells {
    edges: Vec<f64>,
    /// Edges in arccos, where canonical points spread evenly.
    angle: Vec<f64>,
    tails: Vec<usize>,
    heads: Vec<usize>,
    changes: Vec<f64>,
    found: Vec<usize>,
    m: usize,
}

impl Cells {
    fn new(complement: &[&PiecewisePoly], cuts: &[f64], changes: Vec<f64>, m: usize) -> Self {
        let mut edges = vec![0.0];
        edges.extend(cuts.iter().copied());
        edges.push(1.0);
        let angle = edges.iter().map(|e| e.acos()).collect();
        let interior = &edges[1..edges.len() - 1];
        let tails = interior.iter().map(|e| tail_dimension(complement, *e).min(m)).collect();
        let heads = interior.iter().map(|e| head_dimension(complement, *e).min(m)).collect();
        let mut cells = Self {
            edges,
            angle,
            tails,
            heads,
            changes,
            found: Vec::new(),
            m,
        };
        cells.found = vec![0; cells.len()];
        for x in &cells.changes {
            let j = cells.cell_of(*x);
            cells.found[j] += 1;
        }
        cells
    }

    fn len(&self) -> usize {
        self.edges.len() - 1
    }

    fn cell_of(&self, x: f64) -> usize {
        self.edges[1..self.len()].partition_point(|e| *e <= x)
    }

    fn gap(&self, counts: &[usize], j: usize) -> f64 {
        (self.angle[j] - self.angle[j + 1]) / (counts[j] + 1) as f64
    }

    fn widest(&self, counts: &[usize], cells: std::ops::Range<usize>) -> usize {
        let from = cells.start;
        cells
            .max_by(|p, q| self.gap(counts, *p).total_cmp(&self.gap(counts, *q)))
            .unwrap_or(from)
    }

    fn bounded(&self, counts: &[usize]) -> bool {
        (1..self.len()).all(|j| {
            counts[j..].iter().sum::<usize>() >= self.tails[j - 1]
                && counts[..j].iter().sum::<usize>() >= self.heads[j - 1]
        })
    }

    fn feasible(&self, counts: &[usize]) -> bool {
        counts.iter().sum::<usize>() == self.m && self.bounded(counts)
    }

    /// Counts from the fit, raised to the bounds, then trimmed from the left
    /// or padded where the gaps are widest.
    fn allocate(&self) -> Vec<usize> {
        let cells = self.len();
        let mut counts = self.found.clone();
        for j in (1..cells).rev() {
            while counts[j..].iter().sum::<usize>() < self.tails[j - 1] {
                let c = self.widest(&counts, j..cells);
                counts[c] += 1;
            }
        }
        for j in 1..cells {
            while counts[..j].iter().sum::<usize>() < self.heads[j - 1] {
                let c = self.widest(&counts, 0..j);
                counts[c] += 1;
            }
        }
        let mut total: usize = counts.iter().sum();
        'shrink: while total > self.m {
            for j in 0..cells {
                if counts[j] == 0 {
                    continue;
                }
                counts[j] -= 1;
                if self.bounded(&counts) {
                    total -= 1;
                    continue 'shrink;
                }
                counts[j] += 1;
            }
            break;
        }
        while total < self.m {
            let j = self.widest(&counts, 0..cells);
            counts[j] += 1;
            total += 1;
        }
        if self.feasible(&counts) {
            counts
        } else {
            self.repair(&counts).unwrap_or(counts)
        }
    }

    /// Feasible counts whose running totals follow those of `counts`
    /// rescaled to `m`, clamped between the bounds at each edge.
    fn repair(&self, counts: &[usize]) -> Option<Vec<usize>> {
        let cells = self.len();
        let total = counts.iter().sum::<usize>().max(1) as f64;
        let upper: Vec<usize> = self.tails.iter().map(|t| self.m - t).collect();
        let mut running = vec![0usize; cells + 1];
        running[cells] = self.m;
        let mut acc = 0;
        for j in 1..cells {
            acc += counts[j - 1];
            let lo = self.heads[..j].iter().copied().max().unwrap_or(0).max(running[j - 1]);
            let hi = upper[j - 1..].iter().copied().min().unwrap_or(self.m);
            if lo > hi {
                return None;
            }
            let target = (acc as f64 * self.m as f64 / total).round() as usize;
            running[j] = target.clamp(lo, hi);
        }
        let out: Vec<usize> = running.windows(2).map(|w| w[1] - w[0]).collect();
        self.feasible(&out).then_some(out)
    }

    /// Spreads points evenly in each cell; with `keep`, cells whose count
    /// matches the fit keep the fitted points.
    fn place(&self, counts: &[usize], keep: bool) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.m);
        for (j, c) in counts.iter().copied().enumerate() {
            if keep && c == self.found[j] {
                out.extend(self.changes.iter().copied().filter(|x| self.cell_of(*x) == j));
            } else {
                let (a, b) = (self.angle[j], self.angle[j + 1]);
                out.extend((0..c).map(|i| (a + (b - a) * (i as f64 + 0.5) / c as f64).cos()));
            }
        }
        out.truncate(self.m);
        out
    }
}

fn random_ordered_start(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..m).map(|_| rng.gen_range(0.02..0.98)).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn check_hypotheses(space: &BasisSpace, measure: &Measure) -> Result<()> {
    if !space.has_balanced_parity() {
        return Err(Error::NonSquareSystem(format!(
            "even subspace has dimension {} but ceil(n/2) = {} for n = {}",
            space.even_dimension(),
            space.dimension().div_ceil(2),
            space.dimension()
        )));
    }
    if !measure.is_even() {
        return Err(Error::NonSquareSystem(
            "measure is not symmetric about 0, so even functions do not drop out".into(),
        ));
    }
    Ok(())
}

/// Solves for the canonical points with default options.
pub fn solve_canonical_points(
    space: &BasisSpace,
    measure: &Measure,
    initial: Option<&CanonicalPointSet>,
) -> Result<CanonicalSolution> {
    solve_canonical_points_with(space, measure, initial, &SolverOptions::default())
}

/// Damped Newton on the reduced moment system, started from `initial` (or
/// the polynomial closed form), then from random ordered restarts.
pub fn solve_canonical_points_with(
    space: &BasisSpace,
    measure: &Measure,
    initial: Option<&CanonicalPointSet>,
    opts: &SolverOptions,
) -> Result<CanonicalSolution> {
    check_hypotheses(space, measure)?;
    let m = space.dimension() / 2;
    let split = parity_split(space);
    debug_assert_eq!(split.reduced.len(), m);
    // any basis of the reduced span gives the same zeros; a local one keeps
    // Newton well posed when knots cluster
    let refs: Vec<&PiecewisePoly> = split.reduced.iter().collect();
    let system = ReducedSystem {
        reduced: exact::LocalSpan::new(&refs, 0.0, 1.0).basis(),
        measure,
    };
    if m == 0 {
        return Ok(CanonicalSolution {
            points: CanonicalPointSet::new(Vec::new())?,
            residual_inf_norm: 0.0,
            iterations: 0,
            attempts: 1,
        });
    }
    let first = match initial {
        Some(p) if p.m() == m => p.positive_points().to_vec(),
        Some(p) => {
            return Err(Error::InvalidPoints(format!(
                "initial guess has {} points, expected {m}",
                p.m()
            )))
        }
        None => polynomial_canonical_points(space.dimension())?.positive_points().to_vec(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best = f64::INFINITY;
    let mut total_iterations = 0;
    let mut seeds: Option<Vec<Vec<f64>>> = None;
    let mut total_attempts = opts.restarts + 1;
    let mut attempt = 0;
    while attempt < total_attempts {
        let start = if attempt == 0 {
            first.clone()
        } else {
            let structured = match &seeds {
                Some(s) => s,
                None if opts.discrete_seed => {
                    let s = discrete_seeds(space, measure, m);
                    total_attempts += s.len();
                    seeds.insert(s)
                }
                None => seeds.insert(Vec::new()),
            };
            match structured.get(attempt - 1) {
                Some(s) => s.clone(),
                None => random_ordered_start(&mut rng, m),
            }
        };
        attempt += 1;
        let outcome = match newton(&system, &start, opts) {
            Ok(o) => o,
            Err(e @ Error::OrderingViolation(_)) if attempt == total_attempts => return Err(e),
            Err(Error::OrderingViolation(msg)) => {
                log::debug!("attempt {attempt}: {msg}");
                continue;
            }
            Err(e) => return Err(e),
        };
        total_iterations += outcome.iterations;
        best = best.min(outcome.residual);
        if outcome.converged {
            if let Ok(points) = CanonicalPointSet::new(outcome.alpha.clone()) {
                return Ok(CanonicalSolution {
                    points,
                    residual_inf_norm: outcome.residual,
                    iterations: total_iterations,
                    attempts: attempt,
                });
            }
        }
        log::debug!("attempt {attempt} failed with residual {:e}", outcome.residual);
    }
    Err(Error::NoConvergence {
        attempts: total_attempts,
        residual: best,
    })
}

/// Outcome of one multistart trial.
#[derive(Debug, Clone, Serialize)]
pub struct TrialOutcome {
    pub start: Vec<f64>,
    pub converged: bool,
    pub points: Option<Vec<f64>>,
    pub residual: f64,
    pub error: Option<String>,
}

/// Multistart corroboration of uniqueness.
#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub trials: Vec<TrialOutcome>,
    pub converged_trials: usize,
    /// Largest max-norm distance between any two converged solutions.
    pub max_deviation: f64,
    /// Largest distance from a converged solution to the reference points.
    pub max_deviation_from_reference: f64,
    pub corroborated: bool,
}

/// Deviation below which two solutions count as the same point set.
pub const UNIQUENESS_TOL: f64 = 1e-9;

/// Re-solves from `trials` random ordered starts (no fallback restarts) and
/// compares the converged point sets. Only Chebyshev spaces are accepted.
pub fn verify_uniqueness(
    space: &BasisSpace,
    measure: &Measure,
    points: &CanonicalPointSet,
    trials: usize,
    seed: u64,
) -> Result<UniquenessReport> {
    if space.kind() != SpaceKind::Chebyshev {
        return Err(Error::UniquenessUnavailable(
            "uniqueness of canonical points is only established for Chebyshev spaces".into(),
        ));
    }
    check_hypotheses(space, measure)?;
    let m = space.dimension() / 2;
    if points.m() != m {
        return Err(Error::InvalidPoints(format!("expected {m} positive points, got {}", points.m())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..trials).map(|_| random_ordered_start(&mut rng, m)).collect();
    let opts = SolverOptions {
        restarts: 0,
        discrete_seed: false,
        ..SolverOptions::default()
    };
    let outcomes: Vec<TrialOutcome> = starts
        .into_par_iter()
        .map(|start| {
            let initial = CanonicalPointSet::new(start.clone());
            let result = initial.and_then(|p| solve_canonical_points_with(space, measure, Some(&p), &opts));
            match result {
                Ok(sol) => TrialOutcome {
                    start,
                    converged: true,
                    residual: sol.residual_inf_norm,
                    points: Some(sol.points.positive_points().to_vec()),
                    error: None,
                },
                Err(e) => TrialOutcome {
                    start,
                    converged: false,
                    residual: match &e {
                        Error::NoConvergence { residual, .. } => *residual,
                        _ => f64::NAN,
                    },
                    points: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let solutions: Vec<&Vec<f64>> = outcomes.iter().filter_map(|t| t.points.as_ref()).collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()));
    let mut max_deviation = 0.0_f64;
    for (i, a) in solutions.iter().enumerate() {
        for b in &solutions[i + 1..] {
            max_deviation = max_deviation.max(dist(a, b));
        }
    }
    let max_ref = solutions
        .iter()
        .map(|s| dist(s, points.positive_points()))
        .fold(0.0_f64, f64::max);
    let converged_trials = solutions.len();
    Ok(UniquenessReport {
        corroborated: converged_trials == trials && max_deviation < UNIQUENESS_TOL,
        trials: outcomes,
        converged_trials,
        max_deviation,
        max_deviation_from_reference: max_ref,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use crate::spaces::{hermite_spline_space, polynomial_space, KnotVector};

    fn x_poly() -> PiecewisePoly {
        Polynomial::monomial(1).into()
    }

    #[test]
    fn sign_function_convention() {
        let p = CanonicalPointSet::new(vec![0.5, 0.8]).unwrap();
        let s = p.sign_function();
        assert_eq!(s.eval(0.1), -1.0);
        assert_eq!(s.eval(0.6), 1.0);
        assert_eq!(s.eval(0.9), -1.0);
        for x in [0.05, 0.3, 0.55, 0.7, 0.95] {
            assert_eq!(s.eval(-x), -s.eval(x));
        }
        assert_eq!(s.changes(), 5);
    }

    #[test]
    fn moment_of_x() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let canonical = CanonicalPointSet::new(vec![h]).unwrap();
        assert!(oscillating_moment(&canonical, &x_poly(), &Measure::Lebesgue).unwrap().abs() < 1e-15);
        // -1 on [0, 1/2), +1 on [1/2, 1): 2 (-1/8 + 3/8) = 1/2
        let off = CanonicalPointSet::new(vec![0.5]).unwrap();
        let v = oscillating_moment(&off, &x_poly(), &Measure::Lebesgue).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn even_moments_vanish() {
        let p = CanonicalPointSet::new(vec![0.2, 0.45, 0.9]).unwrap();
        let g: PiecewisePoly = Polynomial::new(vec![1.0, 0.0, -3.0, 0.0, 2.0]).into();
        assert!(oscillating_moment(&p, &g, &Measure::Lebesgue).unwrap().abs() < 1e-15);
        let tp = PiecewisePoly::reflected_truncated_power(0.3, 3);
        assert!(oscillating_moment(&p, &tp, &Measure::Lebesgue).unwrap().abs() < 1e-15);
    }

    #[test]
    fn closed_form_points() {
        let p4 = polynomial_canonical_points(4).unwrap();
        assert!((p4.positive_points()[0] - 0.5).abs() < 1e-15);
        assert!((p4.positive_points()[1] - 3f64.sqrt() / 2.0).abs() < 1e-15);
        let p2 = polynomial_canonical_points(2).unwrap();
        assert!((p2.positive_points()[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let p1 = polynomial_canonical_points(1).unwrap();
        assert_eq!(p1.full_points(), vec![0.0]);
        assert!(polynomial_canonical_points(0).is_err());
    }

    #[test]
    fn closed_form_roots_of_u() {
        for n in 1..=12 {
            let p = polynomial_canonical_points(n).unwrap();
            let deg = 2 * (n / 2) + 1;
            for a in p.full_points() {
                assert!(chebyshev_u(deg, a).abs() < 1e-10);
            }
        }
        assert_eq!(chebyshev_u(0, 0.3), 1.0);
        assert_eq!(chebyshev_u(2, 0.5), 0.0);
    }

    #[test]
    fn newton_matches_closed_form() {
        for d in [3usize, 5] {
            let space = polynomial_space(d);
            let m = d.div_ceil(2);
            let start = CanonicalPointSet::new((1..=m).map(|i| i as f64 / (m + 1) as f64).collect()).unwrap();
            let sol = solve_canonical_points(&space, &Measure::Lebesgue, Some(&start)).unwrap();
            let exact = polynomial_canonical_points(d + 1).unwrap();
            for (a, b) in sol.points.positive_points().iter().zip(exact.positive_points()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn spline_points_zero_all_moments() {
        let space = hermite_spline_space(KnotVector::uniform(5).unwrap(), 1).unwrap().into_space();
        let sol = solve_canonical_points(&space, &Measure::Lebesgue, None).unwrap();
        assert_eq!(sol.points.m(), 5);
        for g in space.functions() {
            assert!(oscillating_moment(&sol.points, g, &Measure::Lebesgue).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_unbalanced_and_asymmetric() {
        let tilted = Measure::weighted("tilt", |x| 2.0 + x).unwrap();
        assert!(matches!(
            solve_canonical_points(&polynomial_space(3), &tilted, None),
            Err(Error::NonSquareSystem(_))
        ));
        let custom = BasisSpace::new(
            vec![Polynomial::monomial(1).into(), Polynomial::monomial(3).into()],
            vec!["x".into(), "x^3".into()],
            SpaceKind::Chebyshev,
        )
        .unwrap();
        assert!(matches!(
            solve_canonical_points(&custom, &Measure::Lebesgue, None),
            Err(Error::NonSquareSystem(_))
        ));
    }

    #[test]
    fn weighted_even_measure() {
        let w = Measure::weighted("1+x^2", |x| 1.0 + x * x).unwrap();
        let space = polynomial_space(3);
        let sol = solve_canonical_points(&space, &w, None).unwrap();
        for g in space.functions() {
            assert!(oscillating_moment(&sol.points, g, &w).unwrap().abs() < 1e-10);
        }
        // the weight moves the points away from the Lebesgue closed form
        let lebesgue = polynomial_canonical_points(4).unwrap();
        assert!((sol.points.positive_points()[0] - lebesgue.positive_points()[0]).abs() > 1e-4);
    }

    #[test]
    fn uniqueness_refused_for_splines() {
        let space = hermite_spline_space(KnotVector::uniform(5).unwrap(), 1).unwrap().into_space();
        let p = polynomial_canonical_points(10).unwrap();
        assert!(matches!(
            verify_uniqueness(&space, &Measure::Lebesgue, &p, 3, 0),
            Err(Error::UniquenessUnavailable(_))
        ));
    }

    #[test]
    fn uniqueness_small_cases() {
        for d in [1usize, 3] {
            let space = polynomial_space(d);
            let p = polynomial_canonical_points(d + 1).unwrap();
            let report = verify_uniqueness(&space, &Measure::Lebesgue, &p, 50, 7).unwrap();
            assert!(report.corroborated, "{report:?}");
            assert!(report.max_deviation_from_reference < 1e-9);
        }
    }
}
