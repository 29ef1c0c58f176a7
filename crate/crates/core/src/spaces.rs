//! Finite-dimensional approximation spaces on `[-1, 1]`.
//!
//! Two families are provided: algebraic polynomials (a Chebyshev system) and
//! Hermite polynomial splines with fixed knots (a weak-Chebyshev system).
//! Both are spanned by piecewise polynomials, so moments against Lebesgue
//! measure are exact.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact;
use crate::functions::Measure;
use crate::linalg::least_squares;
use crate::poly::{PiecewisePoly, Polynomial};
use crate::quadrature::{integrate, QuadratureOptions};

/// Whether every nonzero element has at most `n - 1` zeros (Chebyshev) or at
/// most `n - 1` strong sign changes (weak Chebyshev).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Chebyshev,
    WeakChebyshev,
}

const LOCAL_NOISE: f64 = 1e-13;

/// Ordered basis of piecewise polynomials on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct BasisSpace {
    functions: Vec<PiecewisePoly>,
    labels: Vec<String>,
    kind: SpaceKind,
    breakpoints: Vec<f64>,
    even_dimension: usize,
    complement: Vec<usize>,
}

/// Local coefficients of each function on every piece between `lo`, the
/// breakpoints and `hi`, in the variable `t` in `[-1, 1]` of that piece.
///
/// Entries at rounding level within their block are dropped and each row
/// (one power on one piece) is scaled to unit max, so a short piece counts as
/// much as a long one. The rank equals that of the functions on `[lo, hi]`.
pub(crate) fn local_coefficients(functions: &[&PiecewisePoly], lo: f64, hi: f64) -> DMatrix<f64> {
    let mut nodes: Vec<f64> = functions
        .iter()
        .flat_map(|g| g.breaks().iter().copied())
        .filter(|b| *b > lo && *b < hi)
        .collect();
    nodes.push(lo);
    nodes.push(hi);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let width = functions.iter().filter_map(|g| g.max_degree()).max().unwrap_or(0) + 1;
    let pieces: Vec<(f64, f64)> = nodes
        .windows(2)
        .filter(|w| w[1] - w[0] > 1e-14)
        .map(|w| (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0])))
        .collect();
    let mut m = DMatrix::zeros(pieces.len() * width, functions.len());
    for (p, (c, r)) in pieces.iter().enumerate() {
        for (j, g) in functions.iter().enumerate() {
            let local = g.piece_at(*c).compose_affine(*c, *r);
            let coeffs = local.coeffs();
            let big = coeffs.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            for (i, v) in coeffs.iter().enumerate() {
                if v.abs() > LOCAL_NOISE * big {
                    m[(p * width + i, j)] = *v;
                }
            }
        }
    }
    for mut row in m.row_iter_mut() {
        let s = row.amax();
        if s > 0.0 {
            row /= s;
        }
    }
    m
}

impl BasisSpace {
    /// Builds a space from explicit basis functions, checking linear
    /// independence on a resolving grid and computing the even-subspace
    /// dimension.
    pub fn new(functions: Vec<PiecewisePoly>, labels: Vec<String>, kind: SpaceKind) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::InvalidSpace("empty basis".into()));
        }
        if labels.len() != functions.len() {
            return Err(Error::InvalidSpace("one label per basis function required".into()));
        }
        let mut breakpoints: Vec<f64> = functions
            .iter()
            .flat_map(|g| g.breaks().iter().copied())
            .filter(|b| *b > -1.0 && *b < 1.0)
            .collect();
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();

        let n = functions.len();
        let refs: Vec<&PiecewisePoly> = functions.iter().collect();
        let rank = exact::rank(&exact::columns(&refs, -1.0, 1.0, false));
        if rank < n {
            return Err(Error::InvalidSpace(format!(
                "basis functions are linearly dependent (rank {rank} < {n})"
            )));
        }

        let complement = odd_complement(&functions);
        Ok(Self {
            even_dimension: n - complement.len(),
            functions,
            labels,
            kind,
            breakpoints,
            complement,
        })
    }

    pub fn dimension(&self) -> usize {
        self.functions.len()
    }

    /// `dim Z`, the dimension of the subspace of even functions.
    pub fn even_dimension(&self) -> usize {
        self.even_dimension
    }

    /// `q = n - dim Z`.
    pub fn odd_dimension(&self) -> usize {
        self.dimension() - self.even_dimension
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn functions(&self) -> &[PiecewisePoly] {
        &self.functions
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Breakpoints of the basis functions inside `(-1, 1)` (spline knots).
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// True when `dim Z = ceil(n / 2)`.
    pub fn has_balanced_parity(&self) -> bool {
        self.even_dimension == self.dimension().div_ceil(2)
    }

    pub fn eval_combination(&self, coefficients: &[f64], x: f64) -> f64 {
        self.functions
            .iter()
            .zip(coefficients)
            .map(|(g, c)| c * g.eval(x))
            .sum()
    }

    /// `sum c_j phi_j` as a single piecewise polynomial.
    pub fn combination(&self, coefficients: &[f64]) -> PiecewisePoly {
        let terms: Vec<(f64, &PiecewisePoly)> =
            coefficients.iter().copied().zip(self.functions.iter()).collect();
        PiecewisePoly::linear_combination(&terms)
    }

    pub(crate) fn complement_indices(&self) -> &[usize] {
        &self.complement
    }
}

/// Basis indices whose odd parts are linearly independent; they span a
/// complement `W` of the even subspace. Candidates are ordered by pivoted
/// Gram-Schmidt on the odd parts, and independence is decided exactly.
fn odd_complement(functions: &[PiecewisePoly]) -> Vec<usize> {
    let refs: Vec<&PiecewisePoly> = functions.iter().collect();
    let exact_cols = exact::columns(&refs, 0.0, 1.0, true);
    let target = exact::rank(&exact_cols);
    let odd_parts: Vec<PiecewisePoly> = functions.iter().map(PiecewisePoly::odd_part).collect();
    let refs: Vec<&PiecewisePoly> = odd_parts.iter().collect();
    let mut odd = local_coefficients(&refs, 0.0, 1.0);
    for mut c in odd.column_iter_mut() {
        let s = c.amax();
        if s > 0.0 {
            c /= s;
        }
    }
    let mut order = Vec::with_capacity(functions.len());
    let mut free: Vec<usize> = (0..functions.len()).collect();
    while let Some((pos, _)) = free
        .iter()
        .enumerate()
        .map(|(p, j)| (p, odd.column(*j).norm()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
    {
        let j = free.swap_remove(pos);
        let norm = odd.column(j).norm();
        if norm > 0.0 {
            let v = odd.column(j) / norm;
            for i in &free {
                let proj = v.dot(&odd.column(*i));
                odd.column_mut(*i).axpy(-proj, &v, 1.0);
            }
        }
        order.push(j);
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(target);
    let mut cols: Vec<Vec<u64>> = Vec::with_capacity(target);
    for j in order {
        if chosen.len() == target {
            break;
        }
        cols.push(exact_cols[j].clone());
        if exact::rank(&cols) > chosen.len() {
            chosen.push(j);
        } else {
            cols.pop();
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Even subspace, odd complement and reduced functions of a space.
#[derive(Debug, Clone)]
pub struct ParitySplit {
    /// Basis of the even subspace `Z`.
    pub even: Vec<PiecewisePoly>,
    /// Basis of a complement `W` (a subset of the original basis).
    pub complement: Vec<PiecewisePoly>,
    /// Original indices of the complement functions.
    pub complement_indices: Vec<usize>,
    /// `g(x) - g(-x)` for each `g` in `complement`; only `[0, 1]` matters.
    pub reduced: Vec<PiecewisePoly>,
}

/// Splits `Y = Z (+) W` into even functions and a complement.
pub fn parity_split(space: &BasisSpace) -> ParitySplit {
    let idx = space.complement_indices().to_vec();
    let complement: Vec<PiecewisePoly> = idx.iter().map(|i| space.functions[*i].clone()).collect();
    let reduced: Vec<PiecewisePoly> = complement
        .iter()
        .map(|g| PiecewisePoly::linear_combination(&[(1.0, g), (-1.0, &g.reflect())]))
        .collect();

    let odd_w: Vec<PiecewisePoly> = complement.iter().map(PiecewisePoly::odd_part).collect();

    let mut even = Vec::with_capacity(space.even_dimension);
    for (k, g) in space.functions.iter().enumerate() {
        if idx.contains(&k) {
            continue;
        }
        let coeffs = if odd_w.is_empty() {
            Vec::new()
        } else {
            // odd part of g in terms of the odd parts of W (a consistent system)
            let odd_g = g.odd_part();
            let mut refs: Vec<&PiecewisePoly> = odd_w.iter().collect();
            refs.push(&odd_g);
            let m = local_coefficients(&refs, 0.0, 1.0);
            let w = odd_w.len();
            let target: Vec<f64> = m.column(w).iter().copied().collect();
            least_squares(&m.columns(0, w).into_owned(), &target)
        };
        let mut terms: Vec<(f64, &PiecewisePoly)> = vec![(1.0, g)];
        terms.extend(coeffs.iter().map(|c| -*c).zip(complement.iter()));
        // drop the odd rounding residue
        even.push(PiecewisePoly::linear_combination(&terms).even_part());
    }
    ParitySplit {
        even,
        complement,
        complement_indices: idx,
        reduced,
    }
}

/// Monomial basis `1, x, ..., x^degree`.
pub fn polynomial_space(degree: usize) -> BasisSpace {
    let functions = (0..=degree).map(|j| Polynomial::monomial(j).into()).collect();
    let labels = (0..=degree).map(|j| format!("x^{j}")).collect();
    BasisSpace::new(functions, labels, SpaceKind::Chebyshev)
        .expect("monomials are linearly independent")
}

/// Strictly increasing knots inside `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidKnots("knots must be finite".into()));
        }
        if !knots.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidKnots("knots must be strictly increasing".into()));
        }
        if knots.iter().any(|k| *k < -1.0 || *k > 1.0) {
            return Err(Error::InvalidKnots("knots must lie in [-1, 1]".into()));
        }
        Ok(Self { knots })
    }

    /// `count` evenly spaced knots from -1 to 1.
    pub fn uniform(count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidKnots("at least two knots required".into()));
        }
        let mut knots: Vec<f64> = (0..count)
            .map(|i| -1.0 + 2.0 * i as f64 / (count - 1) as f64)
            .collect();
        if count % 2 == 1 {
            knots[count / 2] = 0.0;
        }
        Self::new(knots)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Symmetric about 0 with 0 itself a knot.
    pub fn is_symmetric(&self) -> bool {
        let n = self.knots.len();
        n % 2 == 1
            && self.knots[n / 2] == 0.0
            && (0..n).all(|i| (self.knots[i] + self.knots[n - 1 - i]).abs() <= 1e-14)
    }
}

/// Space of `C^k` piecewise polynomials of degree `<= 2k + 1` on fixed knots.
#[derive(Debug, Clone)]
pub struct HermiteSplineSpace {
    knots: KnotVector,
    order: usize,
    space: BasisSpace,
}

impl HermiteSplineSpace {
    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    /// Smoothness order `k`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn space(&self) -> &BasisSpace {
        &self.space
    }

    pub fn into_space(self) -> BasisSpace {
        self.space
    }
}

/// Truncated-power basis of the Hermite spline space:
/// `(x - x_1)^j` for `j = 0..=2k+1` and `(x - x_j)_+^q` for interior knots
/// and `q = k+1..=2k+1`. Dimension `N (k + 1)`.
pub fn hermite_spline_space(knots: KnotVector, k: usize) -> Result<HermiteSplineSpace> {
    if knots.len() < 2 {
        return Err(Error::InvalidKnots("at least two knots required".into()));
    }
    let x = knots.as_slice();
    let mut functions: Vec<PiecewisePoly> = Vec::new();
    let mut labels = Vec::new();
    for j in 0..=2 * k + 1 {
        functions.push(Polynomial::shifted_power(x[0], j).into());
        labels.push(format!("(x-{})^{j}", x[0]));
    }
    for &knot in &x[1..x.len() - 1] {
        for q in k + 1..=2 * k + 1 {
            functions.push(PiecewisePoly::truncated_power(knot, q));
            labels.push(format!("(x-{knot})_+^{q}"));
        }
    }
    let kind = if x.len() == 2 {
        SpaceKind::Chebyshev
    } else {
        SpaceKind::WeakChebyshev
    };
    let space = BasisSpace::new(functions, labels, kind)?;
    Ok(HermiteSplineSpace {
        knots,
        order: k,
        space,
    })
}

/// `ceil(dim / 2)` linearly independent even members of a spline space on
/// knots symmetric about 0: even monomials `1, x^2, ..., x^{2k}`, reflected
/// truncated powers `(|x| - x_j)_+^q` at positive interior knots, and
/// `|x|^q` for odd `q` in `k+1..=2k+1`.
pub fn symmetric_even_basis(space: &HermiteSplineSpace) -> Result<Vec<PiecewisePoly>> {
    if !space.knots.is_symmetric() {
        return Err(Error::InvalidKnots(
            "even basis needs knots symmetric about 0 that include 0".into(),
        ));
    }
    let k = space.order;
    let x = space.knots.as_slice();
    let mut out: Vec<PiecewisePoly> = (0..=k).map(|j| Polynomial::monomial(2 * j).into()).collect();
    let positive: Vec<f64> = x.iter().copied().filter(|v| *v > 0.0).collect();
    if let Some((_, interior)) = positive.split_last() {
        for &knot in interior {
            for q in k + 1..=2 * k + 1 {
                out.push(PiecewisePoly::reflected_truncated_power(knot, q));
            }
        }
    }
    for q in (k + 1..=2 * k + 1).filter(|q| q % 2 == 1) {
        out.push(PiecewisePoly::abs_power(q));
    }
    Ok(out)
}

/// `int_lo^hi g dnu` over a sub-interval of `[-1, 1]`.
///
/// Lebesgue measure uses the exact antiderivative; weighted measures use
/// adaptive quadrature with forced splits at the breakpoints of `g` and at 0.
pub fn exact_moment(g: &PiecewisePoly, lo: f64, hi: f64, measure: &Measure) -> Result<f64> {
    if lo > hi {
        return Err(Error::ReversedBounds { lo, hi });
    }
    if lo < -1.0 || hi > 1.0 {
        return Err(Error::IntervalOutOfRange { lo, hi });
    }
    match measure {
        Measure::Lebesgue => Ok(g.integrate(lo, hi)),
        Measure::WeightedLebesgue(_) => {
            let mut breaks = g.breaks().to_vec();
            breaks.push(0.0);
            integrate(
                |x| g.eval(x) * measure.density(x),
                lo,
                hi,
                &breaks,
                QuadratureOptions::default(),
            )
        }
    }
}

/// JSON description of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpaceSpec {
    Polynomial { degree: usize },
    HermiteSpline { knots: Vec<f64>, k: usize },
}

impl SpaceSpec {
    pub fn build(&self) -> Result<BasisSpace> {
        match self {
            SpaceSpec::Polynomial { degree } => Ok(polynomial_space(*degree)),
            SpaceSpec::HermiteSpline { knots, k } => {
                Ok(hermite_spline_space(KnotVector::new(knots.clone())?, *k)?.into_space())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::numerical_rank;

    fn grid(n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
    }

    #[test]
    fn polynomial_dimensions() {
        for (d, n, z) in [(3, 4, 2), (0, 1, 1), (4, 5, 3)] {
            let s = polynomial_space(d);
            assert_eq!(s.dimension(), n);
            assert_eq!(s.even_dimension(), z);
            assert_eq!(s.kind(), SpaceKind::Chebyshev);
        }
    }

    #[test]
    fn hermite_dimensions() {
        let s = hermite_spline_space(KnotVector::uniform(5).unwrap(), 1).unwrap();
        assert_eq!(s.space().dimension(), 10);
        assert_eq!(s.space().kind(), SpaceKind::WeakChebyshev);
        let two = hermite_spline_space(KnotVector::new(vec![-1.0, 1.0]).unwrap(), 2).unwrap();
        assert_eq!(two.space().dimension(), 6);
        assert_eq!(two.space().kind(), SpaceKind::Chebyshev);
        assert!(two.space().functions().iter().all(|g| g.breaks().is_empty()));
        let linear = hermite_spline_space(KnotVector::uniform(3).unwrap(), 0).unwrap();
        assert_eq!(linear.space().dimension(), 3);
        assert!(linear.space().functions().iter().all(|g| g.max_degree().unwrap() <= 1));
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(KnotVector::new(vec![0.0, 0.0, 1.0]).is_err());
        assert!(KnotVector::new(vec![0.5, -0.5]).is_err());
        assert!(KnotVector::new(vec![-2.0, 0.0]).is_err());
        assert!(hermite_spline_space(KnotVector::new(vec![0.0]).unwrap(), 1).is_err());
    }

    #[test]
    fn hermite_basis_is_ck() {
        for k in 0..=3 {
            let s = hermite_spline_space(KnotVector::uniform(5).unwrap(), k).unwrap();
            for g in s.space().functions() {
                assert!(g.max_degree().unwrap_or(0) <= 2 * k + 1);
                for &knot in &[-0.5, 0.0, 0.5] {
                    for d in 0..=k {
                        let dg = g.nth_derivative(d);
                        let jump = (dg.eval(knot) - dg.eval_left(knot)).abs();
                        assert!(jump <= 1e-12 * (1.0 + dg.eval(knot).abs()));
                    }
                }
            }
        }
    }

    fn sample_matrix(functions: &[&PiecewisePoly], xs: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(xs.len(), functions.len(), |i, j| functions[j].eval(xs[i]))
    }

    #[test]
    fn even_basis_counts() {
        let cases = [(vec![-1.0, 0.0, 1.0], 1, 6, 3), (vec![-1.0, -0.5, 0.0, 0.5, 1.0], 1, 10, 5), (vec![-1.0, 0.0, 1.0], 0, 3, 2)];
        for (knots, k, dim, count) in cases {
            let s = hermite_spline_space(KnotVector::new(knots).unwrap(), k).unwrap();
            assert_eq!(s.space().dimension(), dim);
            let even = symmetric_even_basis(&s).unwrap();
            assert_eq!(even.len(), count);
            for g in &even {
                for x in grid(101) {
                    assert!((g.eval(x) - g.eval(-x)).abs() < 1e-14);
                }
            }
            // rank of the even family and membership in the space
            let xs: Vec<f64> = grid(97).collect();
            let refs: Vec<&PiecewisePoly> = even.iter().collect();
            assert_eq!(numerical_rank(&sample_matrix(&refs, &xs), 1e-10), count);
            let mut all: Vec<&PiecewisePoly> = s.space().functions().iter().collect();
            all.extend(even.iter());
            assert_eq!(numerical_rank(&sample_matrix(&all, &xs), 1e-10), dim);
            assert_eq!(s.space().even_dimension(), count);
        }
    }

    #[test]
    fn even_basis_needs_symmetry() {
        let s = hermite_spline_space(KnotVector::new(vec![-1.0, 0.2, 1.0]).unwrap(), 1).unwrap();
        assert!(symmetric_even_basis(&s).is_err());
    }

    #[test]
    fn parity_split_polynomial() {
        let split = parity_split(&polynomial_space(3));
        assert_eq!(split.complement_indices, vec![1, 3]);
        assert_eq!(split.even.len(), 2);
        for x in grid(21) {
            assert!((split.even[0].eval(x) - 1.0).abs() < 1e-15);
            assert!((split.even[1].eval(x) - x * x).abs() < 1e-15);
            assert!((split.reduced[0].eval(x) - 2.0 * x).abs() < 1e-15);
            assert!((split.reduced[1].eval(x) - 2.0 * x.powi(3)).abs() < 1e-15);
        }
        let s4 = polynomial_space(4);
        assert_eq!(s4.even_dimension(), 3);
        assert_eq!(s4.odd_dimension(), 2);
    }

    #[test]
    fn parity_split_spline() {
        let s = hermite_spline_space(KnotVector::uniform(5).unwrap(), 1).unwrap();
        let split = parity_split(s.space());
        assert_eq!(split.even.len(), 5);
        assert_eq!(split.complement.len(), 5);
        for g in &split.even {
            for x in grid(201) {
                assert!((g.eval(x) - g.eval(-x)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn moments() {
        let lebesgue = Measure::Lebesgue;
        let x2: PiecewisePoly = Polynomial::monomial(2).into();
        assert!((exact_moment(&x2, 0.0, 1.0, &lebesgue).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let tp = PiecewisePoly::truncated_power(0.5, 2);
        assert!((exact_moment(&tp, 0.0, 1.0, &lebesgue).unwrap() - 1.0 / 24.0).abs() < 1e-15);
        let x3: PiecewisePoly = Polynomial::monomial(3).into();
        for c in [0.1, 0.5, 0.9, 1.0] {
            assert!(exact_moment(&x3, -c, c, &lebesgue).unwrap().abs() < 1e-16);
        }
        assert!(matches!(exact_moment(&x3, 0.5, 0.1, &lebesgue), Err(Error::ReversedBounds { .. })));
        let w = Measure::weighted("1+x^2", |x| 1.0 + x * x).unwrap();
        // int_0^1 x^2 (1 + x^2) = 1/3 + 1/5
        assert!((exact_moment(&x2, 0.0, 1.0, &w).unwrap() - 8.0 / 15.0).abs() < 1e-13);
    }

    #[test]
    fn space_spec_json() {
        let s: SpaceSpec = serde_json::from_str(r#"{"type":"hermite_spline","knots":[-1,0,1],"k":1}"#).unwrap();
        assert_eq!(s.build().unwrap().dimension(), 6);
        let p: SpaceSpec = serde_json::from_str(r#"{"type":"polynomial","degree":3}"#).unwrap();
        assert_eq!(p.build().unwrap().dimension(), 4);
    }
}
