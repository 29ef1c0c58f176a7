//! Dense polynomials and piecewise polynomials.
//!
//! A polynomial keeps its coefficients about its own origin, so a truncated
//! power `(x - t)^q` is stored exactly and stays accurate near `t`.
//!
//! Every basis function used by the approximation spaces is a piecewise
//! polynomial, which gives exact evaluation, differentiation, reflection
//! `x -> -x` and integration.

use std::fmt;

/// Polynomial `sum c_i (x - origin)^i` with ascending coefficients.
#[derive(Clone, PartialEq, Default)]
pub struct Polynomial {
    coeffs: Vec<f64>,
    origin: f64,
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.origin == 0.0 {
            write!(f, "Polynomial{:?}", self.coeffs)
        } else {
            write!(f, "Polynomial{:?}@{}", self.coeffs, self.origin)
        }
    }
}

impl Polynomial {
    /// `sum c_i x^i`.
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self::centered(coeffs, 0.0)
    }

    /// `sum c_i (x - origin)^i`.
    pub fn centered(coeffs: Vec<f64>, origin: f64) -> Self {
        let mut p = Self { coeffs, origin };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// `x^power`.
    pub fn monomial(power: usize) -> Self {
        Self::shifted_power(0.0, power)
    }

    /// `(x - center)^power`.
    pub fn shifted_power(center: f64, power: usize) -> Self {
        let mut coeffs = vec![0.0; power + 1];
        coeffs[power] = 1.0;
        Self::centered(coeffs, center)
    }

    /// Coefficients about [`Polynomial::origin`].
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    /// The same polynomial expanded about `origin`.
    pub fn recenter(&self, origin: f64) -> Self {
        if origin == self.origin || self.coeffs.len() <= 1 {
            return Self {
                coeffs: self.coeffs.clone(),
                origin,
            };
        }
        let mut out = self.compose_affine(origin, 1.0);
        out.origin = origin;
        out
    }

    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn trim(&mut self) {
        while matches!(self.coeffs.last(), Some(c) if *c == 0.0) {
            self.coeffs.pop();
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let h = x - self.origin;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * h + c)
    }

    pub fn derivative(&self) -> Self {
        Self::centered(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| i as f64 * c)
                .collect(),
            self.origin,
        )
    }

    /// Antiderivative vanishing at the origin.
    pub fn antiderivative(&self) -> Self {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(0.0);
        coeffs.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c / (i + 1) as f64),
        );
        Self::centered(coeffs, self.origin)
    }

    pub fn integrate(&self, lo: f64, hi: f64) -> f64 {
        let anti = self.antiderivative();
        anti.eval(hi) - anti.eval(lo)
    }

    /// `p(-x)`.
    pub fn reflect(&self) -> Self {
        Self::centered(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| if i % 2 == 1 { -c } else { *c })
                .collect(),
            -self.origin,
        )
    }

    /// `p(offset + scale * t)` as a polynomial in `t`.
    pub fn compose_affine(&self, offset: f64, scale: f64) -> Self {
        let inner = Self::new(vec![offset - self.origin, scale]);
        let mut out = Self::zero();
        for c in self.coeffs.iter().rev() {
            out = out.mul(&inner).add(&Self::constant(*c));
        }
        out
    }

    /// Sum, expanded about the origin of `self` (or of `other` when `self`
    /// is zero).
    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        let other = other.recenter(self.origin);
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::centered(
            (0..n)
                .map(|i| {
                    self.coeffs.get(i).copied().unwrap_or(0.0)
                        + other.coeffs.get(i).copied().unwrap_or(0.0)
                })
                .collect(),
            self.origin,
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::centered(self.coeffs.iter().map(|c| c * s).collect(), self.origin)
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let other = other.recenter(self.origin);
        let mut coeffs = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Self::centered(coeffs, self.origin)
    }
}

/// Piecewise polynomial on the real line.
///
/// `pieces[i]` applies on `[breaks[i-1], breaks[i])`, with the first piece
/// extending to `-inf` and the last to `+inf`. Evaluation at a breakpoint
/// uses the piece on its right.
#[derive(Clone, PartialEq)]
pub struct PiecewisePoly {
    breaks: Vec<f64>,
    pieces: Vec<Polynomial>,
}

impl fmt::Debug for PiecewisePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PiecewisePoly")
            .field("breaks", &self.breaks)
            .field("pieces", &self.pieces)
            .finish()
    }
}

impl From<Polynomial> for PiecewisePoly {
    fn from(p: Polynomial) -> Self {
        Self {
            breaks: Vec::new(),
            pieces: vec![p],
        }
    }
}

impl PiecewisePoly {
    /// Builds from strictly increasing breaks and `breaks.len() + 1` pieces.
    pub fn new(breaks: Vec<f64>, pieces: Vec<Polynomial>) -> Self {
        assert_eq!(pieces.len(), breaks.len() + 1, "piece count mismatch");
        assert!(
            breaks.windows(2).all(|w| w[0] < w[1]),
            "breaks must be strictly increasing"
        );
        Self { breaks, pieces }
    }

    pub fn zero() -> Self {
        Polynomial::zero().into()
    }

    /// `(x - knot)_+^power`.
    pub fn truncated_power(knot: f64, power: usize) -> Self {
        Self::new(
            vec![knot],
            vec![Polynomial::zero(), Polynomial::shifted_power(knot, power)],
        )
    }

    /// `(|x| - knot)_+^power` for `knot > 0`.
    pub fn reflected_truncated_power(knot: f64, power: usize) -> Self {
        assert!(knot > 0.0, "reflected truncated power needs a positive knot");
        Self::new(
            vec![-knot, knot],
            vec![
                Polynomial::shifted_power(knot, power).reflect(),
                Polynomial::zero(),
                Polynomial::shifted_power(knot, power),
            ],
        )
    }

    /// `|x|^power`.
    pub fn abs_power(power: usize) -> Self {
        let right = Polynomial::monomial(power);
        Self::new(vec![0.0], vec![right.reflect(), right])
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn pieces(&self) -> &[Polynomial] {
        &self.pieces
    }

    fn piece_index(&self, x: f64) -> usize {
        self.breaks.partition_point(|b| *b <= x)
    }

    pub fn piece_at(&self, x: f64) -> &Polynomial {
        &self.pieces[self.piece_index(x)]
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.piece_at(x).eval(x)
    }

    /// Value using the piece on the left of `x` (left limit at breaks).
    pub fn eval_left(&self, x: f64) -> f64 {
        let idx = self.breaks.partition_point(|b| *b < x);
        self.pieces[idx].eval(x)
    }

    pub fn derivative(&self) -> Self {
        Self {
            breaks: self.breaks.clone(),
            pieces: self.pieces.iter().map(Polynomial::derivative).collect(),
        }
    }

    pub fn nth_derivative(&self, order: usize) -> Self {
        (0..order).fold(self.clone(), |p, _| p.derivative())
    }

    /// Highest polynomial degree over all pieces.
    pub fn max_degree(&self) -> Option<usize> {
        self.pieces.iter().filter_map(Polynomial::degree).max()
    }

    /// Exact integral over `[lo, hi]` (`lo <= hi`).
    pub fn integrate(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let mut total = 0.0;
        let mut left = lo;
        let mut idx = self.piece_index(lo);
        while left < hi {
            let right = self.breaks.get(idx).copied().unwrap_or(f64::INFINITY).min(hi);
            if right > left {
                total += self.pieces[idx].integrate(left, right);
            }
            left = right;
            idx += 1;
        }
        total
    }

    /// `g(-x)`.
    pub fn reflect(&self) -> Self {
        let breaks = self.breaks.iter().rev().map(|b| -b).collect();
        let pieces = self.pieces.iter().rev().map(Polynomial::reflect).collect();
        Self { breaks, pieces }
    }

    /// `(g(x) + g(-x)) / 2`.
    pub fn even_part(&self) -> Self {
        Self::linear_combination(&[(0.5, self), (0.5, &self.reflect())])
    }

    /// `(g(x) - g(-x)) / 2`.
    pub fn odd_part(&self) -> Self {
        Self::linear_combination(&[(0.5, self), (-0.5, &self.reflect())])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            breaks: self.breaks.clone(),
            pieces: self.pieces.iter().map(|p| p.scale(s)).collect(),
        }
    }

    /// `sum w_i g_i` over the merged breakpoint set.
    pub fn linear_combination(terms: &[(f64, &PiecewisePoly)]) -> Self {
        let mut breaks: Vec<f64> = terms
            .iter()
            .flat_map(|(_, g)| g.breaks.iter().copied())
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut pieces = Vec::with_capacity(breaks.len() + 1);
        for i in 0..=breaks.len() {
            // representative point strictly inside the i-th merged interval
            let probe = match (i.checked_sub(1).map(|j| breaks[j]), breaks.get(i)) {
                (None, None) => 0.0,
                (None, Some(r)) => r - 1.0,
                (Some(l), None) => l + 1.0,
                (Some(l), Some(r)) => 0.5 * (l + r),
            };
            // expanded about the middle of the piece, or its finite end
            let anchor = match (i.checked_sub(1).map(|j| breaks[j]), breaks.get(i)) {
                (None, None) => 0.0,
                (None, Some(r)) => *r,
                (Some(l), None) => l,
                (Some(_), Some(_)) => probe,
            };
            let piece = terms.iter().fold(Polynomial::zero(), |acc, (w, g)| {
                acc.add(&g.piece_at(probe).recenter(anchor).scale(*w))
            });
            pieces.push(piece);
        }
        Self { breaks, pieces }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_power_matches_direct_evaluation() {
        let p = Polynomial::shifted_power(0.3, 5);
        for &x in &[-1.0, -0.2, 0.3, 0.77, 1.0] {
            let expected = (x - 0.3_f64).powi(5);
            assert!((p.eval(x) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn truncated_power_moment() {
        let g = PiecewisePoly::truncated_power(0.5, 2);
        assert!((g.integrate(0.0, 1.0) - 1.0 / 24.0).abs() < 1e-15);
        assert_eq!(g.eval(0.25), 0.0);
    }

    #[test]
    fn reflect_and_parts() {
        let g = PiecewisePoly::truncated_power(-0.25, 3);
        let e = g.even_part();
        let o = g.odd_part();
        for i in 0..=40 {
            let x = -1.0 + i as f64 * 0.05;
            assert!((g.reflect().eval(x) - g.eval(-x)).abs() < 1e-14);
            assert!((e.eval(x) + o.eval(x) - g.eval(x)).abs() < 1e-14);
            assert!((e.eval(x) - e.eval(-x)).abs() < 1e-14);
            assert!((o.eval(x) + o.eval(-x)).abs() < 1e-14);
        }
    }

    #[test]
    fn compose_affine_substitutes() {
        let p = Polynomial::new(vec![1.0, -2.0, 3.0]);
        let q = p.compose_affine(0.5, 2.0);
        for &t in &[-1.0, 0.0, 0.4] {
            assert!((q.eval(t) - p.eval(0.5 + 2.0 * t)).abs() < 1e-13);
        }
    }

    #[test]
    fn abs_power_is_even() {
        let g = PiecewisePoly::abs_power(3);
        assert!((g.eval(-0.5) - 0.125).abs() < 1e-15);
        assert!((g.integrate(-1.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eval_left_uses_left_piece() {
        let g = PiecewisePoly::new(
            vec![0.0],
            vec![Polynomial::constant(-1.0), Polynomial::constant(2.0)],
        );
        assert_eq!(g.eval(0.0), 2.0);
        assert_eq!(g.eval_left(0.0), -1.0);
    }
}
