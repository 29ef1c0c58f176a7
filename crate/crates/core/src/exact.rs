//! Exact ranks of piecewise polynomials.
//!
//! Every `f64` is a dyadic rational, so coefficients map exactly into the
//! prime field `F_p`, `p = 2^61 - 1`. Re-expanding a piece about a common
//! origin, reflecting it and taking differences are exact there, and the
//! rank over `F_p` matches the rank over the rationals unless `p` divides
//! every nonzero minor of full size.
//!
//! [`LocalSpan`] works over the rationals instead: it rebuilds a span
//! of piecewise polynomials from a basis that stays well conditioned when
//! the breakpoints cluster.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::poly::{PiecewisePoly, Polynomial};

const P: u64 = (1 << 61) - 1;

fn add(a: u64, b: u64) -> u64 {
    (a + b) % P
}

fn sub(a: u64, b: u64) -> u64 {
    (a + P - b) % P
}

fn mul(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % P as u128) as u64
}

fn pow(mut b: u64, mut e: u64) -> u64 {
    let mut acc = 1;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul(acc, b);
        }
        b = mul(b, b);
        e >>= 1;
    }
    acc
}

fn inv(a: u64) -> u64 {
    pow(a, P - 2)
}

/// Exact image of a finite `f64`.
fn of(x: f64) -> u64 {
    assert!(x.is_finite(), "exact rank needs finite coefficients");
    if x == 0.0 {
        return 0;
    }
    let bits = x.to_bits();
    let exponent = ((bits >> 52) & 0x7ff) as i64;
    let fraction = bits & ((1 << 52) - 1);
    let (mantissa, e) = if exponent == 0 {
        (fraction, -1074)
    } else {
        (fraction | (1 << 52), exponent - 1075)
    };
    let m = mantissa % P;
    let scale = if e >= 0 {
        pow(2, e as u64)
    } else {
        inv(pow(2, (-e) as u64))
    };
    let v = mul(m, scale);
    if x < 0.0 {
        sub(0, v)
    } else {
        v
    }
}

/// Coefficients of `p` about 0, padded to `width`.
fn about_zero(p: &Polynomial, width: usize) -> Vec<u64> {
    // sum c_i (x - o)^i, expanded with binomials
    let o = sub(0, of(p.origin()));
    let mut out = vec![0; width];
    for (i, c) in p.coeffs().iter().enumerate() {
        let c = of(*c);
        let mut binom = 1u64;
        for j in 0..=i {
            // C(i, j) o^(i - j) x^j
            let term = mul(mul(c, binom), pow(o, (i - j) as u64));
            out[j] = add(out[j], term);
            binom = mul(mul(binom, (i - j) as u64), inv((j + 1) as u64));
        }
    }
    out
}

/// One column per function: its pieces on `(lo, hi)`, each expanded about 0.
/// With `odd`, the column holds `g(x) - g(-x)` instead of `g`.
pub(crate) fn columns(functions: &[&PiecewisePoly], lo: f64, hi: f64, odd: bool) -> Vec<Vec<u64>> {
    let reflected: Vec<PiecewisePoly> = if odd {
        functions.iter().map(|g| g.reflect()).collect()
    } else {
        Vec::new()
    };
    let mut nodes: Vec<f64> = functions
        .iter()
        .copied()
        .chain(reflected.iter())
        .flat_map(|g| g.breaks().iter().copied())
        .filter(|b| *b > lo && *b < hi)
        .collect();
    nodes.push(lo);
    nodes.push(hi);
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let width = functions.iter().filter_map(|g| g.max_degree()).max().unwrap_or(0) + 1;
    let probes: Vec<f64> = nodes
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect();
    functions
        .iter()
        .enumerate()
        .map(|(j, g)| {
            probes
                .iter()
                .flat_map(|c| {
                    let mut v = about_zero(g.piece_at(*c), width);
                    if odd {
                        let r = about_zero(reflected[j].piece_at(*c), width);
                        v.iter_mut().zip(r).for_each(|(a, b)| *a = sub(*a, b));
                    }
                    v
                })
                .collect()
        })
        .collect()
}

/// Indices of the first columns that are independent of all earlier ones.
pub(crate) fn pivot_columns(cols: &[Vec<u64>]) -> Vec<usize> {
    // reduced rows of the span so far, keyed by their leading position
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut picked = Vec::new();
    for (j, col) in cols.iter().enumerate() {
        let mut v = col.clone();
        for (lead, b) in &basis {
            if v[*lead] != 0 {
                let f = v[*lead];
                v.iter_mut().zip(b).for_each(|(x, y)| *x = sub(*x, mul(f, *y)));
            }
        }
        if let Some(lead) = v.iter().position(|x| *x != 0) {
            let s = inv(v[lead]);
            v.iter_mut().for_each(|x| *x = mul(*x, s));
            for (_, b) in basis.iter_mut() {
                if b[lead] != 0 {
                    let f = b[lead];
                    b.iter_mut().zip(&v).for_each(|(x, y)| *x = sub(*x, mul(f, *y)));
                }
            }
            basis.push((lead, v));
            picked.push(j);
        }
    }
    picked
}

pub(crate) fn rank(cols: &[Vec<u64>]) -> usize {
    pivot_columns(cols).len()
}

/// Exact `mantissa * 2^exponent`.
#[derive(Clone, Debug)]
struct Dyadic {
    mantissa: BigInt,
    exponent: i64,
}

impl Dyadic {
    fn zero() -> Self {
        Self {
            mantissa: BigInt::zero(),
            exponent: 0,
        }
    }

    fn integer(v: u64) -> Self {
        Self {
            mantissa: v.into(),
            exponent: 0,
        }
    }

    fn of(x: f64) -> Self {
        assert!(x.is_finite(), "exact arithmetic needs finite values");
        if x == 0.0 {
            return Self::zero();
        }
        let bits = x.to_bits();
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let fraction = bits & ((1 << 52) - 1);
        let (m, e) = if biased == 0 {
            (fraction, -1074)
        } else {
            (fraction | (1 << 52), biased - 1075)
        };
        let m = BigInt::from(m);
        Self {
            mantissa: if x < 0.0 { -m } else { m },
            exponent: e,
        }
    }

    fn mul(&self, other: &Self) -> Self {
        Self {
            mantissa: &self.mantissa * &other.mantissa,
            exponent: self.exponent + other.exponent,
        }
    }

    fn add(&self, other: &Self) -> Self {
        let e = self.exponent.min(other.exponent);
        Self {
            mantissa: self.at(e) + other.at(e),
            exponent: e,
        }
    }

    /// Mantissa at a smaller or equal exponent.
    fn at(&self, exponent: i64) -> BigInt {
        &self.mantissa << (self.exponent - exponent) as usize
    }

    #[cfg(test)]
    fn to_f64(&self) -> f64 {
        scaled_f64(&self.mantissa, self.exponent)
    }
}

/// `m * 2^e` rounded to `f64`.
#[cfg(test)]
fn scaled_f64(m: &BigInt, e: i64) -> f64 {
    let extra = m.bits().saturating_sub(62) as i64;
    let top = (m >> extra as usize).to_f64().unwrap_or(0.0);
    let mut e = e + extra;
    let mut v = top;
    // steps keep the intermediate power in range
    while e != 0 {
        let step = e.clamp(-1000, 1000);
        v *= 2f64.powi(step as i32);
        e -= step;
    }
    v
}

fn ratio_f64(a: &BigInt, b: &BigInt) -> f64 {
    let extra = a.bits().max(b.bits()).saturating_sub(900) as usize;
    (a >> extra).to_f64().unwrap_or(0.0) / (b >> extra).to_f64().unwrap_or(1.0)
}

/// Coefficients of `p` in `t = (x - center) / radius`, exactly.
fn scaled_about(p: &Polynomial, center: f64, radius: f64, width: usize) -> Vec<Dyadic> {
    let shift = Dyadic::of(center).add(&Dyadic::of(-p.origin()));
    let mut out = vec![Dyadic::zero(); width];
    for (i, c) in p.coeffs().iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        // c (t r + shift)^i
        let c = Dyadic::of(*c);
        let mut binom: u64 = 1;
        let mut power = Dyadic::integer(1);
        let mut powers = vec![power.clone()];
        for _ in 0..i {
            power = power.mul(&shift);
            powers.push(power.clone());
        }
        for j in 0..=i {
            let term = c.mul(&Dyadic::integer(binom)).mul(&powers[i - j]);
            out[j] = out[j].add(&term);
            binom = binom * (i - j) as u64 / (j + 1) as u64;
        }
    }
    let r = Dyadic::of(radius);
    let mut power = Dyadic::integer(1);
    for v in out.iter_mut() {
        *v = v.mul(&power);
        power = power.mul(&r);
    }
    out
}

/// Fraction-free elimination with row pivoting by magnitude. Returns the
/// pivot rows in order and, for every row, the multipliers of the pivots.
fn bareiss(a: &mut [Vec<BigInt>], cols: usize) -> (Vec<usize>, DMatrix<f64>) {
    let rows = a.len();
    let mut order: Vec<usize> = (0..rows).collect();
    let mut lower = DMatrix::<f64>::zeros(rows, cols);
    let mut pivots = Vec::new();
    let mut prev = BigInt::from(1);
    for col in 0..cols {
        let rank = pivots.len();
        let pivot = (rank..rows)
            .filter(|r| !a[order[*r]][col].is_zero())
            .max_by(|p, q| a[order[*p]][col].magnitude().cmp(a[order[*q]][col].magnitude()));
        let Some(p) = pivot else { continue };
        order.swap(rank, p);
        let pr = order[rank];
        let top = a[pr].clone();
        lower[(pr, rank)] = 1.0;
        for &row in &order[rank + 1..] {
            let lead = a[row][col].clone();
            lower[(row, rank)] = ratio_f64(&lead, &top[col]);
            for k in col + 1..a[row].len() {
                let v = (&top[col] * &a[row][k] - &lead * &top[k]) / &prev;
                a[row][k] = v;
            }
            a[row][col] = BigInt::zero();
        }
        prev = top[col].clone();
        pivots.push(pr);
    }
    (pivots, lower)
}

/// The span of some piecewise polynomials on `[lo, hi]`, kept as
/// coefficient vectors in the scaled local variable `t = (x - c) / r` of
/// each cell between breakpoints.
///
/// The span is found by exact elimination with partial pivoting, so the
/// pieces that cancel between nearly dependent inputs are not lost; only the
/// final orthonormalization is done in floating point.
pub(crate) struct LocalSpan {
    nodes: Vec<f64>,
    cells: Vec<(f64, f64)>,
    width: usize,
    /// Coefficient rows with each column scaled to integers by `2^-shift`.
    integer: Vec<Vec<BigInt>>,
    shifts: Vec<i64>,
    pivots: Vec<usize>,
    q: DMatrix<f64>,
}

impl LocalSpan {
    pub(crate) fn new(functions: &[&PiecewisePoly], lo: f64, hi: f64) -> Self {
        let mut nodes: Vec<f64> = functions
            .iter()
            .flat_map(|g| g.breaks().iter().copied())
            .filter(|b| *b > lo && *b < hi)
            .collect();
        nodes.push(lo);
        nodes.push(hi);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let cells: Vec<(f64, f64)> = nodes
            .windows(2)
            .map(|w| (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0])))
            .collect();
        let width = functions.iter().filter_map(|g| g.max_degree()).max().unwrap_or(0) + 1;
        let n = functions.len();
        let rows = cells.len() * width;
        let mut integer: Vec<Vec<BigInt>> = vec![Vec::with_capacity(n); rows];
        let mut shifts = Vec::with_capacity(n);
        for g in functions {
            let column: Vec<Dyadic> = cells
                .iter()
                .flat_map(|(center, radius)| scaled_about(g.piece_at(*center), *center, *radius, width))
                .collect();
            let shift = column
                .iter()
                .filter(|d| !d.mantissa.is_zero())
                .map(|d| d.exponent)
                .min()
                .unwrap_or(0);
            for (r, d) in column.iter().enumerate() {
                integer[r].push(if d.mantissa.is_zero() { BigInt::zero() } else { d.at(shift) });
            }
            shifts.push(shift);
        }
        // the multipliers of a row-pivoted LU stay within [-1, 1]
        let mut work = integer.clone();
        let (pivots, lower) = bareiss(&mut work, n);
        let q = lower.columns(0, pivots.len()).into_owned().qr().q();
        Self {
            nodes,
            cells,
            width,
            integer,
            shifts,
            pivots,
            q,
        }
    }

    pub(crate) fn dimension(&self) -> usize {
        self.pivots.len()
    }

    /// The function with coefficient vector `v` in scaled local variables.
    pub(crate) fn function(&self, v: &[f64]) -> PiecewisePoly {
        let pieces = self
            .cells
            .iter()
            .enumerate()
            .map(|(c, (center, radius))| {
                let mut scale = 1.0;
                let coeffs = (0..self.width)
                    .map(|l| {
                        let x = v[c * self.width + l] / scale;
                        scale *= radius;
                        x
                    })
                    .collect();
                Polynomial::centered(coeffs, *center)
            })
            .collect();
        PiecewisePoly::new(self.nodes[1..self.nodes.len() - 1].to_vec(), pieces)
    }

    /// Orthonormal coefficient vectors, as functions.
    pub(crate) fn basis(&self) -> Vec<PiecewisePoly> {
        self.q.column_iter().map(|c| self.function(c.as_slice())).collect()
    }

    /// Coefficient vector of `sum d_j basis_j`.
    pub(crate) fn combine(&self, d: &[f64]) -> Vec<f64> {
        (&self.q * nalgebra::DVector::from_column_slice(d)).iter().copied().collect()
    }

    /// Weights of the original functions reproducing `v` on the pivot rows,
    /// solved exactly; `None` when the originals are dependent.
    pub(crate) fn coordinates(&self, v: &[f64]) -> Option<Vec<f64>> {
        let n = self.shifts.len();
        if self.dimension() < n {
            return None;
        }
        // one integer row per pivot, right-hand side appended
        let mut a: Vec<Vec<BigInt>> = self
            .pivots
            .iter()
            .map(|r| {
                let b = Dyadic::of(v[*r]);
                let lift = (-b.exponent).max(0);
                let mut row: Vec<BigInt> = self.integer[*r].iter().map(|x| x << lift as usize).collect();
                row.push(b.at(b.exponent.min(0)));
                row
            })
            .collect();
        let (pivots, _) = bareiss(&mut a, n);
        if pivots.len() < n {
            return None;
        }
        // back substitution on the triangular rows, in pivot order
        let mut x: Vec<BigRational> = vec![BigRational::zero(); n];
        for (col, &r) in pivots.iter().enumerate().rev() {
            let mut acc = BigRational::from_integer(a[r][n].clone());
            for k in col + 1..n {
                acc -= &x[k] * BigRational::from_integer(a[r][k].clone());
            }
            x[col] = acc / BigRational::from_integer(a[r][col].clone());
        }
        Some(
            x.iter()
                .zip(&self.shifts)
                .map(|(c, s)| {
                    // column j was scaled by 2^-s
                    if *s <= 0 {
                        ratio_f64(&(c.numer() << (-s) as usize), c.denom())
                    } else {
                        ratio_f64(c.numer(), &(c.denom() << *s as usize))
                    }
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadics_map_exactly() {
        assert_eq!(of(1.0), 1);
        assert_eq!(mul(of(0.5), 2), 1);
        assert_eq!(add(of(-3.25), of(3.25)), 0);
        assert_eq!(mul(of(0.1), of(10.0)), mul(of(0.1), 10));
        assert_eq!(of(f64::MIN_POSITIVE / 4.0), mul(of(f64::MIN_POSITIVE), inv(4)));
    }

    #[test]
    fn ranks_of_powers() {
        let f: Vec<PiecewisePoly> = (0..4).map(|j| Polynomial::shifted_power(0.3, j).into()).collect();
        let refs: Vec<&PiecewisePoly> = f.iter().collect();
        assert_eq!(rank(&columns(&refs, -1.0, 1.0, false)), 4);
        // odd parts of 1, x - 0.3, (x - 0.3)^2, (x - 0.3)^3 span x and x^3
        assert_eq!(pivot_columns(&columns(&refs, 0.0, 1.0, true)), vec![1, 3]);
        let t = PiecewisePoly::truncated_power(0.5, 2);
        let refs = vec![&t];
        assert_eq!(rank(&columns(&refs, 0.0, 0.5, false)), 0);
        assert_eq!(rank(&columns(&refs, 0.0, 0.75, false)), 1);
    }

    fn scaled_vector(g: &PiecewisePoly, cells: &[(f64, f64)]) -> Vec<f64> {
        cells
            .iter()
            .flat_map(|(c, r)| scaled_about(g.piece_at(*c), *c, *r, 4))
            .map(|v| v.to_f64())
            .collect()
    }

    #[test]
    fn conditioned_basis_keeps_the_span() {
        let h = 1.0 / 1024.0;
        let f: Vec<PiecewisePoly> = (0..4)
            .map(|j| Polynomial::monomial(j).into())
            .chain((2..4).flat_map(|q| [0.5, 0.5 + h].map(|k| PiecewisePoly::truncated_power(k, q))))
            .collect();
        let refs: Vec<&PiecewisePoly> = f.iter().collect();
        let basis = LocalSpan::new(&refs, 0.0, 1.0).basis();
        assert_eq!(basis.len(), 8);
        let cells = [(0.25, 0.25), (0.5 + h / 2.0, h / 2.0), (0.75 + h / 2.0, 0.25 - h / 2.0)];
        let q = DMatrix::from_columns(
            &basis
                .iter()
                .map(|b| nalgebra::DVector::from_vec(scaled_vector(b, &cells)))
                .collect::<Vec<_>>(),
        );
        let gram = q.transpose() * &q;
        assert!((gram - DMatrix::identity(8, 8)).amax() < 1e-12);
        for g in &f {
            let v = nalgebra::DVector::from_vec(scaled_vector(g, &cells));
            let residual = &v - &q * (q.transpose() * &v);
            assert!(residual.amax() <= 1e-12 * v.amax());
        }
    }

    #[test]
    fn coordinates_recover_weights() {
        let f: Vec<PiecewisePoly> = (0..4)
            .map(|j| Polynomial::shifted_power(-1.0, j).into())
            .chain((2..4).map(|q| PiecewisePoly::truncated_power(0.25, q)))
            .collect();
        let refs: Vec<&PiecewisePoly> = f.iter().collect();
        let span = LocalSpan::new(&refs, -1.0, 1.0);
        let weights = [0.5, -1.0, 2.0, 0.25, 3.0, -0.75];
        let terms: Vec<(f64, &PiecewisePoly)> = weights.iter().copied().zip(refs.iter().copied()).collect();
        let g = PiecewisePoly::linear_combination(&terms);
        let cells = [(-0.375, 0.625), (0.625, 0.375)];
        let v: Vec<f64> = cells
            .iter()
            .flat_map(|(c, r)| scaled_about(g.piece_at(*c), *c, *r, 4))
            .map(|x| x.to_f64())
            .collect();
        let w = span.coordinates(&v).unwrap();
        for (a, b) in w.iter().zip(weights) {
            assert!((a - b).abs() < 1e-12, "{w:?}");
        }
        let h = span.function(&v);
        for i in 0..=20 {
            let x = -1.0 + i as f64 / 10.0;
            assert!((h.eval(x) - g.eval(x)).abs() < 1e-12);
        }
    }
}
