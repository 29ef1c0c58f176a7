//! Weighted L1 regression by a bounded-variable simplex on the dual.
//!
//! `min_c sum_k w_k |b_k - (A c)_k|` has the dual
//! `max_y b^T y` subject to `A^T y = 0`, `|y_k| <= w_k`. The primal
//! coefficients are the simplex multipliers of the optimal dual basis.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::least_squares;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Basic,
    Lower,
    Upper,
}

/// Result of [`weighted_l1_regression`].
#[derive(Debug, Clone)]
pub struct L1Fit {
    pub coefficients: Vec<f64>,
    /// `sum_k w_k |b_k - (A c)_k|`.
    pub objective: f64,
    pub iterations: usize,
}

struct Simplex<'a> {
    a: &'a DMatrix<f64>,
    signs: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    inverse: DMatrix<f64>,
    iterations: usize,
    pivots_since_refactor: usize,
}

// residuals below this (relative to the data) are rounding noise
const PRICE_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;
const REFACTOR_EVERY: usize = 64;

impl Simplex<'_> {
    fn rows(&self) -> usize {
        self.a.nrows()
    }

    fn width(&self) -> usize {
        self.a.ncols()
    }

    /// Constraint column of variable `j` (data rows first, then artificials).
    fn column(&self, j: usize) -> DVector<f64> {
        let k = self.rows();
        if j < k {
            self.a.row(j).transpose()
        } else {
            let mut e = DVector::zeros(self.width());
            e[j - k] = self.signs[j - k];
            e
        }
    }

    fn dot_column(&self, v: &DVector<f64>, j: usize) -> f64 {
        let k = self.rows();
        if j < k {
            self.a.row(j).iter().zip(v.iter()).map(|(p, q)| p * q).sum()
        } else {
            v[j - k] * self.signs[j - k]
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let n = self.width();
        let mut b = DMatrix::zeros(n, n);
        for (i, j) in self.basis.iter().enumerate() {
            b.set_column(i, &self.column(*j));
        }
        self.inverse = b
            .try_inverse()
            .ok_or_else(|| Error::LpFailure("basis became singular".into()))?;
        // recompute basic values from the nonbasic ones
        let mut rhs = DVector::zeros(n);
        for j in 0..self.x.len() {
            if self.status[j] != Status::Basic && self.x[j] != 0.0 {
                rhs -= self.column(j) * self.x[j];
            }
        }
        let xb = &self.inverse * rhs;
        for (i, j) in self.basis.iter().enumerate() {
            self.x[*j] = xb[i];
        }
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn multipliers(&self, cost: &[f64]) -> DVector<f64> {
        let cb = DVector::from_iterator(self.width(), self.basis.iter().map(|j| cost[*j]));
        self.inverse.transpose() * cb
    }

    /// Maximizes `cost^T x` from the current basic feasible point.
    fn optimize(&mut self, cost: &[f64], max_iterations: usize) -> Result<()> {
        let scale = cost.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
        let tol = PRICE_TOL * scale;
        let mut degenerate_run = 0usize;
        let mut last_value = self.objective(cost);
        loop {
            if self.iterations >= max_iterations {
                return Err(Error::LpFailure(format!("no optimum after {max_iterations} iterations")));
            }
            let pi = self.multipliers(cost);
            let bland = degenerate_run > 50;
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.x.len() {
                let dir = match self.status[j] {
                    Status::Basic => continue,
                    _ if self.hi[j] <= self.lo[j] => continue,
                    Status::Lower => 1.0,
                    Status::Upper => -1.0,
                };
                let d = cost[j] - self.dot_column(&pi, j);
                if d * dir > tol {
                    if bland {
                        entering = Some((j, dir, d));
                        break;
                    }
                    if entering.is_none_or(|(_, _, best)| d.abs() > best.abs()) {
                        entering = Some((j, dir, d));
                    }
                }
            }
            let Some((j, dir, _)) = entering else {
                return Ok(());
            };
            self.iterations += 1;

            let alpha = &self.inverse * self.column(j);
            let mut step = self.hi[j] - self.lo[j];
            let mut leaving: Option<usize> = None;
            for (i, b) in self.basis.iter().enumerate() {
                let rate = -dir * alpha[i];
                if rate.abs() <= PIVOT_TOL {
                    continue;
                }
                let room = if rate < 0.0 {
                    (self.x[*b] - self.lo[*b]).max(0.0) / -rate
                } else {
                    (self.hi[*b] - self.x[*b]).max(0.0) / rate
                };
                let better = match leaving {
                    None => room < step,
                    Some(l) => {
                        room < step - 1e-14
                            || (room <= step + 1e-14
                                && if bland {
                                    *b < self.basis[l]
                                } else {
                                    alpha[i].abs() > alpha[l].abs()
                                })
                    }
                };
                if better {
                    step = room;
                    leaving = Some(i);
                }
            }
            if !step.is_finite() {
                return Err(Error::LpFailure("unbounded direction".into()));
            }

            for (i, b) in self.basis.iter().enumerate() {
                self.x[*b] -= dir * step * alpha[i];
            }
            self.x[j] += dir * step;
            match leaving {
                None => {
                    self.status[j] = if dir > 0.0 { Status::Upper } else { Status::Lower };
                    self.x[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
                }
                Some(r) => {
                    let out = self.basis[r];
                    let to_lower = -dir * alpha[r] < 0.0;
                    self.status[out] = if to_lower { Status::Lower } else { Status::Upper };
                    self.x[out] = if to_lower { self.lo[out] } else { self.hi[out] };
                    self.pivot(r, j, &alpha)?;
                }
            }
            // progress is judged on the objective itself; once Bland's rule
            // kicks in it stays on
            let value = self.objective(cost);
            if value - last_value <= 1e-14 * value.abs().max(1.0) {
                degenerate_run += 1;
            } else if !bland {
                degenerate_run = 0;
            }
            last_value = value;
        }
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    fn pivot(&mut self, r: usize, j: usize, alpha: &DVector<f64>) -> Result<()> {
        self.basis[r] = j;
        self.status[j] = Status::Basic;
        let p = alpha[r];
        let row: Vec<f64> = self.inverse.row(r).iter().map(|v| v / p).collect();
        for i in 0..self.width() {
            let factor = if i == r { 0.0 } else { alpha[i] };
            for (c, v) in row.iter().enumerate() {
                if i == r {
                    self.inverse[(i, c)] = *v;
                } else if factor != 0.0 {
                    self.inverse[(i, c)] -= factor * v;
                }
            }
        }
        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }
}

/// Minimizes `sum_k w_k |b_k - (A c)_k|` over `c`.
///
/// `A` needs full column rank; weights must be positive.
pub fn weighted_l1_regression(a: &DMatrix<f64>, b: &[f64], w: &[f64]) -> Result<L1Fit> {
    let (k, n) = a.shape();
    if k < n {
        return Err(Error::InvalidArgument("fewer data points than coefficients".into()));
    }
    // the fit is basis independent, so solve it for orthonormal columns
    let qr = a.clone().qr();
    let r = qr.r();
    let rmax = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= 1e-13 * rmax) {
        return Err(Error::LpFailure("design matrix is rank deficient".into()));
    }
    let q = qr.q();
    let mut fit = l1_simplex(&q, b, w)?;
    let y = DVector::from_column_slice(&fit.coefficients);
    let c = r
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::LpFailure("design matrix is rank deficient".into()))?;
    fit.coefficients = c.iter().copied().collect();
    Ok(fit)
}

fn l1_simplex(a: &DMatrix<f64>, b: &[f64], w: &[f64]) -> Result<L1Fit> {
    let (k, n) = a.shape();
    if b.len() != k || w.len() != k {
        return Err(Error::InvalidArgument("data and weight lengths must match the rows".into()));
    }
    if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("weights must be positive".into()));
    }
    if k < n {
        return Err(Error::InvalidArgument("fewer data points than coefficients".into()));
    }

    // warm start: nonbasic duals at the bounds picked by least-squares residual signs
    let ls = least_squares(a, b);
    let fit = a * DVector::from_column_slice(&ls);
    let total = k + n;
    let mut lo = Vec::with_capacity(total);
    let mut hi = Vec::with_capacity(total);
    let mut x = Vec::with_capacity(total);
    let mut status = Vec::with_capacity(total);
    for i in 0..k {
        lo.push(-w[i]);
        hi.push(w[i]);
        if b[i] - fit[i] >= 0.0 {
            x.push(w[i]);
            status.push(Status::Upper);
        } else {
            x.push(-w[i]);
            status.push(Status::Lower);
        }
    }
    let mut imbalance = DVector::<f64>::zeros(n);
    for i in 0..k {
        imbalance += a.row(i).transpose() * x[i];
    }
    let signs: Vec<f64> = imbalance.iter().map(|v| if *v > 0.0 { -1.0 } else { 1.0 }).collect();
    for v in imbalance.iter() {
        lo.push(0.0);
        hi.push(f64::INFINITY);
        x.push(v.abs());
        status.push(Status::Basic);
    }
    let mut inverse = DMatrix::zeros(n, n);
    for i in 0..n {
        inverse[(i, i)] = signs[i];
    }
    let mut lp = Simplex {
        a,
        signs,
        lo,
        hi,
        x,
        status,
        basis: (k..total).collect(),
        inverse,
        iterations: 0,
        pivots_since_refactor: 0,
    };
    let max_iterations = 50 * total + 1000;

    let phase_one: Vec<f64> = (0..total).map(|j| if j < k { 0.0 } else { -1.0 }).collect();
    lp.optimize(&phase_one, max_iterations)?;
    let infeasibility: f64 = lp.x[k..].iter().sum();
    let scale = w.iter().sum::<f64>() * a.amax().max(1.0);
    if infeasibility > 1e-9 * scale {
        return Err(Error::LpFailure(format!("phase one ended with infeasibility {infeasibility:e}")));
    }
    for j in k..total {
        lp.hi[j] = 0.0;
        if lp.status[j] != Status::Basic {
            lp.x[j] = 0.0;
            lp.status[j] = Status::Lower;
        }
    }
    // drive basic artificials out with degenerate pivots
    for r in 0..n {
        if lp.basis[r] < k {
            continue;
        }
        let row = lp.inverse.row(r).transpose();
        let candidate = (0..k)
            .filter(|j| lp.status[*j] != Status::Basic)
            .map(|j| (j, lp.dot_column(&row, j)))
            .max_by(|p, q| p.1.abs().total_cmp(&q.1.abs()));
        match candidate {
            Some((j, v)) if v.abs() > PIVOT_TOL => {
                let alpha = &lp.inverse * lp.column(j);
                let out = lp.basis[r];
                lp.status[out] = Status::Lower;
                lp.x[out] = 0.0;
                lp.pivot(r, j, &alpha)?;
            }
            _ => return Err(Error::LpFailure("design matrix is rank deficient".into())),
        }
    }
    lp.refactor()?;

    let phase_two: Vec<f64> = (0..total).map(|j| if j < k { b[j] } else { 0.0 }).collect();
    lp.optimize(&phase_two, max_iterations)?;
    lp.refactor()?;
    let coefficients: Vec<f64> = lp.multipliers(&phase_two).iter().copied().collect();
    let fitted = a * DVector::from_column_slice(&coefficients);
    let objective = (0..k).map(|i| w[i] * (b[i] - fitted[i]).abs()).sum();
    Ok(L1Fit {
        coefficients,
        objective,
        iterations: lp.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_is_the_l1_constant() {
        let a = DMatrix::from_element(5, 1, 1.0);
        let fit = weighted_l1_regression(&a, &[3.0, -1.0, 10.0, 2.0, 2.5], &[1.0; 5]).unwrap();
        assert!((fit.coefficients[0] - 2.5).abs() < 1e-12);
        assert!((fit.objective - (0.5 + 3.5 + 7.5 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn exact_fit_is_recovered() {
        let xs: Vec<f64> = (0..40).map(|i| -1.0 + i as f64 / 20.0).collect();
        let a = DMatrix::from_fn(40, 3, |i, j| xs[i].powi(j as i32));
        let b: Vec<f64> = xs.iter().map(|x| 1.0 - 2.0 * x + 0.5 * x * x).collect();
        let fit = weighted_l1_regression(&a, &b, &[0.05; 40]).unwrap();
        for (c, e) in fit.coefficients.iter().zip([1.0, -2.0, 0.5]) {
            assert!((c - e).abs() < 1e-10);
        }
        assert!(fit.objective < 1e-12);
    }

    #[test]
    fn brute_force_line() {
        // the optimal L1 line passes through two data points
        let pts = [(0.0, 1.0), (1.0, 2.5), (2.0, 2.0), (3.0, 5.0), (4.0, 4.2), (5.0, 7.0)];
        let a = DMatrix::from_fn(6, 2, |i, j| if j == 0 { 1.0 } else { pts[i].0 });
        let b: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let fit = weighted_l1_regression(&a, &b, &[1.0; 6]).unwrap();
        let mut best = f64::INFINITY;
        for p in 0..6 {
            for q in p + 1..6 {
                let slope = (pts[q].1 - pts[p].1) / (pts[q].0 - pts[p].0);
                let icpt = pts[p].1 - slope * pts[p].0;
                let obj: f64 = pts.iter().map(|(x, y)| (y - icpt - slope * x).abs()).sum();
                best = best.min(obj);
            }
        }
        assert!((fit.objective - best).abs() < 1e-12, "{} vs {best}", fit.objective);
    }
}
