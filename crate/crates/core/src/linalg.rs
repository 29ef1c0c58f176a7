//! Small dense linear algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solution of a square system plus conditioning information.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    /// Reciprocal 1-norm condition number of the column-equilibrated matrix.
    pub rcond: f64,
}

/// Systems with a smaller reciprocal condition number are treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-15;

fn column_scales(m: &DMatrix<f64>) -> Vec<f64> {
    m.column_iter()
        .map(|c| {
            let s = c.amax();
            if s > 0.0 {
                1.0 / s
            } else {
                1.0
            }
        })
        .collect()
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `A x = b` with column equilibration, LU with partial pivoting and
/// one step of iterative refinement.
pub fn solve_square(a: &DMatrix<f64>, b: &[f64]) -> Result<SolveReport> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square system expected");
    assert_eq!(n, b.len(), "right-hand side length mismatch");
    let scales = column_scales(a);
    let mut scaled = a.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    let lu = scaled.clone().lu();
    let inverse = lu
        .try_inverse()
        .ok_or(Error::SingularCollocation { rcond: 0.0 })?;
    let rcond = 1.0 / (one_norm(&scaled) * one_norm(&inverse));
    if !rcond.is_finite() || rcond < SINGULAR_RCOND {
        return Err(Error::SingularCollocation {
            rcond: if rcond.is_finite() { rcond } else { 0.0 },
        });
    }
    let rhs = DVector::from_column_slice(b);
    let mut y = lu
        .solve(&rhs)
        .ok_or(Error::SingularCollocation { rcond })?;
    let residual = &rhs - &scaled * &y;
    if let Some(correction) = lu.solve(&residual) {
        y += correction;
    }
    let solution = y.iter().zip(&scales).map(|(v, s)| v * s).collect();
    Ok(SolveReport { solution, rcond })
}

/// Numerical rank after column equilibration (singular values below
/// `rel_tol * sigma_max` count as zero).
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let mut scaled = a.clone();
    for (j, s) in column_scales(a).iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    let sv = scaled.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * max).count()
}

/// Minimum-norm least-squares solution of `A x ~ b`.
pub fn least_squares(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let svd = a.clone().svd(true, true);
    let rhs = DVector::from_column_slice(b);
    let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    svd.solve(&rhs, 1e-13 * max.max(f64::MIN_POSITIVE))
        .map(|x| x.iter().copied().collect())
        .unwrap_or_else(|_| vec![0.0; a.ncols()])
}
