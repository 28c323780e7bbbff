//! Conjugate gradients, preconditioned conjugate gradients and stationary
//! iteration, all stopped on the relative energy norm of the last increment,
//! `|u_k - u_{k-1}|_A / |u_k|_A <= tol`.
//!
//! Besides that test, an iteration also stops once `r^T B r` has dropped to
//! `(1e-3 tol |u_k|_A)^2`: the residual is then at rounding level and any
//! further increment would be noise. This is what lets an exact
//! preconditioner finish in one step.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::SparseOperator;
use crate::precond::{Identity, Preconditioner};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAXIT: usize = 1000;

const RESIDUAL_FACTOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `|u_k - u_{k-1}|_A / |u_k|_A`.
    pub increment_ratio: f64,
    /// Euclidean norm of the residual after step `k`.
    pub residual_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
    /// Seconds.
    pub wall_time: f64,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    /// Columns `k,increment_ratio,residual_norm`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("k,increment_ratio,residual_norm\n");
        for h in &self.history {
            let _ = writeln!(out, "{},{:e},{:e}", h.k, h.increment_ratio, h.residual_norm);
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_shapes(a: &SparseOperator, b: &[f64], x0: &[f64]) -> Result<()> {
    for len in [b.len(), x0.len()] {
        if len != a.dim() {
            return Err(Error::Dimension {
                expected: a.dim(),
                got: len,
            });
        }
    }
    Ok(())
}

/// Preconditioned conjugate gradients.
pub fn pcg(
    a: &SparseOperator,
    b: &[f64],
    prec: &dyn Preconditioner,
    x0: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    pcg_observed(a, b, prec, x0, tol, maxit, &mut |_, _| {})
}

/// [`pcg`] calling `observer(k, u_k)` for `k = 0` and after every step.
pub fn pcg_observed(
    a: &SparseOperator,
    b: &[f64],
    prec: &dyn Preconditioner,
    x0: &[f64],
    tol: f64,
    maxit: usize,
    observer: &mut dyn FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, SolveReport)> {
    check_shapes(a, b, x0)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let start = Instant::now();
    let n = a.dim();
    let mut x = x0.to_vec();
    let mut ax = a.mul_vec(&x);
    let mut r = a.residual(b, &x);
    let mut z = prec.apply(&r);
    let mut rz = dot(&r, &z);
    observer(0, &x);
    let mut history = Vec::new();
    let mut converged = rz == 0.0;
    if rz.is_nan() {
        return Err(Error::Breakdown {
            iteration: 0,
            reason: "NaN in initial residual".into(),
        });
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut k = 0;
    while !converged && k < maxit {
        k += 1;
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Breakdown {
                iteration: k,
                reason: format!("curvature p^T A p = {pap:e}"),
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            ax[i] += alpha * ap[i];
        }
        // the true residual: the updated one drifts by the coefficient jump
        r = a.residual(b, &x);
        let xnorm = dot(&x, &ax).max(0.0).sqrt();
        let ratio = alpha.abs() * pap.sqrt() / xnorm;
        history.push(IterationRecord {
            k,
            increment_ratio: ratio,
            residual_norm: norm(&r),
        });
        observer(k, &x);
        if ratio.is_nan() {
            return Err(Error::Breakdown {
                iteration: k,
                reason: "NaN in iterate".into(),
            });
        }
        if ratio <= tol {
            converged = true;
            break;
        }
        z = prec.apply(&r);
        let rz_new = dot(&r, &z);
        if rz_new.abs() <= (RESIDUAL_FACTOR * tol * xnorm).powi(2) {
            converged = true;
            break;
        }
        if rz.abs() < 1e-300 {
            return Err(Error::Breakdown {
                iteration: k,
                reason: format!("r^T B r = {rz:e}"),
            });
        }
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
    }
    Ok((
        x,
        SolveReport {
            iterations: k,
            converged,
            history,
            wall_time: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Unpreconditioned conjugate gradients.
pub fn cg(a: &SparseOperator, b: &[f64], x0: &[f64], tol: f64, maxit: usize) -> Result<(Vec<f64>, SolveReport)> {
    pcg(a, b, &Identity, x0, tol, maxit)
}

/// `u <- u + B (b - A u)` with the same stopping rule. Stops unconverged if
/// an increment grows beyond ten times the first one.
pub fn stationary_iterate(
    a: &SparseOperator,
    b: &[f64],
    prec: &dyn Preconditioner,
    x0: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    stationary_observed(a, b, prec, x0, tol, maxit, &mut |_, _| {})
}

/// [`stationary_iterate`] calling `observer(k, u_k)` for `k = 0` and after
/// every step.
pub fn stationary_observed(
    a: &SparseOperator,
    b: &[f64],
    prec: &dyn Preconditioner,
    x0: &[f64],
    tol: f64,
    maxit: usize,
    observer: &mut dyn FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, SolveReport)> {
    check_shapes(a, b, x0)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let start = Instant::now();
    let n = a.dim();
    let mut x = x0.to_vec();
    let mut ax = a.mul_vec(&x);
    let mut ad = vec![0.0; n];
    let mut history = Vec::new();
    let mut converged = false;
    let mut first_increment = None;
    let mut k = 0;
    observer(0, &x);
    loop {
        let r = a.residual(b, &x);
        let d = prec.apply(&r);
        let rd = dot(&r, &d);
        if rd.is_nan() {
            return Err(Error::Breakdown {
                iteration: k,
                reason: "NaN in residual".into(),
            });
        }
        let xnorm = dot(&x, &ax).max(0.0).sqrt();
        if rd.abs() <= (RESIDUAL_FACTOR * tol * xnorm).powi(2) {
            converged = true;
            break;
        }
        if k == maxit {
            break;
        }
        k += 1;
        a.matvec(&d, &mut ad);
        for i in 0..n {
            x[i] += d[i];
            ax[i] += ad[i];
        }
        let increment = dot(&d, &ad).max(0.0).sqrt();
        let xnorm = dot(&x, &ax).max(0.0).sqrt();
        let ratio = increment / xnorm;
        history.push(IterationRecord {
            k,
            increment_ratio: ratio,
            residual_norm: norm(&r),
        });
        observer(k, &x);
        if ratio.is_nan() {
            return Err(Error::Breakdown {
                iteration: k,
                reason: "NaN in iterate".into(),
            });
        }
        if ratio <= tol {
            converged = true;
            break;
        }
        let first = *first_increment.get_or_insert(increment);
        if increment > 10.0 * first {
            log::warn!("stationary iteration diverges at step {k}");
            break;
        }
    }
    Ok((
        x,
        SolveReport {
            iterations: k,
            converged,
            history,
            wall_time: start.elapsed().as_secs_f64(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::CsrMatrix;

    #[test]
    fn two_eigenvalues_two_steps() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0]);
        let (x, rep) = cg(&a, &[1.0, 1.0], &[0.0, 0.0], 1e-10, 100).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 2);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs_needs_no_iterations() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0]);
        let (x, rep) = cg(&a, &[0.0, 0.0], &[0.0, 0.0], 1e-10, 100).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
        assert_eq!(x, vec![0.0, 0.0]);
        let (_, rep) = stationary_iterate(&a, &[0.0, 0.0], &Identity, &[0.0, 0.0], 1e-10, 100).unwrap();
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn indefinite_matrix_breaks_down() {
        let a = CsrMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            cg(&a, &[0.0, 1.0], &[0.0, 0.0], 1e-10, 100),
            Err(Error::Breakdown { .. })
        ));
    }

    #[test]
    fn history_csv_has_one_line_per_step() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        let (_, rep) = cg(&a, &[1.0, 1.0, 1.0], &[0.0; 3], 1e-10, 100).unwrap();
        assert_eq!(rep.history.len(), rep.iterations);
        assert_eq!(rep.history_csv().lines().count(), rep.iterations + 1);
    }
}
