//! Spectra of preconditioned operators `BA`, condition numbers and the
//! PCG convergence bound with `m` small outliers.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::SparseOperator;
use crate::precond::Preconditioner;

/// Smallest ratio `lambda_{j+1} / lambda_j` counted as a gap.
pub const GAP_RATIO: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumMethod {
    Dense,
    Lanczos,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub method: SpectrumMethod,
    /// Number of eigenvalues below the largest gap in the lower half, or 0
    /// if that gap is smaller than [`GAP_RATIO`].
    pub m_candidates: usize,
}

impl SpectrumReport {
    pub fn new(mut eigenvalues: Vec<f64>, method: SpectrumMethod) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let m_candidates = detect_gap(&eigenvalues);
        SpectrumReport {
            eigenvalues,
            method,
            m_candidates,
        }
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    /// One eigenvalue per line, full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eigenvalue\n");
        for l in &self.eigenvalues {
            let _ = writeln!(out, "{l:e}");
        }
        out
    }
}

/// Largest ratio `lambda_{j+1}/lambda_j` over `j` below the median index;
/// returns `j + 1` if it reaches [`GAP_RATIO`], else 0.
pub fn detect_gap(ascending: &[f64]) -> usize {
    let n = ascending.len();
    let mut best = (0.0, 0);
    for j in 0..n / 2 {
        if j + 1 >= n || ascending[j] <= 0.0 {
            continue;
        }
        let ratio = ascending[j + 1] / ascending[j];
        if ratio > best.0 {
            best = (ratio, j + 1);
        }
    }
    if best.0 >= GAP_RATIO {
        best.1
    } else {
        0
    }
}

/// Eigenvalues of `BA` as those of `L^T B L` with `A = L L^T`.
pub fn dense_spectrum(a: &SparseOperator, b: &DMatrix<f64>) -> Result<SpectrumReport> {
    let n = a.dim();
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: b.nrows(),
        });
    }
    // diagonal scaling keeps the coefficient jump out of the factorization
    let d = a.diagonal();
    if d.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    let s: Vec<f64> = d.iter().map(|x| x.sqrt()).collect();
    let mut ad = a.to_dense();
    let mut bd = b.clone();
    for j in 0..n {
        for i in 0..n {
            ad[(i, j)] /= s[i] * s[j];
            bd[(i, j)] *= s[i] * s[j];
        }
    }
    let chol = ad.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let m = l.transpose() * bd * &l;
    let sym = (&m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    Ok(SpectrumReport::new(eig.iter().copied().collect(), SpectrumMethod::Dense))
}

/// Lanczos on `BA` in the `A` inner product with full reorthogonalization.
/// Returns the `k` smallest and `k` largest Ritz values after at most
/// `iters` steps (all Ritz values if there are fewer than `2k`).
pub fn lanczos_extremes(
    a: &SparseOperator,
    b: &dyn Preconditioner,
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<SpectrumReport> {
    if k == 0 || iters == 0 {
        return Err(Error::InvalidArgument("Lanczos needs k >= 1 and iters >= 1".into()));
    }
    let ritz = lanczos_ritz(a, b, iters, seed)?;
    let values = if ritz.len() <= 2 * k {
        ritz
    } else {
        let mut v = ritz[..k].to_vec();
        v.extend_from_slice(&ritz[ritz.len() - k..]);
        v
    };
    Ok(SpectrumReport::new(values, SpectrumMethod::Lanczos))
}

/// All Ritz values of `iters` Lanczos steps, ascending.
pub fn lanczos_ritz(a: &SparseOperator, b: &dyn Preconditioner, iters: usize, seed: u64) -> Result<Vec<f64>> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::InvalidArgument("empty operator".into()));
    }
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut av = a.mul_vec(&v);
    let nrm = dot(&v, &av).sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
    av.iter_mut().for_each(|x| *x /= nrm);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut abasis: Vec<Vec<f64>> = Vec::new();
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    for _ in 0..iters.min(n) {
        let mut w = b.apply(&av);
        let alpha = dot(&w, &av);
        basis.push(v);
        abasis.push(av);
        alphas.push(alpha);
        for _ in 0..2 {
            for (q, aq) in basis.iter().zip(&abasis) {
                let c = dot(&w, aq);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let aw = a.mul_vec(&w);
        let beta2 = dot(&w, &aw);
        if !beta2.is_finite() {
            return Err(Error::Breakdown {
                iteration: alphas.len(),
                reason: "non-finite Lanczos vector".into(),
            });
        }
        let beta = beta2.max(0.0).sqrt();
        if beta <= 1e-12 * alpha.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        betas.push(beta);
        v = w.iter().map(|x| x / beta).collect();
        av = aw.iter().map(|x| x / beta).collect();
    }
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let mut ritz: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
    ritz.sort_by(f64::total_cmp);
    Ok(ritz)
}

/// `(kappa, kappa_m)` with `kappa = lambda_max / lambda_min` and
/// `kappa_m = lambda_max / lambda_{m+1}`.
pub fn condition_numbers(spec: &SpectrumReport, m: usize) -> Result<(f64, f64)> {
    let len = spec.eigenvalues.len();
    if m >= len {
        return Err(Error::SpectrumIndex { m, len });
    }
    Ok((spec.max() / spec.min(), spec.max() / spec.eigenvalues[m]))
}

/// `2 (kappa - 1)^m ((sqrt(kappa_m) - 1) / (sqrt(kappa_m) + 1))^(k - m)`.
pub fn pcg_bound(spec: &SpectrumReport, m: usize, k: usize) -> Result<f64> {
    if k <= m {
        return Err(Error::InvalidArgument(format!("bound needs k > m, got k = {k}, m = {m}")));
    }
    let (kappa, kappa_m) = condition_numbers(spec, m)?;
    let s = kappa_m.sqrt();
    let rate = (s - 1.0) / (s + 1.0);
    Ok(2.0 * (kappa - 1.0).powi(m as i32) * rate.powi((k - m) as i32))
}

/// `prod_{i <= m} |1 - lambda_n / lambda_i|`.
pub fn k_factor(spec: &SpectrumReport, m: usize) -> Result<f64> {
    let len = spec.eigenvalues.len();
    if m > len {
        return Err(Error::SpectrumIndex { m, len });
    }
    let top = spec.max();
    Ok(spec.eigenvalues[..m].iter().map(|l| (1.0 - top / l).abs()).product())
}
