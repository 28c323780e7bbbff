use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Square sparse matrix in compressed row storage with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries. Summation order per entry is the order of
    /// appearance in `triplets`, so the result is deterministic.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (i, j, v) = triplets[k];
            assert!(i < n && j < n, "triplet ({i}, {j}) outside {n}x{n}");
            if last == Some((i, j)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &t)
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), &t)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// `b - A x` with compensated summation, so that rows mixing large
    /// and small coefficients do not lose the small ones to cancellation.
    pub fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        assert_eq!(b.len(), self.n);
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                let (mut s, mut c) = (b[i], 0.0);
                for (&j, &a) in cols.iter().zip(vals) {
                    let p = -a * x[j];
                    let e = (-a).mul_add(x[j], -p);
                    let t = s + p;
                    let z = t - s;
                    c += (s - (t - z)) + (p - z) + e;
                    s = t;
                }
                s + c
            })
            .collect()
    }

    /// `x^T A y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                x[i] * cols.iter().zip(vals).map(|(&j, &a)| a * y[j]).sum::<f64>()
            })
            .sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= c);
        m
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                worst = worst.max((a - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                d[(i, j)] = a;
            }
        }
        d
    }

    /// Matrix Market coordinate format, general real.
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(out, "{} {} {}", self.n, self.n, self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, a);
            }
        }
        out
    }

    pub fn write_matrix_market(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_matrix_market()).map_err(Error::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, -1.0)]);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![3.0, 2.0]);
    }

    #[test]
    fn matrix_market_header() {
        let m = CsrMatrix::identity(3);
        let text = m.to_matrix_market();
        assert!(text.starts_with("%%MatrixMarket"));
        assert_eq!(text.lines().count(), 5);
    }
}
