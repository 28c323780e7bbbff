//! Dense reference implementation of the preconditioners for testing.
//!
//! Every subspace is represented by explicit basis vectors in the finest
//! nodal basis. The hats of `T_{j-1}` are obtained from those of `T_j` by
//! `phi_l += phi_p / 2`, `phi_r += phi_p / 2`, starting from unit vectors on
//! `T_N`. Local matrices are Galerkin products `E^T A E`, and the V-cycle is
//! plain successive subspace correction over the subspace list. Work is
//! quadratic or worse in the dof count.

use nalgebra::{DMatrix, DVector};

use super::{Smoother, SubspaceKind};
use crate::error::{Error, Result};
use crate::fem::{DofMap, SparseOperator};
use crate::hierarchy::BisectionSequence;

pub struct ReferenceSpaces {
    a: DMatrix<f64>,
    /// Coarse basis, then three-point bases in replay order.
    bases: Vec<(SubspaceKind, DMatrix<f64>)>,
    nodal: bool,
    pub bpx_smoother: Smoother,
    pub vcycle_smoother: Smoother,
}

impl ReferenceSpaces {
    pub fn new(seq: &BisectionSequence, dofs: &DofMap, a: &SparseOperator) -> Result<Self> {
        let n = dofs.num_dofs();
        if a.dim() != n {
            return Err(Error::Dimension {
                expected: n,
                got: a.dim(),
            });
        }
        let nv = dofs.num_vertices();
        let mut hats: Vec<DVector<f64>> = (0..nv)
            .map(|v| {
                let mut h = DVector::zeros(n);
                if let Some(d) = dofs.dof(v) {
                    h[d] = 1.0;
                }
                h
            })
            .collect();
        let mut threepoint = Vec::with_capacity(seq.len());
        for item in seq.items.iter().rev() {
            let (p, [l, r]) = (item.midpoint, item.endpoints);
            let members: Vec<usize> = [p, l, r].into_iter().filter(|&v| dofs.dof(v).is_some()).collect();
            let mut e = DMatrix::zeros(n, members.len());
            for (c, &v) in members.iter().enumerate() {
                e.set_column(c, &hats[v]);
            }
            threepoint.push(e);
            let hp = hats[p].clone();
            hats[l] += &hp * 0.5;
            hats[r] += &hp * 0.5;
        }
        threepoint.reverse();

        let coarse: Vec<usize> = (0..seq.source.num_vertices()).filter(|&v| dofs.dof(v).is_some()).collect();
        let mut e0 = DMatrix::zeros(n, coarse.len());
        for (c, &v) in coarse.iter().enumerate() {
            e0.set_column(c, &hats[v]);
        }
        let mut bases = vec![(SubspaceKind::Coarse, e0)];
        bases.extend(threepoint.into_iter().map(|e| (SubspaceKind::ThreePoint, e)));
        Ok(ReferenceSpaces {
            a: a.to_dense(),
            bases,
            nodal: true,
            bpx_smoother: Smoother::Jacobi,
            vcycle_smoother: Smoother::ExactLocal,
        })
    }

    /// Basis vectors of the coarse space and each three-point space.
    pub fn bases(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.bases.iter().map(|(_, e)| e)
    }

    fn local_inverse(&self, kind: SubspaceKind, e: &DMatrix<f64>, smoother: Smoother) -> Result<DMatrix<f64>> {
        let m = e.transpose() * &self.a * e;
        if m.nrows() == 0 {
            return Ok(m);
        }
        if kind == SubspaceKind::ThreePoint && smoother == Smoother::Jacobi {
            return Ok(DMatrix::from_diagonal(&m.diagonal().map(|d| 1.0 / d)));
        }
        m.cholesky().map(|c| c.inverse()).ok_or(Error::NotPositiveDefinite)
    }

    /// `sum_i E_i R_i E_i^T` with Jacobi on the finest nodal spaces.
    pub fn bpx_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.a.nrows();
        let mut b = DMatrix::zeros(n, n);
        for (kind, e) in &self.bases {
            let r = self.local_inverse(*kind, e, self.bpx_smoother)?;
            b += e * r * e.transpose();
        }
        if self.nodal {
            for i in 0..n {
                b[(i, i)] += 1.0 / self.a[(i, i)];
            }
        }
        Ok(b)
    }

    /// Matrix of one symmetric successive subspace correction sweep.
    pub fn vcycle_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.a.nrows();
        // (E, R, A E) per correction step, in sweep order
        let mut steps: Vec<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> = Vec::new();
        let mut unit = |i: usize| {
            let mut e = DMatrix::zeros(n, 1);
            e[(i, 0)] = 1.0;
            let ae = &self.a * &e;
            (e, DMatrix::from_element(1, 1, 1.0 / self.a[(i, i)]), ae)
        };
        let nodal_fwd: Vec<_> = if self.nodal { (0..n).map(&mut unit).collect() } else { Vec::new() };
        let nodal_bwd: Vec<_> = if self.nodal { (0..n).rev().map(&mut unit).collect() } else { Vec::new() };
        let mut spaces = Vec::with_capacity(self.bases.len());
        for (kind, e) in &self.bases {
            let r = self.local_inverse(*kind, e, self.vcycle_smoother)?;
            spaces.push((e.clone(), r, &self.a * e));
        }
        steps.extend(nodal_fwd);
        steps.extend(spaces[1..].iter().rev().cloned());
        steps.push(spaces[0].clone());
        steps.extend(spaces[1..].iter().cloned());
        steps.extend(nodal_bwd);

        let mut b = DMatrix::zeros(n, n);
        for k in 0..n {
            let mut u = DVector::zeros(n);
            let mut res = DVector::zeros(n);
            res[k] = 1.0;
            for (e, r, ae) in &steps {
                if e.ncols() == 0 {
                    continue;
                }
                let c = r * (e.transpose() * &res);
                u += e * &c;
                res -= ae * &c;
            }
            b.set_column(k, &u);
        }
        Ok(b)
    }
}
