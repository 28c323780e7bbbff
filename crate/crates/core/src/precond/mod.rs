//! Local multilevel preconditioners on the three-point space decomposition.
//!
//! The decomposition of a bisection grid `T_N = T_0 + b_1 + ... + b_N` gives
//! one coarse space on `T_0`, one three-point space per bisection `b_j`
//! (hats of `T_j` at the new vertex `p_j` and the endpoints `l_j`, `r_j` of the
//! bisected edge) and the nodal spaces of `T_N`.
//!
//! Setup eliminates the new vertices from the fine stiffness matrix in
//! reverse replay order. Eliminating `p_j` is the Galerkin product with the
//! prolongation `T_{j-1} -> T_j`, so just before it the working matrix is the
//! stiffness matrix `A^(j)` of `T_j` and its `{p_j, l_j, r_j}` block is exactly
//! `A|V_j`. The relevant columns of `A^(j)` are kept, which lets both
//! preconditioners run on level-local residuals: restriction adds half of the
//! residual at `p_j` to `l_j` and `r_j`, prolongation sets `w(p_j)` to the mean
//! of `w(l_j)` and `w(r_j)`. An apply costs `O(n + N)` for BPX and
//! `O(nnz(A) + N)` for the V-cycle.

pub mod reference;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{DofMap, SparseOperator};
use crate::hierarchy::{BisectionSequence, LevelGrouping};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubspaceKind {
    Coarse,
    ThreePoint,
    FinestNodal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoother {
    ExactLocal,
    Jacobi,
    GaussSeidel,
}

/// Additive or multiplicative use of the decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cycle {
    Bpx,
    VCycle,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubspaceBasis {
    pub kind: SubspaceKind,
    /// Dofs of the subspace. For a three-point space these are `p, l, r` in
    /// that order with Dirichlet vertices left out, so the list may be empty
    /// when the bisected edge lies on the Dirichlet boundary.
    pub dof_ids: Vec<usize>,
    /// 0 for the coarse space, the level group for three-point spaces and
    /// `L' + 1` for nodal spaces.
    pub level: usize,
}

/// Work counters of preconditioner applications.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ApplyLog {
    pub applies: usize,
    /// Local solves on three-point spaces.
    pub local_solves: usize,
    /// Nodal smoothing steps on the finest level.
    pub nodal_updates: usize,
    pub coarse_solves: usize,
    /// Multiply-adds outside the dense coarse solve.
    pub inner_work: usize,
}

#[derive(Clone, Debug)]
struct LocalSpace {
    /// `[p, l, r]` restricted to dofs.
    dofs: Vec<usize>,
    midpoint: Option<usize>,
    endpoints: [Option<usize>; 2],
    /// Row-major `k x k` block of `A^(j)`.
    matrix: Vec<f64>,
    inverse: Vec<f64>,
    /// Column of `A^(j)` for every entry of `dofs`.
    columns: Vec<Vec<(usize, f64)>>,
}

impl LocalSpace {
    fn solve(&self, smoother: Smoother, rhs: &[f64; 3]) -> [f64; 3] {
        let k = self.dofs.len();
        let mut out = [0.0; 3];
        match smoother {
            Smoother::Jacobi => {
                for i in 0..k {
                    out[i] = rhs[i] / self.matrix[i * k + i];
                }
            }
            _ => {
                for i in 0..k {
                    out[i] = (0..k).map(|j| self.inverse[i * k + j] * rhs[j]).sum();
                }
            }
        }
        out
    }
}

/// The ordered subspaces of the decomposition with everything needed to
/// apply the additive and multiplicative preconditioners.
#[derive(Clone, Debug)]
pub struct PreconditionerSpec {
    /// Coarse space, three-point spaces in replay order, then nodal spaces.
    pub subspaces: Vec<SubspaceBasis>,
    /// Three-point smoother of the additive method.
    pub bpx_smoother: Smoother,
    /// Three-point smoother of the multiplicative method.
    pub vcycle_smoother: Smoother,
    /// Whether the finest nodal spaces take part.
    pub nodal: bool,
    a: SparseOperator,
    diag: Vec<f64>,
    coarse_dofs: Vec<usize>,
    coarse_matrix: DMatrix<f64>,
    coarse_factor: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    locals: Vec<LocalSpace>,
}

fn add_entry(row: &mut Vec<(usize, f64)>, j: usize, v: f64) {
    match row.iter_mut().find(|(c, _)| *c == j) {
        Some(e) => e.1 += v,
        None => row.push((j, v)),
    }
}

fn entry(row: &[(usize, f64)], j: usize) -> f64 {
    row.iter().find(|(c, _)| *c == j).map_or(0.0, |e| e.1)
}

fn invert_spd(m: &[f64], k: usize) -> Option<Vec<f64>> {
    if k == 0 {
        return Some(Vec::new());
    }
    let dm = DMatrix::from_row_slice(k, k, m);
    let inv = dm.cholesky()?.inverse();
    Some((0..k * k).map(|i| inv[(i / k, i % k)]).collect())
}

/// Builds the subspaces of `seq` for the operator `a` on the dofs `dofs` of
/// the target mesh.
pub fn build_spaces(
    seq: &BisectionSequence,
    grouping: &LevelGrouping,
    dofs: &DofMap,
    a: &SparseOperator,
) -> Result<PreconditionerSpec> {
    let n = dofs.num_dofs();
    if a.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            got: a.dim(),
        });
    }
    let nv = dofs.num_vertices();
    let dof_of = |v: usize| -> Result<Option<usize>> {
        if v >= nv {
            return Err(Error::DofOutOfRange { dof: v, n: nv });
        }
        Ok(dofs.dof(v))
    };

    let mut level_of = vec![0; seq.len()];
    for (g, group) in grouping.groups.iter().enumerate() {
        for &i in group {
            if i >= seq.len() {
                return Err(Error::Decomposition(format!("group member {i} outside sequence")));
            }
            level_of[i] = g + 1;
        }
    }

    let mut rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            let (c, v) = a.row(i);
            c.iter().copied().zip(v.iter().copied()).collect()
        })
        .collect();
    let mut alive = vec![true; n];
    let mut locals = Vec::with_capacity(seq.len());

    for (idx, item) in seq.items.iter().enumerate().rev() {
        let p = dof_of(item.midpoint)?;
        let l = dof_of(item.endpoints[0])?;
        let r = dof_of(item.endpoints[1])?;
        let local_dofs: Vec<usize> = [p, l, r].into_iter().flatten().collect();
        if local_dofs.iter().any(|&d| !alive[d]) {
            return Err(Error::Decomposition(format!(
                "bisection {idx} refers to an eliminated vertex"
            )));
        }
        let k = local_dofs.len();
        let mut matrix = vec![0.0; k * k];
        for (i, &di) in local_dofs.iter().enumerate() {
            for (j, &dj) in local_dofs.iter().enumerate() {
                matrix[i * k + j] = entry(&rows[di], dj);
            }
        }
        let inverse = invert_spd(&matrix, k).ok_or(Error::SingularLocal(idx))?;
        let columns = local_dofs
            .iter()
            .map(|&d| {
                let mut c = rows[d].clone();
                c.sort_unstable_by_key(|e| e.0);
                c
            })
            .collect();

        if let Some(p) = p {
            let prow = std::mem::take(&mut rows[p]);
            let app = entry(&prow, p);
            let ends: Vec<usize> = [l, r].into_iter().flatten().collect();
            for &x in &ends {
                for &(y, apy) in &prow {
                    if y != p {
                        add_entry(&mut rows[x], y, 0.5 * apy);
                        add_entry(&mut rows[y], x, 0.5 * apy);
                    }
                }
            }
            for &x in &ends {
                for &y in &ends {
                    add_entry(&mut rows[x], y, 0.25 * app);
                }
            }
            for &(y, _) in &prow {
                if y != p {
                    rows[y].retain(|e| e.0 != p);
                }
            }
            alive[p] = false;
        }
        locals.push(LocalSpace {
            dofs: local_dofs,
            midpoint: p,
            endpoints: [l, r],
            matrix,
            inverse,
            columns,
        });
    }
    locals.reverse();

    let coarse_dofs: Vec<usize> = (0..n).filter(|&d| alive[d]).collect();
    let expected_coarse = (0..seq.source.num_vertices()).filter(|&v| dofs.dof(v).is_some()).count();
    if coarse_dofs.len() != expected_coarse || coarse_dofs.iter().any(|&d| dofs.vertex(d) >= seq.source.num_vertices()) {
        return Err(Error::Decomposition(
            "eliminating the bisections does not leave the coarse mesh".into(),
        ));
    }
    let mut coarse_index = vec![usize::MAX; n];
    for (i, &d) in coarse_dofs.iter().enumerate() {
        coarse_index[d] = i;
    }
    let n0 = coarse_dofs.len();
    let mut coarse_matrix = DMatrix::zeros(n0, n0);
    for (i, &d) in coarse_dofs.iter().enumerate() {
        for &(c, v) in &rows[d] {
            coarse_matrix[(i, coarse_index[c])] += v;
        }
    }
    let coarse_factor = if n0 > 0 {
        Some(coarse_matrix.clone().cholesky().ok_or(Error::NotPositiveDefinite)?)
    } else {
        None
    };

    let levels = grouping.num_levels();
    let mut subspaces = Vec::with_capacity(1 + locals.len() + n);
    subspaces.push(SubspaceBasis {
        kind: SubspaceKind::Coarse,
        dof_ids: coarse_dofs.clone(),
        level: 0,
    });
    for (idx, loc) in locals.iter().enumerate() {
        subspaces.push(SubspaceBasis {
            kind: SubspaceKind::ThreePoint,
            dof_ids: loc.dofs.clone(),
            level: level_of[idx],
        });
    }
    for d in 0..n {
        subspaces.push(SubspaceBasis {
            kind: SubspaceKind::FinestNodal,
            dof_ids: vec![d],
            level: levels + 1,
        });
    }

    let diag = a.diagonal();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(PreconditionerSpec {
        subspaces,
        bpx_smoother: Smoother::Jacobi,
        vcycle_smoother: Smoother::ExactLocal,
        nodal: true,
        a: a.clone(),
        diag,
        coarse_dofs,
        coarse_matrix,
        coarse_factor,
        locals,
    })
}

impl PreconditionerSpec {
    /// The whole space as a single coarse space: both preconditioners are
    /// then the exact inverse of `a`.
    pub fn single_space(a: &SparseOperator) -> Result<Self> {
        let n = a.dim();
        let coarse_matrix = a.to_dense();
        let coarse_factor = if n > 0 {
            Some(coarse_matrix.clone().cholesky().ok_or(Error::NotPositiveDefinite)?)
        } else {
            None
        };
        Ok(PreconditionerSpec {
            subspaces: vec![SubspaceBasis {
                kind: SubspaceKind::Coarse,
                dof_ids: (0..n).collect(),
                level: 0,
            }],
            bpx_smoother: Smoother::Jacobi,
            vcycle_smoother: Smoother::ExactLocal,
            nodal: false,
            a: a.clone(),
            diag: a.diagonal(),
            coarse_dofs: (0..n).collect(),
            coarse_matrix,
            coarse_factor,
            locals: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.a
    }

    pub fn num_threepoint(&self) -> usize {
        self.locals.len()
    }

    /// Galerkin matrix `A|V_i` of three-point space `i` (0-based replay index).
    pub fn local_matrix(&self, i: usize) -> DMatrix<f64> {
        let loc = &self.locals[i];
        let k = loc.dofs.len();
        DMatrix::from_row_slice(k, k, &loc.matrix)
    }

    /// Stiffness matrix of the initial mesh on its dofs.
    pub fn coarse_matrix(&self) -> &DMatrix<f64> {
        &self.coarse_matrix
    }

    /// Smoother used on subspace `index` of [`subspaces`](Self::subspaces).
    pub fn smoother(&self, index: usize, cycle: Cycle) -> Smoother {
        match (self.subspaces[index].kind, cycle) {
            (SubspaceKind::Coarse, _) => Smoother::ExactLocal,
            (SubspaceKind::ThreePoint, Cycle::Bpx) => self.bpx_smoother,
            (SubspaceKind::ThreePoint, Cycle::VCycle) => self.vcycle_smoother,
            (SubspaceKind::FinestNodal, Cycle::Bpx) => Smoother::Jacobi,
            (SubspaceKind::FinestNodal, Cycle::VCycle) => Smoother::GaussSeidel,
        }
    }

    /// Sets the three-point smoother of one cycle. Only exact local solves
    /// and Jacobi are available there.
    pub fn with_threepoint_smoother(mut self, cycle: Cycle, smoother: Smoother) -> Result<Self> {
        if smoother == Smoother::GaussSeidel {
            return Err(Error::InvalidArgument(
                "three-point spaces support exact or Jacobi smoothing".into(),
            ));
        }
        match cycle {
            Cycle::Bpx => self.bpx_smoother = smoother,
            Cycle::VCycle => self.vcycle_smoother = smoother,
        }
        Ok(self)
    }

    fn coarse_solve(&self, rhs: &[f64], out: &mut [f64]) {
        let Some(f) = &self.coarse_factor else { return };
        let b = DVector::from_iterator(self.coarse_dofs.len(), self.coarse_dofs.iter().map(|&d| rhs[d]));
        let x = f.solve(&b);
        for (i, &d) in self.coarse_dofs.iter().enumerate() {
            out[d] = x[i];
        }
    }

    fn gather(&self, loc: &LocalSpace, v: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (o, &d) in out.iter_mut().zip(&loc.dofs) {
            *o = v[d];
        }
        out
    }

    fn restrict(loc: &LocalSpace, res: &mut [f64]) {
        if let Some(p) = loc.midpoint {
            let rp = res[p];
            for x in loc.endpoints.into_iter().flatten() {
                res[x] += 0.5 * rp;
            }
        }
    }

    fn prolong(loc: &LocalSpace, w: &mut [f64]) {
        if let Some(p) = loc.midpoint {
            let sum: f64 = loc.endpoints.into_iter().flatten().map(|x| w[x]).sum();
            w[p] = 0.5 * sum;
        }
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    pub fn bpx_apply_logged(&self, r: &[f64], log: &mut ApplyLog) -> Result<Vec<f64>> {
        self.check_dim(r)?;
        let n = self.dim();
        log.applies += 1;
        let mut res = r.to_vec();
        let mut corr = vec![[0.0; 3]; self.locals.len()];
        for (j, loc) in self.locals.iter().enumerate().rev() {
            corr[j] = loc.solve(self.bpx_smoother, &self.gather(loc, &res));
            Self::restrict(loc, &mut res);
            log.local_solves += 1;
            log.inner_work += 3 * loc.dofs.len() + 2;
        }
        let mut w = vec![0.0; n];
        self.coarse_solve(&res, &mut w);
        log.coarse_solves += 1;
        log.inner_work += self.coarse_dofs.len();
        for (loc, c) in self.locals.iter().zip(&corr) {
            Self::prolong(loc, &mut w);
            for (&d, &x) in loc.dofs.iter().zip(c) {
                w[d] += x;
            }
            log.inner_work += loc.dofs.len() + 2;
        }
        if self.nodal {
            for i in 0..n {
                w[i] += r[i] / self.diag[i];
            }
            log.nodal_updates += n;
            log.inner_work += n;
        }
        Ok(w)
    }

    pub fn vcycle_apply_logged(&self, g: &[f64], log: &mut ApplyLog) -> Result<Vec<f64>> {
        self.check_dim(g)?;
        let n = self.dim();
        log.applies += 1;
        let mut u = vec![0.0; n];
        let mut res = g.to_vec();
        if self.nodal {
            for i in 0..n {
                self.nodal_step(i, &mut u, &mut res, log);
            }
        }

        let mut pre = vec![[0.0; 3]; self.locals.len()];
        let mut saved = vec![0.0; self.locals.len()];
        for (j, loc) in self.locals.iter().enumerate().rev() {
            let e = loc.solve(self.vcycle_smoother, &self.gather(loc, &res));
            Self::subtract_columns(loc, &e, &mut res, log);
            pre[j] = e;
            if let Some(p) = loc.midpoint {
                saved[j] = res[p];
            }
            Self::restrict(loc, &mut res);
            log.local_solves += 1;
        }

        let mut w = vec![0.0; n];
        self.coarse_solve(&res, &mut w);
        let n0 = self.coarse_dofs.len();
        for i in 0..n0 {
            let s: f64 = (0..n0).map(|j| self.coarse_matrix[(i, j)] * w[self.coarse_dofs[j]]).sum();
            res[self.coarse_dofs[i]] -= s;
        }
        log.coarse_solves += 1;

        for (j, loc) in self.locals.iter().enumerate() {
            if let Some(p) = loc.midpoint {
                Self::prolong(loc, &mut w);
                let column = &loc.columns[0];
                let rp = saved[j] - column.iter().map(|&(k, a)| a * w[k]).sum::<f64>();
                for x in loc.endpoints.into_iter().flatten() {
                    res[x] -= 0.5 * rp;
                }
                res[p] = rp;
                log.inner_work += column.len() + 4;
            }
            for (&d, &x) in loc.dofs.iter().zip(&pre[j]) {
                w[d] += x;
            }
            let e = loc.solve(self.vcycle_smoother, &self.gather(loc, &res));
            for (&d, &x) in loc.dofs.iter().zip(&e) {
                w[d] += x;
            }
            Self::subtract_columns(loc, &e, &mut res, log);
            log.local_solves += 1;
        }

        for (ui, wi) in u.iter_mut().zip(&w) {
            *ui += wi;
        }
        if self.nodal {
            for i in (0..n).rev() {
                self.nodal_step(i, &mut u, &mut res, log);
            }
        }
        Ok(u)
    }

    fn nodal_step(&self, i: usize, u: &mut [f64], res: &mut [f64], log: &mut ApplyLog) {
        let d = res[i] / self.diag[i];
        u[i] += d;
        let (cols, vals) = self.a.row(i);
        for (&j, &a) in cols.iter().zip(vals) {
            res[j] -= a * d;
        }
        log.nodal_updates += 1;
        log.inner_work += cols.len() + 1;
    }

    fn subtract_columns(loc: &LocalSpace, e: &[f64; 3], res: &mut [f64], log: &mut ApplyLog) {
        for (col, &x) in loc.columns.iter().zip(e) {
            for &(k, a) in col {
                res[k] -= a * x;
            }
            log.inner_work += col.len();
        }
    }

    pub fn apply(&self, cycle: Cycle, r: &[f64]) -> Result<Vec<f64>> {
        let mut log = ApplyLog::default();
        match cycle {
            Cycle::Bpx => self.bpx_apply_logged(r, &mut log),
            Cycle::VCycle => self.vcycle_apply_logged(r, &mut log),
        }
    }
}

/// `B r` for the additive preconditioner: exact coarse solve, Jacobi on the
/// three-point spaces and on the finest nodal spaces.
pub fn bpx_apply(spec: &PreconditionerSpec, r: &[f64]) -> Result<Vec<f64>> {
    spec.apply(Cycle::Bpx, r)
}

/// One symmetric V-cycle with zero initial guess: forward Gauss-Seidel, local
/// solves from fine to coarse, coarse solve, local solves from coarse to
/// fine, backward Gauss-Seidel.
pub fn vcycle_apply(spec: &PreconditionerSpec, g: &[f64]) -> Result<Vec<f64>> {
    spec.apply(Cycle::VCycle, g)
}

/// Dense matrix of the preconditioner, one unit vector at a time.
pub fn assemble_explicit(spec: &PreconditionerSpec, cycle: Cycle, dense_limit: usize) -> Result<DMatrix<f64>> {
    let n = spec.dim();
    if n > dense_limit {
        return Err(Error::DenseLimit { n, limit: dense_limit });
    }
    let mut out = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        let col = spec.apply(cycle, &e)?;
        e[k] = 0.0;
        out.set_column(k, &DVector::from_vec(col));
    }
    Ok(out)
}

/// Anything that maps a residual to a correction.
pub trait Preconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64>;
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        r.to_vec()
    }
}

/// A spec used with one cycle type. Panics on dimension mismatch.
pub struct Bound<'a> {
    pub spec: &'a PreconditionerSpec,
    pub cycle: Cycle,
}

impl Preconditioner for Bound<'_> {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        self.spec
            .apply(self.cycle, r)
            .expect("residual length matches the preconditioner")
    }
}

impl PreconditionerSpec {
    pub fn bound(&self, cycle: Cycle) -> Bound<'_> {
        Bound { spec: self, cycle }
    }
}

/// Dense matrix used as a preconditioner.
pub struct DensePreconditioner(pub DMatrix<f64>);

impl Preconditioner for DensePreconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        (&self.0 * DVector::from_column_slice(r)).as_slice().to_vec()
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> Preconditioner for F {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        self(r)
    }
}
