//! Residual error estimator weighted for coefficient jumps, bulk marking and
//! the adaptive solve loop.
//!
//! For an element `tau` with coefficient `a_tau` and diameter `h_tau`:
//!
//! ```text
//! eta_tau^2 = h_tau^2 / a_tau |f|_tau^2
//!           + 1/2 sum_{interior e} h_e / w_e |[a grad u_h . n]|_e^2
//!           + sum_{Neumann e} h_e / a_tau |g_N - a grad u_h . n|_e^2
//! ```
//!
//! where `w_e` is the larger of the two coefficients across `e`, or their
//! harmonic mean.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{self, quadrature, CoefficientField, DofMap, SparseOperator};
use crate::hierarchy;
use crate::mesh::{presets, EdgeKey, ElementId, Triangulation};
use crate::precond::{build_spaces, Cycle, Identity, PreconditionerSpec};
use crate::solver::{self, SolveReport};

pub type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type GradientField = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeWeight {
    #[default]
    Max,
    HarmonicMean,
}

impl EdgeWeight {
    fn weight(self, a: f64, b: f64) -> f64 {
        match self {
            EdgeWeight::Max => a.max(b),
            EdgeWeight::HarmonicMean => 2.0 * a * b / (a + b),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndicatorField {
    pub eta: Vec<f64>,
    pub total: f64,
}

impl IndicatorField {
    pub fn new(eta: Vec<f64>) -> Self {
        let total = eta.iter().map(|e| e * e).sum::<f64>().sqrt();
        IndicatorField { eta, total }
    }
}

/// Unit outward normal of local edge `i` (opposite local vertex `i`).
fn outward_normal(mesh: &Triangulation, e: ElementId, i: usize) -> ([f64; 2], EdgeKey) {
    let v = mesh.element(e).vertices;
    let (a, b) = (v[(i + 1) % 3], v[(i + 2) % 3]);
    let (pa, pb) = (mesh.coords(a), mesh.coords(b));
    let d = [pb[0] - pa[0], pb[1] - pa[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    ([d[1] / len, -d[0] / len], EdgeKey::new(a, b))
}

/// Indicators for vertex values `u` of the discrete solution.
pub fn estimate(
    mesh: &Triangulation,
    coeff: &CoefficientField,
    u: &[f64],
    f: &dyn Fn(f64, f64) -> f64,
    g_n: &dyn Fn(f64, f64) -> f64,
    weight: EdgeWeight,
) -> Result<IndicatorField> {
    if u.len() != mesh.num_vertices() {
        return Err(Error::Dimension {
            expected: mesh.num_vertices(),
            got: u.len(),
        });
    }
    let a = coeff.per_element(mesh)?;
    let grads: Vec<[f64; 2]> = (0..mesh.num_elements()).map(|e| fem::element_gradient(mesh, e, u)).collect();
    let neumann: std::collections::HashSet<EdgeKey> = fem::neumann_edges(mesh).into_iter().map(|(k, _)| k).collect();

    let mut eta2 = vec![0.0; mesh.num_elements()];
    for (e, el) in mesh.elements().iter().enumerate() {
        let p = el.vertices.map(|v| mesh.coords(v));
        let h = mesh.diameter(e);
        let f2 = quadrature::integrate_triangle(p, mesh.area(e), |x, y| f(x, y).powi(2));
        eta2[e] += h * h / a[e] * f2;
        for i in 0..3 {
            let (n, key) = outward_normal(mesh, e, i);
            let flux = a[e] * (grads[e][0] * n[0] + grads[e][1] * n[1]);
            let len = mesh.edge_length(key);
            let ring = mesh.edge_ring(key).expect("element edge exists");
            match ring.other(e) {
                Some(o) => {
                    let other = a[o] * (grads[o][0] * n[0] + grads[o][1] * n[1]);
                    let jump = flux - other;
                    eta2[e] += 0.5 * len / weight.weight(a[e], a[o]) * jump * jump * len;
                }
                None if neumann.contains(&key) => {
                    let (pa, pb) = (mesh.coords(key.0), mesh.coords(key.1));
                    let r2 = quadrature::integrate_segment(pa, pb, |x, y| (g_n(x, y) - flux).powi(2));
                    eta2[e] += len / a[e] * r2;
                }
                None => {}
            }
        }
    }
    Ok(IndicatorField::new(eta2.into_iter().map(f64::sqrt).collect()))
}

/// Smallest set of elements, taken by descending indicator with ties broken
/// by ascending id, whose squared indicators reach `theta^2` of the total.
/// Returned in ascending id order.
pub fn mark(ind: &IndicatorField, theta: f64) -> Result<Vec<ElementId>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0, 1], got {theta}")));
    }
    let mut order: Vec<ElementId> = (0..ind.eta.len()).collect();
    order.sort_by(|&x, &y| ind.eta[y].total_cmp(&ind.eta[x]).then(x.cmp(&y)));
    let total: f64 = order.iter().map(|&e| ind.eta[e] * ind.eta[e]).sum();
    let target = theta * theta * total;
    let mut sum = 0.0;
    let mut marked = Vec::new();
    for e in order {
        if sum >= target {
            break;
        }
        sum += ind.eta[e] * ind.eta[e];
        marked.push(e);
    }
    marked.sort_unstable();
    Ok(marked)
}

/// Boundary value problem on an initial mesh.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub initial: Triangulation,
    pub coeff: CoefficientField,
    pub f: Field,
    pub g_d: Field,
    pub g_n: Field,
    /// Gradient of the exact solution, when known.
    pub exact_gradient: Option<GradientField>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("coeff", &self.coeff)
            .finish_non_exhaustive()
    }
}

impl Problem {
    /// `(-1, 1)^2` with `a = 1` on the two inner squares and `a = eps`
    /// elsewhere, `f = 1`, `u = 0` on `x = -1`, `u = 1` on `x = 1`, zero flux
    /// elsewhere. `cells` squares per side in the initial mesh.
    pub fn jump(eps: f64, cells: usize) -> Result<Self> {
        Ok(Problem {
            name: format!("jump eps={eps:e}"),
            initial: presets::jump_domain(cells)?,
            coeff: CoefficientField::new([(1, 1.0), (2, 1.0), (3, eps)])?,
            f: Arc::new(|_, _| 1.0),
            g_d: Arc::new(|x, _| if x > 0.0 { 1.0 } else { 0.0 }),
            g_n: Arc::new(|_, _| 0.0),
            exact_gradient: None,
        })
    }

    /// `u = sin(pi x) sin(pi y)` on the unit square, `a = 1`, Dirichlet.
    pub fn sine(cells: usize) -> Result<Self> {
        use std::f64::consts::PI;
        Ok(Problem {
            name: "sine".into(),
            initial: presets::unit_square(cells)?,
            coeff: CoefficientField::constant(1, 1.0)?,
            f: Arc::new(|x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin()),
            g_d: Arc::new(|_, _| 0.0),
            g_n: Arc::new(|_, _| 0.0),
            exact_gradient: Some(Arc::new(|x, y| {
                [PI * (PI * x).cos() * (PI * y).sin(), PI * (PI * x).sin() * (PI * y).cos()]
            })),
        })
    }

    pub fn with_coeff(mut self, coeff: CoefficientField) -> Self {
        self.coeff = coeff;
        self
    }

    pub fn discretize(&self, mesh: &Triangulation) -> Result<Discretization> {
        let dofs = DofMap::new(mesh, &*self.g_d);
        let a = fem::assemble_stiffness(mesh, &self.coeff, &dofs)?;
        let b = fem::assemble_load(mesh, &*self.f, &*self.g_n, &self.coeff, &dofs)?;
        Ok(Discretization {
            mesh: mesh.clone(),
            dofs,
            a,
            b,
        })
    }
}

/// Linear system of a problem on one mesh.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: Triangulation,
    pub dofs: DofMap,
    pub a: SparseOperator,
    pub b: Vec<f64>,
}

impl Discretization {
    pub fn num_dofs(&self) -> usize {
        self.dofs.num_dofs()
    }

    /// Multilevel subspaces recovered from the mesh relative to `initial`.
    pub fn preconditioner(&self, initial: &Triangulation) -> Result<PreconditionerSpec> {
        let (seq, groups) = hierarchy::decompose(&self.mesh, initial)?;
        build_spaces(&seq, &groups, &self.dofs, &self.a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Stationary V-cycle iteration.
    #[serde(rename = "TPSMG")]
    TpsMg,
    /// PCG with the V-cycle.
    #[serde(rename = "TPSMGCG")]
    TpsMgCg,
    /// PCG with BPX.
    #[serde(rename = "TPSBPXCG")]
    TpsBpxCg,
    /// Plain CG.
    #[serde(rename = "CG")]
    Cg,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::TpsMg, Method::TpsMgCg, Method::TpsBpxCg, Method::Cg];

    pub fn name(self) -> &'static str {
        match self {
            Method::TpsMg => "TPSMG",
            Method::TpsMgCg => "TPSMGCG",
            Method::TpsBpxCg => "TPSBPXCG",
            Method::Cg => "CG",
        }
    }

    /// Preconditioner the method runs with, if any.
    pub fn cycle(self) -> Option<Cycle> {
        match self {
            Method::TpsMg | Method::TpsMgCg => Some(Cycle::VCycle),
            Method::TpsBpxCg => Some(Cycle::Bpx),
            Method::Cg => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// Solves `a u = b` from a zero initial guess. `spec` must be given for the
/// multilevel methods.
pub fn solve_with(
    method: Method,
    a: &SparseOperator,
    b: &[f64],
    spec: Option<&PreconditionerSpec>,
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let x0 = vec![0.0; a.dim()];
    let need = || Error::InvalidArgument(format!("{method} needs a preconditioner"));
    match method {
        Method::Cg => solver::pcg(a, b, &Identity, &x0, tol, maxit),
        Method::TpsMg => {
            let spec = spec.ok_or_else(need)?;
            solver::stationary_iterate(a, b, &spec.bound(Cycle::VCycle), &x0, tol, maxit)
        }
        Method::TpsMgCg | Method::TpsBpxCg => {
            let spec = spec.ok_or_else(need)?;
            let cycle = method.cycle().expect("multilevel method");
            solver::pcg(a, b, &spec.bound(cycle), &x0, tol, maxit)
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdaptConfig {
    pub max_dof: usize,
    pub theta: f64,
    pub method: Method,
    pub tol: f64,
    pub maxit: usize,
    pub edge_weight: EdgeWeight,
    /// Stop after this many solves even below `max_dof`.
    pub max_iterations: Option<usize>,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            max_dof: 10_000,
            theta: 0.5,
            method: Method::TpsMgCg,
            tol: solver::DEFAULT_TOL,
            maxit: solver::DEFAULT_MAXIT,
            edge_weight: EdgeWeight::Max,
            max_iterations: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdaptRecord {
    pub iteration: usize,
    pub mesh: Triangulation,
    /// Vertex values of the discrete solution.
    pub solution: Vec<f64>,
    pub num_dofs: usize,
    pub estimator: IndicatorField,
    pub report: SolveReport,
}

impl AdaptRecord {
    /// One JSON object without mesh and solution.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "iteration": self.iteration,
            "num_dofs": self.num_dofs,
            "num_vertices": self.mesh.num_vertices(),
            "num_elements": self.mesh.num_elements(),
            "max_generation": self.mesh.max_generation(),
            "estimator": self.estimator.total,
            "solver_iterations": self.report.iterations,
            "converged": self.report.converged,
        })
        .to_string()
    }
}

pub fn records_to_jsonl(records: &[AdaptRecord]) -> String {
    records.iter().map(|r| r.to_json_line() + "\n").collect()
}

/// SOLVE, ESTIMATE, MARK, REFINE until the dof count exceeds `max_dof`.
/// A solve that does not converge ends the loop after its record.
pub fn adaptive_solve(problem: &Problem, config: &AdaptConfig) -> Result<Vec<AdaptRecord>> {
    let mut mesh = problem.initial.clone();
    let mut records = Vec::new();
    loop {
        let disc = problem.discretize(&mesh)?;
        let spec = match config.method {
            Method::Cg => None,
            _ => Some(disc.preconditioner(&problem.initial)?),
        };
        let (u, report) = solve_with(config.method, &disc.a, &disc.b, spec.as_ref(), config.tol, config.maxit)?;
        let solution = disc.dofs.to_vertex_values(&u)?;
        let estimator = estimate(&mesh, &problem.coeff, &solution, &*problem.f, &*problem.g_n, config.edge_weight)?;
        let converged = report.converged;
        log::info!(
            "adaptive step {}: {} dofs, estimator {:.3e}, {} iterations",
            records.len(),
            disc.num_dofs(),
            estimator.total,
            report.iterations
        );
        records.push(AdaptRecord {
            iteration: records.len(),
            mesh: mesh.clone(),
            solution,
            num_dofs: disc.num_dofs(),
            estimator,
            report,
        });
        let done = disc.num_dofs() > config.max_dof
            || !converged
            || config.max_iterations.is_some_and(|m| records.len() >= m);
        if done {
            if !converged {
                log::warn!("solve did not converge, stopping the adaptive loop");
            }
            break;
        }
        let marked = mark(&records.last().expect("just pushed").estimator, config.theta)?;
        if marked.is_empty() {
            break;
        }
        mesh = mesh.refine(&marked)?;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_indicators_mark_a_quarter() {
        let ind = IndicatorField::new(vec![1.0; 100]);
        assert_eq!(mark(&ind, 0.5).unwrap().len(), 25);
        assert_eq!(mark(&ind, 1.0).unwrap().len(), 100);
    }

    #[test]
    fn dominant_indicator_is_marked_alone() {
        let mut eta = vec![0.01; 50];
        eta[17] = 10.0;
        assert_eq!(mark(&IndicatorField::new(eta), 0.5).unwrap(), vec![17]);
    }

    #[test]
    fn theta_out_of_range() {
        let ind = IndicatorField::new(vec![1.0]);
        assert!(mark(&ind, 0.0).is_err());
        assert!(mark(&ind, 1.5).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("multigrid".parse::<Method>().is_err());
    }
}
