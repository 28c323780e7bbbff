//! Weighted P1 finite elements with piecewise-constant coefficients.
//!
//! Unknowns live at non-Dirichlet vertices. Dirichlet data enters through a
//! lift: the load is `b = <f, v> + int_{Gamma_N} g_N v - A(u_0, v)` where
//! `u_0` interpolates `g_D` at Dirichlet vertices and vanishes elsewhere.

pub mod quadrature;
mod sparse;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryKind, EdgeKey, ElementId, Triangulation, VertexId};

/// Stiffness operators are plain CSR matrices.
pub type SparseOperator = CsrMatrix;

/// Scalar function of position.
pub type ScalarFn<'a> = &'a dyn Fn(f64, f64) -> f64;

/// Piecewise-constant coefficient indexed by subdomain label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    values: BTreeMap<u32, f64>,
}

impl CoefficientField {
    pub fn new(values: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let values: BTreeMap<u32, f64> = values.into_iter().collect();
        if let Some((&label, &value)) = values.iter().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidCoefficient { label, value });
        }
        Ok(CoefficientField { values })
    }

    /// The same value on labels `1..=labels`.
    pub fn constant(labels: u32, value: f64) -> Result<Self> {
        Self::new((1..=labels).map(|l| (l, value)))
    }

    pub fn get(&self, label: u32) -> Result<f64> {
        self.values.get(&label).copied().ok_or(Error::MissingCoefficient(label))
    }

    pub fn values(&self) -> &BTreeMap<u32, f64> {
        &self.values
    }

    /// `max a_i / min a_i`.
    pub fn jump_ratio(&self) -> f64 {
        let max = self.values.values().copied().fold(f64::MIN, f64::max);
        let min = self.values.values().copied().fold(f64::MAX, f64::min);
        max / min
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|(&l, &v)| (l, c * v)))
    }

    /// Coefficient of every element.
    pub fn per_element(&self, mesh: &Triangulation) -> Result<Vec<f64>> {
        mesh.elements().iter().map(|e| self.get(e.subdomain)).collect()
    }
}

/// Numbering of the non-Dirichlet vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    vertex_dof: Vec<Option<usize>>,
    dof_vertex: Vec<VertexId>,
    /// Dirichlet vertices with their boundary values.
    pub dirichlet: Vec<(VertexId, f64)>,
}

impl DofMap {
    pub fn new(mesh: &Triangulation, g_d: ScalarFn) -> Self {
        let mut vertex_dof = vec![None; mesh.num_vertices()];
        let mut dof_vertex = Vec::new();
        let mut dirichlet = Vec::new();
        for (v, vert) in mesh.vertices().iter().enumerate() {
            if vert.boundary == BoundaryKind::Dirichlet {
                dirichlet.push((v, g_d(vert.coords[0], vert.coords[1])));
            } else {
                vertex_dof[v] = Some(dof_vertex.len());
                dof_vertex.push(v);
            }
        }
        DofMap {
            vertex_dof,
            dof_vertex,
            dirichlet,
        }
    }

    /// Homogeneous Dirichlet data.
    pub fn homogeneous(mesh: &Triangulation) -> Self {
        Self::new(mesh, &|_, _| 0.0)
    }

    pub fn num_dofs(&self) -> usize {
        self.dof_vertex.len()
    }

    pub fn dof(&self, v: VertexId) -> Option<usize> {
        self.vertex_dof.get(v).copied().flatten()
    }

    pub fn vertex(&self, dof: usize) -> VertexId {
        self.dof_vertex[dof]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_dof.len()
    }

    /// Vertex values: `u` at dofs, boundary data at Dirichlet vertices.
    pub fn to_vertex_values(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.num_dofs() {
            return Err(Error::Dimension {
                expected: self.num_dofs(),
                got: u.len(),
            });
        }
        let mut out = vec![0.0; self.vertex_dof.len()];
        for (d, &v) in self.dof_vertex.iter().enumerate() {
            out[v] = u[d];
        }
        for &(v, g) in &self.dirichlet {
            out[v] = g;
        }
        Ok(out)
    }

    /// Restriction of vertex values to dofs.
    pub fn from_vertex_values(&self, values: &[f64]) -> Vec<f64> {
        self.dof_vertex.iter().map(|&v| values[v]).collect()
    }
}

/// Gradients of the barycentric coordinates of a triangle.
pub fn barycentric_gradients(p: [[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let two_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    std::array::from_fn(|i| {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area]
    })
}

fn element_points(mesh: &Triangulation, e: ElementId) -> [[f64; 2]; 3] {
    mesh.element(e).vertices.map(|v| mesh.coords(v))
}

/// `a int_tau grad phi_i . grad phi_j` for the three local hats.
pub fn local_stiffness(p: [[f64; 2]; 3], a: f64) -> [[f64; 3]; 3] {
    let g = barycentric_gradients(p);
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    std::array::from_fn(|i| std::array::from_fn(|j| a * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1])))
}

pub fn assemble_stiffness(mesh: &Triangulation, coeff: &CoefficientField, dofs: &DofMap) -> Result<SparseOperator> {
    let mut triplets = Vec::with_capacity(9 * mesh.num_elements());
    for (e, el) in mesh.elements().iter().enumerate() {
        let k = local_stiffness(element_points(mesh, e), coeff.get(el.subdomain)?);
        for (i, &vi) in el.vertices.iter().enumerate() {
            let Some(di) = dofs.dof(vi) else { continue };
            for (j, &vj) in el.vertices.iter().enumerate() {
                if let Some(dj) = dofs.dof(vj) {
                    triplets.push((di, dj, k[i][j]));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(dofs.num_dofs(), &triplets))
}

/// Boundary edges with at least one non-Dirichlet endpoint.
pub fn neumann_edges(mesh: &Triangulation) -> Vec<(EdgeKey, ElementId)> {
    let mut out = Vec::new();
    for key in mesh.edge_keys() {
        let ring = mesh.edge_ring(key).expect("listed edge exists");
        if ring.len() != 1 {
            continue;
        }
        let dirichlet = |v| mesh.vertex(v).boundary == BoundaryKind::Dirichlet;
        if !(dirichlet(key.0) && dirichlet(key.1)) {
            out.push((key, ring.as_slice()[0]));
        }
    }
    out
}

/// Load vector with vertex quadrature for `f`, trapezoid rule for `g_N` and
/// the exact Dirichlet lift.
pub fn assemble_load(
    mesh: &Triangulation,
    f: ScalarFn,
    g_n: ScalarFn,
    coeff: &CoefficientField,
    dofs: &DofMap,
) -> Result<Vec<f64>> {
    let mut b = vec![0.0; dofs.num_dofs()];
    let mut lift = vec![0.0; mesh.num_vertices()];
    for &(v, g) in &dofs.dirichlet {
        lift[v] = g;
    }
    for (e, el) in mesh.elements().iter().enumerate() {
        let p = element_points(mesh, e);
        let area = mesh.area(e);
        let k = local_stiffness(p, coeff.get(el.subdomain)?);
        for (i, &vi) in el.vertices.iter().enumerate() {
            let Some(di) = dofs.dof(vi) else { continue };
            b[di] += area / 3.0 * f(p[i][0], p[i][1]);
            for (j, &vj) in el.vertices.iter().enumerate() {
                if dofs.dof(vj).is_none() {
                    b[di] -= k[i][j] * lift[vj];
                }
            }
        }
    }
    for (key, _) in neumann_edges(mesh) {
        let len = mesh.edge_length(key);
        for v in [key.0, key.1] {
            if let Some(d) = dofs.dof(v) {
                let x = mesh.coords(v);
                b[d] += 0.5 * len * g_n(x[0], x[1]);
            }
        }
    }
    Ok(b)
}

/// `sqrt(v^T A v)`; tiny negative radicands from rounding are clamped.
pub fn energy_norm(a: &SparseOperator, v: &[f64]) -> Result<f64> {
    if v.len() != a.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            got: v.len(),
        });
    }
    let q = a.inner(v, v);
    if q >= 0.0 {
        return Ok(q.sqrt());
    }
    let scale = a.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs())) * v.iter().map(|x| x * x).sum::<f64>();
    if -q <= 1e-12 * scale {
        Ok(0.0)
    } else {
        Err(Error::NegativeEnergy(q))
    }
}

/// `(sum_tau a_tau int_tau v^2)^(1/2)` for vertex values `v`, using the
/// exact P1 mass matrix.
pub fn weighted_l2_norm(mesh: &Triangulation, coeff: &CoefficientField, v: &[f64]) -> Result<f64> {
    if v.len() != mesh.num_vertices() {
        return Err(Error::Dimension {
            expected: mesh.num_vertices(),
            got: v.len(),
        });
    }
    let mut total = 0.0;
    for (e, el) in mesh.elements().iter().enumerate() {
        let x = el.vertices.map(|i| v[i]);
        let sum: f64 = x.iter().sum();
        let sq: f64 = x.iter().map(|t| t * t).sum();
        // v^T M v with M = |tau|/12 (1 + I)
        total += coeff.get(el.subdomain)? * mesh.area(e) / 12.0 * (sum * sum + sq);
    }
    Ok(total.sqrt())
}

/// Constant gradient of the P1 function with vertex values `v` on element `e`.
pub fn element_gradient(mesh: &Triangulation, e: ElementId, v: &[f64]) -> [f64; 2] {
    let g = barycentric_gradients(element_points(mesh, e));
    let x = mesh.element(e).vertices.map(|i| v[i]);
    [
        x[0] * g[0][0] + x[1] * g[1][0] + x[2] * g[2][0],
        x[0] * g[0][1] + x[1] * g[1][1] + x[2] * g[2][1],
    ]
}

/// Weighted energy error `(sum a_tau int_tau |grad u - grad u_h|^2)^(1/2)`
/// against an exact gradient, by seven-point quadrature.
pub fn energy_error(
    mesh: &Triangulation,
    coeff: &CoefficientField,
    v: &[f64],
    exact_gradient: &dyn Fn(f64, f64) -> [f64; 2],
) -> Result<f64> {
    let mut total = 0.0;
    for (e, el) in mesh.elements().iter().enumerate() {
        let gh = element_gradient(mesh, e, v);
        let a = coeff.get(el.subdomain)?;
        total += a * quadrature::integrate_triangle(element_points(mesh, e), mesh.area(e), |x, y| {
            let g = exact_gradient(x, y);
            (g[0] - gh[0]).powi(2) + (g[1] - gh[1]).powi(2)
        });
    }
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Element, Vertex};

    fn right_triangle() -> Triangulation {
        let vertices = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
            .into_iter()
            .map(|p| Vertex::initial(p, BoundaryKind::Neumann))
            .collect();
        let elements = vec![Element {
            vertices: [0, 1, 2],
            subdomain: 1,
            generation: 0,
        }];
        Triangulation::new(vertices, elements).unwrap()
    }

    #[test]
    fn right_triangle_stiffness() {
        let mesh = right_triangle();
        let dofs = DofMap::homogeneous(&mesh);
        let a = assemble_stiffness(&mesh, &CoefficientField::constant(1, 1.0).unwrap(), &dofs).unwrap();
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for (i, row) in expected.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                assert!((a.get(i, j) - x).abs() < 1e-15);
            }
        }
        assert!((energy_norm(&a, &[1.0, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        let b = assemble_load(&mesh, &|_, _| 1.0, &|_, _| 0.0, &CoefficientField::constant(1, 1.0).unwrap(), &dofs)
            .unwrap();
        for x in b {
            assert!((x - 0.5 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn bad_coefficients() {
        assert!(matches!(
            CoefficientField::new([(1, 1.0), (2, 0.0)]),
            Err(Error::InvalidCoefficient { label: 2, .. })
        ));
        let c = CoefficientField::new([(1, 1e-4), (2, 1.0)]).unwrap();
        assert!((c.jump_ratio() - 1e4).abs() < 1e-8);
        assert!(matches!(c.get(3), Err(Error::MissingCoefficient(3))));
    }

    #[test]
    fn mass_norm_of_one_is_sqrt_area() {
        let mesh = crate::mesh::presets::unit_square(2).unwrap();
        let c = CoefficientField::constant(1, 1.0).unwrap();
        let n = weighted_l2_norm(&mesh, &c, &vec![1.0; mesh.num_vertices()]).unwrap();
        assert!((n - 1.0).abs() < 1e-14);
    }

    #[test]
    fn negative_energy_is_an_error() {
        let a = CsrMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(energy_norm(&a, &[0.0, 1.0]), Err(Error::NegativeEnergy(_))));
    }
}
