use std::collections::HashMap;

use super::{EdgeKey, Triangulation};

/// Geometric conformity check. Rebuilds edge incidence from the element list
/// and searches for vertices lying inside edges that have a single incident
/// element; any hanging node shows up there.
pub(super) fn check(mesh: &Triangulation) -> Result<(), String> {
    if mesh.has_hanging_nodes() {
        return Err("mesh has pending hanging nodes".into());
    }
    let mut directed: HashMap<EdgeKey, Vec<(usize, usize)>> = HashMap::new();
    for (id, el) in mesh.elements().iter().enumerate() {
        if mesh.signed_area(id) <= 0.0 {
            return Err(format!("element {id} is not counterclockwise"));
        }
        let v = el.vertices;
        for i in 0..3 {
            let (a, b) = (v[i], v[(i + 1) % 3]);
            directed.entry(EdgeKey::new(a, b)).or_default().push((a, id));
        }
    }
    let mut open_edges = Vec::new();
    for (key, uses) in &directed {
        match uses.len() {
            1 => open_edges.push(*key),
            // the two elements must traverse the edge in opposite directions
            2 if uses[0].0 != uses[1].0 => {}
            2 => {
                return Err(format!(
                    "elements {} and {} overlap across edge ({}, {})",
                    uses[0].1, uses[1].1, key.0, key.1
                ))
            }
            n => {
                return Err(format!(
                    "edge ({}, {}) shared by {n} elements",
                    key.0, key.1
                ))
            }
        }
    }
    open_edges.sort_unstable();

    let grid = VertexGrid::new(mesh);
    for key in open_edges {
        if let Some(v) = grid.vertex_inside_segment(mesh, key) {
            return Err(format!(
                "vertex {v} hangs on edge ({}, {})",
                key.0, key.1
            ));
        }
    }
    Ok(())
}

/// Uniform bucket grid over vertex coordinates.
struct VertexGrid {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl VertexGrid {
    fn new(mesh: &Triangulation) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in mesh.vertices() {
            for d in 0..2 {
                lo[d] = lo[d].min(v.coords[d]);
                hi[d] = hi[d].max(v.coords[d]);
            }
        }
        let n = mesh.num_vertices().max(1);
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
        let per_side = ((n as f64).sqrt().ceil() as usize).max(1);
        let cell = extent / per_side as f64 * (1.0 + 1e-9);
        let nx = (((hi[0] - lo[0]) / cell) as usize + 1).max(1);
        let ny = (((hi[1] - lo[1]) / cell) as usize + 1).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        let mut grid = VertexGrid {
            origin: lo,
            cell,
            nx,
            ny,
            buckets: Vec::new(),
        };
        for (id, v) in mesh.vertices().iter().enumerate() {
            let (i, j) = grid.cell_of(v.coords);
            buckets[j * nx + i].push(id);
        }
        grid.buckets = buckets;
        grid
    }

    fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        let i = ((p[0] - self.origin[0]) / self.cell).floor().max(0.0) as usize;
        let j = ((p[1] - self.origin[1]) / self.cell).floor().max(0.0) as usize;
        (i.min(self.nx - 1), j.min(self.ny - 1))
    }

    fn vertex_inside_segment(&self, mesh: &Triangulation, key: EdgeKey) -> Option<usize> {
        let a = mesh.coords(key.0);
        let b = mesh.coords(key.1);
        let d = [b[0] - a[0], b[1] - a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let (i0, j0) = self.cell_of([a[0].min(b[0]), a[1].min(b[1])]);
        let (i1, j1) = self.cell_of([a[0].max(b[0]), a[1].max(b[1])]);
        for j in j0..=j1 {
            for i in i0..=i1 {
                for &v in &self.buckets[j * self.nx + i] {
                    if v == key.0 || v == key.1 {
                        continue;
                    }
                    let p = mesh.coords(v);
                    let w = [p[0] - a[0], p[1] - a[1]];
                    let cross = d[0] * w[1] - d[1] * w[0];
                    if cross.abs() > 1e-12 * len2 {
                        continue;
                    }
                    let t = (d[0] * w[0] + d[1] * w[1]) / len2;
                    if t > 1e-12 && t < 1.0 - 1e-12 {
                        return Some(v);
                    }
                }
            }
        }
        None
    }
}
