//! Conforming 2D triangulations refined by newest-vertex bisection.
//!
//! Every element stores its vertices counterclockwise with local vertex 0 the
//! newest vertex, so the refinement edge of `[v0, v1, v2]` is `{v1, v2}`.
//! Bisecting it creates the midpoint `m` and the children `[m, v0, v1]` and
//! `[m, v2, v0]`, whose refinement edges are again opposite `m`.

mod conformity;
pub mod io;
pub mod presets;
mod refine;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VertexId = usize;
pub type ElementId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryKind {
    Interior,
    Dirichlet,
    Neumann,
}

impl BoundaryKind {
    pub fn code(self) -> u8 {
        match self {
            BoundaryKind::Interior => 0,
            BoundaryKind::Dirichlet => 1,
            BoundaryKind::Neumann => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(BoundaryKind::Interior),
            1 => Some(BoundaryKind::Dirichlet),
            2 => Some(BoundaryKind::Neumann),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vertex {
    pub coords: [f64; 2],
    pub boundary: BoundaryKind,
    /// Zero for initial vertices, otherwise one plus the generation of the
    /// element whose bisection created the vertex.
    pub generation: u32,
    /// Endpoints of the edge this vertex bisected; `None` for initial vertices.
    pub parent_edge: Option<[VertexId; 2]>,
}

impl Vertex {
    pub fn initial(coords: [f64; 2], boundary: BoundaryKind) -> Self {
        Vertex {
            coords,
            boundary,
            generation: 0,
            parent_edge: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Element {
    /// Counterclockwise; local vertex 0 is the newest vertex.
    pub vertices: [VertexId; 3],
    pub subdomain: u32,
    pub generation: u32,
}

impl Element {
    /// The edge opposite the newest vertex.
    pub fn refinement_edge(&self) -> EdgeKey {
        EdgeKey::new(self.vertices[1], self.vertices[2])
    }

    pub fn edges(&self) -> [EdgeKey; 3] {
        let [a, b, c] = self.vertices;
        [EdgeKey::new(b, c), EdgeKey::new(c, a), EdgeKey::new(a, b)]
    }
}

/// Undirected edge, stored with the smaller id first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeKey(pub VertexId, pub VertexId);

impl EdgeKey {
    pub fn new(a: VertexId, b: VertexId) -> Self {
        if a < b {
            EdgeKey(a, b)
        } else {
            EdgeKey(b, a)
        }
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.0 == v || self.1 == v
    }
}

/// The one or two elements sharing an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeRing {
    elems: [ElementId; 2],
    len: u8,
}

impl EdgeRing {
    fn single(e: ElementId) -> Self {
        EdgeRing {
            elems: [e, usize::MAX],
            len: 1,
        }
    }

    pub fn as_slice(&self) -> &[ElementId] {
        &self.elems[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn push(&mut self, e: ElementId) -> Result<()> {
        if self.len == 2 {
            return Err(Error::Nonconforming(
                "edge shared by more than two elements".into(),
            ));
        }
        self.elems[self.len as usize] = e;
        self.len += 1;
        Ok(())
    }

    fn remove(&mut self, e: ElementId) {
        if let Some(pos) = self.as_slice().iter().position(|&x| x == e) {
            self.elems[pos] = self.elems[1];
            self.elems[1] = usize::MAX;
            self.len -= 1;
        }
    }

    fn replace(&mut self, old: ElementId, new: ElementId) {
        for slot in self.elems[..self.len as usize].iter_mut() {
            if *slot == old {
                *slot = new;
            }
        }
    }

    /// The element across the edge from `e`, if any.
    pub fn other(&self, e: ElementId) -> Option<ElementId> {
        self.as_slice().iter().copied().find(|&x| x != e)
    }
}

#[derive(Clone, Debug)]
pub struct Triangulation {
    vertices: Vec<Vertex>,
    elements: Vec<Element>,
    edges: HashMap<EdgeKey, EdgeRing>,
    /// Edges bisected from one side only, mapped to their midpoint.
    pending: HashMap<EdgeKey, VertexId>,
}

impl Triangulation {
    /// Builds a triangulation, rejecting repeated vertices within an element,
    /// nonpositive areas and edges shared by more than two elements.
    pub fn new(vertices: Vec<Vertex>, elements: Vec<Element>) -> Result<Self> {
        for (id, el) in elements.iter().enumerate() {
            let [a, b, c] = el.vertices;
            if a == b || b == c || a == c {
                return Err(Error::Nonconforming(format!(
                    "element {id} repeats a vertex"
                )));
            }
            if el.vertices.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Nonconforming(format!(
                    "element {id} references a missing vertex"
                )));
            }
        }
        let mut mesh = Triangulation {
            vertices,
            elements,
            edges: HashMap::new(),
            pending: HashMap::new(),
        };
        for id in 0..mesh.elements.len() {
            let area = mesh.signed_area(id);
            if area <= 0.0 {
                return Err(Error::InvertedElement { element: id, area });
            }
        }
        mesh.rebuild_edges()?;
        Ok(mesh)
    }

    fn rebuild_edges(&mut self) -> Result<()> {
        let mut edges: HashMap<EdgeKey, EdgeRing> =
            HashMap::with_capacity(self.elements.len() * 2);
        for (id, el) in self.elements.iter().enumerate() {
            for key in el.edges() {
                match edges.get_mut(&key) {
                    Some(ring) => ring.push(id)?,
                    None => {
                        edges.insert(key, EdgeRing::single(id));
                    }
                }
            }
        }
        self.edges = edges;
        Ok(())
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v]
    }

    pub fn element(&self, e: ElementId) -> &Element {
        &self.elements[e]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn coords(&self, v: VertexId) -> [f64; 2] {
        self.vertices[v].coords
    }

    pub fn edge_ring(&self, key: EdgeKey) -> Option<&EdgeRing> {
        self.edges.get(&key)
    }

    /// All edges in ascending key order.
    pub fn edge_keys(&self) -> Vec<EdgeKey> {
        let mut keys: Vec<EdgeKey> = self.edges.keys().copied().collect();
        keys.sort_unstable();
        keys
    }

    pub fn is_boundary_edge(&self, key: EdgeKey) -> bool {
        self.edges.get(&key).is_some_and(|r| r.len() == 1) && !self.pending.contains_key(&key)
    }

    /// True if some edge has been bisected from one side only.
    pub fn has_hanging_nodes(&self) -> bool {
        !self.pending.is_empty()
    }

    pub fn signed_area(&self, e: ElementId) -> f64 {
        let [a, b, c] = self.elements[e].vertices.map(|v| self.vertices[v].coords);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }

    pub fn area(&self, e: ElementId) -> f64 {
        self.signed_area(e).abs()
    }

    /// Longest edge length of an element.
    pub fn diameter(&self, e: ElementId) -> f64 {
        self.elements[e]
            .edges()
            .iter()
            .map(|k| self.edge_length(*k))
            .fold(0.0, f64::max)
    }

    pub fn edge_length(&self, key: EdgeKey) -> f64 {
        let a = self.vertices[key.0].coords;
        let b = self.vertices[key.1].coords;
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    pub fn max_generation(&self) -> u32 {
        self.elements.iter().map(|e| e.generation).max().unwrap_or(0)
    }

    pub fn min_diameter(&self) -> f64 {
        (0..self.num_elements())
            .map(|e| self.diameter(e))
            .fold(f64::INFINITY, f64::min)
    }

    /// An edge is compatible if it is the refinement edge of every element
    /// containing it.
    pub fn is_compatible_edge(&self, key: EdgeKey) -> bool {
        match self.edges.get(&key) {
            Some(ring) => ring
                .as_slice()
                .iter()
                .all(|&e| self.elements[e].refinement_edge() == key),
            None => false,
        }
    }

    /// Every edge is the refinement edge of all or none of its elements.
    pub fn is_compatibly_labeled(&self) -> bool {
        self.edges.iter().all(|(key, ring)| {
            let hits = ring
                .as_slice()
                .iter()
                .filter(|&&e| self.elements[e].refinement_edge() == *key)
                .count();
            hits == 0 || hits == ring.len()
        })
    }

    /// Minimum interior angle over all elements, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut min = f64::INFINITY;
        for el in &self.elements {
            let p = el.vertices.map(|v| self.vertices[v].coords);
            for i in 0..3 {
                let a = p[i];
                let b = p[(i + 1) % 3];
                let c = p[(i + 2) % 3];
                let u = [b[0] - a[0], b[1] - a[1]];
                let w = [c[0] - a[0], c[1] - a[1]];
                let cos = (u[0] * w[0] + u[1] * w[1])
                    / ((u[0] * u[0] + u[1] * u[1]).sqrt() * (w[0] * w[0] + w[1] * w[1]).sqrt());
                min = min.min(cos.clamp(-1.0, 1.0).acos());
            }
        }
        min
    }

    /// For every vertex, the ids of the elements containing it.
    pub fn vertex_ring(&self) -> Vec<Vec<ElementId>> {
        let mut rings = vec![Vec::new(); self.vertices.len()];
        for (id, el) in self.elements.iter().enumerate() {
            for &v in &el.vertices {
                rings[v].push(id);
            }
        }
        rings
    }

    /// Assigns refinement edges by the longest-edge rule and verifies that the
    /// resulting labeling is compatible. For criss-cross partitions of
    /// rectangles the longest edge of each right triangle is its hypotenuse,
    /// which is shared with the neighbor's hypotenuse.
    pub fn label_compatible(&self) -> Result<Triangulation> {
        if self.has_hanging_nodes() {
            return Err(Error::IncompatibleLabeling("mesh has hanging nodes".into()));
        }
        let mut mesh = self.clone();
        for id in 0..mesh.elements.len() {
            let el = mesh.elements[id];
            let lens = el.edges().map(|k| mesh.edge_length(k));
            // edges()[i] is opposite local vertex i
            let mut best = 0;
            for i in 1..3 {
                if lens[i] > lens[best] * (1.0 + 1e-12) {
                    best = i;
                }
            }
            let v = el.vertices;
            mesh.elements[id].vertices = [v[best], v[(best + 1) % 3], v[(best + 2) % 3]];
        }
        if !mesh.is_compatibly_labeled() {
            let bad = mesh
                .edge_keys()
                .into_iter()
                .find(|k| {
                    let ring = mesh.edges[k];
                    let hits = ring
                        .as_slice()
                        .iter()
                        .filter(|&&e| mesh.elements[e].refinement_edge() == *k)
                        .count();
                    hits != 0 && hits != ring.len()
                })
                .expect("incompatible edge exists");
            return Err(Error::IncompatibleLabeling(format!(
                "longest-edge labeling is incompatible at edge ({}, {})",
                bad.0, bad.1
            )));
        }
        Ok(mesh)
    }

    /// Checks conformity geometrically, independent of the stored adjacency.
    pub fn check_conformity(&self) -> bool {
        conformity::check(self).is_ok()
    }

    /// Like [`check_conformity`](Self::check_conformity) but reports the
    /// first violation.
    pub fn conformity_violation(&self) -> Option<String> {
        conformity::check(self).err()
    }
}
