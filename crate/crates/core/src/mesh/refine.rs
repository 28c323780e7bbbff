use super::{BoundaryKind, EdgeKey, EdgeRing, Element, ElementId, Triangulation, Vertex, VertexId};
use crate::error::{Error, Result};

impl Triangulation {
    /// Bisects one element across its refinement edge, returning the new mesh
    /// and the midpoint. If the neighbor across the refinement edge has not
    /// been bisected yet, the result has a hanging node until it is.
    pub fn bisect(&self, element: ElementId) -> Result<(Triangulation, VertexId)> {
        let mut mesh = self.clone();
        let m = mesh.bisect_in_place(element)?;
        Ok((mesh, m))
    }

    /// In-place form of [`bisect`](Self::bisect). The first child keeps the
    /// element id; the second child is appended.
    pub fn bisect_in_place(&mut self, element: ElementId) -> Result<VertexId> {
        if element >= self.elements.len() {
            return Err(Error::NoSuchElement(element));
        }
        let parent = self.elements[element];
        let [v0, v1, v2] = parent.vertices;
        let key = EdgeKey::new(v1, v2);
        let generation = parent.generation + 1;

        let m = match self.pending.remove(&key) {
            Some(m) => m,
            None => {
                let ring_len = self.edges.get(&key).map_or(0, EdgeRing::len);
                let (a, b) = (&self.vertices[v1], &self.vertices[v2]);
                let boundary = if ring_len == 1 {
                    if a.boundary == BoundaryKind::Dirichlet && b.boundary == BoundaryKind::Dirichlet {
                        BoundaryKind::Dirichlet
                    } else {
                        BoundaryKind::Neumann
                    }
                } else {
                    BoundaryKind::Interior
                };
                let coords = [
                    0.5 * (a.coords[0] + b.coords[0]),
                    0.5 * (a.coords[1] + b.coords[1]),
                ];
                let m = self.vertices.len();
                self.vertices.push(Vertex {
                    coords,
                    boundary,
                    generation,
                    parent_edge: Some([v1, v2]),
                });
                if ring_len == 2 {
                    self.pending.insert(key, m);
                }
                m
            }
        };

        let second = self.elements.len();
        self.elements[element] = Element {
            vertices: [m, v0, v1],
            subdomain: parent.subdomain,
            generation,
        };
        self.elements.push(Element {
            vertices: [m, v2, v0],
            subdomain: parent.subdomain,
            generation,
        });

        if let Some(ring) = self.edges.get_mut(&key) {
            ring.remove(element);
            if ring.is_empty() {
                self.edges.remove(&key);
            }
        }
        if let Some(ring) = self.edges.get_mut(&EdgeKey::new(v2, v0)) {
            ring.replace(element, second);
        }
        self.add_to_edge(EdgeKey::new(m, v0), element)?;
        self.add_to_edge(EdgeKey::new(m, v0), second)?;
        self.add_to_edge(EdgeKey::new(m, v1), element)?;
        self.add_to_edge(EdgeKey::new(m, v2), second)?;
        Ok(m)
    }

    fn add_to_edge(&mut self, key: EdgeKey, e: ElementId) -> Result<()> {
        match self.edges.get_mut(&key) {
            Some(ring) => ring.push(e),
            None => {
                self.edges.insert(key, EdgeRing::single(e));
                Ok(())
            }
        }
    }

    /// Bisects every element of a compatible edge at once, so conformity is
    /// preserved. Returns the midpoint.
    pub fn bisect_compatible_edge(&mut self, key: EdgeKey) -> Result<VertexId> {
        if !self.is_compatible_edge(key) {
            return Err(Error::InvalidArgument(format!(
                "edge ({}, {}) is not a compatible edge",
                key.0, key.1
            )));
        }
        let ring = *self.edges.get(&key).expect("compatible edge exists");
        let mut m = usize::MAX;
        for &e in ring.as_slice() {
            m = self.bisect_in_place(e)?;
        }
        Ok(m)
    }

    /// Bisects all marked elements at least once and completes the result to
    /// a conforming triangulation by recursive refinement of neighbors.
    pub fn refine(&self, marked: &[ElementId]) -> Result<Triangulation> {
        let mut mesh = self.clone();
        mesh.refine_in_place(marked)?;
        Ok(mesh)
    }

    pub fn refine_in_place(&mut self, marked: &[ElementId]) -> Result<()> {
        let mut order: Vec<ElementId> = marked.to_vec();
        order.sort_unstable();
        order.dedup();
        if let Some(&bad) = order.iter().find(|&&e| e >= self.elements.len()) {
            return Err(Error::NoSuchElement(bad));
        }
        // the slot of a bisected element holds its first child, whose
        // generation is larger
        let original: Vec<u32> = order.iter().map(|&e| self.elements[e].generation).collect();
        for (&e, &g) in order.iter().zip(&original) {
            if self.elements[e].generation == g {
                let limit = self.elements.len();
                self.refine_element(e, 0, limit)?;
            }
        }
        debug_assert!(self.pending.is_empty());
        Ok(())
    }

    fn refine_element(&mut self, e: ElementId, depth: usize, limit: usize) -> Result<()> {
        if depth > limit {
            return Err(Error::RecursionDepth { depth });
        }
        let key = self.elements[e].refinement_edge();
        let neighbor = self.edges.get(&key).and_then(|r| r.other(e));
        match neighbor {
            None => {
                self.bisect_in_place(e)?;
            }
            Some(n) => {
                if self.elements[n].refinement_edge() != key {
                    self.refine_element(n, depth + 1, limit)?;
                }
                // the child of n across `key` now has it as refinement edge
                let n = self
                    .edges
                    .get(&key)
                    .and_then(|r| r.other(e))
                    .expect("edge keeps its neighbor after refinement");
                if self.elements[n].refinement_edge() != key {
                    return Err(Error::RecursionDepth { depth });
                }
                self.bisect_in_place(e)?;
                self.bisect_in_place(n)?;
            }
        }
        Ok(())
    }

    /// Bisects every element once.
    pub fn uniform_refine(&self) -> Result<Triangulation> {
        let all: Vec<ElementId> = (0..self.num_elements()).collect();
        self.refine(&all)
    }

    /// Applies `uniform_refine` `times` times.
    pub fn uniform_refine_n(&self, times: usize) -> Result<Triangulation> {
        let mut mesh = self.clone();
        for _ in 0..times {
            mesh = mesh.uniform_refine()?;
        }
        Ok(mesh)
    }
}
