//! Recovery of the compatible-bisection decomposition of a bisection grid by
//! vertex-oriented coarsening.
//!
//! A vertex is removable when it was created by bisection, is the newest
//! vertex of every element around it, and its ring has four elements
//! (interior) or two (boundary). Removing it undoes one compatible bisection.
//! All removable vertices of a mesh have pairwise disjoint patches, so one
//! sweep removes them simultaneously and forms one level.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{EdgeKey, Element, ElementId, Triangulation, Vertex, VertexId};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompatibleBisection {
    /// New vertex `p_i`.
    pub midpoint: VertexId,
    /// Endpoints `p_l`, `p_r` of the bisected edge.
    pub endpoints: [VertexId; 2],
    /// Generation of the elements around the midpoint.
    pub generation: u32,
    /// Elements around the midpoint, as ids in the mesh the bisection was
    /// discovered in.
    pub patch_elements: Vec<ElementId>,
    /// Diameter of the patch of the midpoint.
    pub patch_diameter: f64,
}

#[derive(Clone, Debug)]
pub struct BisectionSequence {
    /// Coarse-to-fine replay order. Vertex ids refer to the target mesh.
    pub items: Vec<CompatibleBisection>,
    pub source: Triangulation,
    pub target: Triangulation,
}

impl BisectionSequence {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// JSON dump of midpoint, endpoints and generation per item.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Item {
            midpoint: VertexId,
            endpoints: [VertexId; 2],
            generation: u32,
        }
        let items: Vec<Item> = self
            .items
            .iter()
            .map(|b| Item {
                midpoint: b.midpoint,
                endpoints: b.endpoints,
                generation: b.generation,
            })
            .collect();
        serde_json::to_string_pretty(&items).expect("plain data serializes")
    }
}

/// Groups `G(1), ..., G(L')` of indices into the bisection sequence. Group
/// `l` holds the bisections removed by the `(L' - l + 1)`-th coarsening sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelGrouping {
    pub groups: Vec<Vec<usize>>,
}

impl LevelGrouping {
    pub fn num_levels(&self) -> usize {
        self.groups.len()
    }
}

/// Removes every removable vertex at once. Returns the coarsened mesh and the
/// removed bisections, in ascending midpoint order, with vertex and element
/// ids of the input mesh. Vertices of the coarse mesh keep their relative
/// order.
pub fn coarsen_once(mesh: &Triangulation) -> (Triangulation, Vec<CompatibleBisection>) {
    let (coarse, removed, _) = coarsen_with_map(mesh);
    (coarse, removed)
}

struct RemovalPlan {
    bisection: CompatibleBisection,
    /// Merged parents, in input vertex ids.
    parents: Vec<Element>,
}

/// Also returns, for every coarse vertex, its id in the input mesh.
fn coarsen_with_map(mesh: &Triangulation) -> (Triangulation, Vec<CompatibleBisection>, Vec<VertexId>) {
    let rings = mesh.vertex_ring();
    let mut plans = Vec::new();
    for p in 0..mesh.num_vertices() {
        if let Some(plan) = removal_plan(mesh, p, &rings[p]) {
            plans.push(plan);
        }
    }
    if plans.is_empty() {
        let kept = (0..mesh.num_vertices()).collect();
        return (mesh.clone(), Vec::new(), kept);
    }

    let mut removed_vertex = vec![false; mesh.num_vertices()];
    let mut removed_element = vec![false; mesh.num_elements()];
    for plan in &plans {
        removed_vertex[plan.bisection.midpoint] = true;
        for &e in &plan.bisection.patch_elements {
            debug_assert!(!removed_element[e], "patches of one sweep overlap");
            removed_element[e] = true;
        }
    }

    let mut new_id = vec![usize::MAX; mesh.num_vertices()];
    let mut kept = Vec::with_capacity(mesh.num_vertices() - plans.len());
    for v in 0..mesh.num_vertices() {
        if !removed_vertex[v] {
            new_id[v] = kept.len();
            kept.push(v);
        }
    }
    let vertices: Vec<Vertex> = kept
        .iter()
        .map(|&v| {
            let mut vert = mesh.vertex(v).clone();
            vert.parent_edge = vert.parent_edge.map(|[a, b]| [new_id[a], new_id[b]]);
            vert
        })
        .collect();

    // surviving elements keep their order; merged parents take the slot of
    // their lowest-numbered child
    let mut slots: Vec<(ElementId, Element)> = Vec::with_capacity(mesh.num_elements());
    for (id, el) in mesh.elements().iter().enumerate() {
        if !removed_element[id] {
            slots.push((id, *el));
        }
    }
    for plan in &plans {
        for parent in &plan.parents {
            let child_slot = plan
                .bisection
                .patch_elements
                .iter()
                .copied()
                .filter(|&e| {
                    let el = mesh.element(e);
                    parent.vertices.contains(&el.vertices[1]) && parent.vertices.contains(&el.vertices[2])
                })
                .min()
                .expect("parent has a child in the patch");
            slots.push((child_slot, *parent));
        }
    }
    slots.sort_by_key(|(id, _)| *id);
    let elements: Vec<Element> = slots
        .into_iter()
        .map(|(_, mut el)| {
            el.vertices = el.vertices.map(|v| new_id[v]);
            el
        })
        .collect();

    let coarse = Triangulation::new(vertices, elements).expect("coarsening preserves validity");
    let removed = plans.into_iter().map(|p| p.bisection).collect();
    (coarse, removed, kept)
}

fn removal_plan(mesh: &Triangulation, p: VertexId, ring: &[ElementId]) -> Option<RemovalPlan> {
    let vertex = mesh.vertex(p);
    let [l, r] = vertex.parent_edge?;
    if vertex.generation == 0 || !(ring.len() == 2 || ring.len() == 4) {
        return None;
    }
    if ring.iter().any(|&e| mesh.element(e).vertices[0] != p) {
        return None;
    }
    let on_boundary = ring.iter().any(|&e| {
        let el = mesh.element(e);
        mesh.is_boundary_edge(EdgeKey::new(p, el.vertices[1]))
            || mesh.is_boundary_edge(EdgeKey::new(p, el.vertices[2]))
    });
    if on_boundary != (ring.len() == 2) {
        return None;
    }
    let generation = mesh.element(ring[0]).generation;
    if ring.iter().any(|&e| mesh.element(e).generation != generation) || generation == 0 {
        return None;
    }

    // children of [v0, v1, v2] are [p, v0, v1] (ends in v1) and [p, v2, v0]
    // (starts at v2); pair them through the shared apex v0
    let mut firsts = Vec::new();
    let mut seconds = Vec::new();
    for &e in ring {
        let el = mesh.element(e);
        let [_, a, b] = el.vertices;
        if b == l || b == r {
            firsts.push(el);
        } else if a == l || a == r {
            seconds.push(el);
        } else {
            return None;
        }
    }
    if firsts.len() != seconds.len() {
        return None;
    }
    let mut parents = Vec::with_capacity(firsts.len());
    for first in &firsts {
        let apex = first.vertices[1];
        let second = seconds.iter().find(|s| s.vertices[2] == apex)?;
        if second.subdomain != first.subdomain {
            return None;
        }
        let (v1, v2) = (first.vertices[2], second.vertices[1]);
        if EdgeKey::new(v1, v2) != EdgeKey::new(l, r) {
            return None;
        }
        parents.push(Element {
            vertices: [apex, v1, v2],
            subdomain: first.subdomain,
            generation: generation - 1,
        });
    }

    let mut patch: Vec<ElementId> = ring.to_vec();
    patch.sort_unstable();
    Some(RemovalPlan {
        bisection: CompatibleBisection {
            midpoint: p,
            endpoints: [l, r],
            generation,
            patch_diameter: patch_diameter(mesh, &patch),
            patch_elements: patch,
        },
        parents,
    })
}

fn patch_diameter(mesh: &Triangulation, patch: &[ElementId]) -> f64 {
    let points: BTreeSet<VertexId> = patch
        .iter()
        .flat_map(|&e| mesh.element(e).vertices)
        .collect();
    let points: Vec<[f64; 2]> = points.into_iter().map(|v| mesh.coords(v)).collect();
    let mut diam: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            diam = diam.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
        }
    }
    diam
}

/// Coarsens `fine` until no vertex is removable and checks that the result is
/// `coarse`. Returns the bisections in replay order, grouped by sweep.
pub fn decompose(fine: &Triangulation, coarse: &Triangulation) -> Result<(BisectionSequence, LevelGrouping)> {
    let mut sweeps: Vec<Vec<CompatibleBisection>> = Vec::new();
    let mut current = fine.clone();
    // fine id of every vertex of `current`
    let mut to_fine: Vec<VertexId> = (0..fine.num_vertices()).collect();
    loop {
        let (next, removed, kept) = coarsen_with_map(&current);
        if removed.is_empty() {
            break;
        }
        log::debug!(
            "coarsening sweep {}: {} -> {} vertices",
            sweeps.len() + 1,
            current.num_vertices(),
            next.num_vertices()
        );
        let mapped = removed
            .into_iter()
            .map(|mut b| {
                b.midpoint = to_fine[b.midpoint];
                b.endpoints = b.endpoints.map(|v| to_fine[v]);
                b
            })
            .collect();
        sweeps.push(mapped);
        to_fine = kept.iter().map(|&v| to_fine[v]).collect();
        current = next;
    }

    if !same_mesh(&current, &to_fine, coarse) {
        return Err(Error::Decomposition(format!(
            "coarsening stopped at {} vertices / {} elements, coarse mesh has {} / {}",
            current.num_vertices(),
            current.num_elements(),
            coarse.num_vertices(),
            coarse.num_elements()
        )));
    }

    let mut items = Vec::new();
    let mut groups = Vec::with_capacity(sweeps.len());
    for sweep in sweeps.into_iter().rev() {
        let start = items.len();
        items.extend(sweep);
        groups.push((start..items.len()).collect());
    }
    Ok((
        BisectionSequence {
            items,
            source: coarse.clone(),
            target: fine.clone(),
        },
        LevelGrouping { groups },
    ))
}

/// Compares `mesh` (whose vertex `i` is fine vertex `to_fine[i]`) with `coarse`,
/// whose vertex ids are taken to be fine ids.
fn same_mesh(mesh: &Triangulation, to_fine: &[VertexId], coarse: &Triangulation) -> bool {
    if mesh.num_vertices() != coarse.num_vertices() || mesh.num_elements() != coarse.num_elements() {
        return false;
    }
    for (i, &f) in to_fine.iter().enumerate() {
        if f >= coarse.num_vertices() || mesh.coords(i) != coarse.coords(f) {
            return false;
        }
    }
    let canon = |els: &mut dyn Iterator<Item = Element>| {
        let mut v: Vec<([VertexId; 3], u32, u32)> =
            els.map(|e| (e.vertices, e.subdomain, e.generation)).collect();
        v.sort_unstable();
        v
    };
    let ours = canon(&mut mesh.elements().iter().map(|e| Element {
        vertices: e.vertices.map(|v| to_fine[v]),
        ..*e
    }));
    let theirs = canon(&mut coarse.elements().iter().copied());
    ours == theirs
}

/// Replays `source + items` with compatible bisections and compares the
/// result with `target`: vertex coordinates must match exactly under the
/// id mapping and the labeled element sets must coincide.
pub fn verify_replay(seq: &BisectionSequence) -> bool {
    let mut mesh = seq.source.clone();
    // replay id of each target vertex
    let mut map: HashMap<VertexId, VertexId> = (0..mesh.num_vertices()).map(|v| (v, v)).collect();
    for item in &seq.items {
        let (Some(&l), Some(&r)) = (map.get(&item.endpoints[0]), map.get(&item.endpoints[1])) else {
            return false;
        };
        let key = EdgeKey::new(l, r);
        let Ok(m) = mesh.bisect_compatible_edge(key) else {
            return false;
        };
        if map.insert(item.midpoint, m).is_some() {
            return false;
        }
    }
    let target = &seq.target;
    if mesh.num_vertices() != target.num_vertices() || mesh.num_elements() != target.num_elements() {
        return false;
    }
    let mut to_target = vec![usize::MAX; mesh.num_vertices()];
    for (&t, &m) in &map {
        if t >= target.num_vertices() || mesh.coords(m) != target.coords(t) {
            return false;
        }
        to_target[m] = t;
    }
    let mut ours: Vec<([VertexId; 3], u32, u32)> = mesh
        .elements()
        .iter()
        .map(|e| (e.vertices.map(|v| to_target[v]), e.subdomain, e.generation))
        .collect();
    let mut theirs: Vec<([VertexId; 3], u32, u32)> = target
        .elements()
        .iter()
        .map(|e| (e.vertices, e.subdomain, e.generation))
        .collect();
    ours.sort_unstable();
    theirs.sort_unstable();
    ours == theirs
}
