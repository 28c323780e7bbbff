//! Criss-cross initial meshes of axis-aligned rectangles.

use super::{BoundaryKind, Element, Triangulation, Vertex};
use crate::error::Result;

/// Criss-cross mesh of an `nx` x `ny` grid of cells on `[x0, x1] x [y0, y1]`.
/// Each cell is split into four triangles around its center. `subdomain`
/// receives the cell center; `boundary` receives each vertex position and is
/// only consulted for vertices on the outer boundary.
pub fn criss_cross(
    nx: usize,
    ny: usize,
    xs: [f64; 2],
    ys: [f64; 2],
    subdomain: impl Fn(f64, f64) -> u32,
    boundary: impl Fn(f64, f64) -> BoundaryKind,
) -> Result<Triangulation> {
    let hx = (xs[1] - xs[0]) / nx as f64;
    let hy = (ys[1] - ys[0]) / ny as f64;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) + nx * ny);
    for j in 0..=ny {
        for i in 0..=nx {
            let x = xs[0] + i as f64 * hx;
            let y = ys[0] + j as f64 * hy;
            let on_boundary = i == 0 || i == nx || j == 0 || j == ny;
            let kind = if on_boundary {
                boundary(x, y)
            } else {
                BoundaryKind::Interior
            };
            vertices.push(Vertex::initial([x, y], kind));
        }
    }
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(4 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let cx = xs[0] + (i as f64 + 0.5) * hx;
            let cy = ys[0] + (j as f64 + 0.5) * hy;
            let c = vertices.len();
            vertices.push(Vertex::initial([cx, cy], BoundaryKind::Interior));
            let label = subdomain(cx, cy);
            let (p00, p10, p11, p01) = (grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1));
            for [a, b] in [[p00, p10], [p10, p11], [p11, p01], [p01, p00]] {
                elements.push(Element {
                    vertices: [c, a, b],
                    subdomain: label,
                    generation: 0,
                });
            }
        }
    }
    Triangulation::new(vertices, elements)?.label_compatible()
}

/// Unit square `(0, 1)^2`, one subdomain, Dirichlet boundary everywhere.
pub fn unit_square(n: usize) -> Result<Triangulation> {
    criss_cross(n, n, [0.0, 1.0], [0.0, 1.0], |_, _| 1, |_, _| BoundaryKind::Dirichlet)
}

/// Subdomain label of the jump domain: 1 on `(-0.5, 0)^2`, 2 on `(0, 0.5)^2`,
/// 3 elsewhere in `(-1, 1)^2`.
pub fn jump_subdomain(x: f64, y: f64) -> u32 {
    if (-0.5..0.0).contains(&x) && (-0.5..0.0).contains(&y) {
        1
    } else if (0.0..0.5).contains(&x) && (0.0..0.5).contains(&y) {
        2
    } else {
        3
    }
}

/// Boundary kind of the jump domain: Dirichlet on `x = -1` and `x = 1`,
/// Neumann elsewhere.
pub fn jump_boundary(x: f64, _y: f64) -> BoundaryKind {
    if x == -1.0 || x == 1.0 {
        BoundaryKind::Dirichlet
    } else {
        BoundaryKind::Neumann
    }
}

/// `(-1, 1)^2` criss-cross mesh with `n` cells per side (`n` divisible by 4
/// so that both inner squares are resolved).
pub fn jump_domain(n: usize) -> Result<Triangulation> {
    assert!(n % 4 == 0, "cells per side must be a multiple of 4");
    criss_cross(n, n, [-1.0, 1.0], [-1.0, 1.0], jump_subdomain, jump_boundary)
}

/// Two triangles on the unit square sharing the diagonal from (0,0) to (1,1),
/// labeled with the diagonal as refinement edge.
pub fn two_triangle_square(boundary: BoundaryKind) -> Result<Triangulation> {
    let vertices = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
        .into_iter()
        .map(|p| Vertex::initial(p, boundary))
        .collect();
    let elements = vec![
        Element {
            vertices: [1, 2, 0],
            subdomain: 1,
            generation: 0,
        },
        Element {
            vertices: [3, 0, 2],
            subdomain: 1,
            generation: 0,
        },
    ];
    Triangulation::new(vertices, elements)
}
