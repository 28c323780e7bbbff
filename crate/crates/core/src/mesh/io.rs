//! Plain-text mesh files.
//!
//! ```text
//! nv ne ns
//! x y boundary_kind        (nv lines; 0 interior, 1 dirichlet, 2 neumann)
//! v0 v1 v2 subdomain       (ne lines; 0-based vertex ids, labels in 1..=ns)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::{BoundaryKind, Element, Triangulation, Vertex};
use crate::error::{Error, Result};

pub fn load_initial_mesh(path: impl AsRef<Path>) -> Result<Triangulation> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

pub fn parse_mesh(text: &str) -> Result<Triangulation> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        msg: "empty file".into(),
    })?;
    let header: Vec<usize> = parse_fields(hline, header)?;
    let &[nv, ne, ns] = header.as_slice() else {
        return Err(Error::Parse {
            line: hline,
            msg: "header must be `nv ne ns`".into(),
        });
    };

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: "unexpected end of file in vertex block".into(),
        })?;
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: "vertex line must be `x y boundary_kind`".into(),
            });
        }
        let x = parse_one::<f64>(line, fields[0])?;
        let y = parse_one::<f64>(line, fields[1])?;
        let kind = parse_one::<u8>(line, fields[2])?;
        let kind = BoundaryKind::from_code(kind).ok_or(Error::Parse {
            line,
            msg: format!("unknown boundary kind {kind}"),
        })?;
        vertices.push(Vertex::initial([x, y], kind));
    }

    let mut elements = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (line, l) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: "unexpected end of file in element block".into(),
        })?;
        let fields: Vec<usize> = parse_fields(line, l)?;
        match fields.len() {
            3 => return Err(Error::UnlabeledTriangle { line }),
            4 => {}
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: "element line must be `v0 v1 v2 subdomain`".into(),
                })
            }
        }
        let label = fields[3];
        if label == 0 || label > ns {
            return Err(Error::Parse {
                line,
                msg: format!("subdomain {label} outside 1..={ns}"),
            });
        }
        if let Some(&v) = fields[..3].iter().find(|&&v| v >= nv) {
            return Err(Error::Parse {
                line,
                msg: format!("vertex id {v} out of range"),
            });
        }
        elements.push(Element {
            vertices: [fields[0], fields[1], fields[2]],
            subdomain: label as u32,
            generation: 0,
        });
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse {
            line,
            msg: "trailing content after element block".into(),
        });
    }

    let mesh = Triangulation::new(vertices, elements)?;
    if let Some(why) = mesh.conformity_violation() {
        return Err(Error::Nonconforming(why));
    }
    Ok(mesh)
}

fn parse_one<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse `{s}`"),
    })
}

fn parse_fields<T: std::str::FromStr>(line: usize, s: &str) -> Result<Vec<T>> {
    s.split_whitespace().map(|f| parse_one(line, f)).collect()
}

/// Serializes a mesh in the same format. Coordinates use the shortest
/// round-trip representation.
pub fn format_mesh(mesh: &Triangulation) -> String {
    let ns = mesh.elements().iter().map(|e| e.subdomain).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", mesh.num_vertices(), mesh.num_elements(), ns);
    for v in mesh.vertices() {
        let _ = writeln!(out, "{} {} {}", v.coords[0], v.coords[1], v.boundary.code());
    }
    for e in mesh.elements() {
        let [a, b, c] = e.vertices;
        let _ = writeln!(out, "{a} {b} {c} {}", e.subdomain);
    }
    out
}

pub fn write_mesh(mesh: &Triangulation, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "4 2 1\n0 0 1\n1 0 1\n1 1 1\n0 1 1\n1 2 0 1\n3 0 2 1\n";

    #[test]
    fn two_triangle_square() {
        let mesh = parse_mesh(SQUARE).unwrap();
        assert_eq!(mesh.num_vertices(), 4);
        assert_eq!(mesh.num_elements(), 2);
        assert!(mesh.check_conformity());
    }

    #[test]
    fn hanging_node_is_rejected() {
        // left triangle split at (0.5, 0.5) while the right one is whole
        let text = "5 3 1\n0 0 1\n1 0 1\n1 1 1\n0 1 1\n0.5 0.5 0\n\
                    1 2 0 1\n4 3 0 1\n4 2 3 1\n";
        match parse_mesh(text) {
            Err(Error::Nonconforming(_)) => {}
            other => panic!("expected nonconforming error, got {other:?}"),
        }
    }

    #[test]
    fn inverted_element_is_rejected() {
        let text = "3 1 1\n0 0 1\n1 0 1\n0 1 1\n0 2 1 1\n";
        assert!(matches!(parse_mesh(text), Err(Error::InvertedElement { .. })));
    }

    #[test]
    fn unlabeled_triangle_is_rejected() {
        let text = "3 1 1\n0 0 1\n1 0 1\n0 1 1\n0 1 2\n";
        assert!(matches!(parse_mesh(text), Err(Error::UnlabeledTriangle { line: 5 })));
    }

    #[test]
    fn garbage_is_a_parse_error() {
        assert!(matches!(parse_mesh("3 1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_mesh("1 0 1\n0 zero 1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_mesh(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn format_then_parse_is_identity() {
        let mesh = crate::mesh::presets::jump_domain(8).unwrap();
        let again = parse_mesh(&format_mesh(&mesh)).unwrap();
        assert_eq!(again.vertices(), mesh.vertices());
        assert_eq!(again.elements(), mesh.elements());
    }
}
