//! Line-oriented mesh text format.
//!
//! ```text
//! mesh d=2
//! vertices N
//! x y            # one line per vertex
//! cells M
//! i j k ...      # zero-based vertex ids, counter-clockwise
//! ```
//!
//! `#` starts a comment anywhere on a line.

use std::path::Path;

use hmm_core::geometry::Vec2;
use hmm_core::mesh::{build_mesh, Mesh};

use crate::CliError;

fn strip(line: &str) -> &str {
    match line.split_once('#') {
        Some((head, _)) => head.trim(),
        None => line.trim(),
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-empty, comment-stripped line with its 1-based number.
    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        for (i, raw) in self.inner.by_ref() {
            let line = strip(raw);
            if !line.is_empty() {
                return Some((i + 1, line));
            }
        }
        None
    }
}

pub fn parse_mesh(text: &str, origin: &str) -> Result<Mesh, CliError> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let fail = |lineno: usize, msg: String| CliError::input(format!("{origin}:{lineno}: {msg}"));

    let (ln, header) = lines
        .next_content()
        .ok_or_else(|| CliError::input(format!("{origin}: empty mesh file")))?;
    if header != "mesh d=2" {
        return Err(fail(ln, format!("expected header 'mesh d=2', found '{header}'")));
    }

    let (ln, decl) = lines
        .next_content()
        .ok_or_else(|| CliError::input(format!("{origin}: missing 'vertices N' section")))?;
    let n_vertices = decl
        .strip_prefix("vertices ")
        .and_then(|v| v.trim().parse::<usize>().ok())
        .ok_or_else(|| fail(ln, format!("expected 'vertices N', found '{decl}'")))?;
    let mut vertices = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let (ln, line) = lines
            .next_content()
            .ok_or_else(|| CliError::input(format!("{origin}: truncated vertex section")))?;
        let mut parts = line.split_whitespace();
        let (x, y) = match (parts.next(), parts.next(), parts.next()) {
            (Some(x), Some(y), None) => (x, y),
            _ => return Err(fail(ln, format!("expected 'x y', found '{line}'"))),
        };
        let x = x.parse::<f64>().map_err(|_| fail(ln, format!("bad coordinate '{x}'")))?;
        let y = y.parse::<f64>().map_err(|_| fail(ln, format!("bad coordinate '{y}'")))?;
        vertices.push(Vec2::new(x, y));
    }

    let (ln, decl) = lines
        .next_content()
        .ok_or_else(|| CliError::input(format!("{origin}: missing 'cells M' section")))?;
    let n_cells = decl
        .strip_prefix("cells ")
        .and_then(|v| v.trim().parse::<usize>().ok())
        .ok_or_else(|| fail(ln, format!("expected 'cells M', found '{decl}'")))?;
    let mut cells = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let (ln, line) = lines
            .next_content()
            .ok_or_else(|| CliError::input(format!("{origin}: truncated cell section")))?;
        let ids: Result<Vec<usize>, _> = line.split_whitespace().map(|v| v.parse::<usize>()).collect();
        let ids = ids.map_err(|_| fail(ln, format!("bad vertex id list '{line}'")))?;
        if ids.len() < 3 {
            return Err(fail(ln, "a cell needs at least 3 vertices".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= n_vertices) {
            return Err(fail(ln, format!("vertex id {bad} out of range (have {n_vertices})")));
        }
        cells.push(ids);
    }
    if let Some((ln, line)) = lines.next_content() {
        return Err(fail(ln, format!("unexpected trailing content '{line}'")));
    }

    build_mesh(&vertices, &cells).map_err(CliError::model_from)
}

pub fn read_mesh(path: &Path) -> Result<Mesh, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|_| CliError::input(format!("mesh file not found: {}", path.display())))?;
    parse_mesh(&text, &path.display().to_string())
}

pub fn write_mesh(mesh: &Mesh) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(out, "mesh d=2").expect("string write");
    writeln!(out, "vertices {}", mesh.vertices.len()).expect("string write");
    for v in &mesh.vertices {
        writeln!(out, "{:.17e} {:.17e}", v.x, v.y).expect("string write");
    }
    writeln!(out, "cells {}", mesh.cells.len()).expect("string write");
    for cell in &mesh.cells {
        let ids: Vec<String> = cell.vertices.iter().map(|i| i.to_string()).collect();
        writeln!(out, "{}", ids.join(" ")).expect("string write");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use hmm_core::mesh::{generate_perturbed_mesh, Rect};

    #[test]
    fn roundtrip_perturbed_mesh() {
        let mesh = generate_perturbed_mesh(4, 4, Rect::UNIT, 0.2, 7).unwrap();
        let text = write_mesh(&mesh);
        let back = parse_mesh(&text, "roundtrip").unwrap();
        assert_eq!(back.cells.len(), mesh.cells.len());
        assert_eq!(back.edges.len(), mesh.edges.len());
        for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.y, b.y);
        }
    }

    #[test]
    fn unit_square_single_cell() {
        let text = "mesh d=2\nvertices 4\n0 0\n1 0\n1 1\n0 1\ncells 1\n0 1 2 3\n";
        let mesh = parse_mesh(text, "inline").unwrap();
        assert_eq!(mesh.cells.len(), 1);
        assert!((mesh.cells[0].measure - 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors_name_the_line() {
        let text = "mesh d=2\nvertices 2\n0 0\noops oops\ncells 0\n";
        let err = parse_mesh(text, "bad").unwrap_err();
        assert!(err.to_string().contains("bad:4"), "{err}");
    }
}
