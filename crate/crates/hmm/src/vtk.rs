//! Legacy VTK ASCII export (unstructured grid, cell data) for external
//! plotting tools.

use std::fmt::Write;

use hmm_core::geometry::Vec2;
use hmm_core::mesh::Mesh;

/// One scalar field per cell.
pub struct CellScalars<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

pub fn write_vtk(
    mesh: &Mesh,
    scalars: &[CellScalars<'_>],
    velocity: Option<&[Vec2]>,
    title: &str,
) -> String {
    let mut out = String::new();
    writeln!(out, "# vtk DataFile Version 2.0").expect("string write");
    writeln!(out, "{title}").expect("string write");
    writeln!(out, "ASCII").expect("string write");
    writeln!(out, "DATASET UNSTRUCTURED_GRID").expect("string write");

    writeln!(out, "POINTS {} double", mesh.vertices.len()).expect("string write");
    for v in &mesh.vertices {
        writeln!(out, "{:.17e} {:.17e} 0", v.x, v.y).expect("string write");
    }

    let list_len: usize = mesh.cells.iter().map(|c| c.vertices.len() + 1).sum();
    writeln!(out, "CELLS {} {}", mesh.cells.len(), list_len).expect("string write");
    for cell in &mesh.cells {
        let mut line = cell.vertices.len().to_string();
        for &vi in &cell.vertices {
            line.push(' ');
            line.push_str(&vi.to_string());
        }
        writeln!(out, "{line}").expect("string write");
    }
    writeln!(out, "CELL_TYPES {}", mesh.cells.len()).expect("string write");
    for _ in &mesh.cells {
        // type 7: VTK_POLYGON
        writeln!(out, "7").expect("string write");
    }

    writeln!(out, "CELL_DATA {}", mesh.cells.len()).expect("string write");
    for field in scalars {
        writeln!(out, "SCALARS {} double 1", field.name).expect("string write");
        writeln!(out, "LOOKUP_TABLE default").expect("string write");
        for v in field.values {
            writeln!(out, "{v:.17e}").expect("string write");
        }
    }
    if let Some(u) = velocity {
        writeln!(out, "VECTORS velocity double").expect("string write");
        for v in u {
            writeln!(out, "{:.17e} {:.17e} 0", v.x, v.y).expect("string write");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use hmm_core::mesh::{generate_rect_mesh, Rect};

    #[test]
    fn header_and_counts() {
        let mesh = generate_rect_mesh(2, 2, Rect::UNIT).unwrap();
        let conc = vec![0.5; 4];
        let text = write_vtk(&mesh, &[CellScalars { name: "concentration", values: &conc }], None, "t");
        assert!(text.starts_with("# vtk DataFile Version 2.0"));
        assert!(text.contains("POINTS 9 double"));
        assert!(text.contains("CELLS 4 20"));
        assert!(text.contains("SCALARS concentration double 1"));
    }
}
