//! Legacy ASCII VTK export.
//!
//! Layout, line by line:
//!
//! ```text
//! # vtk DataFile Version 3.0
//! <title>
//! ASCII
//! DATASET UNSTRUCTURED_GRID
//! POINTS <nodes> double          one "x y 0" line per node
//! CELLS <elements> <4*elements>  one "3 i j k" line per triangle
//! CELL_TYPES <elements>          "5" per triangle
//! POINT_DATA <nodes>             then per vector field:
//! VECTORS <name> double          one "u_x u_y 0" line per node
//! CELL_DATA <elements>           then per tensor field:
//! TENSORS <name> double          three rows "a b 0 / b c 0 / 0 0 0" per cell
//! ```
//!
//! Numbers use the shortest round-trip decimal form.

use std::io::{self, Write};

use super::Mesh;
use crate::numfmt::real;
use crate::tensor::SymTensor;

pub fn write_vtk<W: Write>(
    out: &mut W,
    title: &str,
    mesh: &Mesh,
    point_vectors: &[(&str, &[[f64; 2]])],
    cell_tensors: &[(&str, &[SymTensor])],
) -> io::Result<()> {
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.num_nodes())?;
    for p in &mesh.nodes {
        writeln!(out, "{} {} 0", real(p[0]), real(p[1]))?;
    }
    let ne = mesh.num_elements();
    writeln!(out, "CELLS {} {}", ne, 4 * ne)?;
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {ne}")?;
    for _ in 0..ne {
        writeln!(out, "5")?;
    }
    if !point_vectors.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.num_nodes())?;
        for (name, field) in point_vectors {
            check(field.len(), mesh.num_nodes(), name)?;
            writeln!(out, "VECTORS {name} double")?;
            for v in field.iter() {
                writeln!(out, "{} {} 0", real(v[0]), real(v[1]))?;
            }
        }
    }
    if !cell_tensors.is_empty() {
        writeln!(out, "CELL_DATA {ne}")?;
        for (name, field) in cell_tensors {
            check(field.len(), ne, name)?;
            writeln!(out, "TENSORS {name} double")?;
            for s in field.iter() {
                let (a, b, c) = (real(s.get(0, 0)), real(s.get(0, 1)), real(s.get(1, 1)));
                writeln!(out, "{a} {b} 0\n{b} {c} 0\n0 0 0")?;
            }
        }
    }
    Ok(())
}

fn check(got: usize, expected: usize, name: &str) -> io::Result<()> {
    if got == expected {
        Ok(())
    } else {
        Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("field {name} has {got} entries, expected {expected}"),
        ))
    }
}
