//! Legacy ASCII VTK export of meshes and nodal fields, plus a minimal
//! reader used to verify that written files parse back.
//!
//! Fields on quadratic spaces are exported at the mesh vertices only
//! (the vertex subset of the nodes); edge-midpoint values are dropped.

use crate::error::{AppError, Result};
use std::io::{BufWriter, Write};
use std::path::Path;
use tfsolve_core::mesh::Mesh;

/// Nodal fields to export; values beyond `vertex_count` entries (P2 edge
/// nodes) are ignored.
pub struct FieldExport<'a> {
    pub temperature: Option<&'a [f64]>,
    /// Interleaved x y z per node.
    pub displacement: Option<&'a [f64]>,
}

impl FieldExport<'_> {
    pub fn none() -> FieldExport<'static> {
        FieldExport { temperature: None, displacement: None }
    }
}

pub fn write_vtk(mesh: &Mesh, fields: &FieldExport, path: &Path) -> Result<()> {
    let nv = mesh.vertex_count();
    if let Some(t) = fields.temperature {
        if t.len() < nv {
            return Err(AppError::config(format!(
                "temperature field has {} entries for {} vertices",
                t.len(),
                nv
            )));
        }
    }
    if let Some(u) = fields.displacement {
        if u.len() < 3 * nv {
            return Err(AppError::config(format!(
                "displacement field has {} entries for {} vertices",
                u.len(),
                nv
            )));
        }
    }

    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "tfsolve fields")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;

    writeln!(out, "POINTS {nv} double")?;
    for v in mesh.vertices() {
        writeln!(out, "{} {} {}", v[0], v[1], v[2])?;
    }

    let mc = mesh.cell_count();
    writeln!(out, "CELLS {mc} {}", 5 * mc)?;
    for cell in mesh.cells() {
        writeln!(out, "4 {} {} {} {}", cell[0], cell[1], cell[2], cell[3])?;
    }
    writeln!(out, "CELL_TYPES {mc}")?;
    for _ in 0..mc {
        writeln!(out, "10")?;
    }

    writeln!(out, "CELL_DATA {mc}")?;
    writeln!(out, "SCALARS region int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for region in mesh.cell_regions() {
        writeln!(out, "{region}")?;
    }

    if fields.temperature.is_some() || fields.displacement.is_some() {
        writeln!(out, "POINT_DATA {nv}")?;
    }
    if let Some(t) = fields.temperature {
        writeln!(out, "SCALARS temperature double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for value in &t[..nv] {
            writeln!(out, "{value}")?;
        }
    }
    if let Some(u) = fields.displacement {
        writeln!(out, "VECTORS displacement double")?;
        for node in 0..nv {
            writeln!(out, "{} {} {}", u[3 * node], u[3 * node + 1], u[3 * node + 2])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Subset of a legacy VTK unstructured grid this writer emits; enough to
/// verify round trips.
#[derive(Debug, Default)]
pub struct VtkContents {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<[usize; 4]>,
    pub cell_types: Vec<u8>,
    pub scalars: Vec<(String, Vec<f64>)>,
    pub vectors: Vec<(String, Vec<[f64; 3]>)>,
}

fn tokens_of(count: usize, lines: &mut std::str::Lines, what: &str) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let line = lines
            .next()
            .ok_or_else(|| AppError::config(format!("vtk: unexpected end of file in {what}")))?;
        out.extend(line.split_whitespace().map(str::to_string));
    }
    if out.len() != count {
        return Err(AppError::config(format!("vtk: ragged data block in {what}")));
    }
    Ok(out)
}

fn parse_f64(token: &str, what: &str) -> Result<f64> {
    token.parse().map_err(|_| AppError::config(format!("vtk: bad {what} value {token:?}")))
}

/// Parses the structure `write_vtk` produces. Not a general VTK reader.
pub fn parse_vtk(text: &str) -> Result<VtkContents> {
    let mut contents = VtkContents::default();
    let mut lines = text.lines();
    let mut point_count = 0usize;
    while let Some(line) = lines.next() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["POINTS", n, _] => {
                point_count = parse_f64(n, "count")? as usize;
                let tok = tokens_of(3 * point_count, &mut lines, "POINTS")?;
                for p in tok.chunks(3) {
                    contents.points.push([
                        parse_f64(&p[0], "coordinate")?,
                        parse_f64(&p[1], "coordinate")?,
                        parse_f64(&p[2], "coordinate")?,
                    ]);
                }
            }
            ["CELLS", m, total] => {
                let m: usize = parse_f64(m, "count")? as usize;
                let total: usize = parse_f64(total, "count")? as usize;
                let tok = tokens_of(total, &mut lines, "CELLS")?;
                let mut at = 0;
                for _ in 0..m {
                    if tok[at] != "4" {
                        return Err(AppError::config("vtk: only tetrahedral cells supported"));
                    }
                    let mut cell = [0usize; 4];
                    for (k, slot) in cell.iter_mut().enumerate() {
                        *slot = parse_f64(&tok[at + 1 + k], "cell index")? as usize;
                    }
                    contents.cells.push(cell);
                    at += 5;
                }
            }
            ["CELL_TYPES", m] => {
                let m: usize = parse_f64(m, "count")? as usize;
                let tok = tokens_of(m, &mut lines, "CELL_TYPES")?;
                for t in tok {
                    contents.cell_types.push(parse_f64(&t, "cell type")? as u8);
                }
            }
            ["SCALARS", name, _, _] | ["SCALARS", name, _] => {
                let header = lines.next().unwrap_or_default();
                if !header.starts_with("LOOKUP_TABLE") {
                    return Err(AppError::config("vtk: SCALARS without LOOKUP_TABLE"));
                }
                let n = current_block_len(&contents, point_count);
                let tok = tokens_of(n, &mut lines, "SCALARS")?;
                let mut values = Vec::with_capacity(n);
                for t in tok {
                    values.push(parse_f64(&t, "scalar")?);
                }
                contents.scalars.push((name.to_string(), values));
            }
            ["VECTORS", name, _] => {
                let n = point_count;
                let tok = tokens_of(3 * n, &mut lines, "VECTORS")?;
                let mut values = Vec::with_capacity(n);
                for p in tok.chunks(3) {
                    values.push([
                        parse_f64(&p[0], "vector")?,
                        parse_f64(&p[1], "vector")?,
                        parse_f64(&p[2], "vector")?,
                    ]);
                }
                contents.vectors.push((name.to_string(), values));
            }
            _ => {}
        }
    }
    Ok(contents)
}

/// SCALARS blocks sit under CELL_DATA (region) or POINT_DATA; the writer
/// emits the region block first, so block length is cell count until a
/// point-data scalar follows.
fn current_block_len(contents: &VtkContents, point_count: usize) -> usize {
    if contents.scalars.is_empty() {
        contents.cells.len()
    } else {
        point_count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tfsolve_core::mesh::build_box_mesh;

    #[test]
    fn written_file_parses_back() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 1, 1, 1).unwrap();
        let t: Vec<f64> = vec![293.0; mesh.vertex_count()];
        let u: Vec<f64> = (0..3 * mesh.vertex_count()).map(|i| i as f64 * 0.5).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fields.vtk");
        write_vtk(
            &mesh,
            &FieldExport { temperature: Some(&t), displacement: Some(&u) },
            &path,
        )
        .unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let back = parse_vtk(&text).unwrap();
        assert_eq!(back.points.len(), 8);
        assert_eq!(back.cells, mesh.cells());
        assert!(back.cell_types.iter().all(|&t| t == 10));
        assert_eq!(back.scalars[0].0, "region");
        assert_eq!(back.scalars[1].0, "temperature");
        assert!(back.scalars[1].1.iter().all(|&v| v == 293.0));
        assert_eq!(back.vectors[0].0, "displacement");
        assert_eq!(back.vectors[0].1[1], [1.5, 2.0, 2.5]);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 1, 1, 1).unwrap();
        let t = vec![293.0; 3];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.vtk");
        let err = write_vtk(
            &mesh,
            &FieldExport { temperature: Some(&t), displacement: None },
            &path,
        )
        .unwrap_err();
        assert!(matches!(err, AppError::Config(_)));
    }
}
