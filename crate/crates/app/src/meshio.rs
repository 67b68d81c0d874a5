//! Reader and writer for the versioned tfmesh text format.
//!
//! Layout: a `tfmesh 1` header line, then three counted sections in fixed
//! order: `vertices N` with `x y z` lines, `cells M` with `v0 v1 v2 v3
//! region` lines, and `facets K` with `v0 v1 v2 tag` lines. Values are
//! whitespace-separated; floats are written in shortest round-trip form.

use crate::error::{AppError, Result};
use std::collections::HashMap;
use std::io::{BufWriter, Write};
use std::path::Path;
use tfsolve_core::mesh::Mesh;

struct Lines<'a> {
    iter: std::str::Lines<'a>,
    /// 1-based number of the last line handed out.
    number: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Lines<'a> {
        Lines { iter: text.lines(), number: 0 }
    }

    /// Next non-blank line, or an error naming what was expected.
    fn expect(&mut self, expected: &str) -> Result<&'a str> {
        loop {
            match self.iter.next() {
                Some(line) => {
                    self.number += 1;
                    if !line.trim().is_empty() {
                        return Ok(line);
                    }
                }
                None => {
                    return Err(AppError::MeshTruncated { expected: expected.to_string() })
                }
            }
        }
    }
}

fn parse<T: std::str::FromStr>(token: &str, line: usize, what: &str) -> Result<T> {
    token.parse().map_err(|_| AppError::MeshValue {
        line,
        message: format!("cannot parse {what} from {token:?}"),
    })
}

fn section_count(line: &str, number: usize, keyword: &str) -> Result<usize> {
    let mut parts = line.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(k), Some(count), None) if k == keyword => parse(count, number, "section count"),
        _ => Err(AppError::MeshValue {
            line: number,
            message: format!("expected {keyword:?} section header, found {line:?}"),
        }),
    }
}

fn vertex_index(token: &str, line: usize, bound: usize) -> Result<usize> {
    let v: usize = parse(token, line, "vertex index")?;
    if v >= bound {
        return Err(AppError::MeshValue {
            line,
            message: format!("vertex index {v} out of range (< {bound})"),
        });
    }
    Ok(v)
}

pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines::new(text);

    let header = lines.expect("header")?;
    let mut parts = header.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some("tfmesh"), Some(version), None) => {
            if version != "1" {
                return Err(AppError::MeshVersion(version.to_string()));
            }
        }
        _ => return Err(AppError::MeshHeader(format!("expected \"tfmesh 1\", found {header:?}"))),
    }

    let n = section_count(lines.expect("vertices section")?, lines.number, "vertices")?;
    let mut vertices = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.expect("vertex line")?;
        let number = lines.number;
        let mut tokens = line.split_whitespace();
        let mut p = [0.0f64; 3];
        for (k, slot) in p.iter_mut().enumerate() {
            let token = tokens.next().ok_or(AppError::MeshValue {
                line: number,
                message: format!("vertex needs 3 coordinates, found {k}"),
            })?;
            *slot = parse(token, number, "coordinate")?;
        }
        if tokens.next().is_some() {
            return Err(AppError::MeshValue {
                line: number,
                message: "trailing tokens after vertex coordinates".to_string(),
            });
        }
        vertices.push(p);
    }

    let m = section_count(lines.expect("cells section")?, lines.number, "cells")?;
    let mut cells = Vec::with_capacity(m);
    let mut regions = Vec::with_capacity(m);
    for _ in 0..m {
        let line = lines.expect("cell line")?;
        let number = lines.number;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 5 {
            return Err(AppError::MeshValue {
                line: number,
                message: format!("cell needs 4 vertices and a region, found {}", tokens.len()),
            });
        }
        let mut cell = [0usize; 4];
        for (slot, token) in cell.iter_mut().zip(&tokens) {
            *slot = vertex_index(token, number, n)?;
        }
        cells.push(cell);
        regions.push(parse(tokens[4], number, "region")?);
    }

    let k = section_count(lines.expect("facets section")?, lines.number, "facets")?;
    let mut facet_tags = HashMap::with_capacity(k);
    for _ in 0..k {
        let line = lines.expect("facet line")?;
        let number = lines.number;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 4 {
            return Err(AppError::MeshValue {
                line: number,
                message: format!("facet needs 3 vertices and a tag, found {}", tokens.len()),
            });
        }
        let mut facet = [0usize; 3];
        for (slot, token) in facet.iter_mut().zip(&tokens) {
            *slot = vertex_index(token, number, n)?;
        }
        facet.sort_unstable();
        facet_tags.insert(facet, parse(tokens[3], number, "tag")?);
    }

    Ok(Mesh::new(vertices, cells, regions, facet_tags)?)
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "tfmesh 1")?;
    writeln!(out, "vertices {}", mesh.vertex_count())?;
    for v in mesh.vertices() {
        writeln!(out, "{} {} {}", v[0], v[1], v[2])?;
    }
    writeln!(out, "cells {}", mesh.cell_count())?;
    for (cell, region) in mesh.cells().iter().zip(mesh.cell_regions()) {
        writeln!(out, "{} {} {} {} {}", cell[0], cell[1], cell[2], cell[3], region)?;
    }
    // Sorted for a deterministic file; facet keys are already sorted triples.
    let mut tagged: Vec<([usize; 3], i32)> =
        mesh.facet_tags().iter().map(|(&f, &t)| (f, t)).collect();
    tagged.sort_unstable();
    writeln!(out, "facets {}", tagged.len())?;
    for (f, tag) in tagged {
        writeln!(out, "{} {} {} {}", f[0], f[1], f[2], tag)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tfsolve_core::mesh::build_box_mesh;

    #[test]
    fn round_trip_reproduces_the_cube() {
        let mesh = build_box_mesh([0.0; 3], [1.0, 0.5, 2.0 / 3.0], 1, 1, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.tfmesh");
        write_mesh(&mesh, &path).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
        assert_eq!(back.cells(), mesh.cells());
        assert_eq!(back.cell_regions(), mesh.cell_regions());
        assert_eq!(back.facet_tags(), mesh.facet_tags());
    }

    #[test]
    fn unsupported_version_is_a_distinct_error() {
        let err = parse_mesh("tfmesh 2\nvertices 0\ncells 0\nfacets 0\n").unwrap_err();
        assert!(matches!(err, AppError::MeshVersion(v) if v == "2"));
        let err = parse_mesh("mesh 1\n").unwrap_err();
        assert!(matches!(err, AppError::MeshHeader(_)));
    }

    #[test]
    fn out_of_range_vertex_names_the_line() {
        let text = "tfmesh 1\nvertices 4\n0 0 0\n1 0 0\n0 1 0\n0 0 1\ncells 1\n0 1 2 999 0\nfacets 0\n";
        match parse_mesh(text).unwrap_err() {
            AppError::MeshValue { line, message } => {
                assert_eq!(line, 8);
                assert!(message.contains("999"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_a_distinct_error() {
        let err = parse_mesh("tfmesh 1\nvertices 4\n0 0 0\n1 0 0\n").unwrap_err();
        assert!(matches!(err, AppError::MeshTruncated { .. }));
    }
}
