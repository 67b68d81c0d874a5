//! Uniform 1:8 tetrahedral refinement by edge bisection.

use super::{dihedral_angles_from_coords, geom, sorted3, Mesh, CELL_EDGES};
use crate::Result;
use std::collections::HashMap;

/// Splits every cell into eight children: four corner tetrahedra plus the
/// interior octahedron cut along its shortest diagonal. Volume is preserved
/// and facet tags are inherited by the four child facets.
pub fn uniform_refine(mesh: &Mesh) -> Result<Mesh> {
    let nv = mesh.vertex_count();

    // Unique mesh edges in sorted order; midpoint of edge e gets index nv + e.
    let mut edges: Vec<[usize; 2]> = Vec::with_capacity(mesh.cell_count() * 6);
    for cell in mesh.cells() {
        for [a, b] in CELL_EDGES {
            let (u, v) = (cell[a], cell[b]);
            edges.push(if u < v { [u, v] } else { [v, u] });
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let midpoint = |u: usize, v: usize| -> usize {
        let key = if u < v { [u, v] } else { [v, u] };
        nv + edges.binary_search(&key).expect("edge of a cell is in the edge list")
    };

    let mut vertices = mesh.vertices().to_vec();
    vertices.reserve(edges.len());
    for &[u, v] in &edges {
        vertices.push(geom::scale(geom::add(mesh.vertex(u), mesh.vertex(v)), 0.5));
    }

    let mut cells = Vec::with_capacity(mesh.cell_count() * 8);
    let mut cell_region = Vec::with_capacity(mesh.cell_count() * 8);
    for (c, cell) in mesh.cells().iter().enumerate() {
        let [v0, v1, v2, v3] = *cell;
        let m01 = midpoint(v0, v1);
        let m02 = midpoint(v0, v2);
        let m03 = midpoint(v0, v3);
        let m12 = midpoint(v1, v2);
        let m13 = midpoint(v1, v3);
        let m23 = midpoint(v2, v3);

        cells.push([v0, m01, m02, m03]);
        cells.push([v1, m01, m12, m13]);
        cells.push([v2, m02, m12, m23]);
        cells.push([v3, m03, m13, m23]);

        // Interior octahedron: pick the shortest of the three diagonals and
        // fan four tets around it. Near-ties go to the fan with the largest
        // minimum dihedral angle, which keeps structured meshes self-similar.
        let len = |a: usize, b: usize| geom::norm(geom::sub(vertices[a], vertices[b]));
        let diags = [
            (m01, m23, [m02, m03, m13, m12]),
            (m02, m13, [m01, m03, m23, m12]),
            (m03, m12, [m01, m02, m23, m13]),
        ];
        let lengths = diags.map(|(a, b, _)| len(a, b));
        let shortest = lengths.iter().fold(f64::INFINITY, |acc, &l| acc.min(l));
        let mut pick = 0;
        let mut best_quality = f64::NEG_INFINITY;
        for (i, (da, db, ring)) in diags.iter().enumerate() {
            if lengths[i] > shortest * (1.0 + 1e-12) {
                continue;
            }
            let mut worst = f64::INFINITY;
            for r in 0..4 {
                let child =
                    [vertices[*da], vertices[*db], vertices[ring[r]], vertices[ring[(r + 1) % 4]]];
                match dihedral_angles_from_coords(child) {
                    Ok(angles) => worst = angles.iter().fold(worst, |acc, &a| acc.min(a)),
                    Err(_) => worst = f64::NEG_INFINITY,
                }
            }
            if worst > best_quality {
                best_quality = worst;
                pick = i;
            }
        }
        let (da, db, ring) = diags[pick];
        for r in 0..4 {
            cells.push([da, db, ring[r], ring[(r + 1) % 4]]);
        }

        let region = mesh.cell_region(c);
        cell_region.extend(std::iter::repeat(region).take(8));
    }

    let mut facet_tags = HashMap::with_capacity(mesh.facet_tags().len() * 4);
    for (&[a, b, c], &tag) in mesh.facet_tags() {
        let mab = midpoint(a, b);
        let mac = midpoint(a, c);
        let mbc = midpoint(b, c);
        for child in [[a, mab, mac], [b, mab, mbc], [c, mac, mbc], [mab, mac, mbc]] {
            facet_tags.insert(sorted3(child), tag);
        }
    }

    Mesh::new(vertices, cells, cell_region, facet_tags)
}
