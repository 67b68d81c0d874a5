//! Structured box meshing by Kuhn subdivision of a hexahedral grid.

use super::{sorted3, Mesh};
use crate::{Error, Result};
use std::collections::HashMap;

/// The six tetrahedra of the Kuhn subdivision of a unit cube, as corner
/// offsets `(di, dj, dk)`. Every tet runs from corner (0,0,0) to (1,1,1)
/// along one vertex permutation, so shared cube faces triangulate
/// identically in adjacent cells.
const KUHN_TETS: [[[usize; 3]; 4]; 6] = [
    [[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1]],
    [[0, 0, 0], [1, 0, 0], [1, 0, 1], [1, 1, 1]],
    [[0, 0, 0], [0, 1, 0], [1, 1, 0], [1, 1, 1]],
    [[0, 0, 0], [0, 1, 0], [0, 1, 1], [1, 1, 1]],
    [[0, 0, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1]],
    [[0, 0, 0], [0, 0, 1], [0, 1, 1], [1, 1, 1]],
];

/// Boundary tags assigned per axis-aligned box face:
/// x-min 1, x-max 2, y-min 3, y-max 4, z-min 5, z-max 6.
pub const BOX_FACE_TAGS: [i32; 6] = [1, 2, 3, 4, 5, 6];

/// Meshes the axis-aligned box `[lo, hi]` with `nx * ny * nz` grid cells,
/// six tetrahedra each, tagging the six box faces 1 through 6.
pub fn build_box_mesh(
    lo: [f64; 3],
    hi: [f64; 3],
    nx: usize,
    ny: usize,
    nz: usize,
) -> Result<Mesh> {
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidMesh(format!(
            "box subdivisions must be positive, got {nx}x{ny}x{nz}"
        )));
    }
    for k in 0..3 {
        if !(hi[k] > lo[k]) {
            return Err(Error::InvalidMesh(format!(
                "box extent along axis {k} is empty: [{}, {}]",
                lo[k], hi[k]
            )));
        }
    }

    let n = [nx, ny, nz];
    let h = [
        (hi[0] - lo[0]) / nx as f64,
        (hi[1] - lo[1]) / ny as f64,
        (hi[2] - lo[2]) / nz as f64,
    ];
    let vid = |i: usize, j: usize, k: usize| (k * (n[1] + 1) + j) * (n[0] + 1) + i;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push([
                    lo[0] + i as f64 * h[0],
                    lo[1] + j as f64 * h[1],
                    lo[2] + k as f64 * h[2],
                ]);
            }
        }
    }

    let mut cells = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for tet in KUHN_TETS {
                    let mut cell = [0usize; 4];
                    for (slot, d) in tet.iter().enumerate() {
                        cell[slot] = vid(i + d[0], j + d[1], k + d[2]);
                    }
                    cells.push(cell);
                }
            }
        }
    }
    let cell_region = vec![0; cells.len()];

    // Tag boundary facets by the axis-aligned plane all three vertices share.
    let mesh = Mesh::new(vertices, cells, cell_region, HashMap::new())?;
    let mut facet_tags = HashMap::new();
    for &facet in mesh.boundary_facets() {
        let tag = classify_box_facet(&mesh, facet, lo, hi, h)?;
        facet_tags.insert(sorted3(facet), tag);
    }
    Mesh::new(
        mesh.vertices().to_vec(),
        mesh.cells().to_vec(),
        mesh.cell_regions().to_vec(),
        facet_tags,
    )
}

fn classify_box_facet(
    mesh: &Mesh,
    facet: [usize; 3],
    lo: [f64; 3],
    hi: [f64; 3],
    h: [f64; 3],
) -> Result<i32> {
    for axis in 0..3 {
        let tol = 1e-12 * h[axis];
        for (side, plane) in [(0, lo[axis]), (1, hi[axis])] {
            if facet.iter().all(|&v| (mesh.vertex(v)[axis] - plane).abs() <= tol) {
                return Ok(BOX_FACE_TAGS[2 * axis + side]);
            }
        }
    }
    Err(Error::InvalidMesh(format!(
        "boundary facet {facet:?} lies on no box face"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_counts() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 1, 1, 1).unwrap();
        assert_eq!(mesh.vertex_count(), 8);
        assert_eq!(mesh.cell_count(), 6);
        assert_eq!(mesh.boundary_facets().len(), 12);
        assert_eq!(mesh.facet_tags().len(), 12);
        assert!((mesh.total_volume() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn face_tags_cover_each_side_twice_on_unit_grid() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 1, 1, 1).unwrap();
        for tag in BOX_FACE_TAGS {
            let count = mesh.facet_tags().values().filter(|&&t| t == tag).count();
            assert_eq!(count, 2, "tag {tag}");
        }
    }

    #[test]
    fn anisotropic_grid_counts_and_volume() {
        let mesh = build_box_mesh([0.0, -1.0, 2.0], [2.0, 1.0, 3.5], 3, 2, 4).unwrap();
        assert_eq!(mesh.vertex_count(), 4 * 3 * 5);
        assert_eq!(mesh.cell_count(), 6 * 3 * 2 * 4);
        assert!((mesh.total_volume() - 2.0 * 2.0 * 1.5).abs() < 1e-12);
        // 2 triangles per grid face on each side of the box.
        let expect = 2 * 2 * (3 * 2 + 2 * 4 + 3 * 4);
        assert_eq!(mesh.boundary_facets().len(), expect);
        assert_eq!(mesh.facet_tags().len(), expect);
    }

    #[test]
    fn all_cells_have_equal_volume() {
        let mesh = build_box_mesh([0.0; 3], [1.0; 3], 2, 2, 2).unwrap();
        let expect = 1.0 / (6.0 * 8.0);
        for c in 0..mesh.cell_count() {
            assert!((mesh.cell_volume(c) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_empty_box_or_zero_subdivision() {
        assert!(build_box_mesh([0.0; 3], [1.0; 3], 0, 1, 1).is_err());
        assert!(build_box_mesh([0.0; 3], [1.0, 0.0, 1.0], 1, 1, 1).is_err());
    }
}
