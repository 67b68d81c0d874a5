//! Global sparsity construction and element scatter.

use super::DofMap;
use crate::krylov::CsrMatrix;
use crate::mesh::CELL_EDGES;
use crate::Result;

/// Builds the zero-valued global matrix whose pattern couples every pair
/// of dofs sharing a cell. Degree-1 spaces use the mesh edge list (two
/// nodes share a cell iff they share an edge); degree-2 spaces enumerate
/// per-cell node pairs.
pub fn build_pattern(dm: &DofMap) -> Result<CsrMatrix> {
    let nn = dm.node_count();
    let npc = dm.nodes_per_cell();

    let mut pairs: Vec<u64> = Vec::with_capacity(dm.cell_count() * if npc == 4 { 6 } else { 45 });
    let pack = |a: usize, b: usize| -> u64 {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        ((lo as u64) << 32) | hi as u64
    };
    for c in 0..dm.cell_count() {
        let nodes = dm.cell_nodes(c);
        if npc == 4 {
            for [a, b] in CELL_EDGES {
                pairs.push(pack(nodes[a], nodes[b]));
            }
        } else {
            for a in 0..npc {
                for b in a + 1..npc {
                    pairs.push(pack(nodes[a], nodes[b]));
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();

    // Node-level CSR: every node neighbours itself plus its pair partners.
    let mut degree = vec![1usize; nn];
    for &p in &pairs {
        degree[(p >> 32) as usize] += 1;
        degree[(p & 0xFFFF_FFFF) as usize] += 1;
    }
    let mut node_ptr = vec![0usize; nn + 1];
    for i in 0..nn {
        node_ptr[i + 1] = node_ptr[i] + degree[i];
    }
    let mut node_cols = vec![0usize; node_ptr[nn]];
    let mut cursor = node_ptr.clone();
    for i in 0..nn {
        node_cols[cursor[i]] = i;
        cursor[i] += 1;
    }
    for &p in &pairs {
        let (lo, hi) = ((p >> 32) as usize, (p & 0xFFFF_FFFF) as usize);
        node_cols[cursor[lo]] = hi;
        cursor[lo] += 1;
        node_cols[cursor[hi]] = lo;
        cursor[hi] += 1;
    }
    drop(pairs);
    for i in 0..nn {
        node_cols[node_ptr[i]..node_ptr[i + 1]].sort_unstable();
    }

    // Expand nodes to interleaved dof blocks.
    let vs = dm.value_size();
    let n = nn * vs;
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0usize);
    let mut col_idx = Vec::with_capacity(node_ptr[nn] * vs * vs);
    for node in 0..nn {
        let neighbours = &node_cols[node_ptr[node]..node_ptr[node + 1]];
        for _comp in 0..vs {
            for &m in neighbours {
                for c in 0..vs {
                    col_idx.push(m * vs + c);
                }
            }
            row_ptr.push(col_idx.len());
        }
    }
    let nnz = col_idx.len();
    let mut a = CsrMatrix::from_raw(n, n, row_ptr, col_idx, vec![0.0; nnz])?;
    if vs == 3 {
        a.set_block_size(3)?;
    }
    // The pattern is undirected by construction.
    a.verify_symmetric_structure();
    Ok(a)
}

/// Adds a dense element matrix (row-major, `rows.len() × cols.len()`)
/// into the global matrix. Panics if the pattern lacks an entry, which
/// indicates the matrix was not built from the same dof map.
pub fn scatter_matrix(a: &mut CsrMatrix, rows: &[usize], cols: &[usize], local: &[f64]) {
    debug_assert_eq!(local.len(), rows.len() * cols.len());
    for (ra, &i) in rows.iter().enumerate() {
        for (cb, &j) in cols.iter().enumerate() {
            let v = local[ra * cols.len() + cb];
            if v != 0.0 {
                let k = a.entry_index(i, j).expect("assembly pattern covers element entry");
                a.values_mut()[k] += v;
            }
        }
    }
}

/// Adds a local load vector into the global one.
pub fn scatter_vector(b: &mut [f64], dofs: &[usize], local: &[f64]) {
    debug_assert_eq!(local.len(), dofs.len());
    for (&dof, &v) in dofs.iter().zip(local) {
        b[dof] += v;
    }
}
