//! Matrix Market coordinate-format import and export.

use super::CsrMatrix;
use crate::{Error, Result};
use std::io::{BufRead, Write};

/// Writes `a` in coordinate real general format with 1-based indices.
pub fn write_matrix_market(a: &CsrMatrix, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(out, "{} {} {v}", i + 1, j + 1)?;
        }
    }
    Ok(())
}

/// Reads a coordinate real matrix, expanding symmetric storage.
pub fn read_matrix_market(input: &mut dyn BufRead) -> Result<CsrMatrix> {
    let bad = |line: usize, msg: &str| Error::InvalidConfig(format!("matrix market line {line}: {msg}"));

    let mut lines = input.lines().enumerate();
    let (first_no, first) = lines
        .next()
        .ok_or_else(|| bad(1, "empty input"))?
        .1
        .map(|l| (1usize, l))
        .map_err(|e| bad(1, &e.to_string()))?;
    let _ = first_no;
    let header: Vec<String> = first.split_whitespace().map(str::to_lowercase).collect();
    if header.len() < 5
        || header[0] != "%%matrixmarket"
        || header[1] != "matrix"
        || header[2] != "coordinate"
        || header[3] != "real"
    {
        return Err(bad(1, "expected '%%MatrixMarket matrix coordinate real <symmetry>'"));
    }
    let symmetric = match header[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(bad(1, &format!("unsupported symmetry '{other}'"))),
    };

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| bad(line_no, &e.to_string()))?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        match dims {
            None => {
                if fields.len() != 3 {
                    return Err(bad(line_no, "size line needs 'rows cols nnz'"));
                }
                let parse = |s: &str| s.parse::<usize>().map_err(|_| bad(line_no, "bad size value"));
                dims = Some((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
            }
            Some((nr, nc, _)) => {
                if fields.len() != 3 {
                    return Err(bad(line_no, "entry needs 'row col value'"));
                }
                let i: usize = fields[0].parse().map_err(|_| bad(line_no, "bad row index"))?;
                let j: usize = fields[1].parse().map_err(|_| bad(line_no, "bad column index"))?;
                let v: f64 = fields[2].parse().map_err(|_| bad(line_no, "bad value"))?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(bad(line_no, "index out of range (1-based)"));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = dims.ok_or_else(|| bad(0, "missing size line"))?;
    let stored = if symmetric {
        triplets.iter().filter(|&&(i, j, _)| i <= j).count()
    } else {
        triplets.len()
    };
    if stored != nnz {
        return Err(Error::InvalidConfig(format!(
            "matrix market: header promises {nnz} entries, found {stored}"
        )));
    }
    CsrMatrix::from_triplets(nr, nc, &triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krylov::poisson_1d;
    use std::io::BufReader;

    #[test]
    fn roundtrip_preserves_matrix() {
        let a = poisson_1d(5);
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let b = read_matrix_market(&mut BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(a.n_rows(), b.n_rows());
        assert_eq!(a.nnz(), b.nnz());
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(a.entry(i, j), b.entry(i, j));
            }
        }
    }

    #[test]
    fn symmetric_storage_expands() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n1 1 2.0\n2 1 -1.0\n2 2 2.0\n3 3 1.5\n";
        let a = read_matrix_market(&mut BufReader::new(text.as_bytes())).unwrap();
        assert_eq!(a.entry(0, 1), -1.0);
        assert_eq!(a.entry(1, 0), -1.0);
        assert_eq!(a.entry(2, 2), 1.5);
    }

    #[test]
    fn malformed_inputs_are_rejected_with_line_info() {
        let cases = [
            ("%%MatrixMarket matrix array real general\n1 1 1\n1 1 1.0\n", "line 1"),
            ("%%MatrixMarket matrix coordinate real general\n2 2\n", "line 2"),
            ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n", "line 3"),
            ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", "entries"),
        ];
        for (text, needle) in cases {
            let err = read_matrix_market(&mut BufReader::new(text.as_bytes())).unwrap_err();
            let msg = err.to_string();
            assert!(msg.contains(needle), "{msg} should mention {needle}");
        }
    }
}
