//! CLUTO-style sparse text matrices.
//!
//! ```text
//! m n nnz
//! c v c v ...      <- row 1: 1-based column index, value pairs
//! ...              <- one line per row, possibly empty
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;

use crate::error::{OnmfError, Result};
use crate::linalg::{CscMatrix, DataMatrix};
use crate::metrics::LabeledDataset;

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> OnmfError {
    OnmfError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn read_sparse_matrix(path: &Path) -> Result<DataMatrix> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let (header_no, header) = loop {
        match lines.next() {
            Some((i, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break (i + 1, line);
                }
            }
            None => return Err(parse_err(path, 1, "missing header `rows cols nnz`")),
        }
    };
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, header_no, format!("bad header: {e}")))?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(parse_err(path, header_no, "header must be `rows cols nnz`"));
    };

    let mut triplets = Vec::with_capacity(nnz);
    let mut row = 0usize;
    for (i, line) in lines {
        let line = line?;
        let line_no = i + 1;
        if row >= rows {
            if line.trim().is_empty() {
                continue;
            }
            return Err(OnmfError::DimensionMismatch(format!(
                "{}:{line_no}: more than {rows} rows",
                path.display()
            )));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() % 2 != 0 {
            return Err(parse_err(path, line_no, "odd number of tokens; expected `column value` pairs"));
        }
        let mut row_cols = Vec::with_capacity(tokens.len() / 2);
        for pair in tokens.chunks(2) {
            let c: usize = pair[0]
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("bad column index `{}`", pair[0])))?;
            let v: f64 = pair[1]
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("bad value `{}`", pair[1])))?;
            if c == 0 || c > cols {
                return Err(OnmfError::DimensionMismatch(format!(
                    "{}:{line_no}: column index {c} outside 1..={cols}",
                    path.display()
                )));
            }
            if !v.is_finite() {
                return Err(parse_err(path, line_no, format!("non-finite value `{}`", pair[1])));
            }
            if v < 0.0 {
                return Err(OnmfError::NegativeValue {
                    row,
                    col: c - 1,
                    value: v,
                });
            }
            row_cols.push(c);
            triplets.push((row, c - 1, v));
        }
        row_cols.sort_unstable();
        if let Some(w) = row_cols.windows(2).find(|w| w[0] == w[1]) {
            return Err(parse_err(path, line_no, format!("column {} repeated", w[0])));
        }
        row += 1;
    }
    if triplets.len() != nnz {
        return Err(OnmfError::DimensionMismatch(format!(
            "{}: header announces {nnz} nonzeros, found {}",
            path.display(),
            triplets.len()
        )));
    }
    if nnz == 0 {
        warn!("{} holds an all-zero {rows}x{cols} matrix", path.display());
    }
    DataMatrix::sparse(CscMatrix::from_triplets(rows, cols, &triplets)?)
}

/// One label per nonblank line. Tokens become class indices in order of
/// first appearance.
pub fn read_labels(path: &Path) -> Result<(Vec<usize>, Vec<String>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut names: Vec<String> = Vec::new();
    let mut labels = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let token = line.trim();
        if token.is_empty() {
            continue;
        }
        let idx = match names.iter().position(|n| n == token) {
            Some(i) => i,
            None => {
                names.push(token.to_string());
                names.len() - 1
            }
        };
        labels.push(idx);
    }
    Ok((labels, names))
}

/// Matrix plus its companion label file.
pub fn read_sparse_text_matrix(path: &Path, labels: &Path) -> Result<LabeledDataset> {
    let matrix = read_sparse_matrix(path)?;
    let (labels, names) = read_labels(labels)?;
    LabeledDataset::new(matrix, labels, names)
}

pub fn write_sparse_matrix(path: &Path, m: &DataMatrix) -> Result<()> {
    let rows = m.to_sparse().transpose();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), rows.nnz())?;
    for r in 0..rows.ncols() {
        let (cols, vals) = rows.column(r);
        let mut first = true;
        for (&c, &v) in cols.iter().zip(vals) {
            if !first {
                write!(w, " ")?;
            }
            write!(w, "{} {}", c + 1, v)?;
            first = false;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_labels(path: &Path, labels: &[usize], names: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for &l in labels {
        writeln!(w, "{}", names[l])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::fs;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn hand_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.mat", "2 3 2\n1 5.0\n3 2.0\n");
        let m = read_sparse_matrix(&p).unwrap();
        assert_eq!(m.to_dense(), array![[5.0, 0.0, 0.0], [0.0, 0.0, 2.0]]);
    }

    #[test]
    fn empty_matrix_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "z.mat", "2 3 0\n\n\n");
        let m = read_sparse_matrix(&p).unwrap();
        assert_eq!(m.dim(), (2, 3));
        assert_eq!(m.nnz(), 0);
    }

    #[test]
    fn nnz_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "b.mat", "2 3 3\n1 5.0\n3 2.0\n");
        assert!(matches!(read_sparse_matrix(&p), Err(OnmfError::DimensionMismatch(_))));
    }

    #[test]
    fn parse_error_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "c.mat", "2 3 2\n1 5.0\n3 x\n");
        match read_sparse_matrix(&p) {
            Err(OnmfError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_value_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.mat", "1 2 1\n2 -1\n");
        assert!(matches!(read_sparse_matrix(&p), Err(OnmfError::NegativeValue { .. })));
    }

    #[test]
    fn column_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "e.mat", "1 2 1\n3 1\n");
        assert!(matches!(read_sparse_matrix(&p), Err(OnmfError::DimensionMismatch(_))));
    }

    #[test]
    fn labels_by_first_appearance() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "l.txt", "b\na\n\nb\n");
        let (labels, names) = read_labels(&p).unwrap();
        assert_eq!(labels, vec![0, 1, 0]);
        assert_eq!(names, vec!["b".to_string(), "a".to_string()]);
    }

    #[test]
    fn labeled_dataset_checks_length() {
        let dir = tempfile::tempdir().unwrap();
        let m = write(&dir, "a.mat", "2 3 2\n1 5.0\n3 2.0\n");
        let short = write(&dir, "short", "1\n2\n");
        let ok = write(&dir, "ok", "1\n2\n1\n");
        assert!(read_sparse_text_matrix(&m, &short).is_err());
        let ds = read_sparse_text_matrix(&m, &ok).unwrap();
        assert_eq!(ds.num_classes(), 2);
    }
}
