//! File formats: headerless numeric CSV for matrices, one label per line for
//! assignment vectors, JSON for everything else.
//!
//! Floats are written with Rust's shortest round-trip representation, so a
//! write followed by a read reproduces every value bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ObservedMatrix;

/// Parses comma-separated rows of decimal values. Blank lines are skipped.
pub fn parse_matrix_csv<R: Read>(reader: R) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(col, field)| {
                field.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("line {}, field {}: {e}", lineno + 1, col + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::DimensionMismatch(format!(
                    "line {} has {} fields, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    Array2::from_shape_vec((n, p), rows.into_iter().flatten().collect())
        .map_err(|e| Error::DimensionMismatch(e.to_string()))
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<ObservedMatrix> {
    let file = fs::File::open(path)?;
    ObservedMatrix::new(parse_matrix_csv(file)?)
}

pub fn format_matrix_csv(m: ArrayView2<'_, f64>) -> String {
    let mut out = String::with_capacity(m.len() * 20);
    for row in m.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: ArrayView2<'_, f64>) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    file.write_all(format_matrix_csv(m).as_bytes())?;
    file.flush()?;
    Ok(())
}

/// Reads 1-based labels, one per line, returning them unchanged.
pub fn parse_assignments<R: Read>(reader: R) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(
            line.parse::<usize>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?,
        );
    }
    Ok(out)
}

pub fn read_assignments(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    parse_assignments(fs::File::open(path)?)
}

/// Writes 0-based labels as 1-based lines.
pub fn write_assignments(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 3);
    for &g in labels {
        writeln!(out, "{}", g + 1).expect("writing to a String cannot fail");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let file = fs::File::open(path)?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn parses_headerless_csv() {
        let m = parse_matrix_csv("1,2.5,-3\n4, 5e-1 ,6\n\n".as_bytes()).unwrap();
        assert_eq!(m, array![[1.0, 2.5, -3.0], [4.0, 0.5, 6.0]]);
    }

    #[test]
    fn rejects_ragged_and_garbage() {
        assert!(matches!(
            parse_matrix_csv("1,2\n3\n".as_bytes()),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            parse_matrix_csv("1,x\n".as_bytes()),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn csv_preserves_awkward_values() {
        let m = array![[0.1 + 0.2, -0.0, 1e-300], [f64::MAX, f64::MIN_POSITIVE, 1.0 / 3.0]];
        let back = parse_matrix_csv(format_matrix_csv(m.view()).as_bytes()).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn assignment_files_are_one_based() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.txt");
        write_assignments(&path, &[0, 2, 1]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "1\n3\n2\n");
        assert_eq!(read_assignments(&path).unwrap(), vec![1, 3, 2]);
    }
}
