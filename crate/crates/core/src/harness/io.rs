//! Delimited-text matrices: comma, tab or whitespace separated, row-major,
//! with an optional header line.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_fields(line);
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if let Some(first) = rows.first() {
                    if first.len() != row.len() {
                        return Err(Error::Config(format!(
                            "line {}: expected {} fields, found {}",
                            lineno + 1,
                            first.len(),
                            row.len()
                        )));
                    }
                }
                rows.push(row);
            }
            // only the first content line may be a header
            Err(_) if rows.is_empty() => continue,
            Err(e) => return Err(Error::Config(format!("line {}: {e}", lineno + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::Config("no numeric rows".into()));
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

/// A vector stored either as one column or as one row.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() == 1 {
        Ok(m.column(0).into_owned())
    } else if m.nrows() == 1 {
        Ok(m.row(0).transpose())
    } else {
        Err(Error::Config(format!(
            "{} holds a {}x{} matrix, expected a vector",
            path.display(),
            m.nrows(),
            m.ncols()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delimiters_and_header() {
        let comma = parse_matrix("y,x1,x2\n1,2,3\n4,5,6\n").unwrap();
        let tab = parse_matrix("1\t2\t3\n4\t5\t6").unwrap();
        let space = parse_matrix("# data\n1 2  3\n\n4 5 6\n").unwrap();
        assert_eq!(comma, tab);
        assert_eq!(tab, space);
        assert_eq!(comma[(1, 2)], 6.0);
    }

    #[test]
    fn rejects_ragged_and_garbage() {
        assert!(parse_matrix("1,2\n3\n").is_err());
        assert!(parse_matrix("1,2\nx,3\n").is_err());
        assert!(parse_matrix("a,b\n").is_err());
    }
}
