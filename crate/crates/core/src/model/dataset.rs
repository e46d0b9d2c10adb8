use nalgebra::DMatrix;
use std::path::Path;

use crate::error::{Error, Result};

/// Parses a header-less CSV whose last column is a label in `{-1, +1}` or `{0, 1}`.
///
/// Rows and columns in error messages are 1-based.
pub fn parse_dataset(text: &str) -> Result<(DMatrix<f64>, Vec<f64>)> {
    parse_table(text, true)
}

/// Parses a header-less CSV of unlabelled observations, one per row.
pub fn parse_observations(text: &str) -> Result<DMatrix<f64>> {
    parse_table(text, false).map(|(x, _)| x)
}

fn parse_table(text: &str, labelled: bool) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let cols = record.len();
        if labelled && cols < 2 {
            return Err(Error::Parse {
                row,
                column: cols,
                message: "need at least one feature and a label".into(),
            });
        }
        match width {
            None => width = Some(cols),
            Some(w) if w != cols => {
                return Err(Error::Parse {
                    row,
                    column: cols,
                    message: format!("expected {w} columns, found {cols}"),
                })
            }
            _ => {}
        }
        for (j, field) in record.iter().enumerate() {
            let column = j + 1;
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                column,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column,
                    message: "value is not finite".into(),
                });
            }
            if labelled && column == cols {
                let y = match v {
                    v if v == 1.0 => 1.0,
                    v if v == -1.0 || v == 0.0 => -1.0,
                    _ => {
                        return Err(Error::Parse {
                            row,
                            column,
                            message: format!("label {v} is not in {{-1, 0, 1}}"),
                        })
                    }
                };
                labels.push(y);
            } else {
                values.push(v);
            }
        }
    }
    let Some(width) = width else {
        return Err(Error::EmptyDataset);
    };
    let d = if labelled { width - 1 } else { width };
    Ok((DMatrix::from_row_slice(values.len() / d, d, &values), labels))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    parse_dataset(&read(path.as_ref())?)
}

pub fn load_observations(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    parse_observations(&read(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_rows_in_order() {
        let (x, y) = parse_dataset("1,0,1\n0,1,-1").unwrap();
        assert_eq!(x, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        assert_eq!(y, vec![1.0, -1.0]);
    }

    #[test]
    fn remaps_zero_labels() {
        let (_, y) = parse_dataset("0.5,0\n-2,1\n").unwrap();
        assert_eq!(y, vec![-1.0, 1.0]);
    }

    #[test]
    fn reports_parse_location() {
        match parse_dataset("abc,1,1\n") {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
        match parse_dataset("1,2,1\n3,NaN,1\n") {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_dataset("1,2,1\n3,1\n"), Err(Error::Parse { row: 2, .. })));
        assert!(matches!(parse_dataset("1,2,3\n"), Err(Error::Parse { column: 3, .. })));
        assert!(matches!(parse_dataset(""), Err(Error::EmptyDataset)));
    }

    #[test]
    fn reads_unlabelled_observations() {
        let x = parse_observations("1.5\n-2\n0.25\n").unwrap();
        assert_eq!(x, DMatrix::from_column_slice(3, 1, &[1.5, -2.0, 0.25]));
        let x = parse_observations("1,2\n3,4\n").unwrap();
        assert_eq!(x, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert!(matches!(parse_observations("1,2\n3\n"), Err(Error::Parse { row: 2, .. })));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(load_dataset("/nonexistent/file.csv"), Err(Error::Io { .. })));
    }
}
