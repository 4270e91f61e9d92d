//! CSV ingestion for designs and observations.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use flatgp_core::Design;
use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::output::fmt_float;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("dataset has no data rows")]
    EmptyDataset,
    #[error("no column named {0:?}")]
    MissingColumn(String),
    #[error("need at least {needed} columns, found {found}")]
    TooFewColumns { needed: usize, found: usize },
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: u64, expected: usize, found: usize },
    #[error("row {row}, column {col:?}: not a number: {value:?}")]
    NonNumeric { row: u64, col: String, value: String },
    #[error("row {row}, column {col:?}: value is not finite")]
    NonFinite { row: u64, col: String },
    #[error(transparent)]
    Design(#[from] flatgp_core::Error),
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::MissingFile(_) => "missing_file",
            ParseError::Io { .. } => "io_error",
            ParseError::EmptyDataset => "empty_dataset",
            ParseError::MissingColumn(_) => "missing_column",
            ParseError::TooFewColumns { .. } => "too_few_columns",
            ParseError::Ragged { .. } => "ragged_rows",
            ParseError::NonNumeric { .. } => "non_numeric",
            ParseError::NonFinite { .. } => "non_finite",
            ParseError::Design(e) => e.code(),
        }
    }
}

/// Column selection. Features default to every non-target column; the target defaults to the last.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DatasetOptions {
    pub target: Option<String>,
    pub features: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Design,
    pub y: DVector<f64>,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

struct Table {
    header: Vec<String>,
    rows: Vec<(u64, Vec<f64>)>,
}

fn read_table(path: &Path) -> Result<Table, ParseError> {
    if !path.exists() {
        return Err(ParseError::MissingFile(path.to_path_buf()));
    }
    let io = |e: csv::Error| ParseError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(io)?;
    let header: Vec<String> = rdr.headers().map_err(io)?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(ParseError::EmptyDataset);
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(io)?;
        let row = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(ParseError::Ragged {
                row,
                expected: header.len(),
                found: rec.len(),
            });
        }
        let mut vals = Vec::with_capacity(rec.len());
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| ParseError::NonNumeric {
                row,
                col: header[j].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(ParseError::NonFinite {
                    row,
                    col: header[j].clone(),
                });
            }
            vals.push(v);
        }
        rows.push((row, vals));
    }
    if rows.is_empty() {
        return Err(ParseError::EmptyDataset);
    }
    Ok(Table { header, rows })
}

fn column(header: &[String], name: &str) -> Result<usize, ParseError> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| ParseError::MissingColumn(name.to_string()))
}

/// Read a CSV with a header row: feature columns followed by one target column.
///
/// Lines starting with `#` are skipped. Row numbers in errors are file line numbers.
pub fn parse_dataset(path: &Path, opts: &DatasetOptions) -> Result<Dataset, ParseError> {
    let t = read_table(path)?;
    if t.header.len() < 2 {
        return Err(ParseError::TooFewColumns {
            needed: 2,
            found: t.header.len(),
        });
    }
    let target = match &opts.target {
        Some(name) => column(&t.header, name)?,
        None => t.header.len() - 1,
    };
    let features: Vec<usize> = match &opts.features {
        Some(names) => names.iter().map(|n| column(&t.header, n)).collect::<Result<_, _>>()?,
        None => (0..t.header.len()).filter(|&j| j != target).collect(),
    };
    let n = t.rows.len();
    let d = features.len();
    let mut data = Vec::with_capacity(n * d);
    for (_, vals) in &t.rows {
        data.extend(features.iter().map(|&j| vals[j]));
    }
    Ok(Dataset {
        x: Design::new(data, n, d)?,
        y: DVector::from_iterator(n, t.rows.iter().map(|(_, v)| v[target])),
        feature_names: features.iter().map(|&j| t.header[j].clone()).collect(),
        target_name: t.header[target].clone(),
    })
}

/// Read query points: a header row and exactly `d` numeric columns.
pub fn parse_points(path: &Path, d: usize) -> Result<Design, ParseError> {
    let t = read_table(path)?;
    if t.header.len() != d {
        return Err(ParseError::TooFewColumns {
            needed: d,
            found: t.header.len(),
        });
    }
    let n = t.rows.len();
    Ok(Design::new(t.rows.into_iter().flat_map(|(_, v)| v).collect(), n, d)?)
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> std::io::Result<()> {
    let mut f = File::create(path)?;
    let mut header = ds.feature_names.clone();
    header.push(ds.target_name.clone());
    writeln!(f, "{}", header.join(","))?;
    for i in 0..ds.x.n() {
        let mut cells: Vec<String> = ds.x.point(i).iter().map(|&v| fmt_float(v)).collect();
        cells.push(fmt_float(ds.y[i]));
        writeln!(f, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_rows_two_features() {
        let f = file("a,b,y\n0,1,2\n1,1,3\n2,0,4\n");
        let ds = parse_dataset(f.path(), &DatasetOptions::default()).unwrap();
        assert_eq!((ds.x.n(), ds.x.d(), ds.y.len()), (3, 2, 3));
        assert_eq!(ds.y[2], 4.0);
        assert_eq!(ds.x.point(1), &[1.0, 1.0]);
    }

    #[test]
    fn named_columns() {
        let f = file("y,a,junk,b\n5,0,9,1\n6,1,9,1\n");
        let opts = DatasetOptions {
            target: Some("y".into()),
            features: Some(vec!["b".into(), "a".into()]),
        };
        let ds = parse_dataset(f.path(), &opts).unwrap();
        assert_eq!(ds.x.point(1), &[1.0, 1.0]);
        assert_eq!(ds.x.point(0), &[1.0, 0.0]);
        assert_eq!(ds.y[1], 6.0);
    }

    #[test]
    fn error_kinds() {
        let opts = DatasetOptions::default();
        assert!(matches!(
            parse_dataset(Path::new("/nonexistent/data.csv"), &opts),
            Err(ParseError::MissingFile(_))
        ));
        assert!(matches!(parse_dataset(file("").path(), &opts), Err(ParseError::EmptyDataset)));
        assert!(matches!(parse_dataset(file("x,y\n").path(), &opts), Err(ParseError::EmptyDataset)));
        assert!(matches!(
            parse_dataset(file("x,y\n1,2\n3\n").path(), &opts),
            Err(ParseError::Ragged { row: 3, .. })
        ));
        match parse_dataset(file("x,y\n1,2\n3,abc\n").path(), &opts) {
            Err(ParseError::NonNumeric { row, col, .. }) => assert_eq!((row, col.as_str()), (3, "y")),
            other => panic!("{other:?}"),
        }
        match parse_dataset(file("x,y\n1,2\nNaN,1\n").path(), &opts) {
            Err(ParseError::NonFinite { row, col }) => assert_eq!((row, col.as_str()), (3, "x")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_dataset(file("x,y\n1,inf\n").path(), &opts),
            Err(ParseError::NonFinite { .. })
        ));
    }

    #[test]
    fn comments_are_skipped() {
        let f = file("# produced elsewhere\nx,y\n1,2\n# note\n3,4\n");
        let ds = parse_dataset(f.path(), &DatasetOptions::default()).unwrap();
        assert_eq!(ds.y.as_slice(), &[2.0, 4.0]);
    }
}
