use std::fs::File;
use std::io;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectral::DataMatrix;

/// Numeric CSV contents: an n×k matrix plus the header row when present.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Option<Vec<String>>,
    pub values: DMatrix<f64>,
}

impl Table {
    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Name of column `j`, falling back to its index.
    pub fn column_name(&self, j: usize) -> String {
        self.names
            .as_ref()
            .map(|n| n[j].clone())
            .unwrap_or_else(|| j.to_string())
    }

    /// Divides every column by its sample standard deviation.
    pub fn normalize_columns(&mut self, columns: impl IntoIterator<Item = usize>) -> Result<()> {
        let n = self.values.nrows() as f64;
        for j in columns {
            let col = self.values.column(j);
            let mean = col.mean();
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sd = var.sqrt();
            if !(sd > 0.0) {
                return Err(Error::ConstantColumn(self.column_name(j)));
            }
            self.values.column_mut(j).scale_mut(1.0 / sd);
        }
        Ok(())
    }

    /// Splits column `target` off as y; remaining columns become X in file order.
    pub fn split_target(&self, target: usize) -> Result<DataMatrix> {
        let k = self.ncols();
        if target >= k {
            return Err(Error::MissingColumn(target.to_string()));
        }
        let keep: Vec<usize> = (0..k).filter(|&j| j != target).collect();
        let x = self.values.select_columns(&keep);
        let y = DVector::from_column_slice(self.values.column(target).as_slice());
        let names = self
            .names
            .as_ref()
            .map(|n| keep.iter().map(|&j| n[j].clone()).collect());
        DataMatrix::with_names(x, y, names)
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok()
}

/// Reads a comma-separated numeric file. The first row is a header when
/// any of its cells fails to parse as a number. Row and column numbers in
/// errors are 1-based file coordinates.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(File::open(path).map_err(|e| {
            Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?);

    let mut names = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::ParseError {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::ParseError {
                    row,
                    column: record.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            _ => {}
        }
        let parsed: Vec<Option<f64>> = record.iter().map(parse_cell).collect();
        if i == 0 && parsed.iter().any(Option::is_none) {
            names = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let mut values = Vec::with_capacity(parsed.len());
        for (j, v) in parsed.into_iter().enumerate() {
            match v {
                Some(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::NonNumeric {
                        row,
                        column: j + 1,
                        value: record[j].to_string(),
                    })
                }
            }
        }
        rows.push(values);
    }
    let width = width.ok_or_else(|| Error::ParseError {
        row: 0,
        column: 0,
        message: "file is empty".into(),
    })?;
    let values = DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]);
    Ok(Table { names, values })
}

/// Resolves a column given by header name or by 0-based index. Names take
/// precedence when the header contains them.
pub fn resolve_column(spec: &str, table: &Table) -> Result<usize> {
    if let Some(names) = &table.names {
        if let Some(j) = names.iter().position(|n| n == spec) {
            return Ok(j);
        }
    }
    match spec.trim().parse::<usize>() {
        Ok(j) if j < table.ncols() => Ok(j),
        _ => Err(Error::MissingColumn(spec.to_string())),
    }
}

/// Loads a CSV with `target` as y and every other column as X. With
/// `normalize`, each predictor column is scaled to unit sample variance.
pub fn ingest_csv(path: &Path, target: &str, normalize: bool) -> Result<DataMatrix> {
    let mut table = read_table(path)?;
    let t = resolve_column(target, &table)?;
    if normalize {
        let predictors: Vec<usize> = (0..table.ncols()).filter(|&j| j != t).collect();
        table.normalize_columns(predictors)?;
    }
    table.split_target(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn header_and_target_by_name() {
        let f = write_tmp("a,b,y\n1,2,3\n4,5,6\n7,9,8\n");
        let data = ingest_csv(f.path(), "y", false).unwrap();
        assert_eq!(data.d(), 2);
        assert_eq!(data.n(), 3);
        assert_eq!(
            data.column_names().unwrap(),
            &["a".to_string(), "b".to_string()]
        );
        assert_eq!(data.y().as_slice(), &[3.0, 6.0, 8.0]);
        assert_eq!(data.x()[(2, 1)], 9.0);
    }

    #[test]
    fn headerless_target_by_index() {
        let f = write_tmp("1,2,3\n4,5,6\n7,9,8\n");
        let data = ingest_csv(f.path(), "0", false).unwrap();
        assert!(data.column_names().is_none());
        assert_eq!(data.y().as_slice(), &[1.0, 4.0, 7.0]);
        assert_eq!(data.x()[(0, 0)], 2.0);
    }

    #[test]
    fn text_cell_reports_location() {
        let f = write_tmp("a,b,y\n1,2,3\n4,oops,6\n");
        match ingest_csv(f.path(), "y", false).unwrap_err() {
            Error::NonNumeric { row, column, value } => {
                assert_eq!((row, column, value.as_str()), (3, 2, "oops"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        let f = write_tmp("1,2,3\n4,5\n");
        assert!(matches!(
            read_table(f.path()),
            Err(Error::ParseError { row: 2, .. })
        ));
    }

    #[test]
    fn missing_target() {
        let f = write_tmp("a,b,y\n1,2,3\n4,5,6\n");
        assert!(matches!(
            ingest_csv(f.path(), "z", false),
            Err(Error::MissingColumn(_))
        ));
        assert!(matches!(
            ingest_csv(f.path(), "7", false),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn normalization_gives_unit_variance() {
        let f = write_tmp("a,b,y\n1,20,3\n4,50,6\n7,90,8\n2,10,1\n");
        let data = ingest_csv(f.path(), "y", true).unwrap();
        for col in data.x().column_iter() {
            let m = col.mean();
            let var = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 3.0;
            assert!((var - 1.0).abs() < 1e-10);
        }
        // target untouched
        assert_eq!(data.y().as_slice(), &[3.0, 6.0, 8.0, 1.0]);
    }

    #[test]
    fn constant_column_cannot_normalize() {
        let f = write_tmp("a,b,y\n1,2,3\n1,5,6\n1,9,8\n");
        assert!(
            matches!(ingest_csv(f.path(), "y", true), Err(Error::ConstantColumn(c)) if c == "a")
        );
        assert!(ingest_csv(f.path(), "y", false).is_ok());
    }
}
