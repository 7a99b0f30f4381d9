use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{DataError, Dataset};

fn io_error(path: &Path, e: impl std::fmt::Display) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Reads a comma-separated numeric table with a header row.
///
/// `target_column` becomes the target; all other columns are features in
/// file order. Row numbers in errors are 1-based data rows (header excluded),
/// columns are 0-based.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::ParseError {
            row: 0,
            column: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| DataError::MissingTarget(target_column.to_string()))?;

    let n_cols = header.len();
    let mut values: Vec<f64> = Vec::new();
    let mut target = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::ParseError {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() != n_cols {
            return Err(DataError::ParseError {
                row,
                column: record.len().min(n_cols),
                message: format!("expected {n_cols} fields, found {}", record.len()),
            });
        }
        for (column, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let value: f64 = cell.parse().map_err(|_| DataError::NonNumericCell {
                row,
                column,
                value: cell.to_string(),
            })?;
            if column == target_idx {
                target.push(value);
            } else {
                values.push(value);
            }
        }
    }

    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let features = DMatrix::from_row_slice(target.len(), names.len(), &values);
    Dataset::new(features, DVector::from_vec(target), names)
}

/// Writes features followed by the target column named `target_name`.
pub fn write_csv(
    dataset: &Dataset,
    path: impl AsRef<Path>,
    target_name: &str,
) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    let mut header: Vec<&str> = dataset.feature_names().iter().map(String::as_str).collect();
    header.push(target_name);
    writer.write_record(&header).map_err(|e| io_error(path, e))?;
    let x = dataset.features();
    let mut row = Vec::with_capacity(header.len());
    for i in 0..dataset.n_rows() {
        row.clear();
        row.extend(x.row(i).iter().map(|v| v.to_string()));
        row.push(dataset.target()[i].to_string());
        writer.write_record(&row).map_err(|e| io_error(path, e))?;
    }
    writer.flush().map_err(|e| io_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file_with(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn target_column_is_split_off() {
        let f = file_with("a,y,b\n1,2,3\n4,5,6\n7,8,9\n");
        let d = load_csv(f.path(), "y").unwrap();
        assert_eq!((d.n_rows(), d.n_features()), (3, 2));
        assert_eq!(d.feature_names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(d.target().as_slice(), &[2.0, 5.0, 8.0]);
        assert_eq!(d.features()[(2, 1)], 9.0);
    }

    #[test]
    fn missing_target_and_bad_cells() {
        let f = file_with("a,b\n1,2\n");
        assert_eq!(load_csv(f.path(), "y"), Err(DataError::MissingTarget("y".into())));

        let f = file_with("a,y\n1,2\nabc,3\n");
        assert_eq!(
            load_csv(f.path(), "y"),
            Err(DataError::NonNumericCell {
                row: 2,
                column: 0,
                value: "abc".into()
            })
        );
    }

    #[test]
    fn write_then_read_is_lossless() {
        let x = DMatrix::from_row_slice(2, 2, &[0.1, -1.0 / 3.0, 1e-300, 7.0]);
        let d = Dataset::with_default_names(x, DVector::from_vec(vec![std::f64::consts::PI, 2.0]))
            .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&d, f.path(), "y").unwrap();
        assert_eq!(load_csv(f.path(), "y").unwrap(), d);
    }
}
