use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::labels::{LabelKind, Labels};
use super::MATRIX_MAGIC;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFormat {
    Csv,
    Binary,
}

impl FeatureFormat {
    /// `.bin` and `.emh` are binary, anything else CSV.
    pub fn from_extension(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("emh") => FeatureFormat::Binary,
            _ => FeatureFormat::Csv,
        }
    }
}

impl FromStr for FeatureFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(FeatureFormat::Csv),
            "binary" | "bin" => Ok(FeatureFormat::Binary),
            _ => Err(Error::InvalidConfig(format!(
                "unknown feature format `{s}`"
            ))),
        }
    }
}

/// Reads features and, for CSV with a label kind other than `None`, the
/// trailing label column. Binary files carry no labels.
pub fn read_feature_file(
    path: &Path,
    format: FeatureFormat,
    label_kind: LabelKind,
) -> Result<(DMatrix<f64>, Option<Labels>)> {
    match format {
        FeatureFormat::Csv => read_csv(path, label_kind),
        FeatureFormat::Binary => {
            if label_kind != LabelKind::None {
                log::debug!("binary feature files carry no labels; use a label file");
            }
            Ok((read_matrix_binary(path)?, None))
        }
    }
}

fn read_csv(path: &Path, label_kind: LabelKind) -> Result<(DMatrix<f64>, Option<Labels>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let has_label = label_kind != LabelKind::None;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0;
    for (lineno, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = lineno + 1;
        let fields = record.len();
        let p = if has_label {
            if fields < 2 {
                return Err(Error::format(
                    path,
                    format!("line {line}: expected features and a label"),
                ));
            }
            fields - 1
        } else {
            fields
        };
        match width {
            None => width = Some(p),
            Some(w) if w != p => {
                return Err(Error::format(
                    path,
                    format!("line {line}: ragged row with {p} features, expected {w}"),
                ))
            }
            _ => {}
        }
        for (k, field) in record.iter().take(p).enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::format(
                    path,
                    format!("line {line}, column {}: `{field}` is not a number", k + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::format(
                    path,
                    format!("line {line}, column {}: non-finite value", k + 1),
                ));
            }
            values.push(v);
        }
        if has_label {
            let label = Labels::parse_field(label_kind, &record[p])
                .map_err(|e| Error::format(path, format!("line {line}: {e}")))?;
            labels.push(label);
        }
        rows += 1;
    }
    let p = width.unwrap_or(0);
    Ok((
        DMatrix::from_row_slice(rows, p, &values),
        Labels::collect(label_kind, labels),
    ))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format(path, format!("{other:?}")),
    }
}

/// Reads an `EMHMAT01` file. Values are stored as `f32` and widened.
pub fn read_matrix_binary(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() < 24 || &bytes[..8] != MATRIX_MAGIC {
        return Err(Error::format(path, "missing EMHMAT01 header"));
    }
    let n = read_u64(&bytes[8..16]);
    let p = read_u64(&bytes[16..24]);
    let count = n
        .checked_mul(p)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::format(path, "header dimensions overflow"))?;
    let body = &bytes[24..];
    if (body.len() as u64) < count {
        return Err(Error::format(
            path,
            format!(
                "truncated: {n} x {p} needs {count} bytes, found {}",
                body.len()
            ),
        ));
    }
    if (body.len() as u64) > count {
        return Err(Error::format(path, "trailing bytes after matrix data"));
    }
    let (n, p) = (n as usize, p as usize);
    let mut values = Vec::with_capacity(n * p);
    for (idx, chunk) in body.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if !v.is_finite() {
            return Err(Error::format(
                path,
                format!(
                    "non-finite value at row {}, column {}",
                    idx / p.max(1),
                    idx % p.max(1)
                ),
            ));
        }
        values.push(v as f64);
    }
    Ok(DMatrix::from_row_slice(n, p, &values))
}

/// Writes an `EMHMAT01` file, narrowing to `f32`.
pub fn write_matrix_binary(path: &Path, x: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(x.nrows() as u64).to_le_bytes())?;
    w.write_all(&(x.ncols() as u64).to_le_bytes())?;
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            w.write_all(&(x[(i, j)] as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes features as CSV, with the label column when `labels` is given.
pub fn write_matrix_csv(path: &Path, x: &DMatrix<f64>, labels: Option<&Labels>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut record = Vec::with_capacity(x.ncols() + 1);
    for i in 0..x.nrows() {
        record.clear();
        record.extend((0..x.ncols()).map(|j| format!("{}", x[(i, j)])));
        if let Some(l) = labels {
            record.push(l.format_entry(i));
        }
        w.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b.try_into().expect("8-byte field"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn binary_round_trip_is_bitwise() {
        let dir = tmp();
        let p = dir.path().join("x.bin");
        let x = DMatrix::from_fn(5, 3, |i, j| ((i * 3 + j) as f32 * 0.37 - 1.1) as f64);
        write_matrix_binary(&p, &x).unwrap();
        let first = fs::read(&p).unwrap();
        let y = read_matrix_binary(&p).unwrap();
        assert_eq!(x, y);
        write_matrix_binary(&p, &y).unwrap();
        assert_eq!(first, fs::read(&p).unwrap());
    }

    #[test]
    fn binary_errors() {
        let dir = tmp();
        let p = dir.path().join("x.bin");
        fs::write(&p, b"NOTMAGIC\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0\0").unwrap();
        assert!(matches!(read_matrix_binary(&p), Err(Error::Format { .. })));

        let mut bytes = MATRIX_MAGIC.to_vec();
        bytes.extend(2u64.to_le_bytes());
        bytes.extend(2u64.to_le_bytes());
        bytes.extend(1.0f32.to_le_bytes());
        fs::write(&p, &bytes).unwrap();
        let err = read_matrix_binary(&p).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");

        bytes.extend(f32::NAN.to_le_bytes());
        bytes.extend(1.0f32.to_le_bytes());
        bytes.extend(1.0f32.to_le_bytes());
        fs::write(&p, &bytes).unwrap();
        let err = read_matrix_binary(&p).unwrap_err().to_string();
        assert!(err.contains("non-finite"), "{err}");
    }

    #[test]
    fn csv_with_labels() {
        let dir = tmp();
        let p = dir.path().join("x.csv");
        fs::write(&p, "1.5, 2, 0\n-1,3e-1,4\n0,0,\n").unwrap();
        let (x, labels) = read_feature_file(&p, FeatureFormat::Csv, LabelKind::Class).unwrap();
        assert_eq!(x.shape(), (3, 2));
        assert_eq!(x[(1, 1)], 0.3);
        assert_eq!(labels, Some(Labels::Classes(vec![Some(0), Some(4), None])));

        // without a label column the empty trailing field is not a number
        assert!(read_feature_file(&p, FeatureFormat::Csv, LabelKind::None).is_err());
        fs::write(&p, "1.5, 2, 0\n-1,3e-1,4\n").unwrap();
        let (x, labels) = read_feature_file(&p, FeatureFormat::Csv, LabelKind::None).unwrap();
        assert!(labels.is_none());
        assert_eq!(x.shape(), (2, 3));
    }

    #[test]
    fn csv_errors() {
        let dir = tmp();
        let p = dir.path().join("x.csv");
        fs::write(&p, "1,2\n3\n").unwrap();
        let err = read_feature_file(&p, FeatureFormat::Csv, LabelKind::None)
            .unwrap_err()
            .to_string();
        assert!(err.contains("ragged"), "{err}");
        fs::write(&p, "1,inf\n").unwrap();
        let err = read_feature_file(&p, FeatureFormat::Csv, LabelKind::None)
            .unwrap_err()
            .to_string();
        assert!(err.contains("non-finite"), "{err}");
        fs::write(&p, "1,x\n").unwrap();
        assert!(read_feature_file(&p, FeatureFormat::Csv, LabelKind::None).is_err());
    }

    #[test]
    fn csv_round_trip_with_tags() {
        let dir = tmp();
        let p = dir.path().join("x.csv");
        let x = DMatrix::from_fn(3, 2, |i, j| i as f64 - 0.25 * j as f64);
        let labels = Labels::Tags(vec![vec![1, 2], vec![], vec![7]]);
        write_matrix_csv(&p, &x, Some(&labels)).unwrap();
        let (y, l) = read_feature_file(&p, FeatureFormat::Csv, LabelKind::Tags).unwrap();
        assert_eq!(x, y);
        assert_eq!(l, Some(labels));
    }
}
