use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{Standardizer, MODEL_MAGIC};
use crate::codec::{HashModel, ProjectionModel};
use crate::error::{Error, Result};

/// Writes an `EMHMDL01` model: `u64` LE `p`, `d`, then LE `f64` values:
/// means (`p`), reciprocal standard deviations (`p`), weights (`(p + 1) x d`,
/// row-major, intercept row last) and thresholds (`d`).
pub fn write_model(path: &Path, model: &HashModel) -> Result<()> {
    let (p, d) = (model.feature_dim(), model.bits());
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&(p as u64).to_le_bytes())?;
    w.write_all(&(d as u64).to_le_bytes())?;
    let s = &model.standardizer;
    let weights = model.projection.weights();
    let values = s
        .mean
        .iter()
        .chain(&s.inv_std)
        .copied()
        .chain((0..=p).flat_map(|r| (0..d).map(move |k| weights[(r, k)])))
        .chain(model.projection.thresholds().iter().copied());
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<HashModel> {
    let bytes = fs::read(path)?;
    if bytes.len() < 24 || &bytes[..8] != MODEL_MAGIC {
        return Err(Error::format(path, "missing EMHMDL01 header"));
    }
    let p = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let d = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let count = p
        .checked_add(1)
        .and_then(|q| q.checked_mul(d))
        .and_then(|w| w.checked_add(2 * p + d))
        .ok_or_else(|| Error::format(path, "header dimensions overflow"))?;
    let body = &bytes[24..];
    if body.len() != count * 8 {
        return Err(Error::format(
            path,
            format!(
                "expected {} payload bytes for p = {p}, d = {d}, found {}",
                count * 8,
                body.len()
            ),
        ));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(path, "non-finite model parameter"));
    }
    let (mean, rest) = values.split_at(p);
    let (inv_std, rest) = rest.split_at(p);
    let (weights, thresholds) = rest.split_at((p + 1) * d);
    let standardizer = Standardizer {
        mean: mean.to_vec(),
        inv_std: inv_std.to_vec(),
    };
    let projection = ProjectionModel::from_parts(
        DMatrix::from_row_slice(p + 1, d, weights),
        thresholds.to_vec(),
    )?;
    HashModel::from_parts(standardizer, projection)
}
