use super::SimilarityView;
use crate::codec::BinaryCodes;
use crate::error::{Error, Result};

fn check(codes: &BinaryCodes, sim: &SimilarityView) -> Result<()> {
    if !sim.is_square() || sim.nrows() != codes.nrows() {
        return Err(Error::DimensionMismatch {
            context: "energy (full similarity vs codes)",
            expected: codes.nrows(),
            actual: sim.anchors(),
        });
    }
    Ok(())
}

/// `1/4 sum_{i<j} (B_i^T B_j - d S_ij)^2`, skipping unobserved pairs.
pub fn ksh_energy(codes: &BinaryCodes, sim: &SimilarityView) -> Result<f64> {
    check(codes, sim)?;
    let d = codes.ncols() as i64;
    let mut total: i64 = 0;
    for i in 0..codes.nrows() {
        for j in (i + 1)..codes.nrows() {
            let s = sim.get(i, j) as i64;
            if s != 0 {
                let r = codes.inner(i, j) - d * s;
                total += r * r;
            }
        }
    }
    Ok(total as f64 / 4.0)
}

/// `-1/2 sum_{i<j} S_ij B_i^T B_j`.
pub fn splh_energy(codes: &BinaryCodes, sim: &SimilarityView) -> Result<f64> {
    check(codes, sim)?;
    let mut total: i64 = 0;
    for i in 0..codes.nrows() {
        for j in (i + 1)..codes.nrows() {
            total += sim.get(i, j) as i64 * codes.inner(i, j);
        }
    }
    Ok(-0.5 * total as f64)
}
