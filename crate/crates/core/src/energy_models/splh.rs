use nalgebra::{DMatrix, DVector};

use super::{SimilarityView, SoftCodes, TrainConfig};
use crate::error::{Error, Result};
use crate::mean_field::{self, LinearizedSigmoid, RowSystem};

/// SPLH consistency system for any bit column: `A = S`, `b = 0`.
///
/// The system does not depend on the bit index, so every column of the
/// marginals solves the same problem.
pub fn splh_system(sim: &SimilarityView, c: f64) -> Result<RowSystem> {
    if !sim.is_square() {
        return Err(Error::DimensionMismatch {
            context: "SPLH similarity (full matrix)",
            expected: sim.nrows(),
            actual: sim.anchors(),
        });
    }
    if !sim.is_symmetric() {
        return Err(Error::InvalidConfig(
            "SPLH similarity must be symmetric".into(),
        ));
    }
    let n = sim.nrows();
    let a = DMatrix::from_fn(n, n, |i, j| sim.get(i, j) as f64);
    RowSystem::new(a, DVector::zeros(n), c)
}

/// EM-SPLH: one homogeneous solve on the full similarity matrix. All `d`
/// bit columns are copies of the same marginal vector.
pub fn em_splh_train(
    sim: &SimilarityView,
    cfg: &TrainConfig,
    lin: &LinearizedSigmoid,
) -> Result<SoftCodes> {
    if cfg.bits == 0 {
        return Err(Error::InvalidConfig("bits must be >= 1".into()));
    }
    if cfg.c != lin.bound() {
        return Err(Error::InvalidConfig(format!(
            "config bound {} differs from linearization bound {}",
            cfg.c,
            lin.bound()
        )));
    }
    if sim.is_empty() {
        return Err(Error::Degenerate("similarity matrix has no observed pairs"));
    }
    let sys = splh_system(sim, lin.bound())?;
    let column = mean_field::solve_row_system(&sys, lin)?;
    let n = sim.nrows();
    let d = cfg.bits;
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        data.extend(std::iter::repeat_n(column[i], d));
    }
    SoftCodes::from_row_major(n, d, data)
}
