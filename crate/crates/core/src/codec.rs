//! Rounding soft codes to binary codes and the linear out-of-sample map.

use nalgebra::{DMatrix, DVector};

use crate::dataio::Standardizer;
use crate::energy_models::SoftCodes;
use crate::error::{Error, Result};

/// Row-major `n x d` matrix with entries in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryCodes {
    n: usize,
    d: usize,
    bits: Vec<i8>,
}

impl BinaryCodes {
    pub fn new(n: usize, d: usize, bits: Vec<i8>) -> Result<Self> {
        if bits.len() != n * d {
            return Err(Error::DimensionMismatch {
                context: "binary codes",
                expected: n * d,
                actual: bits.len(),
            });
        }
        if bits.iter().any(|&b| b != 1 && b != -1) {
            return Err(Error::InvalidConfig("code entries must be -1 or +1".into()));
        }
        Ok(BinaryCodes { n, d, bits })
    }

    /// Builds codes from a predicate: `true` maps to `+1`.
    pub fn from_fn(n: usize, d: usize, mut positive: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(n * d);
        for i in 0..n {
            for k in 0..d {
                bits.push(if positive(i, k) { 1 } else { -1 });
            }
        }
        BinaryCodes { n, d, bits }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, k: usize) -> i8 {
        self.bits[i * self.d + k]
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.bits[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.bits
    }

    /// `B_i^T B_j`.
    pub fn inner(&self, i: usize, j: usize) -> i64 {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .map(|(&a, &b)| (a as i64) * (b as i64))
            .sum()
    }

    pub fn negated(&self) -> Self {
        BinaryCodes {
            n: self.n,
            d: self.d,
            bits: self.bits.iter().map(|b| -b).collect(),
        }
    }

    /// Rows packed into 64-bit words, bit set for `+1`, `ceil(d / 64)` words
    /// per row.
    pub fn packed_words(&self) -> PackedCodes {
        let words = self.d.div_ceil(64).max(1);
        let mut data = vec![0u64; self.n * words];
        for i in 0..self.n {
            for (k, &b) in self.row(i).iter().enumerate() {
                if b > 0 {
                    data[i * words + k / 64] |= 1u64 << (k % 64);
                }
            }
        }
        PackedCodes {
            n: self.n,
            d: self.d,
            words,
            data,
        }
    }
}

/// Word-packed codes for fast Hamming distance.
#[derive(Debug, Clone)]
pub struct PackedCodes {
    n: usize,
    d: usize,
    words: usize,
    data: Vec<u64>,
}

impl PackedCodes {
    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.data[i * self.words..(i + 1) * self.words]
    }

    #[inline]
    pub fn distance_to(&self, i: usize, query: &[u64]) -> u32 {
        self.row(i)
            .iter()
            .zip(query)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

/// Thresholds each bit column at its mean: `+1` iff `phi_ik >= mean_k`.
pub fn round_codes(phi: &SoftCodes) -> (BinaryCodes, Vec<f64>) {
    let (n, d) = (phi.nrows(), phi.ncols());
    let thresholds = phi.column_means();
    let codes = BinaryCodes::from_fn(n, d, |i, k| phi.get(i, k) >= thresholds[k]);
    (codes, thresholds)
}

/// Linear map `W` (`p x d`) from features to soft codes, plus the rounding
/// thresholds of the soft codes it was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    w: DMatrix<f64>,
    thresholds: Vec<f64>,
}

impl ProjectionModel {
    pub fn from_parts(w: DMatrix<f64>, thresholds: Vec<f64>) -> Result<Self> {
        if w.ncols() != thresholds.len() {
            return Err(Error::DimensionMismatch {
                context: "projection thresholds",
                expected: w.ncols(),
                actual: thresholds.len(),
            });
        }
        Ok(ProjectionModel { w, thresholds })
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn feature_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn bits(&self) -> usize {
        self.w.ncols()
    }

    /// `phi = W^T x`.
    pub fn soft(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                context: "query features",
                expected: self.feature_dim(),
                actual: x.len(),
            });
        }
        Ok(self.w.tr_mul(&DVector::from_column_slice(x)))
    }

    /// Encodes one feature vector; see [`encode`].
    pub fn encode(&self, x: &[f64]) -> Result<Vec<i8>> {
        let phi = self.soft(x)?;
        Ok(phi
            .iter()
            .zip(&self.thresholds)
            .map(|(&p, &t)| if p >= t { 1 } else { -1 })
            .collect())
    }

    /// Encodes every row of `x` (`n x p`).
    pub fn encode_rows(&self, x: &DMatrix<f64>) -> Result<BinaryCodes> {
        if x.ncols() != self.feature_dim() && x.nrows() > 0 {
            return Err(Error::DimensionMismatch {
                context: "query features",
                expected: self.feature_dim(),
                actual: x.ncols(),
            });
        }
        let soft = x * &self.w;
        Ok(BinaryCodes::from_fn(x.nrows(), self.bits(), |i, k| {
            soft[(i, k)] >= self.thresholds[k]
        }))
    }
}

/// Ridge regression `W = (X^T X + lambda_h I)^-1 X^T Phi`, solved through a
/// Cholesky factorization.
pub fn fit_projection(x: &DMatrix<f64>, phi: &SoftCodes, lambda_h: f64) -> Result<ProjectionModel> {
    if x.nrows() != phi.nrows() {
        return Err(Error::DimensionMismatch {
            context: "projection rows",
            expected: x.nrows(),
            actual: phi.nrows(),
        });
    }
    if lambda_h.is_nan() || lambda_h < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "lambda_h = {lambda_h} must be >= 0"
        )));
    }
    let p = x.ncols();
    let gram = x.tr_mul(x) + DMatrix::identity(p, p) * lambda_h;
    let rhs = x.tr_mul(&phi.to_matrix());
    let scale = gram.diagonal().amax();
    let chol = gram.cholesky().ok_or(Error::Factorization(
        "X^T X + lambda_h I is not positive definite",
    ))?;
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |m, &x| m.min(x * x));
    if p > 0 && (min_pivot.is_nan() || min_pivot <= 1e-13 * scale) {
        return Err(Error::Factorization("X^T X + lambda_h I is rank deficient"));
    }
    let w = chol.solve(&rhs);
    let (_, thresholds) = round_codes(phi);
    ProjectionModel::from_parts(w, thresholds)
}

/// Encodes `x` with `model`: `phi = W^T x`, bit `k` is `+1` iff
/// `phi_k >= threshold_k` (training column means).
pub fn encode(model: &ProjectionModel, x: &[f64]) -> Result<Vec<i8>> {
    model.encode(x)
}

/// Standardization followed by a projection on `[z, 1]`.
///
/// Standardized features have zero mean, so without the constant feature
/// `W^T x` could not reproduce the column means of `Phi` that serve as
/// thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct HashModel {
    pub standardizer: Standardizer,
    /// Weights have `p + 1` rows; the last one is the intercept.
    pub projection: ProjectionModel,
}

impl HashModel {
    pub fn fit(x: &DMatrix<f64>, phi: &SoftCodes, lambda_h: f64) -> Result<Self> {
        let standardizer = Standardizer::fit(x);
        let design = design_matrix(&standardizer, x);
        let projection = fit_projection(&design, phi, lambda_h)?;
        Ok(HashModel {
            standardizer,
            projection,
        })
    }

    pub fn from_parts(standardizer: Standardizer, projection: ProjectionModel) -> Result<Self> {
        if projection.feature_dim() != standardizer.dim() + 1 {
            return Err(Error::DimensionMismatch {
                context: "projection rows (features + intercept)",
                expected: standardizer.dim() + 1,
                actual: projection.feature_dim(),
            });
        }
        Ok(HashModel {
            standardizer,
            projection,
        })
    }

    /// Raw feature dimension `p`.
    pub fn feature_dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn bits(&self) -> usize {
        self.projection.bits()
    }

    /// Encodes raw feature rows.
    pub fn encode_rows(&self, x: &DMatrix<f64>) -> Result<BinaryCodes> {
        if x.nrows() == 0 {
            return BinaryCodes::new(0, self.bits(), Vec::new());
        }
        if x.ncols() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                context: "query features",
                expected: self.feature_dim(),
                actual: x.ncols(),
            });
        }
        self.projection
            .encode_rows(&design_matrix(&self.standardizer, x))
    }
}

fn design_matrix(s: &Standardizer, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = x.clone();
    s.apply(&mut z);
    let p = z.ncols();
    z.resize_horizontally(p + 1, 1.0)
}
