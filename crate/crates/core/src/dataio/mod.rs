//! Feature matrices, labels, anchor sampling and code files.
//!
//! File formats:
//!
//! * Feature CSV: one row per point, decimal fields, optionally followed by a
//!   label field (a class id, or a `;`-separated list of tag ids).
//! * Feature binary: magic `EMHMAT01`, `u64` LE `n`, `u64` LE `p`, then
//!   `n * p` LE `f32` values, row-major.
//! * Label file: one line per point, a class id or `;`-separated tag ids;
//!   an empty line marks an unlabeled point.
//! * Codes text: one line per point, `d` space-separated tokens `-1`/`1`.
//! * Codes packed: magic `EMHBIN01`, `u64` LE `n`, `u64` LE `d`, then
//!   `ceil(d / 8)` bytes per row, most significant bit first, `1` for `+1`,
//!   zero padding.
//! * Model: magic `EMHMDL01`; see [`write_model`].

mod codes;
mod labels;
mod matrix;
mod model;
mod synth;

pub use codes::{
    read_codes, read_codes_packed, read_codes_text, write_codes, write_codes_packed,
    write_codes_text, CodesFormat,
};
pub use labels::{read_labels, write_labels, LabelKind, Labels};
pub use matrix::{
    read_feature_file, read_matrix_binary, write_matrix_binary, write_matrix_csv, FeatureFormat,
};
pub use model::{read_model, write_model};
pub use synth::{gaussian_clusters, ClusterSpec};

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy_models::SimilarityView;
use crate::error::{Error, Result};

pub const MATRIX_MAGIC: &[u8; 8] = b"EMHMAT01";
pub const CODES_MAGIC: &[u8; 8] = b"EMHBIN01";
pub const MODEL_MAGIC: &[u8; 8] = b"EMHMDL01";

/// Features (`n x p`) with optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Option<Labels>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: Option<Labels>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::InvalidConfig("dataset has no points".into()));
        }
        if let Some(l) = &labels {
            if l.len() != features.nrows() {
                return Err(Error::DimensionMismatch {
                    context: "labels",
                    expected: features.nrows(),
                    actual: l.len(),
                });
            }
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("non-finite feature value".into()));
        }
        Ok(Dataset { features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn with_labels(mut self, labels: Labels) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "labels",
                expected: self.len(),
                actual: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Standardizes every feature dimension in place and returns the fitted
    /// transform.
    pub fn standardize(&mut self) -> Standardizer {
        let s = Standardizer::fit(&self.features);
        s.apply(&mut self.features);
        s
    }
}

/// Loads a feature file; labels are read from the CSV label column when
/// `label_kind` is not [`LabelKind::None`].
pub fn load_feature_matrix(
    path: &Path,
    format: FeatureFormat,
    label_kind: LabelKind,
) -> Result<Dataset> {
    let (features, labels) = read_feature_file(path, format, label_kind)?;
    if features.nrows() == 0 {
        return Err(Error::format(path, "file contains no points"));
    }
    Dataset::new(features, labels)
}

/// Per-dimension affine map to zero mean and unit (population) variance.
/// Constant dimensions map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Reciprocal standard deviation, 0 for constant dimensions.
    pub inv_std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut inv_std = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let mu = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            mean.push(mu);
            // relative cutoff so a constant column with rounding noise stays constant
            let tiny = 1e-24 * (1.0 + mu * mu);
            inv_std.push(if var > tiny { 1.0 / var.sqrt() } else { 0.0 });
        }
        Standardizer { mean, inv_std }
    }

    pub fn identity(p: usize) -> Self {
        Standardizer {
            mean: vec![0.0; p],
            inv_std: vec![1.0; p],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &mut DMatrix<f64>) {
        for (k, mut col) in x.column_iter_mut().enumerate() {
            let (mu, s) = (self.mean[k], self.inv_std[k]);
            col.apply(|v| *v = (*v - mu) * s);
        }
    }

    pub fn apply_row(&self, x: &mut [f64]) {
        for ((v, mu), s) in x.iter_mut().zip(&self.mean).zip(&self.inv_std) {
            *v = (*v - mu) * s;
        }
    }
}

/// Similarity of points `i` and `j` of a labeled dataset: `+1` when they
/// share a class (or any tag), `-1` otherwise, `0` when either is unlabeled
/// or the dataset has no labels.
pub fn similarity_from_labels(dataset: &Dataset, i: usize, j: usize) -> i8 {
    match dataset.labels() {
        Some(l) => l.similarity(i, l, j),
        None => 0,
    }
}

/// Chooses `m` anchors uniformly without replacement and builds the `n x m`
/// similarity view with points reordered so the anchors come first.
///
/// Returns the view and the permutation: view row `r` is dataset point
/// `perm[r]`. Anchors keep their sampled order; the remaining points follow
/// in ascending index order.
pub fn sample_similarity_columns(
    dataset: &Dataset,
    m: usize,
    seed: u64,
) -> Result<(SimilarityView, Vec<usize>)> {
    let n = dataset.len();
    if m == 0 || m > n {
        return Err(Error::InvalidConfig(format!(
            "cannot sample {m} anchor columns from {n} points"
        )));
    }
    let labels = dataset
        .labels()
        .ok_or_else(|| Error::InvalidConfig("anchor sampling needs labels".into()))?;
    let perm = sample_anchor_order(n, m, seed);
    let view = labels.view(&perm, m)?;
    Ok((view, perm))
}

/// Anchor-first ordering of `0..n` for `m` anchors drawn with `seed`.
pub fn sample_anchor_order(n: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors = rand::seq::index::sample(&mut rng, n, m).into_vec();
    let mut chosen = vec![false; n];
    for &a in &anchors {
        chosen[a] = true;
    }
    let mut perm = anchors;
    perm.extend((0..n).filter(|&i| !chosen[i]));
    perm
}

impl Labels {
    /// Dense `n x m` view for the ordering `perm` (anchors first).
    pub fn view(&self, perm: &[usize], m: usize) -> Result<SimilarityView> {
        let n = perm.len();
        let mut data = vec![0i8; n * m];
        data.par_chunks_mut(m.max(1))
            .enumerate()
            .for_each(|(r, row)| {
                for (a, s) in row.iter_mut().enumerate() {
                    *s = if r == a {
                        1
                    } else {
                        self.similarity(perm[r], self, perm[a])
                    };
                }
            });
        SimilarityView::new(n, m, data)
    }
}
