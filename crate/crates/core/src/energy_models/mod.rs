//! Consistency systems and training loops for the KSH, SPLH and LFH energies.
//!
//! Points are ordered so that the `m` anchor points (the sampled similarity
//! columns) come first. Anchor rows are refined by `T` sequential sweeps; the
//! remaining tail rows share one system matrix and are solved in a single
//! batched pass.

mod energy;
mod ksh;
mod lfh;
mod shared;
mod splh;

pub use energy::{ksh_energy, splh_energy};
pub use ksh::{em_ksh_train, ksh_anchor_system, ksh_tail_systems, TailSystems};
pub use lfh::{em_lfh_train, lfh_coupling, lfh_system, LfhCoupling};
pub use shared::{batch_solve_shared, SharedEig};
pub use splh::{em_splh_train, splh_system};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mean_field::{self, SoftRow};

/// Row-major `n x d` matrix of per-bit marginals in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftCodes {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl SoftCodes {
    pub fn from_row_major(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                context: "soft codes",
                expected: n * d,
                actual: data.len(),
            });
        }
        if data.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig("marginals must lie in [0, 1]".into()));
        }
        Ok(SoftCodes { n, d, data })
    }

    pub fn uniform(n: usize, d: usize) -> Self {
        SoftCodes {
            n,
            d,
            data: vec![0.5; n * d],
        }
    }

    /// Independent uniform draws in `[0, 1)`.
    pub fn random(n: usize, d: usize, rng: &mut impl Rng) -> Self {
        SoftCodes {
            n,
            d,
            data: (0..n * d).map(|_| rng.random::<f64>()).collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.d + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn set_row(&mut self, i: usize, row: &SoftRow) {
        self.data[i * self.d..(i + 1) * self.d].copy_from_slice(row.as_slice());
    }

    /// First `m` rows.
    pub fn head(&self, m: usize) -> SoftCodes {
        SoftCodes {
            n: m,
            d: self.d,
            data: self.data[..m * self.d].to_vec(),
        }
    }

    /// Expected codes `2 phi - 1`, row-major.
    pub fn expectations(&self) -> Vec<f64> {
        self.data.iter().map(|p| 2.0 * p - 1.0).collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.d];
        for i in 0..self.n {
            for (m, p) in means.iter_mut().zip(self.row(i)) {
                *m += p;
            }
        }
        let n = self.n.max(1) as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.data)
    }

    /// Rows reordered so that output row `perm[r]` is input row `r`.
    pub fn scatter_rows(&self, perm: &[usize]) -> SoftCodes {
        let mut data = vec![0.0; self.data.len()];
        for (r, &orig) in perm.iter().enumerate() {
            data[orig * self.d..(orig + 1) * self.d].copy_from_slice(self.row(r));
        }
        SoftCodes {
            n: self.n,
            d: self.d,
            data,
        }
    }
}

/// Sampled `n x m` similarity block with entries in `{-1, 0, +1}`.
///
/// Column `j` belongs to point `j` (the anchors are the first `m` points),
/// so `S_jj = +1` for every anchor. `0` marks an unobserved pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityView {
    n: usize,
    m: usize,
    data: Vec<i8>,
}

impl SimilarityView {
    pub fn new(n: usize, m: usize, data: Vec<i8>) -> Result<Self> {
        if m > n {
            return Err(Error::InvalidConfig(format!("m = {m} exceeds n = {n}")));
        }
        if data.len() != n * m {
            return Err(Error::DimensionMismatch {
                context: "similarity view",
                expected: n * m,
                actual: data.len(),
            });
        }
        if data.iter().any(|s| !(-1..=1).contains(s)) {
            return Err(Error::InvalidConfig(
                "similarities must be -1, 0 or +1".into(),
            ));
        }
        if let Some(j) = (0..m).find(|&j| data[j * m + j] != 1) {
            return Err(Error::InvalidConfig(format!(
                "anchor {j} is not similar to itself"
            )));
        }
        Ok(SimilarityView { n, m, data })
    }

    pub fn from_fn(n: usize, m: usize, mut f: impl FnMut(usize, usize) -> i8) -> Result<Self> {
        let mut data = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                data.push(f(i, j));
            }
        }
        SimilarityView::new(n, m, data)
    }

    /// Square view from class labels: `+1` for equal labels, `-1` otherwise.
    pub fn from_classes(labels: &[usize]) -> Self {
        let n = labels.len();
        SimilarityView::from_fn(n, n, |i, j| if labels[i] == labels[j] { 1 } else { -1 })
            .expect("label similarity is well formed")
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn anchors(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.data[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn is_square(&self) -> bool {
        self.n == self.m
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn is_empty(&self) -> bool {
        (0..self.n).all(|i| (0..self.m).all(|j| i == j || self.get(i, j) == 0))
    }
}

/// Hyper-parameters shared by the training loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Code length `d`.
    pub bits: usize,
    /// Number of anchor columns `m`.
    pub anchors: usize,
    /// Sequential sweeps `T` over the anchors.
    pub sweeps: usize,
    /// Linearization half-interval.
    pub c: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            bits: 32,
            anchors: 1000,
            sweeps: 3,
            c: mean_field::DEFAULT_BOUND,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.bits == 0 {
            return Err(Error::InvalidConfig("bits must be >= 1".into()));
        }
        if self.anchors == 0 || self.anchors > n {
            return Err(Error::InvalidConfig(format!(
                "anchors must be in 1..={n}, got {}",
                self.anchors
            )));
        }
        if self.sweeps == 0 {
            return Err(Error::InvalidConfig("sweeps must be >= 1".into()));
        }
        if !(self.c > 0.0 && self.c < mean_field::MAX_BOUND) {
            return Err(Error::InvalidBound(self.c));
        }
        Ok(())
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Symmetric `d x d` matrix `-sum_j offdiag(u_j u_j^T)` over the given rows
/// of `u` (row-major expectations), optionally weighted per row.
pub(crate) fn negative_offdiag_gram<'a>(
    d: usize,
    rows: impl Iterator<Item = (&'a [f64], f64)>,
) -> DMatrix<f64> {
    let mut upper = vec![0.0; d * d];
    for (u, w) in rows {
        for k in 0..d {
            let uk = u[k] * w;
            for kp in (k + 1)..d {
                upper[k * d + kp] += uk * u[kp];
            }
        }
    }
    let mut a = DMatrix::zeros(d, d);
    for k in 0..d {
        for kp in (k + 1)..d {
            let v = -upper[k * d + kp];
            a[(k, kp)] = v;
            a[(kp, k)] = v;
        }
    }
    a
}
