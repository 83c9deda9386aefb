//! Supervised learning to hash by closed-form mean-field fixed points.
//!
//! Binary codes are learned by writing the mean-field consistency equations
//! of a pairwise hashing energy (KSH, SPLH or LFH), replacing the sigmoid by
//! its least-squares line on `[-c, c]` and solving the resulting linear
//! systems directly. A ridge-regression projection extends the codes to new
//! points.
//!
//! ```no_run
//! use emhash::prelude::*;
//!
//! let labels: Vec<usize> = (0..200).map(|i| i / 100).collect();
//! let sim = SimilarityView::from_classes(&labels);
//! let cfg = TrainConfig { bits: 8, anchors: 200, ..TrainConfig::default() };
//! let lin = LinearizedSigmoid::fit(cfg.c).unwrap();
//! let phi = em_ksh_train(&sim, &cfg, &lin).unwrap();
//! let (codes, _thresholds) = round_codes(&phi);
//! assert_eq!(codes.nrows(), 200);
//! ```

pub mod cli;
pub mod codec;
pub mod dataio;
pub mod energy_models;
pub mod error;
pub mod evaluation;
pub mod mean_field;
pub mod quadrature;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::codec::{encode, fit_projection, round_codes, BinaryCodes, ProjectionModel};
    pub use crate::energy_models::{
        em_ksh_train, em_lfh_train, em_splh_train, LfhCoupling, SimilarityView, SoftCodes,
        TrainConfig,
    };
    pub use crate::error::{Error, Result};
    pub use crate::evaluation::{hamming_rank, mean_average_precision};
    pub use crate::mean_field::{fit_linearization, LinearizedSigmoid, RowSystem};
}
