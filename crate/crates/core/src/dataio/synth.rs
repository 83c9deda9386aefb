use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Labels};
use crate::error::{Error, Result};

/// Isotropic Gaussian clusters, one class per cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Standard deviation of the cluster centers around the origin.
    pub separation: f64,
    /// Standard deviation of points around their center.
    pub noise: f64,
    pub seed: u64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec {
            classes: 2,
            per_class: 100,
            dim: 16,
            separation: 4.0,
            noise: 1.0,
            seed: 42,
        }
    }
}

/// Draws the clusters. Points are grouped by class: rows
/// `c * per_class .. (c + 1) * per_class` carry label `c`.
pub fn gaussian_clusters(spec: &ClusterSpec) -> Result<Dataset> {
    if spec.classes == 0 || spec.per_class == 0 || spec.dim == 0 {
        return Err(Error::InvalidConfig(
            "clusters need at least one class, point and dimension".into(),
        ));
    }
    let normal = |std: f64, what: &str| {
        if std.is_finite() && std >= 0.0 {
            Normal::new(0.0, std).ok()
        } else {
            None
        }
        .ok_or_else(|| Error::InvalidConfig(format!("{what} must be finite and >= 0")))
    };
    let centers = normal(spec.separation, "separation")?;
    let spread = normal(spec.noise, "noise")?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means: Vec<f64> = (0..spec.classes * spec.dim)
        .map(|_| centers.sample(&mut rng))
        .collect();
    let n = spec.classes * spec.per_class;
    let mut data = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for c in 0..spec.classes {
        let center = &means[c * spec.dim..(c + 1) * spec.dim];
        for _ in 0..spec.per_class {
            data.extend(center.iter().map(|mu| mu + spread.sample(&mut rng)));
            labels.push(Some(c as u32));
        }
    }
    Dataset::new(
        DMatrix::from_row_slice(n, spec.dim, &data),
        Some(Labels::Classes(labels)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_labels_and_determinism() {
        let spec = ClusterSpec {
            classes: 3,
            per_class: 5,
            dim: 4,
            ..ClusterSpec::default()
        };
        let a = gaussian_clusters(&spec).unwrap();
        assert_eq!((a.len(), a.dim()), (15, 4));
        assert_eq!(a.labels().unwrap().similarity(0, a.labels().unwrap(), 4), 1);
        assert_eq!(
            a.labels().unwrap().similarity(0, a.labels().unwrap(), 5),
            -1
        );
        assert_eq!(a, gaussian_clusters(&spec).unwrap());
        assert!(gaussian_clusters(&ClusterSpec {
            noise: -1.0,
            ..spec
        })
        .is_err());
    }
}
