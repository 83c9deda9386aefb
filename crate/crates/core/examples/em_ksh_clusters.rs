//! EM-KSH on Gaussian clusters with sampled similarity columns, reporting
//! mAP and the KSH energy of the rounded codes as the sweep count grows.
//!
//! cargo run --release --example em_ksh_clusters

use emhash::codec::round_codes;
use emhash::dataio::{gaussian_clusters, sample_similarity_columns, ClusterSpec};
use emhash::energy_models::{em_ksh_train, TrainConfig};
use emhash::evaluation::mean_average_precision;
use emhash::mean_field::LinearizedSigmoid;
use std::time::Instant;

fn main() -> emhash::Result<()> {
    let spec = ClusterSpec {
        classes: 10,
        per_class: 300,
        dim: 32,
        ..ClusterSpec::default()
    };
    let data = gaussian_clusters(&spec)?;
    let lin = LinearizedSigmoid::fit(2.0)?;
    for sweeps in 1..=4 {
        let cfg = TrainConfig {
            bits: 16,
            anchors: 300,
            sweeps,
            c: 2.0,
            seed: 7,
        };
        let t = Instant::now();
        let (view, perm) = sample_similarity_columns(&data, cfg.anchors, cfg.seed)?;
        let phi = em_ksh_train(&view, &cfg, &lin)?.scatter_rows(&perm);
        let secs = t.elapsed().as_secs_f64();
        let (codes, _) = round_codes(&phi);
        let class = |i: usize| i / spec.per_class;
        let map = mean_average_precision(&codes, &codes, |q, j| class(q) == class(j), true)?.map;
        println!("T={sweeps} mAP={map:.4} time={secs:.3}s");
    }
    Ok(())
}
