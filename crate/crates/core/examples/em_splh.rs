//! EM-SPLH on a full similarity matrix. Every bit solves the same
//! homogeneous system, so all columns of the result coincide; the single
//! effective bit is the sign pattern of one eigenvector.
//!
//! cargo run --example em_splh

use emhash::codec::round_codes;
use emhash::energy_models::{em_splh_train, splh_energy, SimilarityView, TrainConfig};
use emhash::mean_field::LinearizedSigmoid;

fn main() -> emhash::Result<()> {
    let labels: Vec<usize> = (0..12).map(|i| usize::from(i % 3 == 0)).collect();
    let sim = SimilarityView::from_classes(&labels);
    let cfg = TrainConfig {
        bits: 3,
        anchors: labels.len(),
        ..TrainConfig::default()
    };
    let lin = LinearizedSigmoid::fit(cfg.c)?;
    let phi = em_splh_train(&sim, &cfg, &lin)?;
    let (codes, _) = round_codes(&phi);
    for (i, label) in labels.iter().enumerate() {
        println!(
            "point {i:>2} class {label}: phi={:.3?} code={:?}",
            phi.row(i),
            codes.row(i)
        );
    }
    println!("SPLH energy of the codes: {}", splh_energy(&codes, &sim)?);
    Ok(())
}
