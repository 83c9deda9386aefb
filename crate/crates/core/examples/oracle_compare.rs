//! Closed-form EM-KSH against the damped fixed-point iteration of the exact
//! consistency equations, and both against exhaustive search on a tiny
//! problem.
//!
//! With two bits, the stretch of every row to `[-c, c]` puts one bit on
//! each side, so codes like `[-1, -1]` are out of reach here.
//!
//! cargo run --release --example oracle_compare

use emhash::codec::round_codes;
use emhash::energy_models::{em_ksh_train, ksh_energy, SimilarityView, TrainConfig};
use emhash::evaluation::{
    brute_force_min_energy, fixed_point_oracle, KshConsistency, OracleOptions,
};
use emhash::mean_field::LinearizedSigmoid;
use std::time::Instant;

fn main() -> emhash::Result<()> {
    let labels = [0, 0, 1, 1, 2, 2];
    let sim = SimilarityView::from_classes(&labels);
    let cfg = TrainConfig {
        bits: 2,
        anchors: labels.len(),
        ..TrainConfig::default()
    };
    let lin = LinearizedSigmoid::fit(cfg.c)?;

    let t = Instant::now();
    let (ours, _) = round_codes(&em_ksh_train(&sim, &cfg, &lin)?);
    println!(
        "EM-KSH:     energy {} in {:?}",
        ksh_energy(&ours, &sim)?,
        t.elapsed()
    );

    let t = Instant::now();
    let oracle = fixed_point_oracle(
        &KshConsistency { sim: &sim },
        &cfg,
        OracleOptions::default(),
    )?;
    let (theirs, _) = round_codes(&oracle.phi);
    println!(
        "fixed point: energy {} after {} iterations (converged: {}) in {:?}",
        ksh_energy(&theirs, &sim)?,
        oracle.iterations,
        oracle.converged,
        t.elapsed()
    );

    let (best, energy) = brute_force_min_energy(labels.len(), cfg.bits, |b| ksh_energy(b, &sim))?;
    println!("exhaustive: energy {energy}");
    for (i, label) in labels.iter().enumerate() {
        println!(
            "  point {i} class {label}: ours {:?} optimum {:?}",
            ours.row(i),
            best.row(i)
        );
    }
    Ok(())
}
