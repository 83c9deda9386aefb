//! The LFH consistency system under hard assignment is the KSH system
//! scaled by `1/d`, so both give the same marginals. The variational
//! coupling weighs each anchor by `lambda(xi_ij)` instead.
//!
//! cargo run --example lfh_connection

use emhash::energy_models::{
    ksh_anchor_system, lfh_system, LfhCoupling, SimilarityView, SoftCodes,
};
use emhash::mean_field::{solve_row_system, LinearizedSigmoid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> emhash::Result<()> {
    let lin = LinearizedSigmoid::fit(2.0)?;
    let labels = [0, 0, 1, 1, 2, 2, 0, 1];
    let sim = SimilarityView::from_classes(&labels);
    let d = 4;
    let phi = SoftCodes::random(labels.len(), d, &mut ChaCha8Rng::seed_from_u64(1));

    let ksh = ksh_anchor_system(&phi, &sim, 0, 2.0)?;
    let hard = lfh_system(&phi, &sim, 0, 2.0, LfhCoupling::HardAssignment)?;
    let soft = lfh_system(&phi, &sim, 0, 2.0, LfhCoupling::Variational)?;
    println!(
        "max |A_ksh - d A_lfh| = {:.2e}",
        (ksh.a() - hard.a() * d as f64).amax()
    );
    println!(
        "max |b_ksh - d b_lfh| = {:.2e}",
        (ksh.b() - hard.b() * d as f64).amax()
    );
    for (name, sys) in [
        ("ksh", &ksh),
        ("lfh hard", &hard),
        ("lfh variational", &soft),
    ] {
        println!(
            "{name:>16}: phi_0 = {:.4?}",
            solve_row_system(sys, &lin)?.as_slice()
        );
    }
    Ok(())
}
