//! Solving one consistency system `phi = sigmoid((A u + b) / lambda)` in
//! closed form, for both the affine (`b != 0`) and homogeneous (`b = 0`)
//! cases, and checking the result against the exact sigmoid map.
//!
//! cargo run --example row_system

use emhash::mean_field::{sigmoid, solve_row_system, LinearizedSigmoid, RowSystem};
use nalgebra::{dmatrix, dvector};

fn main() -> emhash::Result<()> {
    let lin = LinearizedSigmoid::fit(2.0)?;
    let a = dmatrix![0.0, -1.5, 0.5; -1.5, 0.0, -0.8; 0.5, -0.8, 0.0];

    for b in [dvector![2.0, -1.0, 0.5], dvector![0.0, 0.0, 0.0]] {
        let sys = RowSystem::new(a.clone(), b.clone(), 2.0)?;
        let phi = solve_row_system(&sys, &lin)?;
        let u = phi
            .as_slice()
            .iter()
            .map(|p| 2.0 * p - 1.0)
            .collect::<Vec<_>>();
        let u = nalgebra::DVector::from_vec(u);
        // one exact (unlinearized) step from the solution
        let exact = (&a * &u + &b).map(|x| sigmoid(x / sys.lambda()));
        println!("b = {:?}", b.as_slice());
        println!("  lambda       = {:.4}", sys.lambda());
        println!("  phi          = {:.4?}", phi.as_slice());
        println!("  sigmoid step = {:.4?}", exact.as_slice());
    }
    Ok(())
}
