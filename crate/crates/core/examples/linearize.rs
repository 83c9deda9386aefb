//! Least-squares line through the sigmoid on `[-c, c]` for a few bounds,
//! with the invertibility condition `2 c1 c < 1`.
//!
//! cargo run --example linearize

use emhash::mean_field::{LinearizedSigmoid, MAX_BOUND};

fn main() -> emhash::Result<()> {
    println!(
        "{:>6} {:>12} {:>8} {:>10} {:>10}",
        "c", "c1", "c2", "2*c1*c", "max err"
    );
    for c in [0.5, 1.0, 1.5, 2.0, 2.5, 2.59] {
        let lin = LinearizedSigmoid::fit(c)?;
        println!(
            "{c:>6.2} {:>12.8} {:>8.4} {:>10.6} {:>10.2e}",
            lin.slope(),
            lin.intercept(),
            2.0 * lin.slope() * c,
            lin.max_abs_error(2001)
        );
    }
    match LinearizedSigmoid::fit(3.0) {
        Ok(_) => unreachable!(),
        Err(e) => println!("c = 3.0 rejected (bound {MAX_BOUND}): {e}"),
    }
    Ok(())
}
