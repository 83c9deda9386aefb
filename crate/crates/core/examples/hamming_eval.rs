//! Hamming ranking and mean average precision on hand-made codes.
//!
//! cargo run --example hamming_eval

use emhash::codec::BinaryCodes;
use emhash::evaluation::{hamming_rank, mean_average_precision, EvalReport};

fn main() -> emhash::Result<()> {
    // classes 0,0,1,1; item 3 has one bit flipped towards class 0
    let db = BinaryCodes::new(
        4,
        4,
        vec![1, 1, 1, 1, 1, 1, 1, -1, -1, -1, -1, -1, -1, 1, -1, -1],
    )?;
    let class = [0, 0, 1, 1];
    for q in 0..4 {
        println!("query {q}: ranking {:?}", hamming_rank(db.row(q), &db)?);
    }
    let result = mean_average_precision(&db, &db, |q, j| class[q] == class[j], true)?;
    println!("per-query AP: {:?}", result.average_precisions);
    println!("{}", EvalReport::new(&result, db.nrows(), db.ncols(), true));
    Ok(())
}
