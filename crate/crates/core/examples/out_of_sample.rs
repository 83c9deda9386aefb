//! Training codes for a labeled set, fitting the ridge projection, and
//! encoding held-out points of the same clusters.
//!
//! cargo run --release --example out_of_sample

use emhash::codec::{round_codes, HashModel};
use emhash::dataio::{gaussian_clusters, sample_similarity_columns, ClusterSpec, Dataset, Labels};
use emhash::energy_models::{em_ksh_train, TrainConfig};
use emhash::evaluation::mean_average_precision;
use emhash::mean_field::LinearizedSigmoid;
use nalgebra::DMatrix;

fn main() -> emhash::Result<()> {
    let spec = ClusterSpec {
        classes: 5,
        per_class: 240,
        dim: 24,
        seed: 3,
        ..ClusterSpec::default()
    };
    let all = gaussian_clusters(&spec)?;
    let class = |i: usize| i / spec.per_class;
    // one point in six is held out
    let (train_rows, query_rows): (Vec<usize>, Vec<usize>) =
        (0..all.len()).partition(|i| i % 6 != 0);
    let rows =
        |idx: &[usize]| DMatrix::from_fn(idx.len(), all.dim(), |r, c| all.features()[(idx[r], c)]);
    let train = Dataset::new(
        rows(&train_rows),
        Some(Labels::Classes(
            train_rows.iter().map(|&i| Some(class(i) as u32)).collect(),
        )),
    )?;

    let cfg = TrainConfig {
        bits: 16,
        anchors: 250,
        ..TrainConfig::default()
    };
    let lin = LinearizedSigmoid::fit(cfg.c)?;
    let (view, perm) = sample_similarity_columns(&train, cfg.anchors, cfg.seed)?;
    let phi = em_ksh_train(&view, &cfg, &lin)?.scatter_rows(&perm);
    let (db, _) = round_codes(&phi);
    let model = HashModel::fit(train.features(), &phi, 1.0)?;

    let codes = model.encode_rows(&rows(&query_rows))?;
    let result = mean_average_precision(
        &codes,
        &db,
        |q, j| class(query_rows[q]) == class(train_rows[j]),
        false,
    )?;
    println!(
        "database {} codes, {} held-out queries",
        db.nrows(),
        codes.nrows()
    );
    println!("held-out mAP = {:.4}", result.map);
    Ok(())
}
