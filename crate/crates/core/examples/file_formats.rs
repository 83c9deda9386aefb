//! Writes and reads every file format: CSV and binary features, labels,
//! text and packed codes, and a trained model.
//!
//! cargo run --example file_formats

use emhash::codec::{round_codes, HashModel};
use emhash::dataio::{
    gaussian_clusters, read_codes, read_feature_file, read_labels, read_model, write_codes,
    write_labels, write_matrix_binary, write_matrix_csv, write_model, ClusterSpec, CodesFormat,
    FeatureFormat, LabelKind,
};
use emhash::energy_models::{em_ksh_train, SimilarityView, TrainConfig};
use emhash::mean_field::LinearizedSigmoid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let spec = ClusterSpec {
        classes: 2,
        per_class: 10,
        dim: 3,
        ..ClusterSpec::default()
    };
    let data = gaussian_clusters(&spec)?;
    let labels = data.labels().unwrap();

    let csv = dir.path().join("points.csv");
    write_matrix_csv(&csv, data.features(), Some(labels))?;
    let (x, l) = read_feature_file(&csv, FeatureFormat::Csv, LabelKind::Class)?;
    println!(
        "csv: {}x{}, labels read back: {}",
        x.nrows(),
        x.ncols(),
        l.as_ref() == Some(labels)
    );

    let bin = dir.path().join("points.bin");
    write_matrix_binary(&bin, data.features())?;
    let (xb, _) = read_feature_file(&bin, FeatureFormat::Binary, LabelKind::None)?;
    println!(
        "binary (f32): max abs change {:.1e}",
        (xb - data.features()).amax()
    );

    let label_file = dir.path().join("labels.txt");
    write_labels(&label_file, labels)?;
    println!(
        "labels file round trip: {}",
        &read_labels(&label_file, LabelKind::Class)? == labels
    );

    let classes: Vec<usize> = (0..data.len()).map(|i| i / spec.per_class).collect();
    let cfg = TrainConfig {
        bits: 10,
        anchors: data.len(),
        ..TrainConfig::default()
    };
    let phi = em_ksh_train(
        &SimilarityView::from_classes(&classes),
        &cfg,
        &LinearizedSigmoid::fit(cfg.c)?,
    )?;
    let (codes, _) = round_codes(&phi);
    for (name, format) in [
        ("codes.txt", CodesFormat::Text),
        ("codes.bin", CodesFormat::Packed),
    ] {
        let path = dir.path().join(name);
        write_codes(&path, &codes, format)?;
        let size = std::fs::metadata(&path)?.len();
        println!(
            "{name}: {size} bytes, round trip: {}",
            read_codes(&path)? == codes
        );
    }

    let model = HashModel::fit(data.features(), &phi, 1.0)?;
    let model_file = dir.path().join("model.emh");
    write_model(&model_file, &model)?;
    let back = read_model(&model_file)?;
    println!(
        "model: {} features -> {} bits, identical after reload: {}",
        back.feature_dim(),
        back.bits(),
        back == model
    );
    Ok(())
}
