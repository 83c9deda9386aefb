use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context};
use clap::ValueEnum;

use super::{
    BenchArgs, EncodeArgs, EvalArgs, LinearizeArgs, Method, SynthArgs, TrainArgs, MANIFEST_VERSION,
};
use crate::codec::{round_codes, BinaryCodes, HashModel};
use crate::dataio::{
    self, gaussian_clusters, read_codes, read_feature_file, read_labels, read_model,
    sample_similarity_columns, write_codes, write_labels, write_matrix_binary, write_matrix_csv,
    write_model, ClusterSpec, CodesFormat, Dataset, FeatureFormat, LabelKind, Labels,
};
use crate::energy_models::{em_ksh_train, em_lfh_train, em_splh_train, SoftCodes, TrainConfig};
use crate::evaluation::{mean_average_precision, EvalReport, RankingResult};
use crate::mean_field::{LinearizedSigmoid, MAX_BOUND};

/// Paths written by `train`.
#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub codes: PathBuf,
    pub model: PathBuf,
    pub thresholds: PathBuf,
    pub manifest: PathBuf,
}

impl TrainOutputs {
    fn in_dir(dir: &Path, format: CodesFormat) -> Self {
        let codes = match format {
            CodesFormat::Text => "codes.txt",
            CodesFormat::Packed => "codes.bin",
        };
        TrainOutputs {
            codes: dir.join(codes),
            model: dir.join("model.emh"),
            thresholds: dir.join("thresholds.txt"),
            manifest: dir.join("manifest.txt"),
        }
    }
}

/// Files written to temporary names and renamed into place only once every
/// output exists, so a failed run leaves nothing behind.
struct Staged {
    files: Vec<(PathBuf, PathBuf)>,
    committed: bool,
}

impl Staged {
    fn new() -> Self {
        Staged {
            files: Vec::new(),
            committed: false,
        }
    }

    fn path(&mut self, target: &Path) -> PathBuf {
        let mut name = target.file_name().unwrap_or_default().to_os_string();
        name.push(".partial");
        let tmp = target.with_file_name(name);
        self.files.push((tmp.clone(), target.to_path_buf()));
        tmp
    }

    fn commit(mut self) -> anyhow::Result<()> {
        for (tmp, target) in &self.files {
            fs::rename(tmp, target)
                .with_context(|| format!("moving output into {}", target.display()))?;
        }
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if !self.committed {
            for (tmp, _) in &self.files {
                let _ = fs::remove_file(tmp);
            }
        }
    }
}

fn feature_format(path: &Path, explicit: Option<FeatureFormat>) -> FeatureFormat {
    explicit.unwrap_or_else(|| FeatureFormat::from_extension(path))
}

fn load_training_set(a: &TrainArgs) -> anyhow::Result<Dataset> {
    let format = feature_format(&a.features, a.format);
    let csv_labels = if a.labels.is_none() && format == FeatureFormat::Csv {
        a.label_kind
    } else {
        LabelKind::None
    };
    let (x, labels) = read_feature_file(&a.features, format, csv_labels)
        .with_context(|| format!("loading features from {}", a.features.display()))?;
    ensure!(x.nrows() > 0, "{} contains no points", a.features.display());
    let labels = match &a.labels {
        Some(p) => Some(
            read_labels(p, a.label_kind)
                .with_context(|| format!("loading labels from {}", p.display()))?,
        ),
        None => labels,
    };
    let Some(labels) = labels else {
        bail!("training needs labels: add a label column or pass --labels");
    };
    Ok(Dataset::new(x, Some(labels))?)
}

fn method_name(m: Method) -> String {
    m.to_possible_value()
        .expect("named variant")
        .get_name()
        .to_owned()
}

fn manifest_text(a: &TrainArgs, timings: &[(&str, f64)]) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("version", MANIFEST_VERSION.to_string());
    kv("command", "train".into());
    kv("features", a.features.display().to_string());
    if let Some(f) = a.format {
        kv(
            "format",
            match f {
                FeatureFormat::Csv => "csv",
                FeatureFormat::Binary => "binary",
            }
            .into(),
        );
    }
    if let Some(l) = &a.labels {
        kv("labels", l.display().to_string());
    }
    kv(
        "label-kind",
        match a.label_kind {
            LabelKind::None => "none",
            LabelKind::Class => "class",
            LabelKind::Tags => "tags",
        }
        .into(),
    );
    kv("method", method_name(a.method));
    kv("bits", a.bits.to_string());
    kv("anchors", a.anchors.to_string());
    kv("sweeps", a.sweeps.to_string());
    kv("c", a.c.to_string());
    kv("lambda-h", a.lambda_h.to_string());
    kv("seed", a.seed.to_string());
    kv(
        "coupling",
        a.coupling
            .to_possible_value()
            .expect("named variant")
            .get_name()
            .into(),
    );
    kv("out-dir", a.out_dir.display().to_string());
    kv(
        "codes-format",
        match a.codes_format {
            CodesFormat::Text => "text",
            CodesFormat::Packed => "packed",
        }
        .into(),
    );
    kv(
        "format.codes",
        match a.codes_format {
            CodesFormat::Text => "text-v1".into(),
            CodesFormat::Packed => String::from_utf8_lossy(dataio::CODES_MAGIC).into_owned(),
        },
    );
    kv(
        "format.model",
        String::from_utf8_lossy(dataio::MODEL_MAGIC).into_owned(),
    );
    for (name, secs) in timings {
        kv(&format!("timing.{name}"), format!("{secs:.6}"));
    }
    s
}

/// Trains on a labeled feature file and writes codes (in the original point
/// order), the projection model, thresholds and a manifest.
pub fn run_train(a: &TrainArgs) -> anyhow::Result<TrainOutputs> {
    let start = Instant::now();
    let lin = LinearizedSigmoid::fit(a.c)?;
    let data = load_training_set(a)?;
    let n = data.len();
    let t_load = start.elapsed().as_secs_f64();

    let cfg = TrainConfig {
        bits: a.bits,
        anchors: a.anchors,
        sweeps: a.sweeps,
        c: a.c,
        seed: a.seed,
    };
    cfg.validate(n)?;
    let t0 = Instant::now();
    let phi: SoftCodes = match a.method {
        Method::EmKsh | Method::EmLfh => {
            let (view, perm) = sample_similarity_columns(&data, a.anchors, a.seed)?;
            let phi = if a.method == Method::EmKsh {
                em_ksh_train(&view, &cfg, &lin)?
            } else {
                em_lfh_train(&view, &cfg, &lin, a.coupling.into())?
            };
            phi.scatter_rows(&perm)
        }
        Method::EmSplh => {
            ensure!(
                a.anchors == n,
                "em-splh solves on the full similarity matrix; set --anchors {n}"
            );
            log::warn!("em-splh: every bit solves the same system, emitting 1 effective bit");
            let cfg = TrainConfig { bits: 1, ..cfg };
            let (view, perm) = sample_similarity_columns(&data, n, a.seed)?;
            em_splh_train(&view, &cfg, &lin)?.scatter_rows(&perm)
        }
    };
    let t_train = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let (codes, thresholds) = round_codes(&phi);
    let model = HashModel::fit(data.features(), &phi, a.lambda_h)?;
    let t_project = t0.elapsed().as_secs_f64();

    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let out = TrainOutputs::in_dir(&a.out_dir, a.codes_format);
    let mut staged = Staged::new();
    write_codes(&staged.path(&out.codes), &codes, a.codes_format)?;
    write_model(&staged.path(&out.model), &model)?;
    let mut t = String::new();
    for v in &thresholds {
        let _ = writeln!(t, "{v}");
    }
    fs::write(staged.path(&out.thresholds), t)?;
    let timings = [
        ("load_s", t_load),
        ("train_s", t_train),
        ("project_s", t_project),
        ("total_s", start.elapsed().as_secs_f64()),
    ];
    fs::write(staged.path(&out.manifest), manifest_text(a, &timings))?;
    staged.commit()?;
    log::info!(
        "trained {} x {} codes in {:.3}s",
        codes.nrows(),
        codes.ncols(),
        t_train
    );
    Ok(out)
}

/// Encodes a feature file with a trained model.
pub fn run_encode(a: &EncodeArgs) -> anyhow::Result<()> {
    let model =
        read_model(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    if let Some(bits) = a.bits {
        ensure!(
            bits == model.bits(),
            "requested {bits} bits but the model produces {}",
            model.bits()
        );
    }
    let format = feature_format(&a.features, a.format);
    let (x, _) = read_feature_file(&a.features, format, a.label_kind)
        .with_context(|| format!("loading features from {}", a.features.display()))?;
    let codes = model.encode_rows(&x)?;
    let mut staged = Staged::new();
    write_codes(&staged.path(&a.codes_out), &codes, a.codes_format)?;
    staged.commit()
}

fn check_rows(codes: &BinaryCodes, labels: &Labels, what: &str) -> anyhow::Result<()> {
    ensure!(
        codes.nrows() == labels.len(),
        "{what}: {} codes but {} labels",
        codes.nrows(),
        labels.len()
    );
    Ok(())
}

/// Computes Hamming-ranking mAP, prints a `key=value` report and optionally
/// writes it as JSON.
pub fn run_eval(a: &EvalArgs) -> anyhow::Result<(EvalReport, RankingResult)> {
    let db = read_codes(&a.db_codes)?;
    let db_labels = read_labels(&a.db_labels, a.label_kind)?;
    check_rows(&db, &db_labels, "database")?;
    let (queries, query_labels, same) = match &a.query_codes {
        Some(q) => {
            let Some(ql) = &a.query_labels else {
                bail!("--query-codes needs --query-labels");
            };
            let codes = read_codes(q)?;
            let labels = read_labels(ql, a.label_kind)?;
            check_rows(&codes, &labels, "queries")?;
            (codes, labels, false)
        }
        None => (db.clone(), db_labels.clone(), true),
    };
    ensure!(
        queries.ncols() == db.ncols(),
        "query codes have {} bits, database codes {}",
        queries.ncols(),
        db.ncols()
    );
    let exclude_self = a.exclude_self.unwrap_or(same);
    if exclude_self {
        ensure!(
            queries.nrows() <= db.nrows(),
            "--exclude-self pairs query q with database item q, but there are more queries than items"
        );
    }
    let result = mean_average_precision(
        &queries,
        &db,
        |q, j| query_labels.similarity(q, &db_labels, j) > 0,
        exclude_self,
    )?;
    let report = EvalReport::new(&result, db.nrows(), db.ncols(), exclude_self);
    println!("{report}");
    if a.per_query {
        for (q, ap) in result.average_precisions.iter().enumerate() {
            match ap {
                Some(v) => println!("query.{q}.ap={v:.6}"),
                None => println!("query.{q}.ap=none"),
            }
        }
    }
    if let Some(path) = &a.report_out {
        let mut staged = Staged::new();
        fs::write(staged.path(path), report.to_json() + "\n")?;
        staged.commit()?;
    }
    Ok((report, result))
}

/// One timing measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub bits: usize,
    pub anchors: usize,
    pub seconds: f64,
}

/// Times EM-KSH over the size grid and reports the growth per step in `n`.
pub fn run_bench(a: &BenchArgs) -> anyhow::Result<Vec<BenchRow>> {
    ensure!(a.repeats >= 1, "--repeats must be >= 1");
    let lin = LinearizedSigmoid::fit(a.c)?;
    let mut rows = Vec::new();
    for &bits in &a.bits_grid {
        for &n in &a.n_grid {
            ensure!(
                a.classes > 0 && n % a.classes == 0,
                "n = {n} is not a multiple of --classes {}",
                a.classes
            );
            let data = gaussian_clusters(&ClusterSpec {
                classes: a.classes,
                per_class: n / a.classes,
                dim: a.dim,
                seed: a.seed,
                ..ClusterSpec::default()
            })?;
            let (view, _) = sample_similarity_columns(&data, a.anchors, a.seed)?;
            let cfg = TrainConfig {
                bits,
                anchors: a.anchors,
                sweeps: a.sweeps,
                c: a.c,
                seed: a.seed,
            };
            let mut best = f64::INFINITY;
            for _ in 0..a.repeats {
                let t0 = Instant::now();
                em_ksh_train(&view, &cfg, &lin)?;
                best = best.min(t0.elapsed().as_secs_f64());
            }
            rows.push(BenchRow {
                n,
                bits,
                anchors: a.anchors,
                seconds: best,
            });
        }
    }
    let mut table = String::from("n\tbits\tanchors\tseconds\n");
    for r in &rows {
        let _ = writeln!(
            table,
            "{}\t{}\t{}\t{:.6}",
            r.n, r.bits, r.anchors, r.seconds
        );
    }
    print!("{table}");
    for pair in rows
        .windows(2)
        .filter(|w| w[0].bits == w[1].bits && w[1].n > w[0].n)
    {
        let growth = pair[1].n as f64 / pair[0].n as f64;
        let limit = a.max_ratio * growth / 2.0;
        let ratio = pair[1].seconds / pair[0].seconds;
        println!(
            "trend bits={} n={}->{} ratio={ratio:.3} limit={limit:.3} pass={}",
            pair[0].bits,
            pair[0].n,
            pair[1].n,
            ratio <= limit
        );
    }
    if let Some(path) = &a.table_out {
        fs::write(path, table)?;
    }
    Ok(rows)
}

/// Prints the fitted line and its error for `c`.
pub fn run_linearize(a: &LinearizeArgs) -> anyhow::Result<()> {
    let lin = LinearizedSigmoid::fit(a.c).with_context(|| {
        format!("the linear system stays invertible only for 0 < c < {MAX_BOUND}")
    })?;
    println!("c={}", lin.bound());
    println!("c1={:.10}", lin.slope());
    println!("c2={:.10}", lin.intercept());
    println!("two_c1_c={:.10}", 2.0 * lin.slope() * lin.bound());
    println!("max_abs_error={:.3e}", lin.max_abs_error(a.samples.max(2)));
    Ok(())
}

/// Writes a Gaussian-cluster dataset.
pub fn run_synth(a: &SynthArgs) -> anyhow::Result<()> {
    let data = gaussian_clusters(&ClusterSpec {
        classes: a.classes,
        per_class: a.per_class,
        dim: a.dim,
        separation: a.separation,
        noise: a.noise,
        seed: a.seed,
    })?;
    let labels = data.labels().expect("clusters are labeled");
    let mut staged = Staged::new();
    match feature_format(&a.out, a.format) {
        FeatureFormat::Csv => {
            write_matrix_csv(&staged.path(&a.out), data.features(), Some(labels))?
        }
        FeatureFormat::Binary => {
            if a.labels_out.is_none() {
                log::warn!("binary feature files hold no labels; pass --labels-out to keep them");
            }
            write_matrix_binary(&staged.path(&a.out), data.features())?
        }
    }
    if let Some(path) = &a.labels_out {
        write_labels(&staged.path(path), labels)?;
    }
    staged.commit()
}
