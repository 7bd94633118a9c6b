//! Subcommand argument structures and their implementations. Each `cmd_*`
//! function is callable directly, so tests drive the same code paths as
//! the binary.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use fsn_core::{
    advance_features, train_with_stats, AdmmConfig, DenseNetwork, FeatureBatch, FeatureSource,
    Matrix, NormKind, ParamKinds, ParamSelector, TrainConfig,
};
use sha2::{Digest, Sha256};

use crate::dataset::{load_dataset, DataRole};
use crate::datagen::{self, SynthConfig};
use crate::formats;
use crate::pipeline::{
    evaluate_delta, run_attack, sample_attack_spec, spec_from_doc, AnchorMode, AttackOpts,
    SampledSpec,
};
use crate::specdoc::AttackSpecDoc;
use crate::sweep::{self, RMode, SweepBase, SweepPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    L0,
    L2,
}

impl From<NormArg> for NormKind {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::L0 => NormKind::L0,
            NormArg::L2 => NormKind::L2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindsArg {
    Weights,
    Bias,
    Both,
}

impl From<KindsArg> for ParamKinds {
    fn from(k: KindsArg) -> Self {
        match k {
            KindsArg::Weights => ParamKinds::WeightsOnly,
            KindsArg::Bias => ParamKinds::BiasOnly,
            KindsArg::Both => ParamKinds::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnchorLabelsArg {
    /// Anchors keep the unmodified model's predictions.
    Predicted,
    /// Anchors keep their dataset labels.
    Truth,
}

impl From<AnchorLabelsArg> for AnchorMode {
    fn from(a: AnchorLabelsArg) -> Self {
        match a {
            AnchorLabelsArg::Predicted => AnchorMode::Predicted,
            AnchorLabelsArg::Truth => AnchorMode::GroundTruth,
        }
    }
}

/// `first`, `last`, or a 0-based layer index.
pub fn resolve_layer(arg: &str, net: &DenseNetwork) -> Result<usize> {
    match arg {
        "first" => Ok(0),
        "last" => Ok(net.num_layers() - 1),
        _ => {
            let idx: usize = arg
                .parse()
                .with_context(|| format!("bad layer {arg:?}: expected first, last, or an index"))?;
            if idx >= net.num_layers() {
                bail!("layer {idx} out of range: model has {} layers", net.num_layers());
            }
            Ok(idx)
        }
    }
}

pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .with_context(|| format!("bad list entry {part:?}"))
        })
        .collect()
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Shared ADMM hyperparameter flags.
#[derive(Debug, Clone, Args)]
pub struct AdmmFlags {
    /// Penalty weight of the consensus term; defaults to 1.0 for l0 and
    /// 10.0 for l2.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Bregman scale of the linearized delta-step.
    #[arg(long, default_value_t = 1e-3)]
    pub alpha: f64,
    /// Iteration cap.
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub primal_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub value_tol: f64,
    /// Reported-delta entries at or below this magnitude count as zero.
    #[arg(long, default_value_t = 1e-8)]
    pub threshold: f64,
}

impl AdmmFlags {
    pub fn config(&self, norm: NormKind) -> AdmmConfig {
        AdmmConfig {
            norm,
            rho: self.rho.unwrap_or_else(|| fsn_core::default_rho(norm)),
            alpha: self.alpha,
            max_iters: self.iters,
            primal_tol: self.primal_tol,
            value_tol: self.value_tol,
            report_threshold: self.threshold,
        }
    }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Training data: IDX directory, .csv, or .fsnf.
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out data for the final accuracy line; defaults to the test
    /// split when `--data` is an IDX directory.
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    /// Comma-separated layer sizes from input to classes.
    #[arg(long, default_value = "784,256,128,10")]
    pub dims: String,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output model file (FSNM).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let train_data = load_dataset(&args.data, DataRole::Train)?;
    let cfg = TrainConfig {
        layer_dims: parse_usize_list(&args.dims)?,
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.lr,
        seed: args.seed,
    };
    let (net, losses) = train_with_stats(&train_data.batch, &cfg)?;
    if let Some(last) = losses.last() {
        eprintln!("final epoch loss {last:.6}");
    }
    let train_acc = fsn_core::evaluate_accuracy(&net, &train_data.batch)?;

    let test_acc = match &args.test_data {
        Some(path) => Some(fsn_core::evaluate_accuracy(
            &net,
            &load_dataset(path, DataRole::Test)?.batch,
        )?),
        None if args.data.is_dir() => match load_dataset(&args.data, DataRole::Test) {
            Ok(test) => Some(fsn_core::evaluate_accuracy(&net, &test.batch)?),
            Err(_) => None,
        },
        None => None,
    };

    formats::write_model(&args.out, &net)?;
    match test_acc {
        Some(acc) => println!(
            "trained {} -> {}: train acc {train_acc:.4}, test acc {acc:.4}",
            args.dims,
            args.out.display()
        ),
        None => println!(
            "trained {} -> {}: train acc {train_acc:.4}",
            args.dims,
            args.out.display()
        ),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Args)]
pub struct AttackArgs {
    /// Victim model (FSNM).
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset attacked images are drawn from (test split for IDX dirs).
    #[arg(long)]
    pub data: PathBuf,
    /// Explicit attack spec JSON; overrides sampling and the selector flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of target images to misclassify.
    #[arg(long, default_value_t = 1)]
    pub s: usize,
    /// Total images (targets plus anchors).
    #[arg(long, default_value_t = 100)]
    pub r: usize,
    #[arg(long, value_enum, default_value_t = NormArg::L0)]
    pub norm: NormArg,
    /// Layer to modify: `first`, `last`, or an index.
    #[arg(long, default_value = "last")]
    pub layer: String,
    #[arg(long, value_enum, default_value_t = KindsArg::Both)]
    pub kinds: KindsArg,
    #[command(flatten)]
    pub admm: AdmmFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Weight on every image's hinge term.
    #[arg(long, default_value_t = 1.0)]
    pub c_default: f64,
    /// Extra multiplier on target images' weights.
    #[arg(long, default_value_t = 5.0)]
    pub c_target_multiplier: f64,
    #[arg(long, value_enum, default_value_t = AnchorLabelsArg::Predicted)]
    pub anchor_labels: AnchorLabelsArg,
    /// Held-out images for the quick accuracy line.
    #[arg(long, default_value_t = 1000)]
    pub probe_size: usize,
    /// Result JSON path.
    #[arg(long)]
    pub out: PathBuf,
    /// Delta file path (FSND); defaults to `--out` with extension .fsnd.
    #[arg(long)]
    pub delta_out: Option<PathBuf>,
}

pub fn cmd_attack(args: &AttackArgs) -> Result<()> {
    let model_bytes = std::fs::read(&args.model)
        .with_context(|| format!("reading model {}", args.model.display()))?;
    let net = formats::model_from_bytes(&model_bytes)?;
    let data = load_dataset(&args.data, DataRole::Test)?;

    let (sampled, opts) = prepare_attack(args, &net, &data.batch, data.is_features)?;
    let run = run_attack(
        &net,
        &data.batch,
        &sampled,
        &opts,
        Some(sha256_hex(&model_bytes)),
        Some(args.seed),
    )?;

    let json = serde_json::to_string_pretty(&run.doc)?;
    std::fs::write(&args.out, &json)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let delta_path = args
        .delta_out
        .clone()
        .unwrap_or_else(|| args.out.with_extension("fsnd"));
    formats::write_delta(&delta_path, &run.result.delta)?;

    let probe = run
        .doc
        .probe_accuracy
        .map(|a| format!("{a:.4}"))
        .unwrap_or_else(|| "n/a".into());
    let baseline = run
        .doc
        .baseline_probe_accuracy
        .map(|a| format!("{a:.4}"))
        .unwrap_or_else(|| "n/a".into());
    println!(
        "success {}/{} kept_rate {:.4} l0 {} l2 {:.4} probe_acc {} (baseline {}) iters {}",
        run.result
            .outcomes
            .iter()
            .filter(|o| o.is_target && o.success)
            .count(),
        sampled.spec.num_targets(),
        run.result.kept_rate(),
        run.result.l0_count,
        run.result.l2_norm,
        probe,
        baseline,
        run.result.iterations,
    );
    Ok(())
}

fn prepare_attack(
    args: &AttackArgs,
    net: &DenseNetwork,
    batch: &FeatureBatch,
    is_features: bool,
) -> Result<(SampledSpec, AttackOpts)> {
    match &args.spec {
        Some(spec_path) => {
            let text = std::fs::read_to_string(spec_path)
                .with_context(|| format!("reading spec {}", spec_path.display()))?;
            let doc: AttackSpecDoc = serde_json::from_str(&text)
                .with_context(|| format!("parsing spec {}", spec_path.display()))?;
            let sampled = spec_from_doc(&doc, batch, is_features, args.seed, args.probe_size)?;
            let mut opts = AttackOpts::new(
                sampled.spec.num_targets(),
                sampled.spec.num_images(),
                sampled.spec.selector,
                args.seed,
            );
            opts.admm = args.admm.config(args.norm.into());
            opts.default_c = doc.weights.default_c;
            opts.target_multiplier = doc.weights.target_multiplier;
            opts.anchor_mode = args.anchor_labels.into();
            opts.probe_size = args.probe_size;
            Ok((sampled, opts))
        }
        None => {
            let selector =
                ParamSelector::new(resolve_layer(&args.layer, net)?, args.kinds.into());
            let opts = AttackOpts {
                s: args.s,
                r: args.r,
                selector,
                admm: args.admm.config(args.norm.into()),
                seed: args.seed,
                default_c: args.c_default,
                target_multiplier: args.c_target_multiplier,
                anchor_mode: args.anchor_labels.into(),
                probe_size: args.probe_size,
            };
            let sampled = sample_attack_spec(net, batch, is_features, &opts)?;
            Ok((sampled, opts))
        }
    }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Delta file (FSND) to fold into the selected layer.
    #[arg(long)]
    pub delta: PathBuf,
    #[arg(long, default_value = "last")]
    pub layer: String,
    #[arg(long, value_enum, default_value_t = KindsArg::Both)]
    pub kinds: KindsArg,
    #[arg(long)]
    pub data: PathBuf,
    /// Metrics JSON path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let net = formats::read_model(&args.model)?;
    let delta = formats::read_delta(&args.delta)?;
    let selector = ParamSelector::new(resolve_layer(&args.layer, &net)?, args.kinds.into());
    let data = load_dataset(&args.data, DataRole::Test)?;
    let report = evaluate_delta(&net, selector, &delta, &data.batch, data.is_features)?;
    let json = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(path) => std::fs::write(path, &json)
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{json}"),
    }
    eprintln!(
        "accuracy {:.4} (baseline {:.4}), {} flips over {} samples",
        report.accuracy, report.baseline_accuracy, report.flips, report.n
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated target counts.
    #[arg(long, default_value = "1")]
    pub s: String,
    /// Comma-separated totals, or the literal `s` to pair r with s.
    #[arg(long, default_value = "100")]
    pub r: String,
    /// Comma-separated norms out of {l0, l2}.
    #[arg(long, default_value = "l0")]
    pub norms: String,
    /// Comma-separated layers (`first`, `last`, or indices).
    #[arg(long, default_value = "last")]
    pub layers: String,
    /// Comma-separated parameter kinds out of {weights, bias, both}.
    #[arg(long, default_value = "both")]
    pub kinds: String,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[command(flatten)]
    pub admm: AdmmFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub c_default: f64,
    #[arg(long, default_value_t = 5.0)]
    pub c_target_multiplier: f64,
    #[arg(long, value_enum, default_value_t = AnchorLabelsArg::Predicted)]
    pub anchor_labels: AnchorLabelsArg,
    #[arg(long, default_value_t = 1000)]
    pub probe_size: usize,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let net = formats::read_model(&args.model)?;
    let data = load_dataset(&args.data, DataRole::Test)?;

    let mut norms = Vec::new();
    for part in args.norms.split(',') {
        norms.push(match part.trim() {
            "l0" => NormKind::L0,
            "l2" => NormKind::L2,
            other => bail!("bad norm {other:?}: expected l0 or l2"),
        });
    }
    let mut selectors = Vec::new();
    for layer in args.layers.split(',') {
        let layer_index = resolve_layer(layer.trim(), &net)?;
        for kind in args.kinds.split(',') {
            let kinds = match kind.trim() {
                "weights" => ParamKinds::WeightsOnly,
                "bias" => ParamKinds::BiasOnly,
                "both" => ParamKinds::Both,
                other => bail!("bad kinds {other:?}: expected weights, bias, or both"),
            };
            selectors.push(ParamSelector::new(layer_index, kinds));
        }
    }
    let r_mode = if args.r.trim() == "s" {
        RMode::EqualS
    } else {
        RMode::Values(parse_usize_list(&args.r)?)
    };
    let plan = SweepPlan {
        s_values: parse_usize_list(&args.s)?,
        r_mode,
        norms,
        selectors,
        trials: args.trials,
        seed: args.seed,
    };
    let base = SweepBase {
        admm: args.admm.config(NormKind::L0),
        rho_override: args.admm.rho,
        default_c: args.c_default,
        target_multiplier: args.c_target_multiplier,
        anchor_mode: args.anchor_labels.into(),
        probe_size: args.probe_size,
    };
    let rows = sweep::run_sweep(&net, &data.batch, data.is_features, &plan, &base)?;
    sweep::write_csv_file(&args.out, &rows)?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// features-export
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Args)]
pub struct FeaturesExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Raw dataset to push through the frozen prefix.
    #[arg(long)]
    pub data: PathBuf,
    /// Layer whose input the exported rows should feed.
    #[arg(long, default_value = "last")]
    pub layer: String,
    /// Output feature batch (FSNF).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_features_export(args: &FeaturesExportArgs) -> Result<()> {
    let net = formats::read_model(&args.model)?;
    let data = load_dataset(&args.data, DataRole::Test)?;
    if data.is_features {
        bail!("dataset already holds features; export needs raw inputs");
    }
    let layer = resolve_layer(&args.layer, &net)?;
    let batch = &data.batch;
    let d = net.layer(layer).in_dim();
    let mut features = Matrix::zeros(batch.len(), d);
    for i in 0..batch.len() {
        let phi = advance_features(&net, 0, layer, batch.features.row(i))?;
        features.row_mut(i).copy_from_slice(&phi);
    }
    let out = FeatureBatch::new(features, batch.labels.clone(), FeatureSource::ComputedByPrefix)?;
    formats::write_features(&args.out, &out)?;
    println!(
        "exported {} rows of dim {} to {}",
        out.len(),
        d,
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthFormat {
    Idx,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Directory the split files are written into.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 6000)]
    pub train: usize,
    #[arg(long, default_value_t = 2000)]
    pub test: usize,
    #[arg(long, default_value_t = 784)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.22)]
    pub noise: f64,
    /// Shared stroke dictionary size.
    #[arg(long, default_value_t = 20)]
    pub strokes: usize,
    /// Strokes combined into each class.
    #[arg(long, default_value_t = 3)]
    pub per_class: usize,
    /// Fraction of samples blended toward another class.
    #[arg(long, default_value_t = 0.08)]
    pub ambiguity: f64,
    /// Writing-style modes per class.
    #[arg(long, default_value_t = 2)]
    pub modes: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SynthFormat::Idx)]
    pub format: SynthFormat,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        dim: args.dim,
        classes: args.classes,
        train_n: args.train,
        test_n: args.test,
        seed: args.seed,
        noise: args.noise,
        dictionary_strokes: args.strokes,
        strokes_per_class: args.per_class,
        ambiguity: args.ambiguity,
        modes_per_class: args.modes,
    };
    let (train, test) = datagen::generate(&cfg);
    std::fs::create_dir_all(&args.out_dir)?;
    match args.format {
        SynthFormat::Idx => {
            formats::write_idx(
                &args.out_dir.join("train-images-idx3-ubyte"),
                &args.out_dir.join("train-labels-idx1-ubyte"),
                &train,
            )?;
            formats::write_idx(
                &args.out_dir.join("t10k-images-idx3-ubyte"),
                &args.out_dir.join("t10k-labels-idx1-ubyte"),
                &test,
            )?;
        }
        SynthFormat::Csv => {
            formats::write_csv_dataset(&args.out_dir.join("train.csv"), &train)?;
            formats::write_csv_dataset(&args.out_dir.join("test.csv"), &test)?;
        }
    }
    println!(
        "wrote {} train / {} test samples to {}",
        train.len(),
        test.len(),
        args.out_dir.display()
    );
    Ok(())
}

/// Hex digest helper shared by tests.
pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}
