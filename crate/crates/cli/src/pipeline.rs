//! Attack orchestration: seeded sampling of attack/probe images from a
//! dataset, the end-to-end solve, and post-attack evaluation.

use std::time::Instant;

use anyhow::{bail, Context, Result};
use fsn_core::{
    predict_from, solve, AdmmConfig, AttackImage, AttackResult, AttackSpec, DenseNetwork,
    FeatureBatch, ParamSelector,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::specdoc::{
    downsample_history, image_docs, norm_name, AttackResultDoc, AttackSpecDoc, RunConfigDoc,
};

/// Which labels anchors must keep: the unmodified model's predictions
/// (literal "unchanged classification") or the dataset's ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorMode {
    Predicted,
    GroundTruth,
}

#[derive(Debug, Clone)]
pub struct AttackOpts {
    pub s: usize,
    pub r: usize,
    pub selector: ParamSelector,
    pub admm: AdmmConfig,
    pub seed: u64,
    pub default_c: f64,
    pub target_multiplier: f64,
    pub anchor_mode: AnchorMode,
    pub probe_size: usize,
}

impl AttackOpts {
    pub fn new(s: usize, r: usize, selector: ParamSelector, seed: u64) -> Self {
        Self {
            s,
            r,
            selector,
            admm: AdmmConfig::default(),
            seed,
            default_c: 1.0,
            target_multiplier: 5.0,
            anchor_mode: AnchorMode::Predicted,
            probe_size: 1000,
        }
    }
}

/// A resolved attack instance plus the dataset rows it touches.
#[derive(Debug, Clone)]
pub struct SampledSpec {
    pub spec: AttackSpec,
    /// Dataset rows of the R attack images, targets first.
    pub indices: Vec<usize>,
    /// Held-out probe rows, disjoint from the attack images.
    pub probe: Vec<usize>,
}

fn entry_layer(selector: ParamSelector, images_are_features: bool) -> usize {
    if images_are_features {
        selector.layer_index
    } else {
        0
    }
}

/// Seeded draw of R attack rows and a disjoint probe set. Targets get a
/// uniformly random label differing from their original one; anchors keep
/// their original label. "Original" follows the anchor mode.
pub fn sample_attack_spec(
    net: &DenseNetwork,
    data: &FeatureBatch,
    images_are_features: bool,
    opts: &AttackOpts,
) -> Result<SampledSpec> {
    if opts.s == 0 {
        bail!("attack needs at least one target (s >= 1)");
    }
    if opts.s > opts.r {
        bail!("s = {} exceeds r = {}", opts.s, opts.r);
    }
    if opts.r > data.len() {
        bail!("r = {} exceeds dataset size {}", opts.r, data.len());
    }
    let classes = net.num_classes();
    if classes < 2 {
        bail!("attack needs at least two classes");
    }
    let entry = entry_layer(opts.selector, images_are_features);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let indices: Vec<usize> = order[..opts.r].to_vec();
    let probe: Vec<usize> = order[opts.r..].iter().take(opts.probe_size).copied().collect();

    let original_label = |row: usize| -> Result<usize> {
        match opts.anchor_mode {
            AnchorMode::Predicted => {
                predict_from(net, entry, data.features.row(row)).context("prediction failed")
            }
            AnchorMode::GroundTruth => Ok(data.labels[row]),
        }
    };

    let mut targets = Vec::with_capacity(opts.s);
    for &row in &indices[..opts.s] {
        let orig = original_label(row)?;
        let target = loop {
            let t = rng.gen_range(0..classes);
            if t != orig {
                break t;
            }
        };
        targets.push(AttackImage {
            data: data.features.row(row).to_vec(),
            label: target,
        });
    }
    let mut anchors = Vec::with_capacity(opts.r - opts.s);
    for &row in &indices[opts.s..] {
        anchors.push(AttackImage {
            data: data.features.row(row).to_vec(),
            label: original_label(row)?,
        });
    }

    let weights =
        AttackSpec::uniform_weights(opts.s, opts.r, opts.default_c, opts.target_multiplier);
    Ok(SampledSpec {
        spec: AttackSpec {
            targets,
            anchors,
            weights,
            selector: opts.selector,
            images_are_features,
        },
        indices,
        probe,
    })
}

/// Resolves an explicit on-disk spec and draws a seeded probe set disjoint
/// from the rows the spec names.
pub fn spec_from_doc(
    doc: &AttackSpecDoc,
    data: &FeatureBatch,
    images_are_features: bool,
    seed: u64,
    probe_size: usize,
) -> Result<SampledSpec> {
    let spec = doc.resolve(data, images_are_features)?;
    let mut indices: Vec<usize> = doc.targets.iter().map(|t| t.index).collect();
    indices.extend(doc.anchors.iter().map(|a| a.index));

    let used: std::collections::HashSet<usize> = indices.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rest: Vec<usize> = (0..data.len()).filter(|i| !used.contains(i)).collect();
    rest.shuffle(&mut rng);
    rest.truncate(probe_size);

    Ok(SampledSpec {
        spec,
        indices,
        probe: rest,
    })
}

/// Accuracy of the network over the given dataset rows, measured against
/// ground-truth labels.
pub fn rows_accuracy(
    net: &DenseNetwork,
    data: &FeatureBatch,
    rows: &[usize],
    entry: usize,
) -> Result<f64> {
    if rows.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for &row in rows {
        if predict_from(net, entry, data.features.row(row))? == data.labels[row] {
            correct += 1;
        }
    }
    Ok(correct as f64 / rows.len() as f64)
}

/// Everything a finished attack run produces.
#[derive(Debug, Clone)]
pub struct AttackRun {
    pub result: AttackResult,
    pub doc: AttackResultDoc,
}

/// Solves the instance and assembles the on-disk report, including probe
/// accuracies before and after the modification.
pub fn run_attack(
    net: &DenseNetwork,
    data: &FeatureBatch,
    sampled: &SampledSpec,
    opts: &AttackOpts,
    model_sha256: Option<String>,
    seed_echo: Option<u64>,
) -> Result<AttackRun> {
    let start = Instant::now();
    let result = solve(&sampled.spec, net, &opts.admm)?;

    let entry = entry_layer(sampled.spec.selector, sampled.spec.images_are_features);
    let (probe_accuracy, baseline_probe_accuracy) = if sampled.probe.is_empty() {
        (None, None)
    } else {
        let modified = net.with_delta(sampled.spec.selector, &result.delta)?;
        (
            Some(rows_accuracy(&modified, data, &sampled.probe, entry)?),
            Some(rows_accuracy(net, data, &sampled.probe, entry)?),
        )
    };

    let doc = AttackResultDoc {
        config: RunConfigDoc {
            norm: norm_name(opts.admm.norm).to_string(),
            rho: opts.admm.rho,
            alpha: opts.admm.alpha,
            max_iters: opts.admm.max_iters,
            primal_tol: opts.admm.primal_tol,
            value_tol: opts.admm.value_tol,
            report_threshold: opts.admm.report_threshold,
            selector: sampled.spec.selector.into(),
            s: sampled.spec.num_targets(),
            r: sampled.spec.num_images(),
            default_c: opts.default_c,
            target_multiplier: opts.target_multiplier,
            seed: seed_echo,
            model_sha256,
        },
        images: image_docs(&result, Some(&sampled.indices)),
        success_rate: result.success_rate(),
        kept_rate: result.kept_rate(),
        l0_count: result.l0_count,
        l2_norm: result.l2_norm,
        iterations: result.iterations,
        converged: result.converged,
        g_final: result.g_final,
        probe_accuracy,
        baseline_probe_accuracy,
        residual_history: downsample_history(&result.residual_history),
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok(AttackRun { result, doc })
}

/// Full post-attack evaluation of a delta file against a dataset.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub baseline_accuracy: f64,
    pub accuracy: f64,
    /// Predictions that changed relative to the unmodified model.
    pub flips: usize,
    pub per_class: Vec<ClassAccuracy>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ClassAccuracy {
    pub label: usize,
    pub n: usize,
    pub baseline_correct: usize,
    pub correct: usize,
}

/// Applies `delta` to the selected layer and compares predictions against
/// the unmodified network over the whole dataset.
pub fn evaluate_delta(
    net: &DenseNetwork,
    selector: ParamSelector,
    delta: &[f64],
    data: &FeatureBatch,
    images_are_features: bool,
) -> Result<EvalReport> {
    let entry = entry_layer(selector, images_are_features);
    let modified = net.with_delta(selector, delta)?;
    data.validate_labels(net.num_classes())?;

    let mut per_class: Vec<ClassAccuracy> = (0..net.num_classes())
        .map(|label| ClassAccuracy {
            label,
            n: 0,
            baseline_correct: 0,
            correct: 0,
        })
        .collect();
    let mut flips = 0usize;
    let mut baseline_ok = 0usize;
    let mut ok = 0usize;
    for row in 0..data.len() {
        let x = data.features.row(row);
        let label = data.labels[row];
        let before = predict_from(net, entry, x)?;
        let after = predict_from(&modified, entry, x)?;
        per_class[label].n += 1;
        if before == label {
            baseline_ok += 1;
            per_class[label].baseline_correct += 1;
        }
        if after == label {
            ok += 1;
            per_class[label].correct += 1;
        }
        if before != after {
            flips += 1;
        }
    }
    Ok(EvalReport {
        n: data.len(),
        baseline_accuracy: baseline_ok as f64 / data.len() as f64,
        accuracy: ok as f64 / data.len() as f64,
        flips,
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use fsn_core::{Activation, DenseLayer, FeatureSource, Matrix, ParamKinds};

    fn identity_net(dim: usize) -> DenseNetwork {
        let mut w = vec![0.0; dim * dim];
        for i in 0..dim {
            w[i * dim + i] = 1.0;
        }
        DenseNetwork::new(vec![DenseLayer::new(
            dim,
            dim,
            w,
            vec![0.0; dim],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap()
    }

    fn onehot_batch(n: usize, dim: usize) -> FeatureBatch {
        let mut features = Matrix::zeros(n, dim);
        let mut labels = Vec::new();
        for i in 0..n {
            features.row_mut(i)[i % dim] = 1.0;
            labels.push(i % dim);
        }
        FeatureBatch::new(features, labels, FeatureSource::Imported).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_and_disjoint() {
        let net = identity_net(4);
        let data = onehot_batch(40, 4);
        let opts = AttackOpts::new(2, 10, ParamSelector::new(0, ParamKinds::Both), 99);
        let a = sample_attack_spec(&net, &data, false, &opts).unwrap();
        let b = sample_attack_spec(&net, &data, false, &opts).unwrap();
        assert_eq!(a.indices, b.indices);
        assert_eq!(a.probe, b.probe);
        assert_eq!(a.spec, b.spec);
        for p in &a.probe {
            assert!(!a.indices.contains(p));
        }
        // Targets never ask for their current label.
        for (img, &row) in a.spec.targets.iter().zip(&a.indices) {
            let orig = fsn_core::predict(&net, data.features.row(row)).unwrap();
            assert_ne!(img.label, orig);
        }
    }

    #[test]
    fn sampling_rejects_degenerate_requests() {
        let net = identity_net(4);
        let data = onehot_batch(10, 4);
        let sel = ParamSelector::new(0, ParamKinds::Both);
        assert!(sample_attack_spec(&net, &data, false, &AttackOpts::new(0, 5, sel, 1)).is_err());
        assert!(sample_attack_spec(&net, &data, false, &AttackOpts::new(6, 5, sel, 1)).is_err());
        assert!(sample_attack_spec(&net, &data, false, &AttackOpts::new(1, 50, sel, 1)).is_err());
    }

    #[test]
    fn zero_delta_eval_matches_baseline_exactly() {
        let net = identity_net(3);
        let data = onehot_batch(12, 3);
        let sel = ParamSelector::new(0, ParamKinds::Both);
        let delta = vec![0.0; sel.flat_len(&net)];
        let report = evaluate_delta(&net, sel, &delta, &data, false).unwrap();
        assert_eq!(report.accuracy, report.baseline_accuracy);
        assert_eq!(report.flips, 0);
        assert_eq!(report.baseline_accuracy, 1.0);
    }

    #[test]
    fn large_delta_wrecks_accuracy() {
        let net = identity_net(3);
        let data = onehot_batch(12, 3);
        let sel = ParamSelector::new(0, ParamKinds::BiasOnly);
        // A huge bias on class 0 swallows every prediction.
        let report = evaluate_delta(&net, sel, &[10.0, 0.0, 0.0], &data, false).unwrap();
        assert!(report.accuracy < 0.5);
        assert!(report.flips > 0);
    }
}
