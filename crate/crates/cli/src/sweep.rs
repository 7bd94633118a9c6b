//! Experiment grids: cross products of (s, r, norm, selector, trial) cells,
//! each an independent seeded attack run, emitted as one CSV row per cell.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use fsn_core::{AdmmConfig, DenseNetwork, FeatureBatch, NormKind, ParamSelector};
use rayon::prelude::*;

use crate::pipeline::{run_attack, sample_attack_spec, AnchorMode, AttackOpts};
use crate::specdoc::norm_name;

/// How r pairs with s across the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RMode {
    /// Cross product with these values; every s must be <= every r.
    Values(Vec<usize>),
    /// r = s in every cell.
    EqualS,
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub s_values: Vec<usize>,
    pub r_mode: RMode,
    pub norms: Vec<NormKind>,
    pub selectors: Vec<ParamSelector>,
    pub trials: usize,
    pub seed: u64,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.s_values.is_empty() || self.norms.is_empty() || self.selectors.is_empty() {
            bail!("sweep plan has an empty axis");
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.s_values.iter().any(|&s| s == 0) {
            bail!("s values must be at least 1");
        }
        if let RMode::Values(r_values) = &self.r_mode {
            if r_values.is_empty() {
                bail!("sweep plan has an empty axis");
            }
            let max_s = *self.s_values.iter().max().expect("nonempty");
            if let Some(&bad_r) = r_values.iter().find(|&&r| r < max_s) {
                bail!("plan pairs s = {max_s} with r = {bad_r}; every s must be <= every r");
            }
        }
        Ok(())
    }

    /// Cells in plan order: s outermost, then r, norm, selector, trial.
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut cells = Vec::new();
        for &s in &self.s_values {
            let r_values: Vec<usize> = match &self.r_mode {
                RMode::Values(values) => values.clone(),
                RMode::EqualS => vec![s],
            };
            for r in r_values {
                for &norm in &self.norms {
                    for &selector in &self.selectors {
                        for trial in 0..self.trials {
                            cells.push(SweepCell {
                                s,
                                r,
                                norm,
                                selector,
                                trial,
                            });
                        }
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepCell {
    pub s: usize,
    pub r: usize,
    pub norm: NormKind,
    pub selector: ParamSelector,
    pub trial: usize,
}

/// Per-cell seed: a stable hash of the plan seed and the cell coordinates,
/// so results do not depend on scheduling or on other cells in the plan.
pub fn cell_seed(plan_seed: u64, cell: &SweepCell) -> u64 {
    let tag = format!(
        "{plan_seed}|s={}|r={}|norm={}|layer={}|kinds={:?}|trial={}",
        cell.s,
        cell.r,
        norm_name(cell.norm),
        cell.selector.layer_index,
        cell.selector.kinds,
        cell.trial
    );
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Settings shared by every cell. The penalty weight follows each cell's
/// norm unless overridden.
#[derive(Debug, Clone)]
pub struct SweepBase {
    pub admm: AdmmConfig,
    pub rho_override: Option<f64>,
    pub default_c: f64,
    pub target_multiplier: f64,
    pub anchor_mode: AnchorMode,
    pub probe_size: usize,
}

impl Default for SweepBase {
    fn default() -> Self {
        Self {
            admm: AdmmConfig::default(),
            rho_override: None,
            default_c: 1.0,
            target_multiplier: 5.0,
            anchor_mode: AnchorMode::Predicted,
            probe_size: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellMetrics {
    pub success_count: usize,
    pub success_rate: f64,
    pub kept_rate: f64,
    pub l0: usize,
    pub l2: f64,
    pub post_accuracy: Option<f64>,
    pub iterations: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub cell: SweepCell,
    pub outcome: std::result::Result<CellMetrics, String>,
}

fn run_cell(
    net: &DenseNetwork,
    data: &FeatureBatch,
    images_are_features: bool,
    base: &SweepBase,
    plan_seed: u64,
    cell: &SweepCell,
) -> std::result::Result<CellMetrics, String> {
    let opts = AttackOpts {
        s: cell.s,
        r: cell.r,
        selector: cell.selector,
        admm: AdmmConfig {
            norm: cell.norm,
            rho: base
                .rho_override
                .unwrap_or_else(|| fsn_core::default_rho(cell.norm)),
            ..base.admm.clone()
        },
        seed: cell_seed(plan_seed, cell),
        default_c: base.default_c,
        target_multiplier: base.target_multiplier,
        anchor_mode: base.anchor_mode,
        probe_size: base.probe_size,
    };
    let sampled =
        sample_attack_spec(net, data, images_are_features, &opts).map_err(|e| e.to_string())?;
    let run = run_attack(net, data, &sampled, &opts, None, Some(opts.seed))
        .map_err(|e| e.to_string())?;
    let success_count = run
        .result
        .outcomes
        .iter()
        .filter(|o| o.is_target && o.success)
        .count();
    Ok(CellMetrics {
        success_count,
        success_rate: run.result.success_rate(),
        kept_rate: run.result.kept_rate(),
        l0: run.result.l0_count,
        l2: run.result.l2_norm,
        post_accuracy: run.doc.probe_accuracy,
        iterations: run.result.iterations,
        wall_time: run.doc.wall_time,
    })
}

/// Worker count: FSN_THREADS when set, otherwise rayon's default.
fn thread_cap() -> Option<usize> {
    std::env::var("FSN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs every cell of the plan; rows come back in plan order regardless of
/// how cells were scheduled. Per-cell failures land in the row's outcome,
/// they never abort the sweep.
pub fn run_sweep(
    net: &DenseNetwork,
    data: &FeatureBatch,
    images_are_features: bool,
    plan: &SweepPlan,
    base: &SweepBase,
) -> Result<Vec<SweepRow>> {
    plan.validate()?;
    let cells = plan.cells();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building worker pool")?;

    let rows: Vec<SweepRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| SweepRow {
                cell: *cell,
                outcome: run_cell(net, data, images_are_features, base, plan.seed, cell),
            })
            .collect()
    });
    Ok(rows)
}

pub const CSV_HEADER: [&str; 15] = [
    "s",
    "r",
    "norm",
    "layer",
    "kinds",
    "trial",
    "success_count",
    "success_rate",
    "kept_rate",
    "l0",
    "l2",
    "post_accuracy",
    "iterations",
    "wall_time",
    "status",
];

pub fn write_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        let cell = &row.cell;
        let kinds = match cell.selector.kinds {
            fsn_core::ParamKinds::WeightsOnly => "weights",
            fsn_core::ParamKinds::BiasOnly => "bias",
            fsn_core::ParamKinds::Both => "both",
        };
        let mut record = vec![
            cell.s.to_string(),
            cell.r.to_string(),
            norm_name(cell.norm).to_string(),
            cell.selector.layer_index.to_string(),
            kinds.to_string(),
            cell.trial.to_string(),
        ];
        match &row.outcome {
            Ok(m) => {
                record.extend([
                    m.success_count.to_string(),
                    m.success_rate.to_string(),
                    m.kept_rate.to_string(),
                    m.l0.to_string(),
                    m.l2.to_string(),
                    m.post_accuracy.map(|a| a.to_string()).unwrap_or_default(),
                    m.iterations.to_string(),
                    m.wall_time.to_string(),
                    "ok".to_string(),
                ]);
            }
            Err(msg) => {
                record.extend(std::iter::repeat(String::new()).take(8));
                record.push(format!("error: {msg}"));
            }
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    write_csv(file, rows)
}
