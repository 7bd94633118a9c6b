//! ADMM iterations for the parameter-perturbation attack: proximal z-step
//! (elementwise hard threshold for l0, block soft threshold for l2),
//! linearized delta-step, and scaled dual update.
//!
//! The consensus split introduces an auxiliary variable `z` constrained to
//! equal `delta`; the augmented Lagrangian in scaled form is minimized by
//! alternating the closed-form steps below.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::loss::{self, AttackSpec};
use crate::model::{argmax, DenseNetwork, PerturbedSuffix};
use crate::Result;

/// Which norm measures the parameter modification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L0,
    L2,
}

/// Solver hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    pub norm: NormKind,
    /// Penalty weight of the consensus term.
    pub rho: f64,
    /// Bregman scale: the delta-step regularizer is `(R/2)||d - d_k||^2` in
    /// the metric `alpha * I`.
    pub alpha: f64,
    pub max_iters: usize,
    /// Stop when `||z - delta||_2` falls to this level...
    pub primal_tol: f64,
    /// ...and the hinge objective at `z` falls to this level.
    pub value_tol: f64,
    /// Entries of the reported delta with magnitude at or below this count
    /// as zero.
    pub report_threshold: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            norm: NormKind::L0,
            rho: 1.0,
            alpha: 1e-3,
            max_iters: 2000,
            primal_tol: 1e-4,
            value_tol: 1e-6,
            report_threshold: 1e-8,
        }
    }
}

/// Default penalty weight per norm. The l2 proximal map shrinks the block
/// norm by `1/rho` every iteration, so it needs a finer quantum than the
/// l0 hard threshold to settle near a minimal-norm solution.
pub fn default_rho(norm: NormKind) -> f64 {
    match norm {
        NormKind::L0 => 1.0,
        NormKind::L2 => 10.0,
    }
}

impl AdmmConfig {
    /// Defaults with the norm-appropriate penalty weight.
    pub fn for_norm(norm: NormKind) -> Self {
        Self {
            norm,
            rho: default_rho(norm),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::InvalidConfig("rho must be positive"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidConfig("alpha must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1"));
        }
        if self.primal_tol < 0.0 || self.value_tol < 0.0 {
            return Err(Error::InvalidConfig("tolerances must be nonnegative"));
        }
        if !(self.report_threshold > 0.0) {
            return Err(Error::InvalidConfig("report threshold must be positive"));
        }
        Ok(())
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRecord {
    pub iteration: usize,
    /// `||z - delta||_2` after the iteration.
    pub primal: f64,
    /// Hinge objective evaluated at `z`.
    pub g_value: f64,
}

/// Current iterate of the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub delta: Vec<f64>,
    pub z: Vec<f64>,
    /// Scaled dual variable (`u = rho * s`).
    pub s: Vec<f64>,
    pub k: usize,
    pub residual_history: Vec<ResidualRecord>,
}

impl AdmmState {
    /// All-zero start: the unmodified model.
    pub fn zeros(dim: usize) -> Self {
        Self {
            delta: vec![0.0; dim],
            z: vec![0.0; dim],
            s: vec![0.0; dim],
            k: 0,
            residual_history: Vec::new(),
        }
    }
}

/// Elementwise hard threshold: minimizes `||z||_0 + (rho/2)||z - v||_2^2`.
///
/// Keeps `v_i` iff `v_i^2 > 2/rho`; the boundary case collapses to zero.
pub fn prox_l0(v: &[f64], rho: f64) -> Result<Vec<f64>> {
    if !(rho > 0.0) {
        return Err(Error::InvalidConfig("rho must be positive"));
    }
    let threshold = 2.0 / rho;
    Ok(v.iter()
        .map(|&vi| if vi * vi > threshold { vi } else { 0.0 })
        .collect())
}

/// Block soft threshold over the whole vector: minimizes
/// `||z||_2 + (rho/2)||z - v||_2^2`.
pub fn prox_l2(v: &[f64], rho: f64) -> Result<Vec<f64>> {
    if !(rho > 0.0) {
        return Err(Error::InvalidConfig("rho must be positive"));
    }
    let norm = l2_norm(v);
    if norm >= 1.0 / rho && norm > 0.0 {
        let scale = 1.0 - 1.0 / (rho * norm);
        Ok(v.iter().map(|&vi| scale * vi).collect())
    } else {
        Ok(vec![0.0; v.len()])
    }
}

/// z-step: proximal map of the chosen norm applied to `delta^k - s^k`.
pub fn z_step(state: &AdmmState, cfg: &AdmmConfig) -> Result<Vec<f64>> {
    let v: Vec<f64> = state
        .delta
        .iter()
        .zip(&state.s)
        .map(|(d, s)| d - s)
        .collect();
    match cfg.norm {
        NormKind::L0 => prox_l0(&v, cfg.rho),
        NormKind::L2 => prox_l2(&v, cfg.rho),
    }
}

/// Linearized delta-step with `H = alpha * I`:
///
/// `delta^{k+1} = (rho (z^{k+1} + s^k) + alpha R delta^k - grad) / (alpha R + rho)`
///
/// where `grad` is the weighted hinge gradient summed over all R images at
/// `delta^k`.
pub fn delta_step(
    state: &AdmmState,
    z_new: &[f64],
    grad: &[f64],
    num_images: usize,
    cfg: &AdmmConfig,
) -> Result<Vec<f64>> {
    if z_new.len() != state.delta.len() || grad.len() != state.delta.len() {
        return Err(Error::SelectorShape {
            expected: state.delta.len(),
            got: z_new.len().min(grad.len()),
        });
    }
    let ar = cfg.alpha * num_images as f64;
    let denom = ar + cfg.rho;
    let mut out = vec![0.0; state.delta.len()];
    for i in 0..out.len() {
        out[i] = (cfg.rho * (z_new[i] + state.s[i]) + ar * state.delta[i] - grad[i]) / denom;
    }
    Ok(out)
}

/// Scaled dual update `s^{k+1} = s^k + z^{k+1} - delta^{k+1}`.
pub fn dual_step(state: &AdmmState, z_new: &[f64], delta_new: &[f64]) -> Result<Vec<f64>> {
    if z_new.len() != state.s.len() || delta_new.len() != state.s.len() {
        return Err(Error::SelectorShape {
            expected: state.s.len(),
            got: z_new.len().min(delta_new.len()),
        });
    }
    Ok(state
        .s
        .iter()
        .zip(z_new.iter().zip(delta_new))
        .map(|(s, (z, d))| s + z - d)
        .collect())
}

/// Outcome for one attack image after the final delta is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageOutcome {
    pub is_target: bool,
    /// Target label for targets, original label for anchors.
    pub wanted: usize,
    pub got: usize,
    pub success: bool,
}

/// Final solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    /// Reported modification: the z iterate at termination with entries at
    /// or below the report threshold zeroed, rounded to f32 so the value in
    /// memory equals the value any consumer reads back from disk.
    pub delta: Vec<f64>,
    /// Per-image outcomes, targets first then anchors.
    pub outcomes: Vec<ImageOutcome>,
    pub l0_count: usize,
    pub l2_norm: f64,
    /// Completed iterations.
    pub iterations: usize,
    /// Hinge objective at the reported delta.
    pub g_final: f64,
    /// True when the stopping tolerances were met before `max_iters`.
    pub converged: bool,
    pub residual_history: Vec<ResidualRecord>,
}

impl AttackResult {
    /// Fraction of targets classified as their target label.
    pub fn success_rate(&self) -> f64 {
        let targets: Vec<_> = self.outcomes.iter().filter(|o| o.is_target).collect();
        if targets.is_empty() {
            return 0.0;
        }
        targets.iter().filter(|o| o.success).count() as f64 / targets.len() as f64
    }

    /// Fraction of anchors whose prediction is unchanged; 1.0 when there
    /// are no anchors.
    pub fn kept_rate(&self) -> f64 {
        let anchors: Vec<_> = self.outcomes.iter().filter(|o| !o.is_target).collect();
        if anchors.is_empty() {
            return 1.0;
        }
        anchors.iter().filter(|o| o.success).count() as f64 / anchors.len() as f64
    }
}

/// Counts entries above `threshold` in magnitude and the Euclidean norm of
/// the full vector.
pub fn attack_result_metrics(delta: &[f64], threshold: f64) -> (usize, f64) {
    let l0 = delta.iter().filter(|d| d.abs() > threshold).count();
    (l0, l2_norm(delta))
}

fn l2_norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Runs the full ADMM loop from the zero start and reports the attack
/// outcome.
///
/// Initialization is `delta = z = s = 0`; each iteration performs the
/// z-step, the linearized delta-step with the hinge gradient taken at the
/// previous delta, and the scaled dual update. The loop stops at
/// `max_iters` or once both `||z - delta||_2 <= primal_tol` and the hinge
/// objective at `z` is at most `value_tol`. The reported delta is the z
/// iterate (the variable carrying the exact sparsity structure from the
/// proximal step), thresholded and f32-rounded.
pub fn solve(spec: &AttackSpec, net: &DenseNetwork, cfg: &AdmmConfig) -> Result<AttackResult> {
    cfg.validate()?;
    let features = spec.resolve_features(net)?;
    let dim = spec.selector.flat_len(net);
    let num_images = spec.num_images();

    let mut state = AdmmState::zeros(dim);

    let g0 = loss::G_value_cached(spec, net, &features, &state.z)?;
    state.residual_history.push(ResidualRecord {
        iteration: 0,
        primal: 0.0,
        g_value: g0,
    });
    let mut converged = g0 <= cfg.value_tol;

    while !converged && state.k < cfg.max_iters {
        let k = state.k + 1;

        let z_new = z_step(&state, cfg)?;
        let grad = loss::G_grad_cached(spec, net, &features, &state.delta)?;
        let delta_new = delta_step(&state, &z_new, &grad, num_images, cfg)?;
        let s_new = dual_step(&state, &z_new, &delta_new)?;

        if !(all_finite(&z_new) && all_finite(&delta_new) && all_finite(&s_new)) {
            return Err(Error::Divergence { iteration: k });
        }

        let primal = l2_norm(
            &z_new
                .iter()
                .zip(&delta_new)
                .map(|(z, d)| z - d)
                .collect::<Vec<f64>>(),
        );
        let g_z = loss::G_value_cached(spec, net, &features, &z_new)?;

        state.z = z_new;
        state.delta = delta_new;
        state.s = s_new;
        state.k = k;
        state.residual_history.push(ResidualRecord {
            iteration: k,
            primal,
            g_value: g_z,
        });

        converged = primal <= cfg.primal_tol && g_z <= cfg.value_tol;
    }

    finalize(spec, net, &features, cfg, state, converged)
}

fn finalize(
    spec: &AttackSpec,
    net: &DenseNetwork,
    features: &[Vec<f64>],
    cfg: &AdmmConfig,
    state: AdmmState,
    converged: bool,
) -> Result<AttackResult> {
    // Reported delta: thresholded and stored at f32 precision so metrics,
    // success flags, and downstream evaluations of the written file agree.
    let delta: Vec<f64> = state
        .z
        .iter()
        .map(|&v| {
            if v.abs() > cfg.report_threshold {
                (v as f32) as f64
            } else {
                0.0
            }
        })
        .collect();

    let (l0_count, l2_norm) = attack_result_metrics(&delta, cfg.report_threshold);
    let g_final = loss::G_value_cached(spec, net, features, &delta)?;

    let suffix = PerturbedSuffix::new(net, spec.selector, &delta)?;
    let mut outcomes = Vec::with_capacity(spec.num_images());
    for (idx, (img, phi)) in spec.images().zip(features).enumerate() {
        let got = argmax(&suffix.logits(phi)?);
        outcomes.push(ImageOutcome {
            is_target: idx < spec.num_targets(),
            wanted: img.label,
            got,
            success: got == img.label,
        });
    }

    Ok(AttackResult {
        delta,
        outcomes,
        l0_count,
        l2_norm,
        iterations: state.k,
        g_final,
        converged,
        residual_history: state.residual_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::AttackImage;
    use crate::model::{Activation, DenseLayer, DenseNetwork, ParamKinds, ParamSelector};
    use alloc::vec;

    #[test]
    fn prox_l0_keeps_only_large_entries() {
        assert_eq!(prox_l0(&[0.0, 0.0], 3.0).unwrap(), vec![0.0, 0.0]);
        // rho = 2 puts the survival threshold at |v| > 1.
        assert_eq!(prox_l0(&[0.5, 2.0], 2.0).unwrap(), vec![0.0, 2.0]);
        // Exact boundary v^2 == 2/rho collapses to zero.
        assert_eq!(prox_l0(&[1.0], 2.0).unwrap(), vec![0.0]);
        assert!(prox_l0(&[1.0], 0.0).is_err());
    }

    /// Scalar grid oracle for the l0 proximal objective.
    fn l0_scalar_oracle(v: f64, rho: f64, points: usize) -> f64 {
        let objective = |z: f64| {
            let ind = if z != 0.0 { 1.0 } else { 0.0 };
            ind + 0.5 * rho * (z - v) * (z - v)
        };
        let mut best = objective(0.0);
        let lo = -2.0 * v.abs();
        let hi = 2.0 * v.abs();
        for i in 0..points {
            let z = lo + (hi - lo) * (i as f64) / (points - 1) as f64;
            best = best.min(objective(z));
        }
        best
    }

    #[test]
    fn prox_l0_attains_grid_oracle_objective() {
        let cases = [
            (0.5, 2.0),
            (2.0, 2.0),
            (1.0, 2.0),
            (-3.0, 0.4),
            (0.01, 100.0),
            (7.5, 0.01),
        ];
        for &(v, rho) in &cases {
            let z = prox_l0(&[v], rho).unwrap()[0];
            let obj = (if z != 0.0 { 1.0 } else { 0.0 }) + 0.5 * rho * (z - v) * (z - v);
            let oracle = l0_scalar_oracle(v, rho, 10_000);
            assert!(
                obj <= oracle + 1e-9,
                "v={v} rho={rho}: {obj} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn prox_l2_block_soft_threshold() {
        assert_eq!(prox_l2(&[0.0, 0.0], 1.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(prox_l2(&[2.0, 0.0], 1.0).unwrap(), vec![1.0, 0.0]);
        // Norm 0.5 below the 1/rho = 1 threshold collapses to zero.
        assert_eq!(prox_l2(&[0.3, 0.4], 1.0).unwrap(), vec![0.0, 0.0]);
        assert!(prox_l2(&[1.0], -1.0).is_err());
    }

    /// Scaling-search oracle for the l2 proximal objective.
    fn l2_scaling_oracle(v: &[f64], rho: f64, points: usize) -> f64 {
        let objective = |z: &[f64]| {
            let nz = libm::sqrt(z.iter().map(|x| x * x).sum());
            let diff: f64 = z.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            nz + 0.5 * rho * diff
        };
        let mut best = f64::INFINITY;
        for i in 0..points {
            let c = 1.5 * (i as f64) / (points - 1) as f64;
            let z: Vec<f64> = v.iter().map(|x| c * x).collect();
            best = best.min(objective(&z));
        }
        best
    }

    #[test]
    fn prox_l2_attains_scaling_oracle_objective() {
        let cases: [(Vec<f64>, f64); 4] = [
            (vec![2.0, 0.0], 1.0),
            (vec![0.3, 0.4], 1.0),
            (vec![1.0, -2.0, 2.0], 0.7),
            (vec![0.05, 0.02], 8.0),
        ];
        for (v, rho) in &cases {
            let z = prox_l2(v, *rho).unwrap();
            let nz = libm::sqrt(z.iter().map(|x| x * x).sum::<f64>());
            let diff: f64 = z.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            let obj = nz + 0.5 * rho * diff;
            let oracle = l2_scaling_oracle(v, *rho, 1000);
            assert!(obj <= oracle + 1e-9, "{obj} vs oracle {oracle}");
        }
    }

    #[test]
    fn z_step_is_prox_of_delta_minus_s() {
        let mut state = AdmmState::zeros(3);
        state.delta = vec![2.0, -0.4, 1.7];
        state.s = vec![0.5, -0.1, -0.2];
        let v: Vec<f64> = state.delta.iter().zip(&state.s).map(|(d, s)| d - s).collect();

        let cfg_l0 = AdmmConfig {
            norm: NormKind::L0,
            ..Default::default()
        };
        assert_eq!(z_step(&state, &cfg_l0).unwrap(), prox_l0(&v, 1.0).unwrap());

        let cfg_l2 = AdmmConfig {
            norm: NormKind::L2,
            ..Default::default()
        };
        assert_eq!(z_step(&state, &cfg_l2).unwrap(), prox_l2(&v, 1.0).unwrap());

        // s == delta makes the prox argument zero for both norms.
        state.s = state.delta.clone();
        assert_eq!(z_step(&state, &cfg_l0).unwrap(), vec![0.0; 3]);
        assert_eq!(z_step(&state, &cfg_l2).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn delta_step_fixed_point_and_plugged_values() {
        let cfg = AdmmConfig {
            rho: 1.0,
            alpha: 1.0,
            ..Default::default()
        };

        // grad = 0 and z + s = delta leaves delta unchanged.
        let mut state = AdmmState::zeros(2);
        state.delta = vec![0.8, -1.6];
        state.s = vec![0.3, 0.3];
        let z_new = vec![0.5, -1.9];
        let out = delta_step(&state, &z_new, &[0.0, 0.0], 1, &cfg).unwrap();
        for (o, d) in out.iter().zip(&state.delta) {
            assert!((o - d).abs() < 1e-12);
        }

        // alpha R = 1, rho = 1, delta = 0, z + s = 2, grad = 0 -> 1.
        let state = AdmmState::zeros(1);
        let out = delta_step(&state, &[2.0], &[0.0], 1, &cfg).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta_step_matches_direct_affine_evaluation() {
        let cfg = AdmmConfig {
            rho: 2.3,
            alpha: 0.17,
            ..Default::default()
        };
        let num_images = 7;
        let mut state = AdmmState::zeros(4);
        state.delta = vec![0.4, -0.9, 2.2, 0.0];
        state.s = vec![-0.3, 0.8, 0.1, -1.1];
        let z_new = [1.0, 0.2, -0.7, 0.9];
        let grad = [0.05, -2.0, 0.4, 1.3];
        let got = delta_step(&state, &z_new, &grad, num_images, &cfg).unwrap();

        let ar = cfg.alpha * num_images as f64;
        for i in 0..4 {
            let want = (cfg.rho * (z_new[i] + state.s[i]) + ar * state.delta[i] - grad[i])
                / (ar + cfg.rho);
            assert!((got[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_step_accumulates_gap() {
        let mut state = AdmmState::zeros(1);
        assert_eq!(dual_step(&state, &[1.0], &[1.0]).unwrap(), vec![0.0]);
        assert_eq!(dual_step(&state, &[1.0], &[0.25]).unwrap(), vec![0.75]);

        // Constant z, delta: s grows linearly by (z - delta) per step.
        let z = [0.5];
        let d = [0.2];
        for step in 1..=5 {
            state.s = dual_step(&state, &z, &d).unwrap();
            assert!((state.s[0] - 0.3 * step as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn scaled_dual_tracks_unscaled_update() {
        // With u = rho * s, the dual step is u^{k+1} = u^k + rho (z - delta).
        let rho = 3.5;
        let mut state = AdmmState::zeros(2);
        state.s = vec![0.4, -0.2];
        let z = [1.0, 0.0];
        let d = [0.3, 0.6];
        let u_before: Vec<f64> = state.s.iter().map(|s| rho * s).collect();
        let s_after = dual_step(&state, &z, &d).unwrap();
        for i in 0..2 {
            let u_after = rho * s_after[i];
            let want = u_before[i] + rho * (z[i] - d[i]);
            assert!((u_after - want).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_count_and_norm() {
        assert_eq!(attack_result_metrics(&[0.0, 0.0], 1e-8), (0, 0.0));
        let (l0, l2) = attack_result_metrics(&[3.0, 4.0, 0.0], 1e-8);
        assert_eq!(l0, 2);
        assert!((l2 - 5.0).abs() < 1e-12);
        let (l0, l2) = attack_result_metrics(&[1e-9], 1e-8);
        assert_eq!(l0, 0);
        assert!((l2 - 1e-9).abs() < 1e-24);
    }

    fn identity_net(dim: usize) -> DenseNetwork {
        let mut w = vec![0.0; dim * dim];
        for i in 0..dim {
            w[i * dim + i] = 1.0;
        }
        DenseNetwork::new(vec![
            DenseLayer::new(dim, dim, w, vec![0.0; dim], Activation::Identity).unwrap()
        ])
        .unwrap()
    }

    /// Two-class toy: identity features, one image at (1, 0) originally
    /// class 0, target class 1, bias-only modification.
    fn toy_spec(c: f64) -> (AttackSpec, DenseNetwork) {
        let net = identity_net(2);
        let spec = AttackSpec {
            targets: vec![AttackImage {
                data: vec![1.0, 0.0],
                label: 1,
            }],
            anchors: vec![],
            weights: vec![c],
            selector: ParamSelector::new(0, ParamKinds::BiasOnly),
            images_are_features: false,
        };
        (spec, net)
    }

    #[test]
    fn toy_l0_attack_flips_the_bias() {
        let (spec, net) = toy_spec(5.0);
        let cfg = AdmmConfig::default();
        let res = solve(&spec, &net, &cfg).unwrap();
        assert!(res.converged, "toy attack should converge");
        assert!(res.outcomes[0].success, "target must flip to class 1");
        assert!(res.l0_count <= 2, "l0 count {} too large", res.l0_count);
        assert!(res.g_final <= 1e-9);
    }

    #[test]
    fn toy_residual_drops_below_surrogate_level_by_iteration_50() {
        let (spec, net) = toy_spec(5.0);
        let cfg = AdmmConfig::default();
        let res = solve(&spec, &net, &cfg).unwrap();
        let last = res.residual_history.last().unwrap();
        assert!(last.iteration <= 50);
        assert!(last.primal < 1e-3);
    }

    #[test]
    fn already_satisfied_spec_returns_zero_delta_immediately() {
        let net = identity_net(2);
        for norm in [NormKind::L0, NormKind::L2] {
            let spec = AttackSpec {
                targets: vec![AttackImage {
                    data: vec![0.0, 1.0],
                    label: 1,
                }],
                anchors: vec![AttackImage {
                    data: vec![2.0, 0.0],
                    label: 0,
                }],
                weights: vec![5.0, 1.0],
                selector: ParamSelector::new(0, ParamKinds::BiasOnly),
                images_are_features: false,
            };
            let cfg = AdmmConfig {
                norm,
                ..Default::default()
            };
            let res = solve(&spec, &net, &cfg).unwrap();
            assert_eq!(res.iterations, 0);
            assert!(res.delta.iter().all(|&d| d == 0.0));
            assert_eq!(res.g_final, 0.0);
            assert!(res.converged);
        }
    }

    #[test]
    fn solve_is_bitwise_deterministic() {
        let (spec, net) = toy_spec(5.0);
        let cfg = AdmmConfig::default();
        let a = solve(&spec, &net, &cfg).unwrap();
        let b = solve(&spec, &net, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn residual_history_iterations_strictly_increase() {
        let (spec, net) = toy_spec(5.0);
        let res = solve(&spec, &net, &AdmmConfig::default()).unwrap();
        for pair in res.residual_history.windows(2) {
            assert!(pair[1].iteration > pair[0].iteration);
        }
    }

    #[test]
    fn divergence_is_reported_with_iteration() {
        let (mut spec, net) = toy_spec(1.0);
        // An absurd weight overflows the iterate scale into infinity within
        // the first couple of iterations.
        spec.weights = vec![f64::MAX];
        let err = solve(&spec, &net, &AdmmConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Divergence { iteration: 1..=3 }));
    }
}
