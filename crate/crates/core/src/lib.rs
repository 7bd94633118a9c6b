//! Parameter-space fault injection on dense classifiers.
//!
//! Given a trained feed-forward network, this crate computes a minimal
//! modification `delta` to one layer's parameters so that a chosen set of
//! inputs is classified with attacker-picked labels while a second set of
//! anchor inputs keeps its original predictions. The objective couples a
//! sparsity/magnitude measure on `delta` (l0 or l2) with per-image hinge
//! losses on the logits, and is solved by ADMM with closed-form proximal
//! z-steps and a linearized delta-step.
//!
//! The crate is `no_std` + `alloc`; IO, file formats, and the experiment
//! harness live in the companion `fsn-cli` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod admm;
pub mod data;
pub mod error;
pub mod loss;
pub mod model;
pub mod train;

pub use admm::{
    attack_result_metrics, default_rho, delta_step, dual_step, prox_l0, prox_l2, solve, z_step,
    AdmmConfig, AdmmState, AttackResult, ImageOutcome, NormKind, ResidualRecord,
};
pub use data::{FeatureBatch, FeatureSource, Matrix};
pub use error::Error;
pub use loss::{hinge_g, hinge_g_grad_cotangent, AttackImage, AttackSpec, G_grad, G_value};
pub use model::{
    advance_features, argmax, features_at, forward_from, forward_logits, predict, predict_from,
    suffix_grad, suffix_logits, Activation, DenseLayer, DenseNetwork, ParamKinds, ParamSelector,
};
pub use train::{evaluate_accuracy, train, train_with_stats, TrainConfig};

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
