//! JSON documents exchanged on disk: attack specifications referencing
//! dataset rows by index, and the attack result report.

use fsn_core::{
    AttackImage, AttackResult, AttackSpec, FeatureBatch, NormKind, ParamKinds, ParamSelector,
    ResidualRecord,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindsDoc {
    Weights,
    Bias,
    Both,
}

impl From<KindsDoc> for ParamKinds {
    fn from(k: KindsDoc) -> Self {
        match k {
            KindsDoc::Weights => ParamKinds::WeightsOnly,
            KindsDoc::Bias => ParamKinds::BiasOnly,
            KindsDoc::Both => ParamKinds::Both,
        }
    }
}

impl From<ParamKinds> for KindsDoc {
    fn from(k: ParamKinds) -> Self {
        match k {
            ParamKinds::WeightsOnly => KindsDoc::Weights,
            ParamKinds::BiasOnly => KindsDoc::Bias,
            ParamKinds::Both => KindsDoc::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SelectorDoc {
    pub layer_index: usize,
    pub kinds: KindsDoc,
}

impl From<ParamSelector> for SelectorDoc {
    fn from(sel: ParamSelector) -> Self {
        Self {
            layer_index: sel.layer_index,
            kinds: sel.kinds.into(),
        }
    }
}

impl From<SelectorDoc> for ParamSelector {
    fn from(doc: SelectorDoc) -> Self {
        ParamSelector::new(doc.layer_index, doc.kinds.into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetEntry {
    /// Row index into the dataset the spec is resolved against.
    pub index: usize,
    pub target_label: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorEntry {
    pub index: usize,
    pub label: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsDoc {
    pub default_c: f64,
    pub target_multiplier: f64,
}

impl Default for WeightsDoc {
    fn default() -> Self {
        Self {
            default_c: 1.0,
            target_multiplier: 5.0,
        }
    }
}

/// On-disk attack specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackSpecDoc {
    pub selector: SelectorDoc,
    pub targets: Vec<TargetEntry>,
    pub anchors: Vec<AnchorEntry>,
    #[serde(default)]
    pub weights: WeightsDoc,
}

#[derive(Debug, thiserror::Error)]
pub enum SpecDocError {
    #[error("dataset row {0} out of range")]
    IndexOutOfRange(usize),
    #[error("target {index}: target label {target} equals the original label")]
    VacuousTarget { index: usize, target: usize },
    #[error("spec needs at least one target")]
    NoTargets,
}

impl AttackSpecDoc {
    /// Resolves dataset indices into concrete image rows. Target labels
    /// must differ from the dataset's recorded label for that row, else
    /// the requested fault is vacuous.
    pub fn resolve(
        &self,
        data: &FeatureBatch,
        images_are_features: bool,
    ) -> Result<AttackSpec, SpecDocError> {
        if self.targets.is_empty() {
            return Err(SpecDocError::NoTargets);
        }
        let fetch = |index: usize| -> Result<Vec<f64>, SpecDocError> {
            if index >= data.len() {
                return Err(SpecDocError::IndexOutOfRange(index));
            }
            Ok(data.features.row(index).to_vec())
        };
        let mut targets = Vec::with_capacity(self.targets.len());
        for t in &self.targets {
            let row = fetch(t.index)?;
            if data.labels[t.index] == t.target_label {
                return Err(SpecDocError::VacuousTarget {
                    index: t.index,
                    target: t.target_label,
                });
            }
            targets.push(AttackImage {
                data: row,
                label: t.target_label,
            });
        }
        let mut anchors = Vec::with_capacity(self.anchors.len());
        for a in &self.anchors {
            anchors.push(AttackImage {
                data: fetch(a.index)?,
                label: a.label,
            });
        }
        let weights = AttackSpec::uniform_weights(
            targets.len(),
            targets.len() + anchors.len(),
            self.weights.default_c,
            self.weights.target_multiplier,
        );
        Ok(AttackSpec {
            targets,
            anchors,
            weights,
            selector: self.selector.into(),
            images_are_features,
        })
    }
}

pub fn norm_name(norm: NormKind) -> &'static str {
    match norm {
        NormKind::L0 => "l0",
        NormKind::L2 => "l2",
    }
}

/// Echo of everything that determined a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfigDoc {
    pub norm: String,
    pub rho: f64,
    pub alpha: f64,
    pub max_iters: usize,
    pub primal_tol: f64,
    pub value_tol: f64,
    pub report_threshold: f64,
    pub selector: SelectorDoc,
    pub s: usize,
    pub r: usize,
    pub default_c: f64,
    pub target_multiplier: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_sha256: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImageResultDoc {
    /// Dataset row index; absent for specs built from explicit vectors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub is_target: bool,
    pub wanted_label: usize,
    pub got_label: usize,
    pub success: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualDoc {
    pub iteration: usize,
    pub primal: f64,
    pub g_value: f64,
}

/// On-disk attack result. `wall_time` is the only field that is not a
/// deterministic function of the inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackResultDoc {
    pub config: RunConfigDoc,
    pub images: Vec<ImageResultDoc>,
    pub success_rate: f64,
    pub kept_rate: f64,
    pub l0_count: usize,
    pub l2_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub g_final: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_probe_accuracy: Option<f64>,
    pub residual_history: Vec<ResidualDoc>,
    pub wall_time: f64,
}

/// Keeps every 10th record plus the final one.
pub fn downsample_history(history: &[ResidualRecord]) -> Vec<ResidualDoc> {
    let last = history.len().saturating_sub(1);
    history
        .iter()
        .enumerate()
        .filter(|(i, rec)| rec.iteration % 10 == 0 || *i == last)
        .map(|(_, rec)| ResidualDoc {
            iteration: rec.iteration,
            primal: rec.primal,
            g_value: rec.g_value,
        })
        .collect()
}

pub fn image_docs(result: &AttackResult, indices: Option<&[usize]>) -> Vec<ImageResultDoc> {
    result
        .outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| ImageResultDoc {
            index: indices.map(|idx| idx[i]),
            is_target: o.is_target,
            wanted_label: o.wanted,
            got_label: o.got,
            success: o.success,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use fsn_core::{FeatureSource, Matrix};

    fn batch() -> FeatureBatch {
        let features = Matrix::from_vec(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        FeatureBatch::new(features, vec![0, 1, 0], FeatureSource::Imported).unwrap()
    }

    #[test]
    fn resolve_builds_weighted_spec() {
        let doc = AttackSpecDoc {
            selector: SelectorDoc {
                layer_index: 0,
                kinds: KindsDoc::Both,
            },
            targets: vec![TargetEntry {
                index: 0,
                target_label: 1,
            }],
            anchors: vec![AnchorEntry { index: 1, label: 1 }],
            weights: WeightsDoc {
                default_c: 2.0,
                target_multiplier: 3.0,
            },
        };
        let spec = doc.resolve(&batch(), false).unwrap();
        assert_eq!(spec.weights, vec![6.0, 2.0]);
        assert_eq!(spec.targets[0].data, vec![0.1, 0.2]);
        assert_eq!(spec.anchors[0].label, 1);
    }

    #[test]
    fn resolve_rejects_vacuous_target() {
        let doc = AttackSpecDoc {
            selector: SelectorDoc {
                layer_index: 0,
                kinds: KindsDoc::Both,
            },
            targets: vec![TargetEntry {
                index: 1,
                target_label: 1,
            }],
            anchors: vec![],
            weights: WeightsDoc::default(),
        };
        assert!(matches!(
            doc.resolve(&batch(), false),
            Err(SpecDocError::VacuousTarget { .. })
        ));
    }

    #[test]
    fn resolve_rejects_bad_index() {
        let doc = AttackSpecDoc {
            selector: SelectorDoc {
                layer_index: 0,
                kinds: KindsDoc::Both,
            },
            targets: vec![TargetEntry {
                index: 9,
                target_label: 1,
            }],
            anchors: vec![],
            weights: WeightsDoc::default(),
        };
        assert!(matches!(
            doc.resolve(&batch(), false),
            Err(SpecDocError::IndexOutOfRange(9))
        ));
    }

    #[test]
    fn spec_doc_json_round_trip() {
        let doc = AttackSpecDoc {
            selector: SelectorDoc {
                layer_index: 2,
                kinds: KindsDoc::Bias,
            },
            targets: vec![TargetEntry {
                index: 4,
                target_label: 7,
            }],
            anchors: vec![AnchorEntry { index: 5, label: 2 }],
            weights: WeightsDoc::default(),
        };
        let json = serde_json::to_string(&doc).unwrap();
        assert!(json.contains("\"kinds\":\"bias\""));
        let back: AttackSpecDoc = serde_json::from_str(&json).unwrap();
        assert_eq!(back.targets[0].index, 4);
    }

    #[test]
    fn history_downsampling_keeps_every_tenth_and_last() {
        let history: Vec<ResidualRecord> = (0..=25)
            .map(|k| ResidualRecord {
                iteration: k,
                primal: k as f64,
                g_value: 0.0,
            })
            .collect();
        let docs = downsample_history(&history);
        let iters: Vec<usize> = docs.iter().map(|d| d.iteration).collect();
        assert_eq!(iters, vec![0, 10, 20, 25]);
    }
}
