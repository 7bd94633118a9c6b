//! Hinge attack objectives on logits and their gradients with respect to
//! the selected parameter delta.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::model::{self, DenseNetwork, ParamSelector};
use crate::Result;

/// Hinge value `max(max_{j != label} logits_j - logits_label, 0)`.
///
/// Zero exactly when the wanted label attains or ties the maximum logit.
pub fn hinge_g(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            num_classes: logits.len(),
        });
    }
    let mut best_other = f64::NEG_INFINITY;
    for (j, &v) in logits.iter().enumerate() {
        if j != label && v > best_other {
            best_other = v;
        }
    }
    Ok((best_other - logits[label]).max(0.0))
}

/// Logit-space subgradient of [`hinge_g`].
///
/// Zero when the hinge is inactive (value 0, including the exact-tie kink);
/// otherwise +1 at the strongest competing logit (lowest index on ties) and
/// -1 at the wanted label.
pub fn hinge_g_grad_cotangent(logits: &[f64], label: usize) -> Result<Vec<f64>> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            num_classes: logits.len(),
        });
    }
    let mut j_star = usize::MAX;
    let mut best_other = f64::NEG_INFINITY;
    for (j, &v) in logits.iter().enumerate() {
        if j != label && v > best_other {
            best_other = v;
            j_star = j;
        }
    }
    let mut grad = vec![0.0; logits.len()];
    if best_other - logits[label] > 0.0 {
        grad[j_star] = 1.0;
        grad[label] = -1.0;
    }
    Ok(grad)
}

/// One attack image: the sample (raw input or cached feature row) together
/// with the label the attack wants it to carry afterwards — the target
/// label for inject images, the original label for anchor images.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackImage {
    pub data: Vec<f64>,
    pub label: usize,
}

/// The attack instance: S target images to misclassify, R-S anchors to hold
/// in place, per-image weights, and the mutable parameter selector.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub targets: Vec<AttackImage>,
    pub anchors: Vec<AttackImage>,
    /// Positive weights, length R, targets first then anchors.
    pub weights: Vec<f64>,
    pub selector: ParamSelector,
    /// When true, image rows are already the activation vectors feeding the
    /// selected layer; when false they are raw network inputs.
    pub images_are_features: bool,
}

impl AttackSpec {
    /// Uniform weights: `default_c` on anchors, `default_c * target_multiplier`
    /// on targets.
    pub fn uniform_weights(
        s: usize,
        r: usize,
        default_c: f64,
        target_multiplier: f64,
    ) -> Vec<f64> {
        let mut w = vec![default_c * target_multiplier; s];
        w.extend(core::iter::repeat(default_c).take(r - s));
        w
    }

    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn num_images(&self) -> usize {
        self.targets.len() + self.anchors.len()
    }

    /// Iterates all R images, targets first.
    pub fn images(&self) -> impl Iterator<Item = &AttackImage> {
        self.targets.iter().chain(self.anchors.iter())
    }

    pub fn validate(&self, net: &DenseNetwork) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::InvalidConfig("attack needs at least one target"));
        }
        self.selector.validate(net)?;
        if self.weights.len() != self.num_images() {
            return Err(Error::InvalidConfig("weight vector length must equal R"));
        }
        if self.weights.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::InvalidConfig("image weights must be positive"));
        }
        let expected = if self.images_are_features {
            net.layer(self.selector.layer_index).in_dim()
        } else {
            net.input_dim()
        };
        for img in self.images() {
            if img.data.len() != expected {
                return Err(Error::InputShape {
                    what: "attack image",
                    expected,
                    got: img.data.len(),
                });
            }
            if img.label >= net.num_classes() {
                return Err(Error::LabelOutOfRange {
                    label: img.label,
                    num_classes: net.num_classes(),
                });
            }
        }
        Ok(())
    }

    /// Activation vectors feeding the selected layer, one per image in
    /// target-then-anchor order. The frozen prefix is evaluated once here.
    pub fn resolve_features(&self, net: &DenseNetwork) -> Result<Vec<Vec<f64>>> {
        self.validate(net)?;
        self.images()
            .map(|img| {
                if self.images_are_features {
                    Ok(img.data.clone())
                } else {
                    model::features_at(net, self.selector, &img.data)
                }
            })
            .collect()
    }
}

/// Total weighted hinge objective over all R images at the given delta.
#[allow(non_snake_case)]
pub fn G_value(spec: &AttackSpec, net: &DenseNetwork, delta: &[f64]) -> Result<f64> {
    let features = spec.resolve_features(net)?;
    G_value_cached(spec, net, &features, delta)
}

/// As [`G_value`] but against features already resolved once.
#[allow(non_snake_case)]
pub(crate) fn G_value_cached(
    spec: &AttackSpec,
    net: &DenseNetwork,
    features: &[Vec<f64>],
    delta: &[f64],
) -> Result<f64> {
    let suffix = model::PerturbedSuffix::new(net, spec.selector, delta)?;
    let mut total = 0.0;
    for (img, (phi, &c)) in spec.images().zip(features.iter().zip(&spec.weights)) {
        let logits = suffix.logits(phi)?;
        total += c * hinge_g(&logits, img.label)?;
    }
    Ok(total)
}

/// Gradient of [`G_value`] with respect to delta: the weighted sum of
/// per-image vector-Jacobian products, accumulated in image order so the
/// reduction is deterministic.
#[allow(non_snake_case)]
pub fn G_grad(spec: &AttackSpec, net: &DenseNetwork, delta: &[f64]) -> Result<Vec<f64>> {
    let features = spec.resolve_features(net)?;
    G_grad_cached(spec, net, &features, delta)
}

#[allow(non_snake_case)]
pub(crate) fn G_grad_cached(
    spec: &AttackSpec,
    net: &DenseNetwork,
    features: &[Vec<f64>],
    delta: &[f64],
) -> Result<Vec<f64>> {
    let suffix = model::PerturbedSuffix::new(net, spec.selector, delta)?;
    let mut total = vec![0.0; spec.selector.flat_len(net)];
    for (img, (phi, &c)) in spec.images().zip(features.iter().zip(&spec.weights)) {
        let logits = suffix.logits(phi)?;
        let cot = hinge_g_grad_cotangent(&logits, img.label)?;
        if cot.iter().all(|&v| v == 0.0) {
            continue;
        }
        let g = suffix.grad(phi, &cot)?;
        for (t, gi) in total.iter_mut().zip(&g) {
            *t += c * gi;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, DenseLayer, DenseNetwork, ParamKinds, ParamSelector};
    use alloc::vec;

    #[test]
    fn hinge_direct_evaluations() {
        assert_eq!(hinge_g(&[1.0, 3.0, 0.0], 0).unwrap(), 2.0);
        assert_eq!(hinge_g(&[5.0, 1.0, 0.0], 0).unwrap(), 0.0);
        assert_eq!(hinge_g(&[2.0, 2.0, 0.0], 0).unwrap(), 0.0);
    }

    #[test]
    fn hinge_rejects_out_of_range_label() {
        assert!(matches!(
            hinge_g(&[1.0, 2.0], 2),
            Err(Error::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn hinge_cotangent_cases() {
        assert_eq!(
            hinge_g_grad_cotangent(&[1.0, 3.0, 0.0], 0).unwrap(),
            vec![-1.0, 1.0, 0.0]
        );
        assert_eq!(
            hinge_g_grad_cotangent(&[5.0, 1.0, 0.0], 0).unwrap(),
            vec![0.0, 0.0, 0.0]
        );
        // Competitor tie resolves to the lowest index.
        assert_eq!(
            hinge_g_grad_cotangent(&[1.0, 3.0, 3.0], 0).unwrap(),
            vec![-1.0, 1.0, 0.0]
        );
        // Exact kink (tie with the wanted label) has subgradient zero.
        assert_eq!(
            hinge_g_grad_cotangent(&[2.0, 2.0, 0.0], 0).unwrap(),
            vec![0.0, 0.0, 0.0]
        );
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

    fn single_image_spec(x: Vec<f64>, label: usize, c: f64, sel: ParamSelector) -> AttackSpec {
        AttackSpec {
            targets: vec![AttackImage { data: x, label }],
            anchors: vec![],
            weights: vec![c],
            selector: sel,
            images_are_features: false,
        }
    }

    #[test]
    fn g_value_reduces_to_single_hinge() {
        let net = identity_net(3);
        let sel = ParamSelector::new(0, ParamKinds::BiasOnly);
        let spec = single_image_spec(vec![1.0, 3.0, 0.0], 0, 1.0, sel);
        let g = G_value(&spec, &net, &[0.0; 3]).unwrap();
        assert_eq!(g, 2.0);
    }

    #[test]
    fn g_value_zero_at_satisfied_instance() {
        let net = identity_net(3);
        let sel = ParamSelector::new(0, ParamKinds::BiasOnly);
        let mut spec = single_image_spec(vec![5.0, 1.0, 0.0], 0, 1.0, sel);
        spec.anchors.push(AttackImage {
            data: vec![0.0, 0.0, 4.0],
            label: 2,
        });
        spec.weights.push(2.0);
        assert_eq!(G_value(&spec, &net, &[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn g_value_matches_scripted_summation() {
        // Summation oracle: evaluate each image's hinge through the public
        // forward path and add the weighted terms by hand.
        let net = identity_net(4);
        let sel = ParamSelector::new(0, ParamKinds::BiasOnly);
        let images = [
            (vec![0.3, 0.9, -0.2, 0.4], 2usize, 1.5),
            (vec![1.1, 0.1, 0.0, -0.5], 0usize, 0.7),
            (vec![0.2, 0.25, 0.21, 0.24], 1usize, 2.0),
        ];
        let spec = AttackSpec {
            targets: vec![AttackImage {
                data: images[0].0.clone(),
                label: images[0].1,
            }],
            anchors: images[1..]
                .iter()
                .map(|(x, l, _)| AttackImage {
                    data: x.clone(),
                    label: *l,
                })
                .collect(),
            weights: images.iter().map(|&(_, _, c)| c).collect(),
            selector: sel,
            images_are_features: false,
        };
        let delta = [0.05, -0.1, 0.2, 0.0];
        let got = G_value(&spec, &net, &delta).unwrap();

        let modified = net.with_delta(sel, &delta).unwrap();
        let mut want = 0.0;
        for (x, l, c) in &images {
            let logits = crate::model::forward_logits(&modified, x).unwrap();
            want += c * hinge_g(&logits, *l).unwrap();
        }
        assert!((got - want).abs() < 1e-9);
    }

    #[test]
    fn g_grad_zero_when_all_hinges_inactive() {
        let net = identity_net(3);
        let sel = ParamSelector::new(0, ParamKinds::Both);
        let spec = single_image_spec(vec![5.0, 1.0, 0.0], 0, 1.0, sel);
        let grad = G_grad(&spec, &net, &vec![0.0; sel.flat_len(&net)]).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn g_grad_bias_case_is_weighted_cotangent() {
        let net = identity_net(3);
        let sel = ParamSelector::new(0, ParamKinds::BiasOnly);
        let spec = single_image_spec(vec![1.0, 3.0, 0.0], 0, 2.5, sel);
        let grad = G_grad(&spec, &net, &[0.0; 3]).unwrap();
        // Active hinge with competitor j*=1 and wanted label 0.
        assert_eq!(grad, vec![-2.5, 2.5, 0.0]);
    }

    #[test]
    fn hinge_shift_invariance() {
        let logits = [0.4, -1.2, 0.9, 0.1];
        for label in 0..4 {
            let base = hinge_g(&logits, label).unwrap();
            let shifted: Vec<f64> = logits.iter().map(|v| v + 17.25).collect();
            assert!((hinge_g(&shifted, label).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn g_zero_implies_all_predictions_land() {
        let net = identity_net(3);
        let sel = ParamSelector::new(0, ParamKinds::BiasOnly);
        let spec = AttackSpec {
            targets: vec![AttackImage {
                data: vec![0.0, 2.0, 1.0],
                label: 1,
            }],
            anchors: vec![AttackImage {
                data: vec![3.0, 0.0, 1.0],
                label: 0,
            }],
            weights: vec![1.0, 1.0],
            selector: sel,
            images_are_features: false,
        };
        let delta = [0.0, 0.0, 0.0];
        assert_eq!(G_value(&spec, &net, &delta).unwrap(), 0.0);
        for img in spec.images() {
            let got = crate::model::predict(&net, &img.data).unwrap();
            assert_eq!(got, img.label);
        }
    }
}
