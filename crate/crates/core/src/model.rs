//! Dense feed-forward classifier: evaluation, feature capture, and
//! backpropagation of logit cotangents onto one layer's parameters.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::Result;

/// Elementwise activation applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    ReLU,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::ReLU => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative with respect to the pre-activation.
    ///
    /// The ReLU subgradient at exactly 0 is taken as 0.
    #[inline]
    pub fn grad_at(self, z: f64) -> f64 {
        match self {
            Activation::ReLU => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One affine layer `y = act(W x + b)` with row-major `out_dim x in_dim` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidNetwork("layer dimensions must be positive"));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::InvalidNetwork("weight buffer does not match dims"));
        }
        if bias.len() != out_dim {
            return Err(Error::InvalidNetwork("bias length does not match out_dim"));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Row-major `out_dim x in_dim` weight buffer.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// Affine map only, no activation: `z = W x + b`.
    fn preactivate(&self, input: &[f64], out: &mut [f64]) {
        debug_assert_eq!(input.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            let mut acc = self.bias[r];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            *o = acc;
        }
    }

    fn forward(&self, input: &[f64], out: &mut [f64]) {
        self.preactivate(input, out);
        for o in out.iter_mut() {
            *o = self.activation.apply(*o);
        }
    }
}

/// Ordered stack of dense layers; the classifier under attack.
///
/// The last layer's output is the logit vector (no softmax is ever applied),
/// so its activation must be `Identity`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
    input_dim: usize,
    num_classes: usize,
}

impl DenseNetwork {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let first = layers.first().ok_or(Error::InvalidNetwork("no layers"))?;
        let input_dim = first.in_dim();
        for pair in layers.windows(2) {
            if pair[1].in_dim() != pair[0].out_dim() {
                return Err(Error::InvalidNetwork("adjacent layer dims do not chain"));
            }
        }
        let last = layers.last().expect("nonempty");
        if last.activation() != Activation::Identity {
            return Err(Error::InvalidNetwork("last layer must be Identity"));
        }
        let num_classes = last.out_dim();
        Ok(Self {
            layers,
            input_dim,
            num_classes,
        })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn layer(&self, idx: usize) -> &DenseLayer {
        &self.layers[idx]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Returns a copy of this network with `delta` added to the selected
    /// layer's parameters.
    pub fn with_delta(&self, sel: ParamSelector, delta: &[f64]) -> Result<DenseNetwork> {
        sel.validate(self)?;
        let expected = sel.flat_len(self);
        if delta.len() != expected {
            return Err(Error::SelectorShape {
                expected,
                got: delta.len(),
            });
        }
        let mut net = self.clone();
        apply_delta(&mut net.layers[sel.layer_index], sel.kinds, delta);
        Ok(net)
    }
}

/// Which parameter kinds of the selected layer are mutable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKinds {
    WeightsOnly,
    BiasOnly,
    Both,
}

/// Designates the mutable flat parameter vector: one layer plus a kind mask.
///
/// Flat ordering is row-major weights first, then bias. Delta indices map
/// one-to-one onto this ordering everywhere, including on-disk delta files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSelector {
    pub layer_index: usize,
    pub kinds: ParamKinds,
}

impl ParamSelector {
    pub fn new(layer_index: usize, kinds: ParamKinds) -> Self {
        Self { layer_index, kinds }
    }

    pub fn validate(&self, net: &DenseNetwork) -> Result<()> {
        if self.layer_index >= net.num_layers() {
            return Err(Error::InvalidConfig("selector layer index out of range"));
        }
        Ok(())
    }

    /// Number of selected parameters.
    pub fn flat_len(&self, net: &DenseNetwork) -> usize {
        let layer = net.layer(self.layer_index);
        match self.kinds {
            ParamKinds::WeightsOnly => layer.in_dim() * layer.out_dim(),
            ParamKinds::BiasOnly => layer.out_dim(),
            ParamKinds::Both => layer.in_dim() * layer.out_dim() + layer.out_dim(),
        }
    }
}

fn apply_delta(layer: &mut DenseLayer, kinds: ParamKinds, delta: &[f64]) {
    match kinds {
        ParamKinds::WeightsOnly => {
            for (w, d) in layer.weights_mut().iter_mut().zip(delta) {
                *w += d;
            }
        }
        ParamKinds::BiasOnly => {
            for (b, d) in layer.bias_mut().iter_mut().zip(delta) {
                *b += d;
            }
        }
        ParamKinds::Both => {
            let n_w = layer.weights().len();
            for (w, d) in layer.weights_mut().iter_mut().zip(&delta[..n_w]) {
                *w += d;
            }
            for (b, d) in layer.bias_mut().iter_mut().zip(&delta[n_w..]) {
                *b += d;
            }
        }
    }
}

/// Evaluates the logits starting from `v` entering layer `from`.
pub fn forward_from(net: &DenseNetwork, from: usize, v: &[f64]) -> Result<Vec<f64>> {
    if from >= net.num_layers() {
        return Err(Error::InvalidConfig("entry layer index out of range"));
    }
    let expected = net.layer(from).in_dim();
    if v.len() != expected {
        return Err(Error::InputShape {
            what: "layer input",
            expected,
            got: v.len(),
        });
    }
    let mut cur = v.to_vec();
    for layer in &net.layers()[from..] {
        let mut next = vec![0.0; layer.out_dim()];
        layer.forward(&cur, &mut next);
        cur = next;
    }
    Ok(cur)
}

/// Evaluates the logit vector `Z(theta, x)`; no softmax is applied.
pub fn forward_logits(net: &DenseNetwork, x: &[f64]) -> Result<Vec<f64>> {
    forward_from(net, 0, x)
}

/// Index of the largest logit; ties break to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Predicted class of `x`: argmax over logits, lowest index on ties.
pub fn predict(net: &DenseNetwork, x: &[f64]) -> Result<usize> {
    Ok(argmax(&forward_logits(net, x)?))
}

/// Predicted class when `v` enters at layer `from` instead of the input.
pub fn predict_from(net: &DenseNetwork, from: usize, v: &[f64]) -> Result<usize> {
    Ok(argmax(&forward_from(net, from, v)?))
}

/// Forwards `v` through layers `from..to` (exclusive), i.e. computes the
/// activation vector that feeds layer `to`.
pub fn advance_features(net: &DenseNetwork, from: usize, to: usize, v: &[f64]) -> Result<Vec<f64>> {
    if to > net.num_layers() || from > to {
        return Err(Error::InvalidConfig("feature range out of order"));
    }
    let expected = if from == net.num_layers() {
        net.num_classes()
    } else {
        net.layer(from).in_dim()
    };
    if v.len() != expected {
        return Err(Error::InputShape {
            what: "layer input",
            expected,
            got: v.len(),
        });
    }
    let mut cur = v.to_vec();
    for layer in &net.layers()[from..to] {
        let mut next = vec![0.0; layer.out_dim()];
        layer.forward(&cur, &mut next);
        cur = next;
    }
    Ok(cur)
}

/// Post-activation vector entering the selected layer; for layer 0 this is
/// `x` itself. The prefix below the selected layer is frozen during an
/// attack, so this value is computed once per image and cached.
pub fn features_at(net: &DenseNetwork, sel: ParamSelector, x: &[f64]) -> Result<Vec<f64>> {
    sel.validate(net)?;
    advance_features(net, 0, sel.layer_index, x)
}

/// The selected layer with `delta` folded into its parameters, plus the
/// caches a suffix evaluation needs. Built once per solver iteration.
pub(crate) struct PerturbedSuffix<'a> {
    net: &'a DenseNetwork,
    sel: ParamSelector,
    layer: DenseLayer,
}

impl<'a> PerturbedSuffix<'a> {
    pub(crate) fn new(net: &'a DenseNetwork, sel: ParamSelector, delta: &[f64]) -> Result<Self> {
        sel.validate(net)?;
        let expected = sel.flat_len(net);
        if delta.len() != expected {
            return Err(Error::SelectorShape {
                expected,
                got: delta.len(),
            });
        }
        let mut layer = net.layer(sel.layer_index).clone();
        apply_delta(&mut layer, sel.kinds, delta);
        Ok(Self { net, sel, layer })
    }

    fn check_phi(&self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.layer.in_dim() {
            return Err(Error::InputShape {
                what: "selected-layer features",
                expected: self.layer.in_dim(),
                got: phi.len(),
            });
        }
        Ok(())
    }

    /// Logits of the suffix `sel.layer_index..` evaluated at `phi`.
    pub(crate) fn logits(&self, phi: &[f64]) -> Result<Vec<f64>> {
        self.check_phi(phi)?;
        let mut cur = vec![0.0; self.layer.out_dim()];
        self.layer.forward(phi, &mut cur);
        for layer in &self.net.layers()[self.sel.layer_index + 1..] {
            let mut next = vec![0.0; layer.out_dim()];
            layer.forward(&cur, &mut next);
            cur = next;
        }
        Ok(cur)
    }

    /// Vector-Jacobian product of the logits with respect to the selected
    /// parameters: backpropagates `cotangent` through the suffix and forms
    /// the flat gradient (row-major weights, then bias).
    pub(crate) fn grad(&self, phi: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        self.check_phi(phi)?;
        if cotangent.len() != self.net.num_classes() {
            return Err(Error::InputShape {
                what: "logit cotangent",
                expected: self.net.num_classes(),
                got: cotangent.len(),
            });
        }

        // Forward, caching each suffix layer's pre-activation.
        let suffix = &self.net.layers()[self.sel.layer_index + 1..];
        let mut preacts: Vec<Vec<f64>> = Vec::with_capacity(suffix.len() + 1);

        let mut z = vec![0.0; self.layer.out_dim()];
        self.layer.preactivate(phi, &mut z);
        let mut a: Vec<f64> = z.iter().map(|&v| self.layer.activation().apply(v)).collect();
        preacts.push(z);
        for layer in suffix {
            let mut z = vec![0.0; layer.out_dim()];
            layer.preactivate(&a, &mut z);
            a = z.iter().map(|&v| layer.activation().apply(v)).collect();
            preacts.push(z);
        }

        // Backward: cotangent on post-activations, pulled to pre-activations
        // and then through each layer's weights.
        let mut d_out = cotangent.to_vec();
        for (idx, layer) in suffix.iter().enumerate().rev() {
            let z = &preacts[idx + 1];
            let mut d_z = vec![0.0; layer.out_dim()];
            for r in 0..layer.out_dim() {
                d_z[r] = d_out[r] * layer.activation().grad_at(z[r]);
            }
            let mut d_in = vec![0.0; layer.in_dim()];
            for r in 0..layer.out_dim() {
                let row = &layer.weights()[r * layer.in_dim()..(r + 1) * layer.in_dim()];
                let dzr = d_z[r];
                if dzr != 0.0 {
                    for (di, w) in d_in.iter_mut().zip(row) {
                        *di += w * dzr;
                    }
                }
            }
            d_out = d_in;
        }

        // At the selected layer: parameter gradients from its pre-activation
        // cotangent and its input phi.
        let z0 = &preacts[0];
        let out_dim = self.layer.out_dim();
        let in_dim = self.layer.in_dim();
        let mut d_z0 = vec![0.0; out_dim];
        for r in 0..out_dim {
            d_z0[r] = d_out[r] * self.layer.activation().grad_at(z0[r]);
        }

        let mut grad = vec![0.0; self.sel.flat_len(self.net)];
        match self.sel.kinds {
            ParamKinds::WeightsOnly => {
                for r in 0..out_dim {
                    let dzr = d_z0[r];
                    let row = &mut grad[r * in_dim..(r + 1) * in_dim];
                    for (g, x) in row.iter_mut().zip(phi) {
                        *g = dzr * x;
                    }
                }
            }
            ParamKinds::BiasOnly => {
                grad.copy_from_slice(&d_z0);
            }
            ParamKinds::Both => {
                let n_w = out_dim * in_dim;
                for r in 0..out_dim {
                    let dzr = d_z0[r];
                    let row = &mut grad[r * in_dim..(r + 1) * in_dim];
                    for (g, x) in row.iter_mut().zip(phi) {
                        *g = dzr * x;
                    }
                }
                grad[n_w..].copy_from_slice(&d_z0);
            }
        }
        Ok(grad)
    }
}

/// Logits of `Z(theta + delta, x)` given the cached features `phi` feeding
/// the selected layer. Layers other than the selected one are untouched.
pub fn suffix_logits(
    net: &DenseNetwork,
    sel: ParamSelector,
    phi: &[f64],
    delta: &[f64],
) -> Result<Vec<f64>> {
    PerturbedSuffix::new(net, sel, delta)?.logits(phi)
}

/// Vector-Jacobian product `(dZ/d(selected params))^T . cotangent` evaluated
/// at `theta + delta`, via backpropagation through the suffix layers.
pub fn suffix_grad(
    net: &DenseNetwork,
    sel: ParamSelector,
    phi: &[f64],
    delta: &[f64],
    logit_cotangent: &[f64],
) -> Result<Vec<f64>> {
    PerturbedSuffix::new(net, sel, delta)?.grad(phi, logit_cotangent)
}
