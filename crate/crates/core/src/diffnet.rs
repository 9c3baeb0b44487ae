//! Dense feed-forward networks with exact reverse-mode gradients, plus Adam.
//!
//! Weights of a layer are stored row-major as `out_dim x in_dim`, followed by
//! an `out_dim` bias; a layer computes `act(W x + b)` row by row.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use num_traits::Float;

use crate::rng::Rng;
use crate::{Error, Matrix, Result};

const LEAKY_SLOPE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Relu,
    /// Slope 0.1 on the negative side.
    LeakyRelu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative at the pre-activation `z`; the kink of (leaky) ReLU at 0
    /// takes the left slope.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn weight_len(&self) -> usize {
        self.in_dim * self.out_dim
    }

    pub fn param_len(&self) -> usize {
        self.weight_len() + self.out_dim
    }
}

/// Check that every layer has positive dimensions and that consecutive
/// layers agree on their shared dimension.
pub fn validate_chain(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Config("a network needs at least one layer".into()));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::Config(format!("layer {i} has a zero dimension")));
        }
    }
    for (i, pair) in specs.windows(2).enumerate() {
        if pair[0].out_dim != pair[1].in_dim {
            return Err(Error::Config(format!(
                "layer {i} outputs {} values but layer {} expects {}",
                pair[0].out_dim,
                i + 1,
                pair[1].in_dim
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

impl Segment {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Flat parameter vector split into uniquely named contiguous segments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    segments: Vec<Segment>,
    values: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_segment(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Range<usize>> {
        let name = name.into();
        if self.segments.iter().any(|s| s.name == name) {
            return Err(Error::Config(format!("duplicate parameter segment `{name}`")));
        }
        let offset = self.values.len();
        let len = values.len();
        self.values.extend(values);
        self.segments.push(Segment { name, offset, len });
        Ok(offset..offset + len)
    }

    pub fn total_len(&self) -> usize {
        self.values.len()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        self.segments.iter().find(|s| s.name == name).map(Segment::range)
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        self.range(name).map(|r| &self.values[r])
    }

    pub fn segment_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let r = self.range(name)?;
        Some(&mut self.values[r])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// A zeroed buffer of matching length, for gradients.
    pub fn zero_grad(&self) -> Vec<f64> {
        vec![0.0; self.values.len()]
    }
}

/// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for weights and biases.
pub(crate) fn init_layer_values(spec: &LayerSpec, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    let bound = 1.0 / (spec.in_dim as f64).sqrt();
    let mut draw = || (2.0 * rng.uniform() - 1.0) * bound;
    let weight = (0..spec.weight_len()).map(|_| draw()).collect();
    let bias = (0..spec.out_dim).map(|_| draw()).collect();
    (weight, bias)
}

pub fn weight_segment_name(layer: usize) -> String {
    format!("layer{layer}.weight")
}

pub fn bias_segment_name(layer: usize) -> String {
    format!("layer{layer}.bias")
}

/// Weights and biases for a plain MLP; segments are named
/// `layer{i}.weight` / `layer{i}.bias`.
pub fn init_mlp(specs: &[LayerSpec], seed: u64) -> Result<ParamStore> {
    validate_chain(specs)?;
    let mut rng = Rng::new(seed);
    let mut store = ParamStore::new();
    for (i, spec) in specs.iter().enumerate() {
        let (w, b) = init_layer_values(spec, &mut rng);
        store.push_segment(weight_segment_name(i), w)?;
        store.push_segment(bias_segment_name(i), b)?;
    }
    Ok(store)
}

/// Parameter ranges of one dense layer inside some flat buffer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSlots {
    pub spec: LayerSpec,
    pub weight: Range<usize>,
    pub bias: Range<usize>,
}

/// Locate the layers of a plain MLP in a store built by [`init_mlp`].
pub fn mlp_slots(params: &ParamStore, specs: &[LayerSpec]) -> Result<Vec<LayerSlots>> {
    validate_chain(specs)?;
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let weight = params
                .range(&weight_segment_name(i))
                .ok_or_else(|| Error::Shape(format!("missing segment {}", weight_segment_name(i))))?;
            let bias = params
                .range(&bias_segment_name(i))
                .ok_or_else(|| Error::Shape(format!("missing segment {}", bias_segment_name(i))))?;
            if weight.len() != spec.weight_len() || bias.len() != spec.out_dim {
                return Err(Error::Shape(format!("layer {i} segments do not match its spec")));
            }
            Ok(LayerSlots {
                spec: *spec,
                weight,
                bias,
            })
        })
        .collect()
}

/// Intermediate values of a forward pass, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    /// Input to each layer.
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre: Vec<Matrix>,
    output: Matrix,
}

impl Tape {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn into_output(self) -> Matrix {
        self.output
    }
}

fn dense_forward(slots: &LayerSlots, values: &[f64], x: &Matrix) -> (Matrix, Matrix) {
    let spec = &slots.spec;
    let w = &values[slots.weight.clone()];
    let b = &values[slots.bias.clone()];
    let mut pre = Matrix::zeros(x.rows(), spec.out_dim);
    let mut post = Matrix::zeros(x.rows(), spec.out_dim);
    for r in 0..x.rows() {
        let xr = x.row(r);
        let zr = pre.row_mut(r);
        for (o, z) in zr.iter_mut().enumerate() {
            let wo = &w[o * spec.in_dim..(o + 1) * spec.in_dim];
            let mut acc = b[o];
            for (wi, xi) in wo.iter().zip(xr) {
                acc += wi * xi;
            }
            *z = acc;
        }
        for (p, z) in post.row_mut(r).iter_mut().zip(pre.row(r)) {
            *p = spec.activation.apply(*z);
        }
    }
    (pre, post)
}

/// Forward pass through `layers` whose parameters live in `values`.
pub fn forward_slots(layers: &[LayerSlots], values: &[f64], x: &Matrix) -> Result<Tape> {
    let first = layers
        .first()
        .ok_or_else(|| Error::Config("a network needs at least one layer".into()))?;
    if x.cols() != first.spec.in_dim {
        return Err(Error::Shape(format!(
            "input has {} columns, network expects {}",
            x.cols(),
            first.spec.in_dim
        )));
    }
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut current = x.clone();
    for slots in layers {
        let (z, a) = dense_forward(slots, values, &current);
        inputs.push(current);
        pre.push(z);
        current = a;
    }
    Ok(Tape {
        inputs,
        pre,
        output: current,
    })
}

/// Backward pass: accumulates `d<output, upstream>/dparams` into `grad`
/// (same indexing as `values`) and returns the gradient with respect to the
/// network input.
pub fn backward_slots(
    layers: &[LayerSlots],
    values: &[f64],
    tape: &Tape,
    upstream: &Matrix,
    grad: &mut [f64],
) -> Result<Matrix> {
    if upstream.rows() != tape.output.rows() || upstream.cols() != tape.output.cols() {
        return Err(Error::Shape(format!(
            "upstream gradient is {}x{}, output is {}x{}",
            upstream.rows(),
            upstream.cols(),
            tape.output.rows(),
            tape.output.cols()
        )));
    }
    let mut delta = upstream.clone();
    for (l, slots) in layers.iter().enumerate().rev() {
        let spec = &slots.spec;
        let input = &tape.inputs[l];
        let pre = &tape.pre[l];
        // delta <- delta * act'(pre)
        if spec.activation != Activation::Identity {
            for (d, z) in delta.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                *d *= spec.activation.derivative(*z);
            }
        }
        let w = &values[slots.weight.clone()];
        {
            let gw = &mut grad[slots.weight.clone()];
            for r in 0..input.rows() {
                let xr = input.row(r);
                for (o, d) in delta.row(r).iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    for (g, xi) in gw[o * spec.in_dim..(o + 1) * spec.in_dim].iter_mut().zip(xr) {
                        *g += d * xi;
                    }
                }
            }
        }
        {
            let gb = &mut grad[slots.bias.clone()];
            for r in 0..delta.rows() {
                for (g, d) in gb.iter_mut().zip(delta.row(r)) {
                    *g += d;
                }
            }
        }
        let mut next = Matrix::zeros(input.rows(), spec.in_dim);
        for r in 0..input.rows() {
            let nr = next.row_mut(r);
            for (o, d) in delta.row(r).iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (n, wi) in nr.iter_mut().zip(&w[o * spec.in_dim..(o + 1) * spec.in_dim]) {
                    *n += d * wi;
                }
            }
        }
        delta = next;
    }
    Ok(delta)
}

/// Evaluate a plain MLP on a batch (one sample per row).
pub fn forward(params: &ParamStore, specs: &[LayerSpec], x: &Matrix) -> Result<Matrix> {
    let slots = mlp_slots(params, specs)?;
    Ok(forward_slots(&slots, params.values(), x)?.into_output())
}

/// Gradients of `sum_rows <net(x), upstream>` with respect to the parameters
/// (laid out like `params`) and to `x`.
pub fn backward(
    params: &ParamStore,
    specs: &[LayerSpec],
    x: &Matrix,
    upstream: &Matrix,
) -> Result<(Vec<f64>, Matrix)> {
    let slots = mlp_slots(params, specs)?;
    let tape = forward_slots(&slots, params.values(), x)?;
    let mut grad = params.zero_grad();
    let dx = backward_slots(&slots, params.values(), &tape, upstream, &mut grad)?;
    Ok((grad, dx))
}

/// Adam moments and hyperparameters for one flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamState {
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.eps > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid Adam hyperparameters: lr={} beta1={} beta2={} eps={}",
                self.lr, self.beta1, self.beta2, self.eps
            )))
        }
    }
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            step_count: 0,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            lr: config.lr,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.eps,
        })
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if grads.len() != params.len()
        || state.first_moment.len() != params.len()
        || state.second_moment.len() != params.len()
    {
        return Err(Error::Shape(format!(
            "Adam lengths differ: params {}, grads {}, moments {}/{}",
            params.len(),
            grads.len(),
            state.first_moment.len(),
            state.second_moment.len()
        )));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2) = (state.beta1, state.beta2);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Shape of a mixture of encoder/decoder pairs.
///
/// Encoders are `D -> hidden[0] -> ... -> hidden[L-1] -> d`; decoders mirror
/// them. The last encoder layer and the first decoder layer are free per
/// cluster; all other layers are shared by the K pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MixtureArchitecture {
    pub ambient_dim: usize,
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub clusters: usize,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl MixtureArchitecture {
    pub fn new(ambient_dim: usize, latent_dim: usize, hidden: Vec<usize>, clusters: usize) -> Self {
        Self {
            ambient_dim,
            latent_dim,
            hidden,
            clusters,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ambient_dim == 0 || self.latent_dim == 0 || self.clusters == 0 {
            return Err(Error::Config(
                "ambient dimension, latent dimension and cluster count must be positive".into(),
            ));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        Ok(())
    }

    fn chain(&self, dims: &[usize]) -> Vec<LayerSpec> {
        let last = dims.len() - 2;
        dims.windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last {
                    self.output_activation
                } else {
                    self.hidden_activation
                };
                LayerSpec::new(w[0], w[1], act)
            })
            .collect()
    }

    /// Full layer list of one encoder.
    pub fn encoder_layers(&self) -> Vec<LayerSpec> {
        let mut dims = vec![self.ambient_dim];
        dims.extend(self.hidden.iter().copied());
        dims.push(self.latent_dim);
        self.chain(&dims)
    }

    /// Full layer list of one decoder.
    pub fn decoder_layers(&self) -> Vec<LayerSpec> {
        let mut dims = vec![self.latent_dim];
        dims.extend(self.hidden.iter().rev().copied());
        dims.push(self.ambient_dim);
        self.chain(&dims)
    }

    /// Number of trainable scalars: shared layers once, free layers once per
    /// cluster.
    pub fn param_count(&self) -> usize {
        let enc = self.encoder_layers();
        let dec = self.decoder_layers();
        let (enc_head, enc_trunk) = enc.split_last().expect("encoder has a layer");
        let (dec_head, dec_trunk) = dec.split_first().expect("decoder has a layer");
        let shared: usize = enc_trunk.iter().chain(dec_trunk).map(LayerSpec::param_len).sum();
        shared + self.clusters * (enc_head.param_len() + dec_head.param_len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relu_net() -> [LayerSpec; 2] {
        [
            LayerSpec::new(2, 128, Activation::Relu),
            LayerSpec::new(128, 1, Activation::Identity),
        ]
    }

    #[test]
    fn init_counts_weights_and_biases() {
        let store = init_mlp(&relu_net(), 5).unwrap();
        // 2*128 + 128 + 128*1 + 1
        assert_eq!(store.total_len(), 513);
        assert_eq!(store.segments().len(), 4);
    }

    #[test]
    fn init_is_deterministic() {
        let specs = [LayerSpec::new(1, 1, Activation::Identity)];
        assert_eq!(init_mlp(&specs, 0).unwrap(), init_mlp(&specs, 0).unwrap());
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let store = init_mlp(&relu_net(), 9).unwrap();
        let w1 = store.segment("layer1.weight").unwrap();
        let bound = 1.0 / (128f64).sqrt();
        assert!(w1.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn chain_mismatch_is_config_error() {
        let specs = [
            LayerSpec::new(2, 3, Activation::Relu),
            LayerSpec::new(4, 1, Activation::Identity),
        ];
        assert!(matches!(init_mlp(&specs, 0), Err(Error::Config(_))));
    }

    #[test]
    fn duplicate_segment_rejected() {
        let mut store = ParamStore::new();
        store.push_segment("a", vec![1.0]).unwrap();
        assert!(store.push_segment("a", vec![2.0]).is_err());
    }

    fn scalar_net(w: f64, b: f64, act: Activation) -> (ParamStore, [LayerSpec; 1]) {
        let specs = [LayerSpec::new(1, 1, act)];
        let mut store = init_mlp(&specs, 0).unwrap();
        store.segment_mut("layer0.weight").unwrap()[0] = w;
        store.segment_mut("layer0.bias").unwrap()[0] = b;
        (store, specs)
    }

    #[test]
    fn identity_forward() {
        let (p, s) = scalar_net(1.0, 0.0, Activation::Identity);
        let y = forward(&p, &s, &Matrix::column(&[3.5])).unwrap();
        assert_eq!(y.as_slice(), &[3.5]);
    }

    #[test]
    fn relu_clamps() {
        let (p, s) = scalar_net(1.0, 0.0, Activation::Relu);
        let y = forward(&p, &s, &Matrix::column(&[-2.0])).unwrap();
        assert_eq!(y.as_slice(), &[0.0]);
    }

    #[test]
    fn identical_rows_identical_outputs() {
        let specs = relu_net();
        let p = init_mlp(&specs, 3).unwrap();
        let x = Matrix::from_rows(&[[0.3, -1.2], [0.3, -1.2]]).unwrap();
        let y = forward(&p, &specs, &x).unwrap();
        assert_eq!(y.row(0), y.row(1));
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let specs = relu_net();
        let p = init_mlp(&specs, 3).unwrap();
        assert!(matches!(
            forward(&p, &specs, &Matrix::column(&[1.0])),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn linear_backward_by_hand() {
        let w = 0.7;
        let (p, s) = scalar_net(w, 0.2, Activation::Identity);
        let (g, dx) = backward(&p, &s, &Matrix::column(&[2.0]), &Matrix::column(&[1.0])).unwrap();
        assert_eq!(g, vec![2.0, 1.0]);
        assert_eq!(dx.as_slice(), &[w]);
    }

    #[test]
    fn zero_upstream_zero_grad() {
        let specs = relu_net();
        let p = init_mlp(&specs, 4).unwrap();
        let x = Matrix::from_rows(&[[0.1, 0.2], [1.0, -3.0]]).unwrap();
        let (g, dx) = backward(&p, &specs, &x, &Matrix::zeros(2, 1)).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
        assert!(dx.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn backward_rejects_upstream_shape() {
        let specs = relu_net();
        let p = init_mlp(&specs, 4).unwrap();
        let x = Matrix::from_rows(&[[0.1, 0.2]]).unwrap();
        assert!(backward(&p, &specs, &x, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn adam_zero_grad_keeps_params() {
        let mut params = vec![0.5, -1.0];
        let mut state = AdamState::new(2, AdamConfig::default()).unwrap();
        adam_step(&mut params, &[0.0, 0.0], &mut state).unwrap();
        assert_eq!(params, vec![0.5, -1.0]);
    }

    #[test]
    fn adam_first_step_by_hand() {
        let cfg = AdamConfig::default();
        let mut params = vec![0.0];
        let mut state = AdamState::new(1, cfg).unwrap();
        adam_step(&mut params, &[1.0], &mut state).unwrap();
        // m_hat = v_hat = 1 after bias correction.
        let expected = -cfg.lr / (1.0 + cfg.eps);
        assert!((params[0] - expected).abs() < 1e-15);
        assert!((params[0] + 0.001).abs() < 1e-9);
    }

    #[test]
    fn adam_counts_steps() {
        let mut params = vec![0.0];
        let mut state = AdamState::new(1, AdamConfig::default()).unwrap();
        adam_step(&mut params, &[1.0], &mut state).unwrap();
        adam_step(&mut params, &[1.0], &mut state).unwrap();
        assert_eq!(state.step_count, 2);
    }

    #[test]
    fn adam_rejects_length_mismatch() {
        let mut params = vec![0.0, 1.0];
        let mut state = AdamState::new(2, AdamConfig::default()).unwrap();
        assert!(adam_step(&mut params, &[1.0], &mut state).is_err());
    }

    #[test]
    fn adam_rejects_bad_betas() {
        let cfg = AdamConfig {
            beta1: 1.0,
            ..AdamConfig::default()
        };
        assert!(AdamState::new(1, cfg).is_err());
    }

    #[test]
    fn table_parameter_counts() {
        let spiral = |k, hidden: Vec<usize>| MixtureArchitecture::new(2, 1, hidden, k).param_count();
        let torus = |k, hidden: Vec<usize>| MixtureArchitecture::new(3, 2, hidden, k).param_count();
        assert_eq!(spiral(10, vec![128]), 4492);
        assert_eq!(spiral(1, vec![128]), 1027);
        assert_eq!(spiral(1, vec![128, 128]), 34051);
        assert_eq!(torus(15, vec![128]), 10529);
        assert_eq!(torus(1, vec![128, 128]), 34565);
        // Same arithmetic for the torus single-pair, single-hidden-layer cell.
        assert_eq!(torus(1, vec![128]), 1541);
    }
}
