//! A small multilayer perceptron with hand-written reverse mode.
//!
//! Hidden layers apply a smooth activation; the output layer is affine. Each
//! layer stores its weight as `out × in`, so a batch `x` (one sample per row)
//! maps to `x·Wᵀ + b`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::decoder::Decoder;
use crate::error::{invalid, Error, Result};
use crate::linalg::{matmul, matmul_tn, Matrix};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    #[default]
    Tanh,
    Softplus,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(x),
            // log(1 + e^x) without overflow
            Activation::Softplus => x.max(0.0) + libm::log1p(libm::exp(-libm::fabs(x))),
        }
    }

    /// Derivative given the pre-activation `x` and the activation value `y`.
    #[inline]
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Softplus => {
                if x >= 0.0 {
                    1.0 / (1.0 + libm::exp(-x))
                } else {
                    let e = libm::exp(x);
                    e / (1.0 + e)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`.
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    fn affine(&self, x: &Matrix) -> Matrix {
        let (n, out) = (x.rows(), self.out_dim());
        let mut y = Matrix::zeros(n, out);
        for r in 0..n {
            let xr = x.row(r);
            for (o, yo) in y.row_mut(r).iter_mut().enumerate() {
                *yo = self.bias[o] + crate::linalg::dot(self.weight.row(o), xr);
            }
        }
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    activation: Activation,
    layers: Vec<Layer>,
}

/// Parameter gradients shaped like the model, plus the gradient with respect
/// to the input batch.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub input: Option<Matrix>,
}

impl GradientBundle {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.out_dim(), l.in_dim()))
                .collect(),
            biases: model.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
            input: None,
        }
    }

    /// Adds the parameter gradients of `other` (input gradients are dropped).
    pub fn accumulate(&mut self, other: &GradientBundle) {
        for (w, o) in self.weights.iter_mut().zip(&other.weights) {
            for (a, b) in w.data_mut().iter_mut().zip(o.data()) {
                *a += b;
            }
        }
        for (bias, o) in self.biases.iter_mut().zip(&other.biases) {
            for (a, b) in bias.iter_mut().zip(o) {
                *a += b;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite()) && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    /// Flat view in the model's canonical parameter order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }
}

/// Cached activations of one forward pass.
struct Tape {
    /// `inputs[l]` is the input of layer `l`; the final entry is the output.
    inputs: Vec<Matrix>,
    /// Pre-activations of every layer.
    pre: Vec<Matrix>,
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases.
    pub fn new(layer_sizes: &[usize], activation: Activation, rng: &mut SplitMix64) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
                Layer {
                    weight: Matrix::from_fn(fan_out, fan_in, |_, _| rng.uniform(-limit, limit)),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self { activation, layers })
    }

    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer {
                weight: Matrix::zeros(w[1], w[0]),
                bias: vec![0.0; w[1]],
            })
            .collect();
        Ok(Self { activation, layers })
    }

    pub fn from_layers(activation: Activation, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("a model needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(invalid(format!(
                    "layer {i}: bias has {} entries for {} outputs",
                    l.bias.len(),
                    l.out_dim()
                )));
            }
            if i > 0 && layers[i - 1].out_dim() != l.in_dim() {
                return Err(invalid(format!(
                    "layer {i} expects {} inputs but layer {} produces {}",
                    l.in_dim(),
                    i - 1,
                    layers[i - 1].out_dim()
                )));
            }
        }
        let model = Self { activation, layers };
        if !model.is_finite() {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(model)
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(Layer::out_dim));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.data().len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                op: "mlp forward",
                left: x.shape(),
                right: (self.input_dim(), self.output_dim()),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut pre = layer.affine(&h);
            if l < last {
                pre.data_mut().iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            h = pre;
        }
        Ok(h)
    }

    fn forward_tape(&self, x: &Matrix) -> Result<Tape> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_all = Vec::with_capacity(self.layers.len());
        inputs.push(x.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            let pre = layer.affine(&inputs[l]);
            let out = if l < last {
                let mut o = pre.clone();
                o.data_mut().iter_mut().for_each(|v| *v = self.activation.apply(*v));
                o
            } else {
                pre.clone()
            };
            pre_all.push(pre);
            inputs.push(out);
        }
        Ok(Tape {
            inputs,
            pre: pre_all,
        })
    }

    /// Reverse sweep. Returns parameter gradients (when requested) and the
    /// input gradient.
    fn reverse(&self, tape: &Tape, upstream: &Matrix, params: bool) -> Result<(Option<GradientBundle>, Matrix)> {
        let last = self.layers.len() - 1;
        let mut grads = params.then(|| GradientBundle::zeros_like(self));
        let mut delta = upstream.clone();
        for l in (0..self.layers.len()).rev() {
            if l < last {
                let pre = &tape.pre[l];
                let out = &tape.inputs[l + 1];
                for ((d, &x), &y) in delta.data_mut().iter_mut().zip(pre.data()).zip(out.data()) {
                    *d *= self.activation.derivative(x, y);
                }
            }
            if let Some(g) = grads.as_mut() {
                g.weights[l] = matmul_tn(&delta, &tape.inputs[l])?;
                let bias = &mut g.biases[l];
                for r in 0..delta.rows() {
                    for (b, d) in bias.iter_mut().zip(delta.row(r)) {
                        *b += d;
                    }
                }
            }
            delta = matmul(&delta, &self.layers[l].weight)?;
        }
        Ok((grads, delta))
    }

    /// Exact gradients of `⟨upstream, forward(x)⟩` with respect to every
    /// parameter and to `x`.
    pub fn backward(&self, x: &Matrix, upstream: &Matrix) -> Result<GradientBundle> {
        let tape = self.forward_tape(x)?;
        let out = &tape.inputs[self.layers.len()];
        if upstream.shape() != out.shape() {
            return Err(Error::DimensionMismatch {
                op: "mlp backward",
                left: out.shape(),
                right: upstream.shape(),
            });
        }
        let (grads, input) = self.reverse(&tape, upstream, true)?;
        let mut grads = grads.expect("parameter gradients requested");
        grads.input = Some(input);
        Ok(grads)
    }

    /// `output_dim × input_dim` Jacobian at `z`, one reverse sweep per output.
    pub fn input_jacobian(&self, z: &[f64]) -> Result<Matrix> {
        let x = Matrix::new(1, z.len(), z.to_vec())?;
        let tape = self.forward_tape(&x)?;
        let (out, inp) = (self.output_dim(), self.input_dim());
        let mut jac = Matrix::zeros(out, inp);
        let mut onehot = Matrix::zeros(1, out);
        for i in 0..out {
            onehot.data_mut().fill(0.0);
            onehot[(0, i)] = 1.0;
            let (_, row) = self.reverse(&tape, &onehot, false)?;
            jac.row_mut(i).copy_from_slice(row.row(0));
        }
        Ok(jac)
    }

    /// Vector–Jacobian products with respect to the inputs only.
    pub fn input_pullback(&self, x: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        let tape = self.forward_tape(x)?;
        let out = &tape.inputs[self.layers.len()];
        if upstream.shape() != out.shape() {
            return Err(Error::DimensionMismatch {
                op: "mlp pullback",
                left: out.shape(),
                right: upstream.shape(),
            });
        }
        Ok(self.reverse(&tape, upstream, false)?.1)
    }

    /// Visits every parameter slice in canonical order (per layer: weight, bias).
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for l in &mut self.layers {
            f(l.weight.data_mut());
            f(&mut l.bias);
        }
    }

    /// All parameters flattened in canonical order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Overwrites all parameters from a flat vector in canonical order.
    pub fn set_flat(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count());
        let mut off = 0;
        self.for_each_param_mut(|s| {
            s.copy_from_slice(&p[off..off + s.len()]);
            off += s.len();
        });
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(invalid(format!(
            "layer sizes need at least an input and an output dimension, all positive (got {sizes:?})"
        )));
    }
    Ok(())
}

impl Decoder for MlpModel {
    fn latent_dim(&self) -> usize {
        self.input_dim()
    }

    fn ambient_dim(&self) -> usize {
        self.output_dim()
    }

    fn decode(&self, z: &Matrix) -> Result<Matrix> {
        self.forward(z)
    }

    fn pullback(&self, z: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        self.input_pullback(z, upstream)
    }

    fn jacobian(&self, z: &[f64]) -> Result<Matrix> {
        self.input_jacobian(z)
    }
}

/// Adaptive-moment hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
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

/// First and second moment estimates over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn for_model(model: &MlpModel) -> Self {
        Self::new(model.param_count())
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update of `params` in place.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], cfg: &AdamConfig) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                op: "adam",
                left: (params.len(), 1),
                right: (grads.len(), self.m.len()),
            });
        }
        if !grads.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.step += 1;
        let c1 = 1.0 - libm::pow(cfg.beta1, self.step as f64);
        let c2 = 1.0 - libm::pow(cfg.beta2, self.step as f64);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= cfg.lr * m_hat / (libm::sqrt(v_hat) + cfg.eps);
        }
        if !params.iter().all(|p| p.is_finite()) {
            return Err(Error::NonFinite("parameters after optimizer step".into()));
        }
        Ok(())
    }
}

/// Applies one optimizer step to `model` from `grads`.
pub fn adam_step(model: &mut MlpModel, grads: &GradientBundle, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    let mut flat = model.flatten();
    state.update(&mut flat, &grads.flatten(), cfg)?;
    model.set_flat(&flat);
    Ok(())
}
