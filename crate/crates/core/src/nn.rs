//! Dense ReLU networks with inverted dropout on hidden units, hand-written
//! reverse-mode gradients and Adam.
//!
//! Weights are stored `out × in`, row-major. A forward pass over a batch
//! records a [`Tape`] holding, per hidden layer, the post-activation values
//! and the elementwise gate `mask · 1[z > 0]`; the backward pass only needs
//! those two matrices and the layer weights.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::linalg::{gemm, Matrix};
use crate::math;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("layer sizes must list input, at least one hidden layer and output, all >= 1: {0:?}")]
    InvalidLayerSizes(Vec<usize>),
    #[error("drop rate must lie in [0, 1), got {0}")]
    InvalidDropRate(f64),
    #[error("layer {layer} expects {expected} inputs but the previous layer yields {got}")]
    BrokenChain { layer: usize, expected: usize, got: usize },
    #[error("input dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("mask does not fit the network: {0}")]
    MaskMismatch(&'static str),
    #[error("gradient shape does not match parameters")]
    GradientShape,
    #[error("non-finite gradient in parameter tensor {tensor}")]
    NonFiniteGradient { tensor: usize },
    #[error("non-finite parameter in layer {0}")]
    NonFiniteParameter(usize),
}

/// Output head of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// `m` point predictions.
    Point,
    /// `m` means followed by `m` unconstrained scale outputs.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
    head: Head,
    drop_rate: f64,
}

fn check_drop_rate(p: f64) -> Result<(), NnError> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(NnError::InvalidDropRate(p))
    }
}

impl Mlp {
    /// Randomly initialized network.
    ///
    /// `sizes` is `[input, hidden.., outputs]`; a Gaussian head doubles the
    /// width of the final layer. Hidden layers get He-normal weights, the
    /// output layer Glorot-uniform, all biases start at zero.
    pub fn new(sizes: &[usize], head: Head, drop_rate: f64, rng: &mut SeededRng) -> Result<Self, NnError> {
        if sizes.len() < 3 || sizes.contains(&0) {
            return Err(NnError::InvalidLayerSizes(sizes.to_vec()));
        }
        check_drop_rate(drop_rate)?;
        let n_layers = sizes.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for k in 0..n_layers {
            let fan_in = sizes[k];
            let last = k + 1 == n_layers;
            let fan_out = if last && head == Head::Gaussian { 2 * sizes[k + 1] } else { sizes[k + 1] };
            let mut weights = Matrix::zeros(fan_out, fan_in);
            if last {
                let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
                weights.as_mut_slice().iter_mut().for_each(|w| *w = rng.uniform_range(-limit, limit));
            } else {
                let std = math::sqrt(2.0 / fan_in as f64);
                weights.as_mut_slice().iter_mut().for_each(|w| *w = std * rng.standard_normal());
            }
            layers.push(Layer { weights, bias: vec![0.0; fan_out] });
        }
        Ok(Self { layers, head, drop_rate })
    }

    /// Network from explicit layers. Zero hidden layers are allowed here.
    pub fn from_layers(layers: Vec<Layer>, head: Head, drop_rate: f64) -> Result<Self, NnError> {
        let model = Self { layers, head, drop_rate };
        model.validate()?;
        Ok(model)
    }

    /// Checks chaining, drop rate, head width and finiteness.
    pub fn validate(&self) -> Result<(), NnError> {
        check_drop_rate(self.drop_rate)?;
        if self.layers.is_empty() {
            return Err(NnError::InvalidLayerSizes(Vec::new()));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.bias.len() != layer.outputs() || layer.inputs() == 0 || layer.outputs() == 0 {
                return Err(NnError::InvalidLayerSizes(self.sizes()));
            }
            if k > 0 {
                let prev = self.layers[k - 1].outputs();
                if prev != layer.inputs() {
                    return Err(NnError::BrokenChain { layer: k, expected: layer.inputs(), got: prev });
                }
            }
            if !layer.weights.is_finite() || layer.bias.iter().any(|b| !b.is_finite()) {
                return Err(NnError::NonFiniteParameter(k));
            }
        }
        if self.head == Head::Gaussian && !self.raw_output_dim().is_multiple_of(2) {
            return Err(NnError::InvalidLayerSizes(self.sizes()));
        }
        Ok(())
    }

    /// `[input, hidden.., raw outputs]`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.layers.len() + 1);
        if let Some(first) = self.layers.first() {
            s.push(first.inputs());
        }
        s.extend(self.layers.iter().map(Layer::outputs));
        s
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn drop_rate(&self) -> f64 {
        self.drop_rate
    }

    pub fn set_drop_rate(&mut self, p: f64) -> Result<(), NnError> {
        check_drop_rate(p)?;
        self.drop_rate = p;
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    /// Width of the final affine layer.
    pub fn raw_output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    /// Number of predicted target coordinates `m`.
    pub fn output_dim(&self) -> usize {
        match self.head {
            Head::Point => self.raw_output_dim(),
            Head::Gaussian => self.raw_output_dim() / 2,
        }
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(Layer::outputs).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.bias.len()).sum()
    }

    /// Parameter tensors in the order weights0, bias0, weights1, ...
    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()]).collect()
    }

    /// Single-input forward pass; `None` runs the full network.
    pub fn forward(&self, x: &[f64], mask: Option<&DropoutMask>) -> Result<Vec<f64>, NnError> {
        if x.len() != self.input_dim() {
            return Err(NnError::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        if let Some(m) = mask {
            m.check(self)?;
        }
        let last = self.layers.len() - 1;
        let mut h = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z: Vec<f64> =
                (0..layer.outputs()).map(|o| crate::linalg::dot(layer.weights.row(o), &h) + layer.bias[o]).collect();
            if k < last {
                for (j, v) in z.iter_mut().enumerate() {
                    let f = mask.map_or(1.0, |m| m.factor(k, j));
                    *v = if *v > 0.0 { *v * f } else { 0.0 };
                }
            }
            h = z;
        }
        Ok(h)
    }

    /// Batched forward pass recording what [`Mlp::backward`] needs.
    pub fn forward_batch(&self, x: &Matrix, masking: Masking<'_>) -> Result<Tape, NnError> {
        if x.cols() != self.input_dim() {
            return Err(NnError::DimensionMismatch { expected: self.input_dim(), got: x.cols() });
        }
        let batch = x.rows();
        match masking {
            Masking::Full => {}
            Masking::Shared(m) => m.check(self)?,
            Masking::PerRow(ms) => {
                if ms.len() != batch {
                    return Err(NnError::MaskMismatch("one mask per row required"));
                }
                for m in ms {
                    m.check(self)?;
                }
            }
        }
        let last = self.layers.len() - 1;
        let mut acts: Vec<Matrix> = Vec::with_capacity(last);
        let mut gates: Vec<Matrix> = Vec::with_capacity(last);
        let mut output = Matrix::zeros(0, 0);
        for (k, layer) in self.layers.iter().enumerate() {
            let input = if k == 0 { x } else { &acts[k - 1] };
            let mut z = Matrix::zeros(batch, layer.outputs());
            for r in 0..batch {
                z.row_mut(r).copy_from_slice(&layer.bias);
            }
            gemm(1.0, input, false, &layer.weights, true, 1.0, &mut z).expect("shapes checked");
            if k == last {
                output = z;
                break;
            }
            let mut gate = Matrix::zeros(batch, layer.outputs());
            for r in 0..batch {
                let zr = z.row_mut(r);
                let gr = gate.row_mut(r);
                match masking {
                    Masking::Full => {
                        for (zv, g) in zr.iter_mut().zip(gr.iter_mut()) {
                            *g = if *zv > 0.0 { 1.0 } else { 0.0 };
                            *zv *= *g;
                        }
                    }
                    Masking::Shared(m) => m.apply_row(k, zr, gr),
                    Masking::PerRow(ms) => ms[r].apply_row(k, zr, gr),
                }
            }
            acts.push(z);
            gates.push(gate);
        }
        Ok(Tape { input: x.clone(), acts, gates, output })
    }

    /// Accumulates into `grads` the gradient of a scalar loss whose adjoint
    /// with respect to `tape.output` is `d_output`.
    pub fn backward(&self, tape: &Tape, d_output: &Matrix, grads: &mut Gradients) -> Result<(), NnError> {
        if d_output.shape() != tape.output.shape() {
            return Err(NnError::GradientShape);
        }
        grads.check(self)?;
        let mut delta = d_output.clone();
        for k in (0..self.layers.len()).rev() {
            let input = if k == 0 { &tape.input } else { &tape.acts[k - 1] };
            let g = &mut grads.layers[k];
            gemm(1.0, &delta, true, input, false, 1.0, &mut g.weights).expect("shapes checked");
            for r in 0..delta.rows() {
                for (b, d) in g.bias.iter_mut().zip(delta.row(r)) {
                    *b += d;
                }
            }
            if k == 0 {
                break;
            }
            let mut prev = Matrix::zeros(delta.rows(), self.layers[k].inputs());
            gemm(1.0, &delta, false, &self.layers[k].weights, false, 0.0, &mut prev).expect("shapes checked");
            for (p, gate) in prev.as_mut_slice().iter_mut().zip(tape.gates[k - 1].as_slice()) {
                *p *= gate;
            }
            delta = prev;
        }
        Ok(())
    }
}

/// Which dropout masks a batched pass applies.
#[derive(Debug, Clone, Copy)]
pub enum Masking<'a> {
    /// Deterministic full network.
    Full,
    /// One sub-network for every row.
    Shared(&'a DropoutMask),
    /// An independent sub-network per row.
    PerRow(&'a [DropoutMask]),
}

/// Intermediate values of a batched forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    input: Matrix,
    acts: Vec<Matrix>,
    gates: Vec<Matrix>,
    output: Matrix,
}

impl Tape {
    /// Raw network outputs, `batch × raw_output_dim`.
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

/// One sampled sub-network: keep indicators per hidden layer plus the
/// inverted-dropout rescale `1 / (1 - p)`. The output layer is never masked.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep: Vec<Vec<bool>>,
    scale: f64,
}

impl DropoutMask {
    /// Each hidden unit is kept independently with probability `1 - p`.
    pub fn sample(model: &Mlp, rng: &mut SeededRng) -> Self {
        let p = model.drop_rate();
        let keep = model
            .hidden_widths()
            .into_iter()
            .map(|w| if p == 0.0 { vec![true; w] } else { (0..w).map(|_| !rng.bernoulli(p)).collect() })
            .collect();
        Self { keep, scale: 1.0 / (1.0 - p) }
    }

    pub fn all_kept(model: &Mlp) -> Self {
        Self { keep: model.hidden_widths().into_iter().map(|w| vec![true; w]).collect(), scale: 1.0 }
    }

    /// Explicit indicators, rescaled for drop rate `p`.
    pub fn from_indicators(keep: Vec<Vec<bool>>, p: f64) -> Result<Self, NnError> {
        check_drop_rate(p)?;
        Ok(Self { keep, scale: 1.0 / (1.0 - p) })
    }

    pub fn keep(&self) -> &[Vec<bool>] {
        &self.keep
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn kept_count(&self, layer: usize) -> usize {
        self.keep[layer].iter().filter(|&&k| k).count()
    }

    #[inline]
    pub fn factor(&self, layer: usize, unit: usize) -> f64 {
        if self.keep[layer][unit] {
            self.scale
        } else {
            0.0
        }
    }

    fn check(&self, model: &Mlp) -> Result<(), NnError> {
        let widths = model.hidden_widths();
        if widths.len() != self.keep.len() {
            return Err(NnError::MaskMismatch("layer count"));
        }
        if widths.iter().zip(&self.keep).any(|(w, k)| *w != k.len()) {
            return Err(NnError::MaskMismatch("layer width"));
        }
        Ok(())
    }

    #[inline]
    fn apply_row(&self, layer: usize, z: &mut [f64], gate: &mut [f64]) {
        for ((zv, g), &k) in z.iter_mut().zip(gate.iter_mut()).zip(&self.keep[layer]) {
            *g = if k && *zv > 0.0 { self.scale } else { 0.0 };
            *zv *= *g;
        }
    }
}

/// Gradient tensors congruent to an [`Mlp`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(model: &Mlp) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Layer { weights: Matrix::zeros(l.outputs(), l.inputs()), bias: vec![0.0; l.outputs()] })
                .collect(),
        }
    }

    pub fn reset(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights.as_mut_slice().iter_mut().for_each(|w| *w *= s);
            l.bias.iter_mut().for_each(|b| *b *= s);
        }
    }

    /// Tensors in the same order as [`Mlp::params`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()]).collect()
    }

    fn check(&self, model: &Mlp) -> Result<(), NnError> {
        let ok = self.layers.len() == model.layers.len()
            && self
                .layers
                .iter()
                .zip(&model.layers)
                .all(|(g, l)| g.weights.shape() == l.weights.shape() && g.bias.len() == l.bias.len());
        if ok {
            Ok(())
        } else {
            Err(NnError::GradientShape)
        }
    }
}

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    /// Zeroed moments for tensors of the given lengths; β1 = 0.9,
    /// β2 = 0.999, ε = 1e-8.
    pub fn new(tensor_lens: &[usize], lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_model(model: &Mlp, lr: f64) -> Self {
        let lens: Vec<usize> = model.params().iter().map(|t| t.len()).collect();
        Self::new(&lens, lr)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update. Non-finite gradients leave parameters and state untouched.
    pub fn update(&mut self, mut params: Vec<&mut [f64]>, grads: &[&[f64]]) -> Result<(), NnError> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(NnError::GradientShape);
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first[i].len() || g.len() != p.len() {
                return Err(NnError::GradientShape);
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(NnError::NonFiniteGradient { tensor: i });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - libm::pow(self.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, t as f64);
        for (i, p) in params.iter_mut().enumerate() {
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            for j in 0..p.len() {
                let g = grads[i][j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= self.lr * m_hat / (math::sqrt(v_hat) + self.eps);
            }
        }
        Ok(())
    }

    pub fn step(&mut self, model: &mut Mlp, grads: &Gradients) -> Result<(), NnError> {
        grads.check(model)?;
        let g = grads.tensors();
        self.update(model.params_mut(), &g)
    }
}
