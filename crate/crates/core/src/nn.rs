//! A deliberately small neural-network toolkit: dense layers, 3×3 valid
//! convolution, tanh and flatten, with hand-written reverse-mode gradients,
//! Huber loss and Adam.
//!
//! Everything works on single samples. Activations are `Tensor`s laid out
//! channel-major (`[channel][row][col]`).

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("invalid layer: {0}")]
    InvalidLayer(String),
}

fn mismatch(expected: impl ToString, got: impl ToString) -> NnError {
    NnError::ShapeMismatch {
        expected: expected.to_string(),
        got: got.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape {
            channels,
            height,
            width,
        }
    }

    pub fn flat(len: usize) -> Self {
        Shape::new(len, 1, 1)
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_flat(&self) -> bool {
        self.height == 1 && self.width == 1
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Shape,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self, NnError> {
        if shape.len() != data.len() {
            return Err(mismatch(shape, format!("{} values", data.len())));
        }
        Ok(Tensor { shape, data })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: Shape::flat(data.len()),
            data,
        }
    }

    /// A single-channel 3×3 plane, the board input of the convolutional engines.
    pub fn board_plane(values: [f64; 9]) -> Self {
        Tensor {
            shape: Shape::new(1, 3, 3),
            data: values.to_vec(),
        }
    }
}

/// Architecture of one layer, without weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    /// Fully connected with bias.
    Dense { inputs: usize, outputs: usize },
    /// 3×3 valid convolution, stride 1, no bias.
    Conv3x3 {
        in_channels: usize,
        out_channels: usize,
    },
    Tanh,
    Flatten,
}

impl LayerKind {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerKind::Dense { inputs, outputs } => inputs * outputs + outputs,
            LayerKind::Conv3x3 {
                in_channels,
                out_channels,
            } => 9 * in_channels * out_channels,
            LayerKind::Tanh | LayerKind::Flatten => 0,
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerKind::Dense { inputs, .. } => inputs,
            LayerKind::Conv3x3 { in_channels, .. } => 9 * in_channels,
            _ => 0,
        }
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape, NnError> {
        match *self {
            LayerKind::Dense { inputs, outputs } => {
                if !input.is_flat() || input.channels != inputs {
                    return Err(mismatch(Shape::flat(inputs), input));
                }
                Ok(Shape::flat(outputs))
            }
            LayerKind::Conv3x3 {
                in_channels,
                out_channels,
            } => {
                if input.channels != in_channels || input.height < 3 || input.width < 3 {
                    return Err(mismatch(
                        format!("{in_channels}xHxW with H,W >= 3"),
                        input,
                    ));
                }
                Ok(Shape::new(out_channels, input.height - 2, input.width - 2))
            }
            LayerKind::Tanh => Ok(input),
            LayerKind::Flatten => Ok(Shape::flat(input.len())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    kind: LayerKind,
    /// Dense: `outputs × inputs` row-major followed by `outputs` biases.
    /// Conv3x3: `[out][in][ky][kx]`.
    weights: Vec<f64>,
}

impl Layer {
    pub fn new(kind: LayerKind) -> Self {
        Layer {
            kind,
            weights: vec![0.0; kind.param_count()],
        }
    }

    pub fn with_weights(kind: LayerKind, weights: Vec<f64>) -> Result<Self, NnError> {
        if weights.len() != kind.param_count() {
            return Err(mismatch(
                format!("{} weights", kind.param_count()),
                format!("{} weights", weights.len()),
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(NnError::InvalidLayer("non-finite weight".into()));
        }
        Ok(Layer { kind, weights })
    }

    pub fn dense(inputs: usize, outputs: usize) -> Self {
        Self::new(LayerKind::Dense { inputs, outputs })
    }

    pub fn conv3x3(in_channels: usize, out_channels: usize) -> Self {
        Self::new(LayerKind::Conv3x3 {
            in_channels,
            out_channels,
        })
    }

    pub fn tanh() -> Self {
        Self::new(LayerKind::Tanh)
    }

    pub fn flatten() -> Self {
        Self::new(LayerKind::Flatten)
    }

    pub fn kind(&self) -> LayerKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Uniform in `[-k, k]` with `k = 1/sqrt(fan_in)`.
    pub fn init_uniform(&mut self, rng: &mut dyn RngCore) {
        let fan_in = self.kind.fan_in();
        if fan_in == 0 {
            return;
        }
        let k = 1.0 / (fan_in as f64).sqrt();
        for w in &mut self.weights {
            *w = rng.random_range(-k..=k);
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let out_shape = self.kind.output_shape(input.shape)?;
        let data = match self.kind {
            LayerKind::Dense { inputs, outputs } => {
                let (w, b) = self.weights.split_at(inputs * outputs);
                (0..outputs)
                    .map(|o| {
                        let row = &w[o * inputs..(o + 1) * inputs];
                        b[o] + row.iter().zip(&input.data).map(|(a, x)| a * x).sum::<f64>()
                    })
                    .collect()
            }
            LayerKind::Conv3x3 {
                in_channels,
                out_channels,
            } => {
                let (h, w) = (input.shape.height, input.shape.width);
                let (oh, ow) = (out_shape.height, out_shape.width);
                let mut out = vec![0.0; out_shape.len()];
                for oc in 0..out_channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = 0.0;
                            for ic in 0..in_channels {
                                let kbase = (oc * in_channels + ic) * 9;
                                for ky in 0..3 {
                                    for kx in 0..3 {
                                        acc += self.weights[kbase + ky * 3 + kx]
                                            * input.data[(ic * h + oy + ky) * w + ox + kx];
                                    }
                                }
                            }
                            out[(oc * oh + oy) * ow + ox] = acc;
                        }
                    }
                }
                out
            }
            LayerKind::Tanh => input.data.iter().map(|x| x.tanh()).collect(),
            LayerKind::Flatten => input.data.clone(),
        };
        Ok(Tensor {
            shape: out_shape,
            data,
        })
    }

    /// Given the layer input, its output and dL/d(output), returns
    /// `(dL/d(weights), dL/d(input))`.
    pub fn backward(
        &self,
        input: &Tensor,
        output: &Tensor,
        grad_out: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), NnError> {
        if grad_out.len() != output.data.len() {
            return Err(mismatch(
                format!("{} output gradients", output.data.len()),
                grad_out.len(),
            ));
        }
        let mut grad_w = vec![0.0; self.weights.len()];
        let mut grad_in = vec![0.0; input.data.len()];
        match self.kind {
            LayerKind::Dense { inputs, outputs } => {
                let (w, _) = self.weights.split_at(inputs * outputs);
                for o in 0..outputs {
                    let g = grad_out[o];
                    if g == 0.0 {
                        continue;
                    }
                    for i in 0..inputs {
                        grad_w[o * inputs + i] += g * input.data[i];
                        grad_in[i] += g * w[o * inputs + i];
                    }
                    grad_w[inputs * outputs + o] += g;
                }
            }
            LayerKind::Conv3x3 {
                in_channels,
                out_channels,
            } => {
                let (h, w) = (input.shape.height, input.shape.width);
                let (oh, ow) = (output.shape.height, output.shape.width);
                for oc in 0..out_channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let g = grad_out[(oc * oh + oy) * ow + ox];
                            if g == 0.0 {
                                continue;
                            }
                            for ic in 0..in_channels {
                                let kbase = (oc * in_channels + ic) * 9;
                                for ky in 0..3 {
                                    for kx in 0..3 {
                                        let idx = (ic * h + oy + ky) * w + ox + kx;
                                        grad_w[kbase + ky * 3 + kx] += g * input.data[idx];
                                        grad_in[idx] += g * self.weights[kbase + ky * 3 + kx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LayerKind::Tanh => {
                for ((gi, y), g) in grad_in.iter_mut().zip(&output.data).zip(grad_out) {
                    *gi = g * (1.0 - y * y);
                }
            }
            LayerKind::Flatten => grad_in.copy_from_slice(grad_out),
        }
        Ok((grad_w, grad_in))
    }
}

/// Activations recorded by [`Network::forward`]; `activations[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Tensor>,
}

impl ForwardCache {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("cache holds the input")
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    /// Flat, in layer declaration order.
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Network { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn architecture(&self) -> Vec<LayerKind> {
        self.layers.iter().map(Layer::kind).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.kind.param_count()).sum()
    }

    /// Checks that `input` flows through every layer and returns the output shape.
    pub fn output_shape(&self, input: Shape) -> Result<Shape, NnError> {
        self.layers
            .iter()
            .try_fold(input, |shape, l| l.kind.output_shape(shape))
    }

    pub fn init_uniform(&mut self, rng: &mut dyn RngCore) {
        for l in &mut self.layers {
            l.init_uniform(rng);
        }
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NnError> {
        if params.len() != self.param_count() {
            return Err(mismatch(
                format!("{} parameters", self.param_count()),
                params.len(),
            ));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let n = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, ForwardCache), NnError> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for layer in &self.layers {
            let next = layer.forward(activations.last().expect("non-empty"))?;
            activations.push(next);
        }
        let out = activations.last().expect("non-empty").clone();
        Ok((out, ForwardCache { activations }))
    }

    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64]) -> Result<Gradients, NnError> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(mismatch(
                format!("cache for {} layers", self.layers.len()),
                format!("cache for {} layers", cache.activations.len() - 1),
            ));
        }
        let mut per_layer: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len()];
        let mut grad = grad_out.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (gw, gi) =
                layer.backward(&cache.activations[i], &cache.activations[i + 1], &grad)?;
            per_layer[i] = gw;
            grad = gi;
        }
        Ok(Gradients {
            params: per_layer.concat(),
            input: grad,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuberParams {
    pub delta: f64,
}

impl Default for HuberParams {
    fn default() -> Self {
        HuberParams { delta: 1.0 }
    }
}

/// Huber loss and its derivative with respect to `prediction`.
pub fn huber(prediction: f64, target: f64, params: HuberParams) -> (f64, f64) {
    debug_assert!(params.delta > 0.0);
    let r = prediction - target;
    let d = params.delta;
    if r.abs() <= d {
        (0.5 * r * r, r)
    } else {
        (d * (r.abs() - 0.5 * d), d * r.signum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            step_size: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    steps: u64,
}

impl AdamState {
    pub fn new(param_count: usize, config: AdamConfig) -> Self {
        AdamState {
            config,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(mismatch(
                format!("{} parameters and gradients", self.first_moment.len()),
                format!("{} parameters, {} gradients", params.len(), grads.len()),
            ));
        }
        self.steps += 1;
        let AdamConfig {
            step_size,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.steps as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= step_size * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}
