//! Fully connected feed-forward networks trained with Adam on squared error.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// Dense layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn glorot(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.random_range(-limit..=limit)).collect();
        Self { inputs, outputs, weights, biases: vec![0.0; outputs] }
    }

    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], biases: vec![0.0; outputs] }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.biases) {
            out.push(b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

/// Per-layer gradient (or moment) buffers shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

pub type Grads = Vec<LayerGrads>;

#[derive(Debug, Clone, PartialEq)]
struct AdamState {
    step: u64,
    m: Grads,
    v: Grads,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// What a training sample regresses: the whole output vector, or a single
/// output (the taken action of a Q-network).
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Full(&'a [f64]),
    Single { index: usize, value: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub input: &'a [f64],
    pub target: Target<'a>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
    pub hidden: Activation,
    adam: AdamState,
}

fn zero_grads(layers: &[Layer]) -> Grads {
    layers
        .iter()
        .map(|l| LayerGrads { weights: vec![0.0; l.weights.len()], biases: vec![0.0; l.biases.len()] })
        .collect()
}

impl DenseNet {
    /// Glorot-uniform weights, zero biases. The output layer is linear.
    pub fn new(sizes: &[usize], hidden: Activation, rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers: Vec<Layer> = sizes.windows(2).map(|w| Layer::glorot(w[0], w[1], rng)).collect();
        Self::from_layers(layers, hidden)
    }

    pub fn zeros(sizes: &[usize], hidden: Activation) -> Self {
        let layers = sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Self::from_layers(layers, hidden)
    }

    pub fn from_layers(layers: Vec<Layer>, hidden: Activation) -> Self {
        let adam = AdamState { step: 0, m: zero_grads(&layers), v: zero_grads(&layers) };
        Self { layers, hidden, adam }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn adam_steps(&self) -> u64 {
        self.adam.step
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.biases).all(|p| p.is_finite()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_size() {
            return Err(Error::Dimension { expected: self.input_size(), got: input.len() });
        }
        Ok(self.trace(input).pop().expect("output layer"))
    }

    /// Smallest |pre-activation| over hidden units. Finite differences
    /// are only meaningful for ReLU nets when this exceeds the probe step.
    pub fn kink_margin(&self, input: &[f64]) -> Result<f64> {
        if input.len() != self.input_size() {
            return Err(Error::Dimension { expected: self.input_size(), got: input.len() });
        }
        let mut a = input.to_vec();
        let mut z = Vec::new();
        let mut margin = f64::INFINITY;
        for layer in &self.layers[..self.layers.len() - 1] {
            layer.affine(&a, &mut z);
            margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
            a = z.iter().map(|v| self.hidden.apply(*v)).collect();
        }
        Ok(margin)
    }

    /// Activations of every layer, input included.
    fn trace(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.affine(&acts[k], &mut z);
            if k < last {
                for v in &mut z {
                    *v = self.hidden.apply(*v);
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Mean squared error over every supervised output entry, and its
    /// gradient with respect to all parameters.
    pub fn loss_and_gradient(&self, batch: &[Sample<'_>]) -> Result<(f64, Grads)> {
        let entries: usize = batch
            .iter()
            .map(|s| match s.target {
                Target::Full(t) => t.len(),
                Target::Single { .. } => 1,
            })
            .sum();
        let mut grads = zero_grads(&self.layers);
        if entries == 0 {
            return Ok((0.0, grads));
        }
        let scale = 1.0 / entries as f64;
        let mut loss = 0.0;
        let out = self.output_size();
        for s in batch {
            if s.input.len() != self.input_size() {
                return Err(Error::Dimension { expected: self.input_size(), got: s.input.len() });
            }
            let acts = self.trace(s.input);
            let y = acts.last().expect("output");
            let mut delta = vec![0.0; out];
            match s.target {
                Target::Full(t) => {
                    if t.len() != out {
                        return Err(Error::Dimension { expected: out, got: t.len() });
                    }
                    for k in 0..out {
                        let e = y[k] - t[k];
                        loss += e * e;
                        delta[k] = 2.0 * e * scale;
                    }
                }
                Target::Single { index, value } => {
                    if index >= out {
                        return Err(Error::Dimension { expected: out, got: index + 1 });
                    }
                    let e = y[index] - value;
                    loss += e * e;
                    delta[index] = 2.0 * e * scale;
                }
            }
            self.backward(&acts, delta, &mut grads);
        }
        Ok((loss * scale, grads))
    }

    fn backward(&self, acts: &[Vec<f64>], mut delta: Vec<f64>, grads: &mut Grads) {
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &acts[k];
            let g = &mut grads[k];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (w, x) in row.iter_mut().zip(input) {
                    *w += d * x;
                }
            }
            if k == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.inputs];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= self.hidden.derivative_from_output(*a);
            }
            delta = prev;
        }
    }

    /// One Adam step with bias-corrected moments.
    pub fn apply_adam(&mut self, grads: &Grads, lr: f64) {
        self.adam.step += 1;
        let t = self.adam.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for (((layer, g), m), v) in self.layers.iter_mut().zip(grads).zip(&mut self.adam.m).zip(&mut self.adam.v) {
            let params = layer.weights.iter_mut().chain(layer.biases.iter_mut());
            let gs = g.weights.iter().chain(&g.biases);
            let ms = m.weights.iter_mut().chain(m.biases.iter_mut());
            let vs = v.weights.iter_mut().chain(v.biases.iter_mut());
            for (((p, g), m), v) in params.zip(gs).zip(ms).zip(vs) {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *p -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
    }

    /// One Adam step on a batch; returns the loss before the step.
    pub fn train_samples(&mut self, batch: &[Sample<'_>], lr: f64) -> Result<f64> {
        let (loss, grads) = self.loss_and_gradient(batch)?;
        self.apply_adam(&grads, lr);
        Ok(loss)
    }

    /// One Adam step regressing full output vectors.
    pub fn train_batch(&mut self, batch: &[(Vec<f64>, Vec<f64>)], lr: f64) -> Result<f64> {
        let samples: Vec<Sample<'_>> =
            batch.iter().map(|(x, t)| Sample { input: x, target: Target::Full(t) }).collect();
        self.train_samples(&samples, lr)
    }

    fn param_mut(&mut self, layer: usize, idx: usize) -> &mut f64 {
        let l = &mut self.layers[layer];
        let nw = l.weights.len();
        if idx < nw {
            &mut l.weights[idx]
        } else {
            &mut l.biases[idx - nw]
        }
    }

    /// Largest relative error between the analytic gradient and central
    /// finite differences (step 1e-5). Relative error uses a 1e-6 floor on
    /// the magnitude so vanishing gradients compare absolutely.
    pub fn gradient_check(&self, input: &[f64], target: &[f64]) -> Result<f64> {
        let sample = [Sample { input, target: Target::Full(target) }];
        let (_, grads) = self.loss_and_gradient(&sample)?;
        let h = 1e-5;
        let mut probe = self.clone();
        let mut worst: f64 = 0.0;
        for (k, g) in grads.iter().enumerate() {
            let analytic = g.weights.iter().chain(&g.biases);
            for (idx, &a) in analytic.enumerate() {
                let orig = *probe.param_mut(k, idx);
                *probe.param_mut(k, idx) = orig + h;
                let plus = probe.loss_and_gradient(&sample)?.0;
                *probe.param_mut(k, idx) = orig - h;
                let minus = probe.loss_and_gradient(&sample)?.0;
                *probe.param_mut(k, idx) = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let denom = a.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max((a - numeric).abs() / denom);
            }
        }
        Ok(worst)
    }

    pub fn flat_parameters(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases).copied()).collect()
    }

    /// Versioned text checkpoint. Values use shortest round-trip decimal
    /// formatting, so a save/load cycle is bit-exact.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let sizes: Vec<String> = self.sizes().iter().map(|v| v.to_string()).collect();
        writeln!(s, "{}", CHECKPOINT_MAGIC).unwrap();
        writeln!(s, "sizes {}", sizes.join(",")).unwrap();
        writeln!(s, "hidden {}", self.hidden.name()).unwrap();
        for (k, l) in self.layers.iter().enumerate() {
            writeln!(s, "layer {k} weights {}x{}", l.outputs, l.inputs).unwrap();
            writeln!(s, "{}", join(&l.weights)).unwrap();
            writeln!(s, "layer {k} biases {}", l.outputs).unwrap();
            writeln!(s, "{}", join(&l.biases)).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let mut lines = text.lines();
        if lines.next() != Some(CHECKPOINT_MAGIC) {
            return Err(bad("missing or unsupported header"));
        }
        let sizes: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("sizes "))
            .ok_or_else(|| bad("missing sizes"))?
            .split(',')
            .map(|v| v.trim().parse().map_err(|_| bad("bad size")))
            .collect::<Result<_>>()?;
        if sizes.len() < 2 {
            return Err(bad("need at least two sizes"));
        }
        let hidden = lines
            .next()
            .and_then(|l| l.strip_prefix("hidden "))
            .and_then(Activation::from_name)
            .ok_or_else(|| bad("missing activation"))?;
        let mut layers = Vec::new();
        for (k, w) in sizes.windows(2).enumerate() {
            let (inputs, outputs) = (w[0], w[1]);
            let header = format!("layer {k} weights {outputs}x{inputs}");
            if lines.next() != Some(header.as_str()) {
                return Err(bad(&format!("expected '{header}'")));
            }
            let weights = parse_values(lines.next().unwrap_or(""), inputs * outputs)?;
            let header = format!("layer {k} biases {outputs}");
            if lines.next() != Some(header.as_str()) {
                return Err(bad(&format!("expected '{header}'")));
            }
            let biases = parse_values(lines.next().unwrap_or(""), outputs)?;
            layers.push(Layer { inputs, outputs, weights, biases });
        }
        Ok(Self::from_layers(layers, hidden))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

pub const CHECKPOINT_MAGIC: &str = "# c2s-dense-net v1";

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub(crate) fn parse_values(line: &str, expected: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| Error::Checkpoint(format!("bad value '{t}'"))))
        .collect::<Result<_>>()?;
    if vals.len() != expected {
        return Err(Error::Checkpoint(format!("expected {expected} values, found {}", vals.len())));
    }
    Ok(vals)
}
