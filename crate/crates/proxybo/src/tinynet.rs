//! Small seeded multilayer perceptrons with exact gradients.
//!
//! Gradient-based proxy scores need a concrete, differentiable network for
//! each architecture encoding. Tabular benchmarks only describe topologies
//! abstractly, so this module instantiates a deterministic stand-in: each
//! edge's operation index picks the width and activation of one hidden layer,
//! the parameters come from a seeded uniform initializer, and forward /
//! backward passes are computed exactly with plain dense algebra.
//!
//! The mapping from an operation index `v` to a layer is fixed: width is
//! `v + 1`, and the activation alternates by parity (`ReLU` for odd `v`,
//! identity for even `v`). The output layer is always linear. Everything
//! here is a pure function of `(encoding, seed)`, which is what makes proxy
//! scores reproducible.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::space::{ArchEncoding, SearchSpaceSpec};

/// Input width of every instantiated network.
///
/// Chosen larger than typical proxy batch sizes so per-example input
/// gradients are not trivially rank-deficient.
pub const INPUT_DIM: usize = 24;

/// Output width of every instantiated network.
pub const OUTPUT_DIM: usize = 4;

/// Hidden-layer activation functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// Pass-through.
    Identity,
    /// `max(0, z)`, with derivative 0 at the kink.
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Width and activation of one hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

/// Architecture of one instantiated network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetSpec {
    pub input_dim: usize,
    pub hidden: Vec<LayerSpec>,
    pub output_dim: usize,
}

impl NetSpec {
    /// Layer widths from input to output, e.g. `[24, 4, 1, 4]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.input_dim);
        dims.extend(self.hidden.iter().map(|l| l.width));
        dims.push(self.output_dim);
        dims
    }

    /// Number of weight/bias layers (hidden transitions plus the output layer).
    pub fn layer_count(&self) -> usize {
        self.hidden.len() + 1
    }

    fn activation_of(&self, layer: usize) -> Activation {
        // The final transition is the linear output layer.
        if layer < self.hidden.len() {
            self.hidden[layer].activation
        } else {
            Activation::Identity
        }
    }
}

/// Deterministic network layout for an encoding.
///
/// Edge `i`'s operation index `v` becomes hidden layer `i` with width `v + 1`
/// and a parity-chosen activation. The map is injective: distinct encodings
/// yield distinct layouts.
pub fn net_spec_for(x: &ArchEncoding, space: &SearchSpaceSpec) -> Result<NetSpec> {
    if !space.contains(x) {
        return Err(Error::EncodingMismatch {
            encoding: x.to_string(),
            space: space.name().to_string(),
        });
    }
    let hidden = x
        .values()
        .iter()
        .map(|&v| LayerSpec {
            width: v as usize + 1,
            activation: if v % 2 == 1 {
                Activation::Relu
            } else {
                Activation::Identity
            },
        })
        .collect();
    Ok(NetSpec {
        input_dim: INPUT_DIM,
        hidden,
        output_dim: OUTPUT_DIM,
    })
}

/// Weights and bias of one dense layer. `weight` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// All parameters of a network, ordered input to output.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub layers: Vec<LayerParams>,
}

impl ParamSet {
    /// Total number of scalar parameters.
    pub fn flat_len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Reads parameter `i` in flat traversal order (per layer: weights in
    /// logical row-major order, then biases).
    pub fn flat_get(&self, mut i: usize) -> f64 {
        for l in &self.layers {
            if i < l.weight.len() {
                return l.weight[[i / l.weight.ncols(), i % l.weight.ncols()]];
            }
            i -= l.weight.len();
            if i < l.bias.len() {
                return l.bias[i];
            }
            i -= l.bias.len();
        }
        panic!("flat parameter index out of range");
    }

    /// Writes parameter `i` in flat traversal order.
    pub fn flat_set(&mut self, mut i: usize, value: f64) {
        for l in &mut self.layers {
            if i < l.weight.len() {
                let cols = l.weight.ncols();
                l.weight[[i / cols, i % cols]] = value;
                return;
            }
            i -= l.weight.len();
            if i < l.bias.len() {
                l.bias[i] = value;
                return;
            }
            i -= l.bias.len();
        }
        panic!("flat parameter index out of range");
    }

    /// Elementwise transform into a new parameter set of the same shape.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ParamSet {
        ParamSet {
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    weight: l.weight.mapv(&f),
                    bias: l.bias.mapv(&f),
                })
                .collect(),
        }
    }

    /// Sum of `f(param, other_param)` over all aligned parameter pairs.
    pub fn zip_sum(&self, other: &ParamSet, f: impl Fn(f64, f64) -> f64) -> Result<f64> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::LengthMismatch {
                left: self.layers.len(),
                right: other.layers.len(),
            });
        }
        let mut total = 0.0;
        for (a, b) in self.layers.iter().zip(&other.layers) {
            if a.weight.dim() != b.weight.dim() || a.bias.len() != b.bias.len() {
                return Err(Error::LengthMismatch {
                    left: a.weight.len() + a.bias.len(),
                    right: b.weight.len() + b.bias.len(),
                });
            }
            for (x, y) in a.weight.iter().zip(b.weight.iter()) {
                total += f(*x, *y);
            }
            for (x, y) in a.bias.iter().zip(b.bias.iter()) {
                total += f(*x, *y);
            }
        }
        Ok(total)
    }
}

/// Seeded uniform parameter initialization.
///
/// Layer `l` draws from its own derived stream; weights (row-major) then
/// biases are sampled from `U(-1/√fan_in, 1/√fan_in)`. The result depends
/// only on `(spec, seed)`.
pub fn init_params(spec: &NetSpec, seed: u64) -> ParamSet {
    let dims = spec.dims();
    let layers = (0..spec.layer_count())
        .map(|l| {
            let fan_in = dims[l];
            let fan_out = dims[l + 1];
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut stream = rng::substream(seed, 0x6c61_7965_72, l as u64); // tag: "layer"
            let weight = Array2::from_shape_fn((fan_out, fan_in), |_| {
                stream.gen_range(-bound..bound)
            });
            let bias = Array1::from_shape_fn(fan_out, |_| stream.gen_range(-bound..bound));
            LayerParams { weight, bias }
        })
        .collect();
    ParamSet { layers }
}

/// Builds the network layout and parameters for an encoding in one step.
pub fn instantiate(
    x: &ArchEncoding,
    space: &SearchSpaceSpec,
    seed: u64,
) -> Result<(NetSpec, ParamSet)> {
    let spec = net_spec_for(x, space)?;
    let params = init_params(&spec, seed);
    Ok((spec, params))
}

/// A batch of inputs, optionally with regression targets.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub targets: Option<Array2<f64>>,
}

impl Batch {
    /// Standard-normal inputs (and targets, if `output_dim` is given), drawn
    /// row-major from a stream derived from `seed`.
    pub fn seeded_normal(rows: usize, input_dim: usize, output_dim: Option<usize>, seed: u64) -> Batch {
        let mut stream = rng::stream(seed, 0x6261_7463_68); // tag: "batch"
        let inputs = Array2::from_shape_fn((rows, input_dim), |_| rng::standard_normal(&mut stream));
        let targets = output_dim
            .map(|d| Array2::from_shape_fn((rows, d), |_| rng::standard_normal(&mut stream)));
        Batch { inputs, targets }
    }

    /// An all-ones input batch with no targets.
    pub fn ones(rows: usize, input_dim: usize) -> Batch {
        Batch {
            inputs: Array2::ones((rows, input_dim)),
            targets: None,
        }
    }
}

/// Training objectives used by the proxy computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// `0.5 · Σ (output − target)²` summed over the batch; requires targets.
    SquaredError,
    /// `Σ output` summed over the batch; needs no targets.
    SumOfOutputs,
}

struct ForwardTrace {
    /// `acts[0]` is the input batch; `acts[l + 1]` is layer `l`'s output.
    acts: Vec<Array2<f64>>,
    /// Pre-activation values per layer.
    pre: Vec<Array2<f64>>,
}

fn check_finite(m: &Array2<f64>, layer: usize, phase: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { layer, phase })
    }
}

fn check_shapes(spec: &NetSpec, params: &ParamSet, inputs: &Array2<f64>) -> Result<()> {
    let dims = spec.dims();
    if inputs.ncols() != spec.input_dim {
        return Err(Error::ShapeMismatch {
            layer: 0,
            message: format!(
                "input batch has {} columns, network expects {}",
                inputs.ncols(),
                spec.input_dim
            ),
        });
    }
    if params.layers.len() != spec.layer_count() {
        return Err(Error::ShapeMismatch {
            layer: 0,
            message: format!(
                "parameter set has {} layers, network expects {}",
                params.layers.len(),
                spec.layer_count()
            ),
        });
    }
    for (l, p) in params.layers.iter().enumerate() {
        let expect = (dims[l + 1], dims[l]);
        if p.weight.dim() != expect {
            return Err(Error::ShapeMismatch {
                layer: l,
                message: format!("weight is {:?}, expected {:?}", p.weight.dim(), expect),
            });
        }
        if p.bias.len() != dims[l + 1] {
            return Err(Error::ShapeMismatch {
                layer: l,
                message: format!("bias has {} entries, expected {}", p.bias.len(), dims[l + 1]),
            });
        }
    }
    Ok(())
}

fn forward_traced(spec: &NetSpec, params: &ParamSet, inputs: &Array2<f64>) -> Result<ForwardTrace> {
    check_shapes(spec, params, inputs)?;
    check_finite(inputs, 0, "forward")?;
    let mut acts = Vec::with_capacity(spec.layer_count() + 1);
    let mut pre = Vec::with_capacity(spec.layer_count());
    acts.push(inputs.clone());
    for (l, p) in params.layers.iter().enumerate() {
        let z = acts[l].dot(&p.weight.t()) + &p.bias;
        check_finite(&z, l, "forward")?;
        let act = spec.activation_of(l);
        let a = z.mapv(|v| act.apply(v));
        pre.push(z);
        acts.push(a);
    }
    Ok(ForwardTrace { acts, pre })
}

/// Runs the network on a batch of inputs, returning the `batch × output_dim`
/// output matrix.
pub fn forward(spec: &NetSpec, params: &ParamSet, inputs: &Array2<f64>) -> Result<Array2<f64>> {
    let trace = forward_traced(spec, params, inputs)?;
    Ok(trace.acts.last().expect("at least the input batch").clone())
}

/// Scalar loss of the network on a batch.
pub fn loss_value(spec: &NetSpec, params: &ParamSet, batch: &Batch, loss: Loss) -> Result<f64> {
    let out = forward(spec, params, &batch.inputs)?;
    match loss {
        Loss::SquaredError => {
            let targets = batch.targets.as_ref().ok_or_else(|| {
                Error::InvalidValue("squared-error loss requires a target batch".into())
            })?;
            if targets.dim() != out.dim() {
                return Err(Error::ShapeMismatch {
                    layer: spec.layer_count(),
                    message: format!("targets are {:?}, outputs {:?}", targets.dim(), out.dim()),
                });
            }
            Ok(0.5 * (&out - targets).mapv(|d| d * d).sum())
        }
        Loss::SumOfOutputs => Ok(out.sum()),
    }
}

fn backward(
    spec: &NetSpec,
    params: &ParamSet,
    batch: &Batch,
    loss: Loss,
) -> Result<(ParamSet, Array2<f64>)> {
    let trace = forward_traced(spec, params, &batch.inputs)?;
    let out = trace.acts.last().expect("outputs");
    // Gradient of the loss with respect to the network output.
    let mut g = match loss {
        Loss::SquaredError => {
            let targets = batch.targets.as_ref().ok_or_else(|| {
                Error::InvalidValue("squared-error loss requires a target batch".into())
            })?;
            if targets.dim() != out.dim() {
                return Err(Error::ShapeMismatch {
                    layer: spec.layer_count(),
                    message: format!("targets are {:?}, outputs {:?}", targets.dim(), out.dim()),
                });
            }
            out - targets
        }
        Loss::SumOfOutputs => Array2::ones(out.dim()),
    };
    let mut grads: Vec<LayerParams> = Vec::with_capacity(spec.layer_count());
    for l in (0..spec.layer_count()).rev() {
        let act = spec.activation_of(l);
        // Chain through the activation: dL/dz = dL/da ⊙ act'(z).
        let dz = match act {
            Activation::Identity => g,
            Activation::Relu => {
                let mask = trace.pre[l].mapv(|z| act.derivative(z));
                g * &mask
            }
        };
        let gw = dz.t().dot(&trace.acts[l]);
        let gb = dz.sum_axis(Axis(0));
        check_finite(&gw, l, "backward")?;
        if !gb.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                layer: l,
                phase: "backward",
            });
        }
        g = dz.dot(&params.layers[l].weight);
        grads.push(LayerParams {
            weight: gw,
            bias: gb,
        });
    }
    grads.reverse();
    check_finite(&g, 0, "backward")?;
    Ok((ParamSet { layers: grads }, g))
}

/// Exact gradient of the loss with respect to every parameter.
pub fn grad_params(spec: &NetSpec, params: &ParamSet, batch: &Batch, loss: Loss) -> Result<ParamSet> {
    backward(spec, params, batch, loss).map(|(g, _)| g)
}

/// Per-example gradient of the summed outputs with respect to the inputs.
///
/// Row `b` of the result is `∂(Σ_o output[b, o]) / ∂ input[b]`; examples in a
/// dense network do not interact, so the full-batch backward pass yields each
/// example's own input gradient.
pub fn grad_inputs_per_example(
    spec: &NetSpec,
    params: &ParamSet,
    inputs: &Array2<f64>,
) -> Result<Array2<f64>> {
    let batch = Batch {
        inputs: inputs.clone(),
        targets: None,
    };
    backward(spec, params, &batch, Loss::SumOfOutputs).map(|(_, g)| g)
}
