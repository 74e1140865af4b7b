//! Stage 1: a small CNN mapping a 68x68 block and its QP to 480 edge
//! probabilities.
//!
//! The network is generic over the float type so gradients can be checked
//! in `f64`; weight files always store `f32`.

mod layers;
mod train;

pub use layers::Scalar;
pub use train::{evaluate, train, Adam, EpochStats, TrainConfig, TrainReport};

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binio::{put_f32, put_u32, Reader};
use crate::error::{Error, Result};
use crate::partition::{EdgeVector, EDGE_COUNT};
use crate::rdo::INPUT_SIDE;

pub const WEIGHTS_MAGIC: &str = "QTNN";
pub const WEIGHTS_VERSION: u32 = 1;
/// QP normalization divisor.
pub const QP_SCALE: f64 = 51.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layer {
    /// Stride 1, zero "same" padding; `kernel` is 1 or 3.
    Conv { kernel: usize, c_in: usize, c_out: usize },
    Relu,
    /// 2x2, stride 2, floor.
    MaxPool,
    /// 3x3 convolution plus 1x1 shortcut convolution, summed.
    Residual { c_in: usize, c_out: usize },
    Flatten,
    /// The last dense layer also receives the normalized QP as an extra
    /// input, so its `inputs` counts that slot.
    Dense { inputs: usize, outputs: usize },
    Sigmoid,
}

impl Layer {
    fn tag(&self) -> u8 {
        match self {
            Layer::Conv { .. } => 0,
            Layer::Relu => 1,
            Layer::MaxPool => 2,
            Layer::Residual { .. } => 3,
            Layer::Flatten => 4,
            Layer::Dense { .. } => 5,
            Layer::Sigmoid => 6,
        }
    }

    /// Parameter tensor lengths, in storage order.
    pub fn param_shapes(&self) -> Vec<usize> {
        match *self {
            Layer::Conv { kernel, c_in, c_out } => vec![c_out * c_in * kernel * kernel, c_out],
            Layer::Residual { c_in, c_out } => vec![c_out * c_in * 9, c_out, c_out * c_in, c_out],
            Layer::Dense { inputs, outputs } => vec![outputs * inputs, outputs],
            _ => Vec::new(),
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            Layer::Conv { kernel, c_in, .. } => c_in * kernel * kernel,
            Layer::Residual { c_in, .. } => c_in * 10,
            Layer::Dense { inputs, .. } => inputs,
            _ => 1,
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layer::Conv { kernel, c_in, c_out } => write!(f, "conv{kernel}x{kernel}({c_in}->{c_out})"),
            Layer::Relu => write!(f, "relu"),
            Layer::MaxPool => write!(f, "maxpool"),
            Layer::Residual { c_in, c_out } => write!(f, "residual({c_in}->{c_out})"),
            Layer::Flatten => write!(f, "flatten"),
            Layer::Dense { inputs, outputs } => write!(f, "dense({inputs}->{outputs})"),
            Layer::Sigmoid => write!(f, "sigmoid"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shape {
    Planes { c: usize, h: usize, w: usize },
    Flat(usize),
}

impl Shape {
    fn len(&self) -> usize {
        match *self {
            Shape::Planes { c, h, w } => c * h * w,
            Shape::Flat(n) => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetSpec {
    /// Side of the square single-channel input.
    pub input_side: usize,
    pub output_len: usize,
    pub layers: Vec<Layer>,
}

impl Default for NetSpec {
    /// conv3x3(1->8), relu, residual(8->8), maxpool, conv3x3(8->16), relu,
    /// maxpool, conv3x3(16->16), relu, maxpool, flatten, dense(1024+1 ->
    /// 480), sigmoid. Spatial size 68 -> 34 -> 17 -> 8.
    fn default() -> Self {
        Self::with_widths(8, 16)
    }
}

impl NetSpec {
    /// The default layout with configurable channel widths.
    pub fn with_widths(c1: usize, c2: usize) -> Self {
        let side = INPUT_SIDE / 2 / 2 / 2;
        NetSpec {
            input_side: INPUT_SIDE,
            output_len: EDGE_COUNT,
            layers: vec![
                Layer::Conv { kernel: 3, c_in: 1, c_out: c1 },
                Layer::Relu,
                Layer::Residual { c_in: c1, c_out: c1 },
                Layer::MaxPool,
                Layer::Conv { kernel: 3, c_in: c1, c_out: c2 },
                Layer::Relu,
                Layer::MaxPool,
                Layer::Conv { kernel: 3, c_in: c2, c_out: c2 },
                Layer::Relu,
                Layer::MaxPool,
                Layer::Flatten,
                Layer::Dense {
                    inputs: c2 * side * side + 1,
                    outputs: EDGE_COUNT,
                },
                Layer::Sigmoid,
            ],
        }
    }

    /// Input shape of every layer plus the final output shape.
    fn shapes(&self) -> Result<Vec<Shape>> {
        let bad = |i: usize, msg: String| Error::InvalidNetSpec(format!("layer {i}: {msg}"));
        if self.input_side == 0 {
            return Err(Error::InvalidNetSpec("empty input".into()));
        }
        let last_dense = self.layers.iter().rposition(|l| matches!(l, Layer::Dense { .. }));
        let Some(last_dense) = last_dense else {
            return Err(Error::InvalidNetSpec("no dense layer to receive the QP".into()));
        };
        if self.layers.last() != Some(&Layer::Sigmoid) {
            return Err(Error::InvalidNetSpec("last layer must be sigmoid".into()));
        }
        let mut shape = Shape::Planes {
            c: 1,
            h: self.input_side,
            w: self.input_side,
        };
        let mut shapes = vec![shape];
        for (i, layer) in self.layers.iter().enumerate() {
            shape = match (*layer, shape) {
                (Layer::Conv { kernel, c_in, c_out }, Shape::Planes { c, h, w }) => {
                    if kernel != 1 && kernel != 3 {
                        return Err(bad(i, format!("kernel {kernel}")));
                    }
                    if c_in != c || c_out == 0 {
                        return Err(bad(i, format!("{layer} on {c} channels")));
                    }
                    Shape::Planes { c: c_out, h, w }
                }
                (Layer::Residual { c_in, c_out }, Shape::Planes { c, h, w }) => {
                    if c_in != c || c_out == 0 {
                        return Err(bad(i, format!("{layer} on {c} channels")));
                    }
                    Shape::Planes { c: c_out, h, w }
                }
                (Layer::MaxPool, Shape::Planes { c, h, w }) => {
                    if h < 2 || w < 2 {
                        return Err(bad(i, "pooling below 2x2".into()));
                    }
                    Shape::Planes { c, h: h / 2, w: w / 2 }
                }
                (Layer::Flatten, s) => Shape::Flat(s.len()),
                (Layer::Dense { inputs, outputs }, Shape::Flat(n)) => {
                    let expected = if i == last_dense { n + 1 } else { n };
                    if inputs != expected || outputs == 0 {
                        return Err(bad(i, format!("{layer} on {n} inputs (expected {expected})")));
                    }
                    Shape::Flat(outputs)
                }
                (Layer::Relu | Layer::Sigmoid, s) => s,
                (l, s) => return Err(bad(i, format!("{l} cannot follow shape {s:?}"))),
            };
            shapes.push(shape);
        }
        if shape != Shape::Flat(self.output_len) {
            return Err(Error::InvalidNetSpec(format!(
                "output shape {shape:?}, expected {}",
                self.output_len
            )));
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().flat_map(|l| l.param_shapes()).sum()
    }
}

impl fmt::Display for NetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{0}x{0}", self.input_side)?;
        for l in &self.layers {
            write!(f, " -> {l}")?;
        }
        Ok(())
    }
}

/// Per layer, its parameter tensors (empty for parameter-free layers).
pub type Params<T> = Vec<Vec<Vec<T>>>;

#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    spec: NetSpec,
    shapes: Vec<Shape>,
    last_dense: usize,
    pub params: Params<T>,
}

/// Activations kept for the backward pass: `acts[i]` is the input of layer
/// `i`, the last entry is the network output.
pub struct Trace<T> {
    acts: Vec<Vec<T>>,
    qp: T,
}

impl<T> Trace<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().unwrap()
    }
}

impl<T: Scalar> Network<T> {
    /// All parameters zero.
    pub fn zeros(spec: NetSpec) -> Result<Self> {
        let shapes = spec.shapes()?;
        let params = spec
            .layers
            .iter()
            .map(|l| l.param_shapes().into_iter().map(|n| vec![T::zero(); n]).collect())
            .collect();
        let last_dense = spec
            .layers
            .iter()
            .rposition(|l| matches!(l, Layer::Dense { .. }))
            .unwrap();
        Ok(Network {
            spec,
            shapes,
            last_dense,
            params,
        })
    }

    /// Weights uniform in `+-sqrt(6 / fan_in)`, biases zero.
    pub fn init(spec: NetSpec, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (layer, tensors) in net.spec.layers.iter().zip(net.params.iter_mut()) {
            let bound = (6.0 / layer.fan_in() as f64).sqrt();
            // weight tensors sit at even positions, biases at odd ones
            for (i, t) in tensors.iter_mut().enumerate() {
                if i % 2 == 0 {
                    t.iter_mut().for_each(|v| *v = T::of(rng.gen_range(-bound..bound)));
                }
            }
        }
        Ok(net)
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn zero_grads(&self) -> Params<T> {
        self.params
            .iter()
            .map(|ts| ts.iter().map(|t| vec![T::zero(); t.len()]).collect())
            .collect()
    }

    /// Converts every parameter to another float type.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            shapes: self.shapes.clone(),
            last_dense: self.last_dense,
            params: self
                .params
                .iter()
                .map(|ts| ts.iter().map(|t| t.iter().map(|v| U::of(v.to_f64().unwrap())).collect()).collect())
                .collect(),
        }
    }

    fn check_input(&self, pixels: &[T]) -> Result<()> {
        let expected = self.spec.input_side * self.spec.input_side;
        if pixels.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(())
    }

    /// Output for normalized pixels (`/255`) and QP (`/51`).
    pub fn forward(&self, pixels: &[T], qp_norm: T) -> Result<Vec<T>> {
        Ok(self.forward_trace(pixels, qp_norm)?.acts.pop().unwrap())
    }

    pub fn forward_trace(&self, pixels: &[T], qp_norm: T) -> Result<Trace<T>> {
        self.check_input(pixels)?;
        let mut acts = Vec::with_capacity(self.spec.layers.len() + 1);
        acts.push(pixels.to_vec());
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let x = &acts[i];
            let p = &self.params[i];
            let y = match (*layer, self.shapes[i]) {
                (Layer::Conv { kernel, c_in, c_out }, Shape::Planes { h, w, .. }) => {
                    layers::conv_forward(x, c_in, h, w, &p[0], &p[1], c_out, kernel)
                }
                (Layer::Residual { c_in, c_out }, Shape::Planes { h, w, .. }) => {
                    let mut a = layers::conv_forward(x, c_in, h, w, &p[0], &p[1], c_out, 3);
                    let b = layers::conv_forward(x, c_in, h, w, &p[2], &p[3], c_out, 1);
                    a.iter_mut().zip(b).for_each(|(u, v)| *u += v);
                    a
                }
                (Layer::MaxPool, Shape::Planes { c, h, w }) => layers::maxpool_forward(x, c, h, w),
                (Layer::Relu, _) => x.iter().map(|&v| v.max(T::zero())).collect(),
                (Layer::Sigmoid, _) => x.iter().map(|&v| layers::sigmoid(v)).collect(),
                (Layer::Flatten, _) => x.clone(),
                (Layer::Dense { .. }, _) if i == self.last_dense => {
                    let mut input = x.clone();
                    input.push(qp_norm);
                    layers::dense_forward(&input, &p[0], &p[1])
                }
                (Layer::Dense { .. }, _) => layers::dense_forward(x, &p[0], &p[1]),
                _ => unreachable!("shapes checked at construction"),
            };
            acts.push(y);
        }
        Ok(Trace { acts, qp: qp_norm })
    }

    /// Backpropagates `d_output` (gradient of the loss w.r.t. the network
    /// output) and accumulates parameter gradients into `grads`.
    pub fn backward(&self, trace: &Trace<T>, d_output: &[T], grads: &mut Params<T>) {
        let mut d = d_output.to_vec();
        for i in (0..self.spec.layers.len()).rev() {
            let x = &trace.acts[i];
            let p = &self.params[i];
            let g = &mut grads[i];
            let need = i > 0;
            d = match (self.spec.layers[i], self.shapes[i]) {
                (Layer::Conv { kernel, c_in, c_out }, Shape::Planes { h, w, .. }) => {
                    let (gw, gb) = g.split_at_mut(1);
                    layers::conv_backward(x, &d, c_in, h, w, &p[0], c_out, kernel, &mut gw[0], &mut gb[0], need)
                        .unwrap_or_default()
                }
                (Layer::Residual { c_in, c_out }, Shape::Planes { h, w, .. }) => {
                    let (g3, g1) = g.split_at_mut(2);
                    let (g3w, g3b) = g3.split_at_mut(1);
                    let (g1w, g1b) = g1.split_at_mut(1);
                    let a = layers::conv_backward(x, &d, c_in, h, w, &p[0], c_out, 3, &mut g3w[0], &mut g3b[0], need);
                    let b = layers::conv_backward(x, &d, c_in, h, w, &p[2], c_out, 1, &mut g1w[0], &mut g1b[0], need);
                    match (a, b) {
                        (Some(mut a), Some(b)) => {
                            a.iter_mut().zip(b).for_each(|(u, v)| *u += v);
                            a
                        }
                        _ => Vec::new(),
                    }
                }
                (Layer::MaxPool, Shape::Planes { c, h, w }) => layers::maxpool_backward(x, &d, c, h, w),
                (Layer::Relu, _) => x
                    .iter()
                    .zip(&d)
                    .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
                    .collect(),
                (Layer::Sigmoid, _) => trace.acts[i + 1]
                    .iter()
                    .zip(&d)
                    .map(|(&y, &g)| g * y * (T::one() - y))
                    .collect(),
                (Layer::Flatten, _) => d,
                (Layer::Dense { .. }, _) => {
                    let (gw, gb) = g.split_at_mut(1);
                    if i == self.last_dense {
                        let mut input = x.clone();
                        input.push(trace.qp);
                        let mut di = layers::dense_backward(&input, &d, &p[0], &mut gw[0], &mut gb[0], need)
                            .unwrap_or_default();
                        di.pop();
                        di
                    } else {
                        layers::dense_backward(x, &d, &p[0], &mut gw[0], &mut gb[0], need).unwrap_or_default()
                    }
                }
                _ => unreachable!("shapes checked at construction"),
            };
        }
    }

    /// Sum of squared errors against `target` and its gradient, accumulated
    /// into `grads` with weight `scale`.
    pub fn sample_gradient(&self, pixels: &[T], qp_norm: T, target: &[T], scale: T, grads: &mut Params<T>) -> Result<(T, Trace<T>)> {
        let trace = self.forward_trace(pixels, qp_norm)?;
        let out = trace.output();
        if target.len() != out.len() {
            return Err(Error::LengthMismatch {
                expected: out.len(),
                actual: target.len(),
            });
        }
        let loss = out.iter().zip(target).map(|(p, t)| (*p - *t) * (*p - *t)).sum();
        let two = T::of(2.0);
        let d: Vec<T> = out.iter().zip(target).map(|(p, t)| two * (*p - *t) * scale).collect();
        self.backward(&trace, &d, grads);
        Ok((loss, trace))
    }

    /// Mean squared-error-sum loss over a batch and its exact gradient.
    pub fn batch_gradient(&self, batch: &[(&[T], T, &[T])]) -> Result<(T, Params<T>)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let mut grads = self.zero_grads();
        let scale = T::one() / T::of(batch.len() as f64);
        let mut total = T::zero();
        for (px, qp, target) in batch {
            total += self.sample_gradient(px, *qp, target, scale, &mut grads)?.0;
        }
        Ok((total * scale, grads))
    }
}

impl Network<f32> {
    /// Edge probabilities for a raw 68x68 block.
    pub fn predict_edges(&self, pixels: &[u8], qp: i32) -> Result<EdgeVector> {
        let x: Vec<f32> = pixels.iter().map(|&p| p as f32 / 255.0).collect();
        EdgeVector::from_vec(self.forward(&x, (qp as f64 / QP_SCALE) as f32)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = WEIGHTS_MAGIC.as_bytes().to_vec();
        put_u32(&mut out, WEIGHTS_VERSION);
        put_u32(&mut out, self.spec.input_side as u32);
        put_u32(&mut out, self.spec.output_len as u32);
        put_u32(&mut out, self.spec.layers.len() as u32);
        for l in &self.spec.layers {
            out.push(l.tag());
            let dims: Vec<usize> = match *l {
                Layer::Conv { kernel, c_in, c_out } => vec![kernel, c_in, c_out],
                Layer::Residual { c_in, c_out } => vec![c_in, c_out],
                Layer::Dense { inputs, outputs } => vec![inputs, outputs],
                _ => Vec::new(),
            };
            dims.into_iter().for_each(|d| put_u32(&mut out, d as u32));
        }
        for t in self.params.iter().flatten() {
            t.iter().for_each(|&v| put_f32(&mut out, v));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.header(WEIGHTS_MAGIC, WEIGHTS_VERSION)?;
        let input_side = r.u32("input side")? as usize;
        let output_len = r.u32("output length")? as usize;
        let count = r.u32("layer count")? as usize;
        if count > 1024 {
            return Err(Error::Corrupt(format!("{count} layers")));
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let tag = r.u8("layer tag")?;
            let mut dim = || r.u32("layer descriptor").map(|v| v as usize);
            let layer = match tag {
                0 => Layer::Conv {
                    kernel: dim()?,
                    c_in: dim()?,
                    c_out: dim()?,
                },
                1 => Layer::Relu,
                2 => Layer::MaxPool,
                3 => Layer::Residual {
                    c_in: dim()?,
                    c_out: dim()?,
                },
                4 => Layer::Flatten,
                5 => Layer::Dense {
                    inputs: dim()?,
                    outputs: dim()?,
                },
                6 => Layer::Sigmoid,
                t => return Err(Error::Corrupt(format!("layer tag {t}"))),
            };
            layers.push(layer);
        }
        let spec = NetSpec {
            input_side,
            output_len,
            layers,
        };
        let needed = spec.param_count();
        if r.remaining() != needed * 4 {
            return if r.remaining() < needed * 4 {
                Err(Error::Truncated("weights"))
            } else {
                Err(Error::Corrupt(format!("{} trailing bytes", r.remaining() - needed * 4)))
            };
        }
        let mut net = Network::zeros(spec)?;
        for t in net.params.iter_mut().flatten() {
            for v in t.iter_mut() {
                *v = r.f32("weights")?;
                if !v.is_finite() {
                    return Err(Error::Corrupt("non-finite weight".into()));
                }
            }
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Sum of squared differences and its per-component mean.
pub fn loss_mse(pred: &[f32], truth: &[f32]) -> Result<(f64, f64)> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (*p as f64 - *t as f64).powi(2)).sum();
    Ok((sum, sum / pred.len().max(1) as f64))
}
