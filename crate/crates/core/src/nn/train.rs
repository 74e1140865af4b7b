use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Network, Params, QP_SCALE};
use crate::dataset::BlockSample;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of samples held out for validation (taken after one seeded
    /// shuffle).
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            learning_rate: 1e-3,
            epochs: 100,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    /// Mean over samples of the 480-term squared-error sum, accumulated
    /// while the epoch ran.
    pub train_loss: f64,
    /// Fraction of edges on the right side of 0.5, accumulated likewise.
    pub train_accuracy: f64,
    pub validation_loss: Option<f64>,
    pub validation_accuracy: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub train_count: usize,
    pub validation_count: usize,
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Params<f32>,
    v: Params<f32>,
}

impl Adam {
    pub fn new(net: &Network<f32>, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: net.zero_grads(),
            v: net.zero_grads(),
        }
    }

    pub fn update(&mut self, net: &mut Network<f32>, grads: &Params<f32>) {
        self.step += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let lr = (self.learning_rate * c2.sqrt() / c1) as f32;
        let eps = (self.epsilon * c2.sqrt()) as f32;
        let tensors = net.params.iter_mut().flatten();
        let state = self.m.iter_mut().flatten().zip(self.v.iter_mut().flatten());
        for ((p, g), (m, v)) in tensors.zip(grads.iter().flatten()).zip(state) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * m[i] / (v[i].sqrt() + eps);
            }
        }
    }
}

struct Prepared {
    pixels: Vec<f32>,
    qp: f32,
    target: Vec<f32>,
}

fn prepare(s: &BlockSample) -> Prepared {
    Prepared {
        pixels: s.pixels.iter().map(|&p| p as f32 / 255.0).collect(),
        qp: (s.qp as f64 / QP_SCALE) as f32,
        target: s.soft_label.as_slice().to_vec(),
    }
}

fn correct_edges(out: &[f32], target: &[f32]) -> usize {
    out.iter().zip(target).filter(|(p, t)| (**p > 0.5) == (**t > 0.5)).count()
}

/// Batches are split into this many fixed chunks whose gradients are summed
/// in order, so results do not depend on the thread count.
const CHUNKS: usize = 8;

fn batch_step(net: &Network<f32>, batch: &[&Prepared]) -> Result<(f64, usize, Params<f32>)> {
    let scale = 1.0 / batch.len() as f32;
    let size = batch.len().div_ceil(CHUNKS);
    let parts: Vec<Result<(f64, usize, Params<f32>)>> = batch
        .par_chunks(size)
        .map(|chunk| {
            let mut grads = net.zero_grads();
            let (mut loss, mut correct) = (0.0, 0);
            for s in chunk {
                let (l, trace) = net.sample_gradient(&s.pixels, s.qp, &s.target, scale, &mut grads)?;
                loss += l as f64;
                correct += correct_edges(trace.output(), &s.target);
            }
            Ok((loss, correct, grads))
        })
        .collect();
    let mut iter = parts.into_iter();
    let (mut loss, mut correct, mut grads) = iter.next().unwrap()?;
    for part in iter {
        let (l, c, g) = part?;
        loss += l;
        correct += c;
        for (a, b) in grads.iter_mut().flatten().zip(g.iter().flatten()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
    Ok((loss, correct, grads))
}

fn evaluate_prepared(net: &Network<f32>, data: &[Prepared]) -> Result<(f64, f64)> {
    let results: Vec<Result<(f64, usize)>> = data
        .par_iter()
        .map(|s| {
            let out = net.forward(&s.pixels, s.qp)?;
            let loss: f64 = out.iter().zip(&s.target).map(|(p, t)| ((p - t) as f64).powi(2)).sum();
            Ok((loss, correct_edges(&out, &s.target)))
        })
        .collect();
    let (mut loss, mut correct) = (0.0, 0);
    for r in results {
        let (l, c) = r?;
        loss += l;
        correct += c;
    }
    let n = data.len().max(1) as f64;
    let edges = data.first().map_or(1, |s| s.target.len()) as f64;
    Ok((loss / n, correct as f64 / (n * edges)))
}

/// Mean loss and thresholded binary accuracy of `net` on `samples`.
pub fn evaluate(net: &Network<f32>, samples: &[BlockSample]) -> Result<(f64, f64)> {
    let data: Vec<Prepared> = samples.iter().map(prepare).collect();
    evaluate_prepared(net, &data)
}

/// Mini-batch Adam on the MSE-sum loss with a seeded shuffle every epoch.
pub fn train(net: &mut Network<f32>, samples: &[BlockSample], config: &TrainConfig) -> Result<TrainReport> {
    if samples.is_empty() {
        return Err(Error::Empty("training samples"));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    if net.spec().output_len != crate::partition::EDGE_COUNT {
        return Err(Error::InvalidNetSpec("training needs a 480-output network".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((samples.len() as f64 * config.validation_fraction).floor() as usize).min(samples.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let train_set: Vec<Prepared> = train_idx.iter().map(|&i| prepare(&samples[i])).collect();
    let val_set: Vec<Prepared> = val_idx.iter().map(|&i| prepare(&samples[i])).collect();

    let mut adam = Adam::new(net, config.learning_rate);
    let mut report = TrainReport {
        epochs: Vec::new(),
        train_count: train_set.len(),
        validation_count: val_set.len(),
    };
    let mut idx: Vec<usize> = (0..train_set.len()).collect();
    let edges = crate::partition::EDGE_COUNT as f64;
    for epoch in 0..config.epochs {
        idx.shuffle(&mut rng);
        let (mut loss, mut correct) = (0.0, 0usize);
        for batch in idx.chunks(config.batch_size) {
            let refs: Vec<&Prepared> = batch.iter().map(|&i| &train_set[i]).collect();
            let (l, c, grads) = batch_step(net, &refs)?;
            if !l.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss += l;
            correct += c;
            adam.update(net, &grads);
        }
        if net.params.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        let n = train_set.len() as f64;
        let (validation_loss, validation_accuracy) = if val_set.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate_prepared(net, &val_set)?;
            (Some(l), Some(a))
        };
        report.epochs.push(EpochStats {
            train_loss: loss / n,
            train_accuracy: correct as f64 / (n * edges),
            validation_loss,
            validation_accuracy,
        });
    }
    Ok(report)
}
