//! Forward and backward kernels on `(channels, height, width)` planes.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, NumAssign};

/// Element type of the network: `f32` in production, `f64` for gradient
/// checks.
pub trait Scalar: Float + NumAssign + Sum + Debug + Send + Sync + 'static {
    fn of(v: f64) -> Self {
        Self::from(v).unwrap()
    }
}

impl<T: Float + NumAssign + Sum + Debug + Send + Sync + 'static> Scalar for T {}

/// Valid output range `[lo, hi)` for a shift `d` over an extent `n`.
fn valid(n: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (n as isize - d).clamp(0, n as isize) as usize;
    (lo, hi.max(lo))
}

/// Stride-1 "same" zero-padded convolution; `k` is 1 or 3.
/// Weights are `[c_out][c_in][k][k]`.
pub fn conv_forward<T: Scalar>(
    input: &[T],
    c_in: usize,
    h: usize,
    w: usize,
    weights: &[T],
    bias: &[T],
    c_out: usize,
    k: usize,
) -> Vec<T> {
    let hw = h * w;
    let p = (k / 2) as isize;
    let mut out = vec![T::zero(); c_out * hw];
    for co in 0..c_out {
        let plane = &mut out[co * hw..(co + 1) * hw];
        plane.iter_mut().for_each(|v| *v = bias[co]);
        for ci in 0..c_in {
            let src = &input[ci * hw..(ci + 1) * hw];
            for ky in 0..k {
                let dy = ky as isize - p;
                let (y0, y1) = valid(h, dy);
                for kx in 0..k {
                    let dx = kx as isize - p;
                    let (x0, x1) = valid(w, dx);
                    let wv = weights[((co * c_in + ci) * k + ky) * k + kx];
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let o = &mut plane[y * w + x0..y * w + x1];
                        let s0 = (sy * w) as isize + x0 as isize + dx;
                        let s = &src[s0 as usize..s0 as usize + (x1 - x0)];
                        for (a, b) in o.iter_mut().zip(s) {
                            *a += wv * *b;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight/bias gradients; returns the input gradient when
/// `need_input_grad`.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward<T: Scalar>(
    input: &[T],
    d_out: &[T],
    c_in: usize,
    h: usize,
    w: usize,
    weights: &[T],
    c_out: usize,
    k: usize,
    d_weights: &mut [T],
    d_bias: &mut [T],
    need_input_grad: bool,
) -> Option<Vec<T>> {
    let hw = h * w;
    let p = (k / 2) as isize;
    let mut d_in = need_input_grad.then(|| vec![T::zero(); c_in * hw]);
    for co in 0..c_out {
        let g = &d_out[co * hw..(co + 1) * hw];
        d_bias[co] += g.iter().copied().sum::<T>();
        for ci in 0..c_in {
            let src = &input[ci * hw..(ci + 1) * hw];
            for ky in 0..k {
                let dy = ky as isize - p;
                let (y0, y1) = valid(h, dy);
                for kx in 0..k {
                    let dx = kx as isize - p;
                    let (x0, x1) = valid(w, dx);
                    let wi = ((co * c_in + ci) * k + ky) * k + kx;
                    let wv = weights[wi];
                    let mut acc = T::zero();
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let s0 = ((sy * w) as isize + x0 as isize + dx) as usize;
                        let gr = &g[y * w + x0..y * w + x1];
                        let s = &src[s0..s0 + (x1 - x0)];
                        for (a, b) in gr.iter().zip(s) {
                            acc += *a * *b;
                        }
                        if let Some(d) = d_in.as_mut() {
                            let d = &mut d[ci * hw + s0..ci * hw + s0 + (x1 - x0)];
                            for (a, b) in d.iter_mut().zip(gr) {
                                *a += wv * *b;
                            }
                        }
                    }
                    d_weights[wi] += acc;
                }
            }
        }
    }
    d_in
}

/// 2x2 max pooling, stride 2, odd trailing row/column dropped.
pub fn maxpool_forward<T: Scalar>(input: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let src = &input[ch * h * w..];
        for y in 0..oh {
            for x in 0..ow {
                out.push(src[argmax2x2(src, w, y, x)]);
            }
        }
    }
    out
}

/// Index within the plane of the first maximum of the 2x2 window.
fn argmax2x2<T: Scalar>(plane: &[T], w: usize, y: usize, x: usize) -> usize {
    let base = 2 * y * w + 2 * x;
    let mut best = base;
    for i in [base + 1, base + w, base + w + 1] {
        if plane[i] > plane[best] {
            best = i;
        }
    }
    best
}

pub fn maxpool_backward<T: Scalar>(input: &[T], d_out: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let (oh, ow) = (h / 2, w / 2);
    let mut d_in = vec![T::zero(); c * h * w];
    for ch in 0..c {
        let plane = &input[ch * h * w..(ch + 1) * h * w];
        for y in 0..oh {
            for x in 0..ow {
                let i = argmax2x2(plane, w, y, x);
                d_in[ch * h * w + i] += d_out[(ch * oh + y) * ow + x];
            }
        }
    }
    d_in
}

/// `out = W x + b`, weights `[out][in]`.
pub fn dense_forward<T: Scalar>(input: &[T], weights: &[T], bias: &[T]) -> Vec<T> {
    let n = input.len();
    bias.iter()
        .enumerate()
        .map(|(o, &b)| b + weights[o * n..(o + 1) * n].iter().zip(input).map(|(w, x)| *w * *x).sum::<T>())
        .collect()
}

pub fn dense_backward<T: Scalar>(
    input: &[T],
    d_out: &[T],
    weights: &[T],
    d_weights: &mut [T],
    d_bias: &mut [T],
    need_input_grad: bool,
) -> Option<Vec<T>> {
    let n = input.len();
    let mut d_in = need_input_grad.then(|| vec![T::zero(); n]);
    for (o, &g) in d_out.iter().enumerate() {
        d_bias[o] += g;
        let row = &mut d_weights[o * n..(o + 1) * n];
        for (dw, x) in row.iter_mut().zip(input) {
            *dw += g * *x;
        }
        if let Some(d) = d_in.as_mut() {
            for (di, w) in d.iter_mut().zip(&weights[o * n..(o + 1) * n]) {
                *di += g * *w;
            }
        }
    }
    d_in
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}
