//! Orthonormal separable 2-D DCT-II for power-of-two blocks from 4 to 64.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const SIZES: [usize; 5] = [4, 8, 16, 32, 64];

fn size_slot(n: usize) -> Option<usize> {
    SIZES.iter().position(|&s| s == n)
}

/// Row-major `n x n` DCT-II basis: `basis[k * n + i]`.
fn basis(n: usize) -> &'static [f64] {
    static TABLES: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| {
        SIZES
            .iter()
            .map(|&n| {
                let mut m = vec![0.0; n * n];
                for k in 0..n {
                    let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
                    for i in 0..n {
                        m[k * n + i] = scale * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
                    }
                }
                m
            })
            .collect()
    });
    &tables[size_slot(n).expect("checked size")]
}

fn check(width: usize, height: usize, len: usize) -> Result<()> {
    if size_slot(width).is_none() || size_slot(height).is_none() {
        return Err(Error::BadTransformSize(width, height));
    }
    if len != width * height {
        return Err(Error::LengthMismatch {
            expected: width * height,
            actual: len,
        });
    }
    Ok(())
}

/// `out = rows * B^T` applied along each row (`inverse` uses `B`).
fn transform_rows(data: &[f64], width: usize, height: usize, inverse: bool, out: &mut [f64]) {
    let b = basis(width);
    for y in 0..height {
        let row = &data[y * width..(y + 1) * width];
        let dst = &mut out[y * width..(y + 1) * width];
        for (k, d) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            if inverse {
                for (i, &v) in row.iter().enumerate() {
                    acc += b[i * width + k] * v;
                }
            } else {
                let bk = &b[k * width..(k + 1) * width];
                for (&bv, &v) in bk.iter().zip(row) {
                    acc += bv * v;
                }
            }
            *d = acc;
        }
    }
}

fn transform_cols(data: &[f64], width: usize, height: usize, inverse: bool, out: &mut [f64]) {
    let b = basis(height);
    out.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..height {
        let dst = k * width;
        for i in 0..height {
            let coef = if inverse { b[i * height + k] } else { b[k * height + i] };
            let src = &data[i * width..(i + 1) * width];
            for (o, &v) in out[dst..dst + width].iter_mut().zip(src) {
                *o += coef * v;
            }
        }
    }
}

/// Forward transform of a row-major `width x height` block.
pub fn dct2(block: &[f64], width: usize, height: usize) -> Result<Vec<f64>> {
    check(width, height, block.len())?;
    let mut tmp = vec![0.0; block.len()];
    let mut out = vec![0.0; block.len()];
    transform_rows(block, width, height, false, &mut tmp);
    transform_cols(&tmp, width, height, false, &mut out);
    Ok(out)
}

/// Inverse of [`dct2`].
pub fn idct2(coeffs: &[f64], width: usize, height: usize) -> Result<Vec<f64>> {
    check(width, height, coeffs.len())?;
    let mut tmp = vec![0.0; coeffs.len()];
    let mut out = vec![0.0; coeffs.len()];
    transform_cols(coeffs, width, height, true, &mut tmp);
    transform_rows(&tmp, width, height, true, &mut out);
    Ok(out)
}
