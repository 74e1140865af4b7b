//! Toy intra codec giving an exact, deterministic RD cost `J = D + lambda R`
//! for any CU.
//!
//! Prediction reads the original (not reconstructed) neighbours, so the cost
//! of a CU does not depend on how its siblings were coded.

mod frame;
mod transform;

pub use frame::{Frame, MIN_FRAME_SIDE};
pub use transform::{dct2, idct2};

use crate::error::{Error, Result};
use crate::partition::CuGeometry;

pub const MAX_QP: i32 = 51;

/// Mode signalling cost charged on every coded leaf.
pub const MODE_HEADER_BITS: u32 = 4;

fn check_qp(qp: i32) -> Result<()> {
    if (0..=MAX_QP).contains(&qp) {
        Ok(())
    } else {
        Err(Error::QpOutOfRange(qp))
    }
}

/// Lagrange multiplier `0.57 * 2^((qp - 12) / 3)`.
pub fn lambda_of_qp(qp: i32) -> Result<f64> {
    check_qp(qp)?;
    Ok(0.57 * 2f64.powf((qp - 12) as f64 / 3.0))
}

/// Quantizer step `2^((qp - 4) / 6)`.
pub fn qstep(qp: i32) -> f64 {
    2f64.powf((qp - 4) as f64 / 6.0)
}

#[repr(u8)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntraMode {
    Dc = 0,
    Planar = 1,
    Hor = 2,
    Ver = 3,
}

impl IntraMode {
    pub const ALL: [IntraMode; 4] = [IntraMode::Dc, IntraMode::Planar, IntraMode::Hor, IntraMode::Ver];
}

/// Prediction of the `width x height` block at absolute `(x, y)`.
///
/// Neighbours outside the frame read as 128 for HOR/VER/PLANAR; DC averages
/// only the neighbours that exist, and falls back to 128 when none do.
pub fn predict_block(frame: &Frame, x: usize, y: usize, width: usize, height: usize, mode: IntraMode) -> Vec<f64> {
    let top_available = y > 0;
    let left_available = x > 0;
    let top: Vec<f64> = (0..width)
        .map(|i| if top_available { frame.at(x + i, y - 1) as f64 } else { 128.0 })
        .collect();
    let left: Vec<f64> = (0..height)
        .map(|j| if left_available { frame.at(x - 1, y + j) as f64 } else { 128.0 })
        .collect();
    let mut out = vec![0.0; width * height];
    match mode {
        IntraMode::Dc => {
            let (mut sum, mut n) = (0.0, 0usize);
            if top_available {
                sum += top.iter().sum::<f64>();
                n += width;
            }
            if left_available {
                sum += left.iter().sum::<f64>();
                n += height;
            }
            let dc = if n == 0 { 128.0 } else { sum / n as f64 };
            out.iter_mut().for_each(|v| *v = dc);
        }
        IntraMode::Hor => {
            for (j, row) in out.chunks_exact_mut(width).enumerate() {
                row.iter_mut().for_each(|v| *v = left[j]);
            }
        }
        IntraMode::Ver => {
            for row in out.chunks_exact_mut(width) {
                row.copy_from_slice(&top);
            }
        }
        IntraMode::Planar => {
            for (j, row) in out.chunks_exact_mut(width).enumerate() {
                for (i, v) in row.iter_mut().enumerate() {
                    *v = 0.5 * (left[j] + top[i]);
                }
            }
        }
    }
    out
}

pub fn quantize(coeffs: &[f64], qp: i32) -> Vec<i32> {
    let step = qstep(qp);
    coeffs.iter().map(|&c| (c / step).round() as i32).collect()
}

pub fn dequantize(levels: &[i32], qp: i32) -> Vec<f64> {
    let step = qstep(qp);
    levels.iter().map(|&l| l as f64 * step).collect()
}

/// Coefficient-magnitude rate proxy: `3 + 2 floor(log2 |l|)` bits per
/// nonzero level, plus the mode header when `is_leaf_header` is set.
pub fn rate_model(levels: &[i32], is_leaf_header: bool) -> u32 {
    let header = if is_leaf_header { MODE_HEADER_BITS } else { 0 };
    header
        + levels
            .iter()
            .filter(|&&l| l != 0)
            .map(|&l| 3 + 2 * (31 - l.unsigned_abs().leading_zeros()))
            .sum::<u32>()
}

/// RD outcome of coding a CU or a whole subtree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RdResult {
    pub cost: f64,
    /// Sum of squared errors.
    pub distortion: f64,
    /// Bits.
    pub rate: f64,
    pub evaluated_nodes: u64,
    /// Mode of the leaf; `None` for aggregates over several CUs.
    pub best_mode: Option<IntraMode>,
}

/// Codes the CU `geometry` of the root at `origin` with every intra mode and
/// keeps the cheapest (first mode wins ties).
pub fn rd_cost_leaf(frame: &Frame, origin: (usize, usize), geometry: &CuGeometry, qp: i32) -> Result<RdResult> {
    let lambda = lambda_of_qp(qp)?;
    let (x, y) = (origin.0 + geometry.x, origin.1 + geometry.y);
    let (w, h) = (geometry.width, geometry.height);
    if x + w > frame.width() || y + h > frame.height() {
        return Err(Error::InvalidGeometry(format!("{geometry} at {origin:?} outside the frame")));
    }
    let original: Vec<f64> = (0..h)
        .flat_map(|j| (0..w).map(move |i| (i, j)))
        .map(|(i, j)| frame.at(x + i, y + j) as f64)
        .collect();
    let mut best: Option<RdResult> = None;
    for mode in IntraMode::ALL {
        let pred = predict_block(frame, x, y, w, h, mode);
        let residual: Vec<f64> = original.iter().zip(&pred).map(|(o, p)| o - p).collect();
        let levels = quantize(&dct2(&residual, w, h)?, qp);
        let rate = rate_model(&levels, true) as f64;
        let distortion = if levels.iter().all(|&l| l == 0) {
            residual.iter().map(|r| r * r).sum::<f64>()
        } else {
            let recon_residual = idct2(&dequantize(&levels, qp), w, h)?;
            original
                .iter()
                .zip(&pred)
                .zip(&recon_residual)
                .map(|((o, p), r)| {
                    let e = o - (p + r);
                    e * e
                })
                .sum()
        };
        let cost = distortion + lambda * rate;
        if best.is_none_or(|b| cost < b.cost) {
            best = Some(RdResult {
                cost,
                distortion,
                rate,
                evaluated_nodes: 1,
                best_mode: Some(mode),
            });
        }
    }
    Ok(best.expect("four modes evaluated"))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn lambda_values() {
        assert!((lambda_of_qp(12).unwrap() - 0.57).abs() < 1e-12);
        assert!((lambda_of_qp(27).unwrap() - 18.24).abs() < 1e-9);
        assert!((lambda_of_qp(22).unwrap() - 0.57 * 2f64.powf(10.0 / 3.0)).abs() < 1e-12);
        assert!(lambda_of_qp(-1).is_err());
        assert!(lambda_of_qp(52).is_err());
    }

    #[test]
    fn prediction_examples() {
        let flat = Frame::filled(64, 64, 128).unwrap();
        for mode in IntraMode::ALL {
            assert!(predict_block(&flat, 8, 8, 8, 8, mode).iter().all(|&v| v == 128.0));
        }
        // Row 7 is 200; block at (0, 8) has only its top neighbours.
        let f = Frame::from_fn(64, 64, |_, y| if y == 7 { 200 } else { 50 }).unwrap();
        assert!(predict_block(&f, 0, 8, 8, 8, IntraMode::Dc).iter().all(|&v| v == 200.0));

        let f = Frame::from_fn(64, 64, |x, y| if x == 3 { [10, 20, 30, 40][y % 4] } else { 0 }).unwrap();
        let p = predict_block(&f, 4, 4, 4, 4, IntraMode::Hor);
        for (j, want) in [10.0, 20.0, 30.0, 40.0].into_iter().enumerate() {
            assert!(p[j * 4..j * 4 + 4].iter().all(|&v| v == want));
        }
    }

    #[test]
    fn quantizer_examples() {
        assert_eq!(qstep(4), 1.0);
        assert_eq!(quantize(&[1.4, -2.5, 2.5, 0.49], 4), vec![1, -3, 3, 0]);
        assert_eq!(qstep(22), 8.0);
        assert_eq!(quantize(&[100.0], 22), vec![13]);
        assert!(dequantize(&[0, 0, 0], 30).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn quantizer_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for qp in 0..=51 {
            let c: Vec<f64> = (0..64).map(|_| rng.gen_range(-2000.0..2000.0)).collect();
            let q = quantize(&c, qp);
            assert_eq!(quantize(&dequantize(&q, qp), qp), q, "qp {qp}");
        }
    }

    #[test]
    fn rate_examples() {
        assert_eq!(rate_model(&[0; 16], true), 4);
        assert_eq!(rate_model(&[0, 1, 0], true), 7);
        assert_eq!(rate_model(&[0, -1], true), 7);
        assert_eq!(rate_model(&[3, -2], true), 14);
        assert_eq!(rate_model(&[3, -2], false), 10);
        assert_eq!(rate_model(&[-2, 3], true), rate_model(&[3, -2], true));
    }

    #[test]
    fn constant_frame_leaf() {
        let f = Frame::filled(64, 64, 128).unwrap();
        let g = CuGeometry::new(16, 16, 16, 8, false).unwrap();
        let r = rd_cost_leaf(&f, (0, 0), &g, 32).unwrap();
        assert_eq!(r.distortion, 0.0);
        assert_eq!(r.rate, 4.0);
        assert_eq!(r.cost, 4.0 * lambda_of_qp(32).unwrap());
        assert_eq!(r.evaluated_nodes, 1);
    }

    #[test]
    fn coarser_qp_never_costs_more_bits_on_textured_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let f = Frame::from_fn(64, 64, |_, _| rng.gen()).unwrap();
        let g = CuGeometry::new(8, 8, 16, 16, false).unwrap();
        let fine = rd_cost_leaf(&f, (0, 0), &g, 22).unwrap();
        let coarse = rd_cost_leaf(&f, (0, 0), &g, 51).unwrap();
        assert!(coarse.rate <= fine.rate);
        assert_eq!(fine.cost, fine.distortion + lambda_of_qp(22).unwrap() * fine.rate);
        assert_eq!(coarse.cost, coarse.distortion + lambda_of_qp(51).unwrap() * coarse.rate);
    }

    #[test]
    fn leaf_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = Frame::from_fn(64, 64, |_, _| rng.gen()).unwrap();
        let g = CuGeometry::new(0, 32, 32, 16, true).unwrap();
        let a = rd_cost_leaf(&f, (0, 0), &g, 27).unwrap();
        let b = rd_cost_leaf(&f, (0, 0), &g, 27).unwrap();
        assert_eq!(a.cost.to_bits(), b.cost.to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn zero_distortion_iff_exact_reconstruction() {
        // A gradient block is not representable exactly at a coarse step.
        let f = Frame::from_fn(64, 64, |x, y| (x * 2 + y) as u8).unwrap();
        let g = CuGeometry::new(8, 8, 8, 8, false).unwrap();
        let r = rd_cost_leaf(&f, (0, 0), &g, 37).unwrap();
        assert!(r.distortion > 0.0);
    }
}
