//! Deterministic synthetic luma images for tests, demos and desk-scale
//! experiments when no photo corpus is at hand.
//!
//! Each image is a smooth gradient with overlaid flat rectangles, striped
//! patches and sensor-like noise, so that both large and small CUs win the
//! RD search somewhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::Frame;
use crate::error::Result;

#[derive(Clone, Copy, Debug)]
enum Patch {
    Flat(f64),
    Stripes { period: f64, vertical: bool, amp: f64, base: f64 },
    Checker { cell: usize, lo: f64, hi: f64 },
}

pub fn image(seed: u64, width: usize, height: usize) -> Result<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g0 = rng.gen_range(40.0..200.0);
    let gx = rng.gen_range(-0.6..0.6);
    let gy = rng.gen_range(-0.6..0.6);
    let mut canvas: Vec<f64> = (0..width * height)
        .map(|i| g0 + gx * (i % width) as f64 + gy * (i / width) as f64)
        .collect();

    let count = rng.gen_range(3..10) * width * height / (128 * 128);
    for _ in 0..count.max(2) {
        let w = rng.gen_range(4..width / 2);
        let h = rng.gen_range(4..height / 2);
        let x0 = rng.gen_range(0..width - w);
        let y0 = rng.gen_range(0..height - h);
        let patch = match rng.gen_range(0..3) {
            0 => Patch::Flat(rng.gen_range(0.0..255.0)),
            1 => Patch::Stripes {
                period: rng.gen_range(3.0..16.0),
                vertical: rng.gen(),
                amp: rng.gen_range(10.0..60.0),
                base: rng.gen_range(60.0..190.0),
            },
            _ => Patch::Checker {
                cell: [2, 4, 8][rng.gen_range(0..3)],
                lo: rng.gen_range(0.0..120.0),
                hi: rng.gen_range(130.0..255.0),
            },
        };
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                canvas[y * width + x] = match patch {
                    Patch::Flat(v) => v,
                    Patch::Stripes {
                        period,
                        vertical,
                        amp,
                        base,
                    } => {
                        let t = if vertical { x } else { y } as f64;
                        base + amp * (2.0 * std::f64::consts::PI * t / period).sin()
                    }
                    Patch::Checker { cell, lo, hi } => {
                        if ((x - x0) / cell + (y - y0) / cell) % 2 == 0 {
                            lo
                        } else {
                            hi
                        }
                    }
                };
            }
        }
    }
    let noise = rng.gen_range(0.0..6.0);
    Frame::from_fn(width, height, |x, y| {
        let v = canvas[y * width + x] + rng.gen_range(-noise..=noise);
        v.round().clamp(0.0, 255.0) as u8
    })
}

/// `count` images with seeds `seed, seed + 1, ...`.
pub fn corpus(seed: u64, count: usize, width: usize, height: usize) -> Result<Vec<Frame>> {
    (0..count as u64).map(|i| image(seed + i, width, height)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_varied() {
        let a = image(3, 128, 64).unwrap();
        assert_eq!(a, image(3, 128, 64).unwrap());
        assert_ne!(a, image(4, 128, 64).unwrap());
        let distinct: std::collections::BTreeSet<u8> = a.luma().iter().copied().collect();
        assert!(distinct.len() > 20);
    }
}
