//! Complexity and rate-distortion metrics.

use crate::error::{Error, Result};

/// One point of an RD curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RdPoint {
    pub qp: i32,
    /// Total bits.
    pub rate: f64,
    /// Total squared error.
    pub sse: f64,
    pub pixels: usize,
}

impl RdPoint {
    /// `10 log10(255^2 * pixels / SSE)`; infinite when lossless.
    pub fn psnr(&self) -> f64 {
        if self.sse <= 0.0 {
            return f64::INFINITY;
        }
        10.0 * (255.0f64 * 255.0 * self.pixels as f64 / self.sse).log10()
    }
}

/// Mean of `(r - t) / r` over paired measurements (4 QPs in the standard
/// protocol). Used on wall times and on node counts.
pub fn delta_et(reference: &[f64], test: &[f64]) -> Result<f64> {
    if reference.len() != test.len() || reference.is_empty() {
        return Err(Error::Metric(format!(
            "need equally many reference and test values, got {} and {}",
            reference.len(),
            test.len()
        )));
    }
    let mut sum = 0.0;
    for (&r, &t) in reference.iter().zip(test) {
        if !(r > 0.0 && t > 0.0) || !r.is_finite() || !t.is_finite() {
            return Err(Error::Metric(format!("times must be positive, got {r} and {t}")));
        }
        sum += (r - t) / r;
    }
    Ok(sum / reference.len() as f64)
}

/// Least-squares polynomial of `degree` through `(x, y)`; coefficients from
/// the constant term up.
fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    let n = degree + 1;
    let mut a = vec![vec![0.0; n + 1]; n];
    for (&xi, &yi) in x.iter().zip(y) {
        let powers: Vec<f64> = (0..2 * n).map(|k| xi.powi(k as i32)).collect();
        for r in 0..n {
            for c in 0..n {
                a[r][c] += powers[r + c];
            }
            a[r][n] += powers[r] * yi;
        }
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Metric("singular fit".into()));
        }
        a.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Ok((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

fn integrate(coef: &[f64], lo: f64, hi: f64) -> f64 {
    coef.iter()
        .enumerate()
        .map(|(k, c)| c * (hi.powi(k as i32 + 1) - lo.powi(k as i32 + 1)) / (k as f64 + 1.0))
        .sum()
}

/// Bjontegaard delta rate in percent: cubic fits of `log10(rate)` against
/// PSNR, averaged over the shared PSNR interval. Positive means the test
/// needs more bits for the same quality.
pub fn bd_rate(anchor: &[RdPoint], test: &[RdPoint]) -> Result<f64> {
    if anchor.len() < 4 || test.len() < 4 {
        return Err(Error::Metric("need at least 4 points per curve".into()));
    }
    let prep = |pts: &[RdPoint]| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut v: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for p in pts {
            let q = p.psnr();
            if !q.is_finite() || !(p.rate > 0.0) {
                return Err(Error::Metric(format!("qp {}: rate {} / psnr {q} unusable", p.qp, p.rate)));
            }
            v.push((q, p.rate.log10()));
        }
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        if v.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Metric("duplicate PSNR".into()));
        }
        Ok(v.into_iter().unzip())
    };
    let (pa, ra) = prep(anchor)?;
    let (pt, rt) = prep(test)?;
    let lo = pa[0].max(pt[0]);
    let hi = pa[pa.len() - 1].min(pt[pt.len() - 1]);
    if !(hi > lo) {
        return Err(Error::Metric(format!("PSNR ranges do not overlap ({lo} >= {hi})")));
    }
    // center and scale PSNR for a well-conditioned fit
    let all: Vec<f64> = pa.iter().chain(&pt).copied().collect();
    let center = all.iter().sum::<f64>() / all.len() as f64;
    let scale = all.iter().map(|v| (v - center).abs()).fold(0.0, f64::max).max(1e-9);
    let norm = |v: &[f64]| v.iter().map(|x| (x - center) / scale).collect::<Vec<_>>();
    let ca = polyfit(&norm(&pa), &ra, 3)?;
    let ct = polyfit(&norm(&pt), &rt, 3)?;
    let (ul, uh) = ((lo - center) / scale, (hi - center) / scale);
    let avg = (integrate(&ct, ul, uh) - integrate(&ca, ul, uh)) / (uh - ul);
    Ok(100.0 * (10f64.powf(avg) - 1.0))
}
