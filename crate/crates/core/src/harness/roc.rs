//! ROC curves of stage-1 edge probabilities as split detectors.

use crate::dataset::BlockSample;
use crate::error::{Error, Result};
use crate::partition::{split_boundary_indices, CuGeometry, EdgeVector, SizeId, SplitType};

#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
}

/// ROC of `(score, is_positive)` pairs; tied scores move along a diagonal.
pub fn roc_from_scores(scored: &[(f64, bool)]) -> Result<RocCurve> {
    let positives = scored.iter().filter(|s| s.1).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Metric(format!("{positives} positives and {negatives} negatives")));
    }
    let mut v = scored.to_vec();
    v.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j].0 == v[i].0 {
            if v[j].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let p = (fp as f64 / negatives as f64, tp as f64 / positives as f64);
        let last = *points.last().unwrap();
        auc += (p.0 - last.0) * (p.1 + last.1) / 2.0;
        points.push(p);
        i = j;
    }
    Ok(RocCurve {
        points,
        auc,
        positives,
        negatives,
    })
}

/// Mean predicted probability on the boundary lines `split` would create.
pub fn split_score(edges: &EdgeVector, geometry: &CuGeometry, split: SplitType) -> Option<f64> {
    let idx = split_boundary_indices(geometry, split);
    if idx.is_empty() {
        return None;
    }
    Some(idx.iter().map(|&i| edges[i] as f64).sum::<f64>() / idx.len() as f64)
}

/// ROC for detecting `split` at nodes of `size`: positives are nodes whose
/// exhaustive-search split is `split`, negatives all other nodes of that
/// size. `predicted[i]` holds the stage-1 output for `samples[i]`.
pub fn roc_curve(samples: &[BlockSample], predicted: &[EdgeVector], split: SplitType, size: SizeId) -> Result<RocCurve> {
    if split == SplitType::Ns {
        return Err(Error::Metric("NS has no boundary to score".into()));
    }
    if !size.legal_splits().contains(split) {
        return Err(Error::Metric(format!("{split} is never legal at {size}")));
    }
    if samples.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            expected: samples.len(),
            actual: predicted.len(),
        });
    }
    let mut scored = Vec::new();
    for (s, p) in samples.iter().zip(predicted) {
        for node in s.tree.nodes() {
            let g = node.geometry;
            if (g.width, g.height) != (size.width(), size.height()) {
                continue;
            }
            if let Some(score) = split_score(p, &g, split) {
                scored.push((score, node.split == split));
            }
        }
    }
    roc_from_scores(&scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_and_constant_scores() {
        let perfect: Vec<(f64, bool)> = (0..20).map(|i| if i % 3 == 0 { (1.0, true) } else { (0.0, false) }).collect();
        assert_eq!(roc_from_scores(&perfect).unwrap().auc, 1.0);
        let flat: Vec<(f64, bool)> = (0..20).map(|i| (0.3, i % 3 == 0)).collect();
        assert_eq!(roc_from_scores(&flat).unwrap().auc, 0.5);
        assert!(roc_from_scores(&[(0.1, true)]).is_err());
    }

    #[test]
    fn shuffled_labels_are_near_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut data: Vec<(f64, bool)> = (0..1000).map(|i| (rng.gen::<f64>(), i % 2 == 0)).collect();
        let mut labels: Vec<bool> = data.iter().map(|d| d.1).collect();
        labels.shuffle(&mut rng);
        data.iter_mut().zip(labels).for_each(|(d, l)| d.1 = l);
        let auc = roc_from_scores(&data).unwrap().auc;
        assert!((0.4..=0.6).contains(&auc), "{auc}");
    }
}
