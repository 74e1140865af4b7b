//! Stage 2: one softmax gradient-boosted tree classifier per CU size,
//! mapping cropped edge probabilities plus QP to a split distribution.

mod dist;
mod tree;

pub use dist::{SplitDistribution, SUM_TOLERANCE};
pub use tree::{Columns, RegressionTree, TreeNode, TreeParams};

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::binio::{put_f32, put_i32, put_u32, Reader};
use crate::dataset::HardRecord;
use crate::error::{Error, Result};
use crate::partition::{legal_splits, CuGeometry, SizeId, SplitType};

pub const BANK_MAGIC: &str = "QTDT";
pub const BANK_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GbdtParams {
    pub rounds: usize,
    pub shrinkage: f64,
    pub max_depth: usize,
    pub l2: f64,
    pub min_child_hessian: f64,
    pub min_child_samples: usize,
    /// Fraction of rows drawn (without replacement) for each round.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            rounds: 100,
            shrinkage: 0.1,
            max_depth: 4,
            l2: 1.0,
            min_child_hessian: 1e-3,
            min_child_samples: 1,
            subsample: 1.0,
            seed: 0,
        }
    }
}

/// Per-class tree ensembles for one CU size. Classes illegal at the size
/// have no trees.
#[derive(Clone, Debug, PartialEq)]
pub struct BoostedModel {
    pub size_id: SizeId,
    pub rounds: u32,
    pub shrinkage: f32,
    pub ensembles: [Vec<RegressionTree>; 6],
}

impl BoostedModel {
    /// Zero rounds: uniform over the legal splits.
    pub fn untrained(size_id: SizeId, shrinkage: f32) -> Self {
        BoostedModel {
            size_id,
            rounds: 0,
            shrinkage,
            ensembles: Default::default(),
        }
    }

    /// Ensemble sums; `features` is the crop followed by the QP.
    pub fn logits(&self, features: &[f32]) -> Result<[f64; 6]> {
        let expected = self.size_id.feature_len();
        if features.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: features.len(),
            });
        }
        let mut out = [0.0; 6];
        for (k, trees) in self.ensembles.iter().enumerate() {
            out[k] = trees.iter().map(|t| t.predict(features) as f64).sum();
        }
        Ok(out)
    }

    /// Softmax over the splits legal at the node (`mtt_ancestor` only
    /// narrows the mask).
    pub fn predict(&self, mtt_ancestor: bool, features: &[f32]) -> Result<SplitDistribution> {
        let logits = self.logits(features)?;
        Ok(SplitDistribution::from_logits(&logits, legal_for(self.size_id, mtt_ancestor)))
    }

    pub fn tree_count(&self) -> usize {
        self.ensembles.iter().map(Vec::len).sum()
    }
}

fn legal_for(size: SizeId, mtt_ancestor: bool) -> crate::partition::SplitSet {
    let g = CuGeometry {
        x: 0,
        y: 0,
        width: size.width(),
        height: size.height(),
        mtt_ancestor,
    };
    legal_splits(&g)
}

fn check_records(size: SizeId, records: &[HardRecord]) -> Result<()> {
    for r in records {
        if r.size_id != size {
            return Err(Error::Corrupt(format!("record of size {} in the {size} set", r.size_id)));
        }
        if r.features.len() + 1 != size.feature_len() {
            return Err(Error::LengthMismatch {
                expected: size.feature_len() - 1,
                actual: r.features.len(),
            });
        }
        if !legal_for(size, r.mtt_ancestor).contains(r.label) {
            return Err(Error::Corrupt(format!("label {} not legal for {size}", r.label)));
        }
        if r.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Corrupt("non-finite feature".into()));
        }
    }
    Ok(())
}

fn cross_entropy(scores: &[f64], labels: &[usize], k: usize) -> f64 {
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = &scores[i * k..(i + 1) * k];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    total / labels.len() as f64
}

/// Trains the classifier for one size.
///
/// Each round fits one tree per legal class to the softmax gradient with a
/// Newton leaf step scaled by `(K-1)/K` and the shrinkage. If a round would
/// raise the training cross-entropy its step is halved until it does not;
/// a round that cannot be made non-increasing ends training early. Returns
/// the model and the training cross-entropy before round 1 and after each
/// accepted round.
pub fn train_model(size: SizeId, records: &[HardRecord], params: &GbdtParams) -> Result<(BoostedModel, Vec<f64>)> {
    if records.is_empty() {
        return Err(Error::Empty("hard records"));
    }
    check_records(size, records)?;
    let classes: Vec<SplitType> = size.legal_splits().iter().collect();
    let k = classes.len();
    let rows: Vec<Vec<f32>> = records.iter().map(HardRecord::model_input).collect();
    let data = Columns::from_rows(&rows);
    drop(rows);
    let labels: Vec<usize> = records
        .iter()
        .map(|r| classes.iter().position(|&c| c == r.label).unwrap())
        .collect();
    let n = records.len();

    let mut model = BoostedModel::untrained(size, params.shrinkage as f32);
    let mut scores = vec![0.0; n * k];
    let mut history = vec![cross_entropy(&scores, &labels, k)];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        l2: params.l2,
        min_child_hessian: params.min_child_hessian,
        min_child_samples: params.min_child_samples,
        leaf_factor: params.shrinkage * (k as f64 - 1.0) / k as f64,
    };
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut probs = vec![0.0; n * k];

    for _ in 0..params.rounds {
        let in_bag: Vec<bool> = if params.subsample < 1.0 {
            (0..n).map(|_| rng.gen::<f64>() < params.subsample).collect()
        } else {
            vec![true; n]
        };
        for i in 0..n {
            let row = &scores[i * k..(i + 1) * k];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|s| (s - max).exp()).sum();
            for c in 0..k {
                probs[i * k + c] = (row[c] - max).exp() / sum;
            }
        }
        let mut trees = Vec::with_capacity(k);
        for c in 0..k {
            for i in 0..n {
                let p = probs[i * k + c];
                let y = (labels[i] == c) as u8 as f64;
                grad[i] = p - y;
                hess[i] = (p * (1.0 - p)).max(1e-16);
            }
            trees.push(tree::fit(&data, &in_bag, &grad, &hess, &tree_params));
        }

        let prev = *history.last().unwrap();
        let mut accepted = None;
        for _ in 0..30 {
            let mut trial = scores.clone();
            for (c, t) in trees.iter().enumerate() {
                for i in 0..n {
                    trial[i * k + c] += t.predict_row(&data, i) as f64;
                }
            }
            let loss = cross_entropy(&trial, &labels, k);
            if loss <= prev {
                accepted = Some((trial, loss));
                break;
            }
            trees.iter_mut().for_each(|t| t.scale(0.5));
        }
        let Some((trial, loss)) = accepted else { break };
        scores = trial;
        history.push(loss);
        for (c, t) in trees.into_iter().enumerate() {
            model.ensembles[classes[c].index()].push(t);
        }
        model.rounds += 1;
    }
    Ok((model, history))
}

/// The sixteen per-size classifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBank {
    models: Vec<BoostedModel>,
}

impl ModelBank {
    /// `models` must hold exactly one model per size, in any order.
    pub fn new(mut models: Vec<BoostedModel>) -> Result<Self> {
        models.sort_by_key(|m| m.size_id.index());
        for size in SizeId::all() {
            let found = models.iter().filter(|m| m.size_id == size).count();
            if found == 0 {
                return Err(Error::MissingSizeBlock(size.to_string()));
            }
            if found > 1 {
                return Err(Error::Corrupt(format!("duplicate model for {size}")));
            }
        }
        Ok(ModelBank { models })
    }

    pub fn untrained() -> Self {
        ModelBank {
            models: SizeId::all().map(|s| BoostedModel::untrained(s, 0.1)).collect(),
        }
    }

    pub fn model(&self, size: SizeId) -> &BoostedModel {
        &self.models[size.index()]
    }

    pub fn models(&self) -> &[BoostedModel] {
        &self.models
    }

    /// Distribution for a node; `features` is the crop followed by the QP.
    pub fn predict(&self, geometry: &CuGeometry, features: &[f32]) -> Result<SplitDistribution> {
        let size = SizeId::of(geometry.width, geometry.height)
            .ok_or_else(|| Error::InvalidGeometry(format!("{geometry}: no classifier for this size")))?;
        self.model(size).predict(geometry.mtt_ancestor, features)
    }

    pub fn predict_record(&self, r: &HardRecord) -> Result<SplitDistribution> {
        self.model(r.size_id).predict(r.mtt_ancestor, &r.model_input())
    }

    /// Trains all sizes in parallel. `per_size[i]` holds the records of
    /// `SizeId::from_index(i)`; sizes without records stay untrained.
    pub fn train(per_size: &[Vec<HardRecord>], params: &GbdtParams) -> Result<(ModelBank, Vec<Vec<f64>>)> {
        if per_size.len() != SizeId::COUNT {
            return Err(Error::LengthMismatch {
                expected: SizeId::COUNT,
                actual: per_size.len(),
            });
        }
        let trained: Vec<Result<(BoostedModel, Vec<f64>)>> = SizeId::all()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|size| {
                let records = &per_size[size.index()];
                if records.is_empty() {
                    Ok((BoostedModel::untrained(size, params.shrinkage as f32), Vec::new()))
                } else {
                    train_model(size, records, params)
                }
            })
            .collect();
        let mut models = Vec::new();
        let mut curves = Vec::new();
        for t in trained {
            let (m, c) = t?;
            models.push(m);
            curves.push(c);
        }
        Ok((ModelBank::new(models)?, curves))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = BANK_MAGIC.as_bytes().to_vec();
        put_u32(&mut out, BANK_VERSION);
        put_u32(&mut out, self.models.len() as u32);
        for m in &self.models {
            out.push(m.size_id.index() as u8);
            put_u32(&mut out, m.rounds);
            put_f32(&mut out, m.shrinkage);
            for trees in &m.ensembles {
                put_u32(&mut out, trees.len() as u32);
                for t in trees {
                    put_u32(&mut out, t.nodes.len() as u32);
                    for n in &t.nodes {
                        put_i32(&mut out, n.feature);
                        put_f32(&mut out, n.threshold);
                        put_u32(&mut out, n.left);
                        put_u32(&mut out, n.right);
                        put_f32(&mut out, n.value);
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.header(BANK_MAGIC, BANK_VERSION)?;
        let count = r.u32("model count")? as usize;
        if count > SizeId::COUNT {
            return Err(Error::Corrupt(format!("{count} model blocks")));
        }
        let mut models = Vec::with_capacity(count);
        for _ in 0..count {
            let id = r.u8("size id")?;
            let size_id = SizeId::from_index(id as usize).ok_or_else(|| Error::Corrupt(format!("size id {id}")))?;
            let rounds = r.u32("rounds")?;
            let shrinkage = r.f32("shrinkage")?;
            let legal = size_id.legal_splits();
            let mut ensembles: [Vec<RegressionTree>; 6] = Default::default();
            for (k, slot) in ensembles.iter_mut().enumerate() {
                let trees = r.u32("tree count")? as usize;
                if trees > 0 && !legal.contains(SplitType::from_index(k).unwrap()) {
                    return Err(Error::Corrupt(format!("trees for illegal class {k} at {size_id}")));
                }
                for _ in 0..trees {
                    let len = r.u32("node count")? as usize;
                    if len == 0 || len > r.remaining() / 20 {
                        return Err(Error::Corrupt(format!("tree with {len} nodes")));
                    }
                    let mut nodes = Vec::with_capacity(len);
                    for _ in 0..len {
                        nodes.push(TreeNode {
                            feature: r.i32("node")?,
                            threshold: r.f32("node")?,
                            left: r.u32("node")?,
                            right: r.u32("node")?,
                            value: r.f32("node")?,
                        });
                    }
                    let t = RegressionTree { nodes };
                    check_tree(&t, size_id.feature_len())?;
                    slot.push(t);
                }
            }
            models.push(BoostedModel {
                size_id,
                rounds,
                shrinkage,
                ensembles,
            });
        }
        ModelBank::new(models)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Children must point forward (no cycles) and features must exist.
fn check_tree(t: &RegressionTree, feature_len: usize) -> Result<()> {
    for (i, n) in t.nodes.iter().enumerate() {
        if n.is_leaf() {
            if !n.value.is_finite() {
                return Err(Error::Corrupt("non-finite leaf value".into()));
            }
            continue;
        }
        let (l, r) = (n.left as usize, n.right as usize);
        if l <= i || r <= i || l >= t.nodes.len() || r >= t.nodes.len() {
            return Err(Error::Corrupt(format!("node {i} has bad children {l}/{r}")));
        }
    }
    if t.max_feature().is_some_and(|f| f >= feature_len) {
        return Err(Error::Corrupt("feature index out of range".into()));
    }
    Ok(())
}

/// Top-N hit rates of a bank on held-out records.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyReport {
    pub n: usize,
    /// `(size, records, rate)`; the rate is absent when the size has no
    /// records or `n` is not below its class count.
    pub per_size: Vec<(SizeId, usize, Option<f64>)>,
    /// Macro average over the sizes sharing a class count, for 6..=2.
    pub by_class_count: Vec<(usize, Option<f64>)>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Fraction of records whose label is among the `n` most probable splits.
pub fn top_n_accuracy(bank: &ModelBank, records: &[HardRecord], n: usize) -> Result<AccuracyReport> {
    if n == 0 {
        return Err(Error::InvalidTopN("N = 0".into()));
    }
    let mut hits = [0usize; SizeId::COUNT];
    let mut totals = [0usize; SizeId::COUNT];
    for r in records {
        let d = bank.predict_record(r)?;
        let top = d.top_n(n.min(d.legal.len()))?;
        totals[r.size_id.index()] += 1;
        hits[r.size_id.index()] += top.contains(&r.label) as usize;
    }
    let per_size: Vec<(SizeId, usize, Option<f64>)> = SizeId::all()
        .map(|s| {
            let i = s.index();
            let rate = (totals[i] > 0 && n < s.class_count()).then(|| hits[i] as f64 / totals[i] as f64);
            (s, totals[i], rate)
        })
        .collect();
    let by_class_count = (2..=6)
        .rev()
        .map(|c| {
            let rates: Vec<f64> = per_size
                .iter()
                .filter(|(s, _, _)| s.class_count() == c)
                .filter_map(|(_, _, r)| *r)
                .collect();
            (c, mean(&rates))
        })
        .collect();
    Ok(AccuracyReport {
        n,
        per_size,
        by_class_count,
    })
}

impl AccuracyReport {
    /// Macro average over every size with a rate.
    pub fn overall(&self) -> Option<f64> {
        let rates: Vec<f64> = self.per_size.iter().filter_map(|(_, _, r)| *r).collect();
        mean(&rates)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn size_8x4() -> SizeId {
        SizeId::of(8, 4).unwrap()
    }

    fn toy(n: usize, seed: u64) -> Vec<HardRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let v: f32 = rng.gen();
                HardRecord {
                    size_id: size_8x4(),
                    mtt_ancestor: false,
                    features: vec![v],
                    qp: 27,
                    label: if v > 0.5 { SplitType::Btv } else { SplitType::Ns },
                }
            })
            .collect()
    }

    #[test]
    fn zero_rounds_is_uniform() {
        let m = BoostedModel::untrained(SizeId::from_index(0).unwrap(), 0.1);
        let d = m.predict(false, &vec![0.0; 481]).unwrap();
        assert_eq!(d.prob(SplitType::Ns), 0.5);
        assert_eq!(d.prob(SplitType::Qt), 0.5);
        assert!(m.predict(false, &[0.0; 3]).is_err());
    }

    #[test]
    fn separable_toy_is_learned() {
        let records = toy(200, 1);
        let params = GbdtParams {
            rounds: 10,
            max_depth: 1,
            ..Default::default()
        };
        let (m, curve) = train_model(size_8x4(), &records, &params).unwrap();
        assert!(curve.windows(2).all(|w| w[1] <= w[0]));
        for r in &records {
            let d = m.predict(false, &r.model_input()).unwrap();
            assert_eq!(d.top_n(1).unwrap()[0], r.label);
        }
    }

    #[test]
    fn zero_shrinkage_learns_nothing() {
        let records = toy(50, 2);
        let params = GbdtParams {
            rounds: 5,
            shrinkage: 0.0,
            ..Default::default()
        };
        let (m, _) = train_model(size_8x4(), &records, &params).unwrap();
        let d = m.predict(false, &[0.9, 27.0]).unwrap();
        assert_eq!(d.prob(SplitType::Ns), 0.5);
    }

    #[test]
    fn single_class_input_is_not_an_error() {
        let mut records = toy(40, 3);
        records.iter_mut().for_each(|r| r.label = SplitType::Ns);
        let (m, _) = train_model(size_8x4(), &records, &GbdtParams::default()).unwrap();
        let d = m.predict(false, &[0.7, 27.0]).unwrap();
        assert!(d.prob(SplitType::Ns) > 0.99);
    }

    #[test]
    fn illegal_label_is_rejected() {
        let mut records = toy(10, 4);
        records[0].label = SplitType::Qt;
        assert!(train_model(size_8x4(), &records, &GbdtParams::default()).is_err());
    }

    #[test]
    fn bank_bytes_round_trip() {
        let records = toy(100, 5);
        let (m, _) = train_model(size_8x4(), &records, &GbdtParams { rounds: 3, ..Default::default() }).unwrap();
        let mut models: Vec<BoostedModel> = SizeId::all().map(|s| BoostedModel::untrained(s, 0.1)).collect();
        models[size_8x4().index()] = m;
        let bank = ModelBank::new(models).unwrap();
        let back = ModelBank::from_bytes(&bank.to_bytes()).unwrap();
        assert_eq!(bank, back);
    }
}
