//! End-to-end evaluation: exhaustive anchor versus pruned test encodings
//! over a corpus and a QP set, trade-off sweeps and reports.

mod metrics;
mod roc;

pub use metrics::{bd_rate, delta_et, RdPoint};
pub use roc::{roc_curve, roc_from_scores, split_score, RocCurve};

use std::fmt::Write as _;

use crate::codec::Frame;
use crate::dataset::{explode_hard, BlockSample, FeatureSource, HardRecord};
use crate::error::{Error, Result};
use crate::gbdt::{top_n_accuracy, AccuracyReport, ModelBank, SplitDistribution};
use crate::nn::Network;
use crate::partition::{crop_edge_vector, CuGeometry, EdgeVector, SizeId};
use crate::rdo::{encode_frame, BlockContext, FrameEncoding, Predictor, SearchMode, TopNConfig};

/// The standard test QPs.
pub const TEST_QPS: [i32; 4] = [22, 27, 32, 37];

/// CNN edge probabilities followed by the per-size classifiers.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub net: Network<f32>,
    pub bank: ModelBank,
}

impl Predictor for Pipeline {
    fn prepare(&self, block: &BlockContext<'_>) -> Result<Option<EdgeVector>> {
        Ok(Some(self.net.predict_edges(&block.input_pixels(), block.qp)?))
    }

    fn predict(&self, block: &BlockContext<'_>, geometry: &CuGeometry, edges: Option<&EdgeVector>) -> Result<SplitDistribution> {
        let edges = edges.ok_or_else(|| Error::Empty("edge vector not prepared"))?;
        let mut features = crop_edge_vector(edges, geometry);
        features.push(block.qp as f32);
        self.bank.predict(geometry, &features)
    }
}

/// Exhaustive encodings of a corpus, `runs[q][i]` for `qps[q]` and image `i`.
#[derive(Clone, Debug)]
pub struct Anchor {
    pub qps: Vec<i32>,
    pub runs: Vec<Vec<FrameEncoding>>,
}

pub fn run_anchor(frames: &[Frame], qps: &[i32]) -> Result<Anchor> {
    if frames.is_empty() {
        return Err(Error::Empty("evaluation corpus"));
    }
    let runs = qps
        .iter()
        .map(|&qp| frames.iter().map(|f| encode_frame(f, qp, SearchMode::Exhaustive)).collect())
        .collect::<Result<Vec<Vec<_>>>>()?;
    Ok(Anchor { qps: qps.to_vec(), runs })
}

#[derive(Clone, Debug)]
pub struct QpRow {
    pub qp: i32,
    pub anchor: RdPoint,
    pub test: RdPoint,
    pub anchor_nodes: u64,
    pub test_nodes: u64,
    pub anchor_time: f64,
    pub test_time: f64,
    pub predictor_time: f64,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub config_id: String,
    pub topn: TopNConfig,
    pub rows: Vec<QpRow>,
    /// Wall-clock ΔET; absent when a run took no measurable time.
    pub delta_et: Option<f64>,
    /// Same formula on evaluated-node counts.
    pub delta_nodes: f64,
    pub bd_rate: std::result::Result<f64, String>,
    /// Predictor seconds over anchor seconds.
    pub overhead: f64,
    /// Every root chose the same tree as the anchor.
    pub trees_identical: bool,
    pub accuracy: Vec<AccuracyReport>,
}

/// Quotes a CSV field when it contains a separator or quote.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn point(qp: i32, runs: &[FrameEncoding]) -> RdPoint {
    RdPoint {
        qp,
        rate: runs.iter().map(|r| r.rd.rate).sum(),
        sse: runs.iter().map(|r| r.rd.distortion).sum(),
        pixels: runs.iter().map(|r| r.pixels).sum(),
    }
}

/// Pruned encoding of every frame at every anchor QP, compared with the
/// anchor.
pub fn evaluate(
    frames: &[Frame],
    anchor: &Anchor,
    predictor: &dyn Predictor,
    config_id: &str,
    topn: TopNConfig,
) -> Result<RunReport> {
    if anchor.runs.iter().any(|r| r.len() != frames.len()) {
        return Err(Error::LengthMismatch {
            expected: frames.len(),
            actual: anchor.runs.first().map_or(0, Vec::len),
        });
    }
    let mode = SearchMode::Pruned { predictor, config: topn };
    let mut rows = Vec::new();
    let mut identical = true;
    for (q, &qp) in anchor.qps.iter().enumerate() {
        let tests = frames
            .iter()
            .map(|f| encode_frame(f, qp, mode))
            .collect::<Result<Vec<_>>>()?;
        let refs = &anchor.runs[q];
        identical &= tests.iter().zip(refs).all(|(t, r)| t.trees == r.trees);
        rows.push(QpRow {
            qp,
            anchor: point(qp, refs),
            test: point(qp, &tests),
            anchor_nodes: refs.iter().map(|r| r.stats.evaluated_nodes).sum(),
            test_nodes: tests.iter().map(|r| r.stats.evaluated_nodes).sum(),
            anchor_time: refs.iter().map(|r| r.stats.wall_time).sum(),
            test_time: tests.iter().map(|r| r.stats.wall_time).sum(),
            predictor_time: tests.iter().map(|r| r.stats.predictor_time).sum(),
        });
    }
    let anchor_times: Vec<f64> = rows.iter().map(|r| r.anchor_time).collect();
    let test_times: Vec<f64> = rows.iter().map(|r| r.test_time).collect();
    let anchor_nodes: Vec<f64> = rows.iter().map(|r| r.anchor_nodes as f64).collect();
    let test_nodes: Vec<f64> = rows.iter().map(|r| r.test_nodes as f64).collect();
    let anchor_points: Vec<RdPoint> = rows.iter().map(|r| r.anchor).collect();
    let test_points: Vec<RdPoint> = rows.iter().map(|r| r.test).collect();
    let total_anchor: f64 = anchor_times.iter().sum();
    let total_predictor: f64 = rows.iter().map(|r| r.predictor_time).sum();
    Ok(RunReport {
        config_id: config_id.to_string(),
        topn,
        delta_et: delta_et(&anchor_times, &test_times).ok(),
        delta_nodes: delta_et(&anchor_nodes, &test_nodes)?,
        bd_rate: bd_rate(&anchor_points, &test_points).map_err(|e| e.to_string()),
        overhead: if total_anchor > 0.0 { total_predictor / total_anchor } else { 0.0 },
        trees_identical: identical,
        rows,
        accuracy: Vec::new(),
    })
}

/// Hard records of the anchor trees with stage-1 predicted features.
pub fn anchor_hard_records(frames: &[Frame], anchor: &Anchor, net: &Network<f32>) -> Result<Vec<Vec<HardRecord>>> {
    let mut per_size: Vec<Vec<HardRecord>> = vec![Vec::new(); SizeId::COUNT];
    for (q, &qp) in anchor.qps.iter().enumerate() {
        for (f, enc) in frames.iter().zip(&anchor.runs[q]) {
            let padded = f.pad_to_multiple(crate::partition::ROOT_SIZE);
            let mut samples = Vec::new();
            let mut edges = Vec::new();
            for (origin, tree) in &enc.trees {
                let block = BlockContext {
                    frame: &padded,
                    origin: *origin,
                    qp,
                };
                let pixels = block.input_pixels();
                edges.push(net.predict_edges(&pixels, qp)?);
                samples.push(BlockSample::new(pixels, qp as u8, tree.clone(), (0, 0))?);
            }
            for (dst, src) in per_size.iter_mut().zip(explode_hard(&samples, FeatureSource::Predicted(&edges))?) {
                dst.extend(src);
            }
        }
    }
    Ok(per_size)
}

/// [`evaluate`] with the trained pipeline, adding top-1/2/3 accuracy of the
/// classifiers on the corpus's anchor trees.
pub fn evaluate_pipeline(
    frames: &[Frame],
    anchor: &Anchor,
    pipeline: &Pipeline,
    config_id: &str,
    topn: TopNConfig,
) -> Result<RunReport> {
    let mut report = evaluate(frames, anchor, pipeline, config_id, topn)?;
    let records: Vec<HardRecord> = anchor_hard_records(frames, anchor, &pipeline.net)?
        .into_iter()
        .flatten()
        .collect();
    report.accuracy = (1..=3)
        .map(|n| top_n_accuracy(&pipeline.bank, &records, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(report)
}

impl RunReport {
    pub const CSV_HEADER: &'static str = "config_id,qp,anchor_rate,anchor_psnr,test_rate,test_psnr,anchor_nodes,test_nodes,anchor_seconds,test_seconds,predictor_seconds";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{:.6},{},{:.6},{},{},{:.6},{:.6},{:.6}",
                csv_field(&self.config_id),
                r.qp,
                r.anchor.rate,
                r.anchor.psnr(),
                r.test.rate,
                r.test.psnr(),
                r.anchor_nodes,
                r.test_nodes,
                r.anchor_time,
                r.test_time,
                r.predictor_time
            )
            .unwrap();
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        writeln!(s, "config {} (top-N {})", self.config_id, self.topn).unwrap();
        writeln!(s, "  delta nodes   {:.4}", self.delta_nodes).unwrap();
        match self.delta_et {
            Some(v) => writeln!(s, "  delta ET      {v:.4}").unwrap(),
            None => writeln!(s, "  delta ET      n/a").unwrap(),
        }
        match &self.bd_rate {
            Ok(v) => writeln!(s, "  BD-rate       {v:.4} %").unwrap(),
            Err(e) => writeln!(s, "  BD-rate       n/a ({e})").unwrap(),
        }
        writeln!(s, "  overhead      {:.4} of anchor time", self.overhead).unwrap();
        writeln!(s, "  same trees    {}", self.trees_identical).unwrap();
        for acc in &self.accuracy {
            let by: Vec<String> = acc
                .by_class_count
                .iter()
                .map(|(c, r)| match r {
                    Some(v) => format!("{c}cls {:.3}", v),
                    None => format!("{c}cls -"),
                })
                .collect();
            writeln!(s, "  top-{} acc     {}", acc.n, by.join("  ")).unwrap();
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub reports: Vec<RunReport>,
}

impl SweepReport {
    pub const CSV_HEADER: &'static str = "config_id,delta_nodes,delta_et,bd_rate";

    /// Δnodes strictly increases along the configs as given.
    pub fn nodes_strictly_ordered(&self) -> bool {
        self.reports.windows(2).all(|w| w[1].delta_nodes > w[0].delta_nodes)
    }

    /// BD-rate never decreases along the configs as given.
    pub fn bd_rate_monotone(&self) -> bool {
        self.reports.windows(2).all(|w| match (&w[0].bd_rate, &w[1].bd_rate) {
            (Ok(a), Ok(b)) => b >= a,
            _ => false,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.reports {
            writeln!(
                s,
                "{},{:.6},{},{}",
                csv_field(&r.config_id),
                r.delta_nodes,
                r.delta_et.map_or("nan".into(), |v| format!("{v:.6}")),
                r.bd_rate.as_ref().map_or("nan".into(), |v| format!("{v:.6}"))
            )
            .unwrap();
        }
        s
    }

    /// Whitespace-separated columns for gnuplot, `#` header.
    pub fn to_gnuplot(&self) -> String {
        let mut s = String::from("# config delta_nodes delta_et bd_rate\n");
        for r in &self.reports {
            writeln!(
                s,
                "{} {:.6} {} {}",
                r.config_id,
                r.delta_nodes,
                r.delta_et.map_or("NaN".into(), |v| format!("{v:.6}")),
                r.bd_rate.as_ref().map_or("NaN".into(), |v| format!("{v:.6}"))
            )
            .unwrap();
        }
        s
    }
}

/// One [`evaluate`] per config, sharing the anchor. List configs from least
/// to most aggressive for the ordering checks to be meaningful.
pub fn sweep(
    frames: &[Frame],
    anchor: &Anchor,
    predictor: &dyn Predictor,
    configs: &[(String, TopNConfig)],
) -> Result<SweepReport> {
    if configs.is_empty() {
        return Err(Error::Empty("sweep configs"));
    }
    let reports = configs
        .iter()
        .map(|(id, c)| evaluate(frames, anchor, predictor, id, *c))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdo::{OraclePredictor, RandomPredictor};
    use crate::synth;

    #[test]
    fn full_config_matches_anchor() {
        let frames = synth::corpus(40, 1, 64, 64).unwrap();
        let anchor = run_anchor(&frames, &TEST_QPS).unwrap();
        let r = evaluate(&frames, &anchor, &RandomPredictor { seed: 3 }, "full", TopNConfig::full()).unwrap();
        assert!(r.trees_identical);
        assert_eq!(r.bd_rate, Ok(0.0));
        assert_eq!(r.delta_nodes, 0.0);
        assert!(r.to_csv().lines().count() == 5);
    }

    #[test]
    fn oracle_top1_saves_nodes_without_loss() {
        let frames = synth::corpus(41, 1, 64, 64).unwrap();
        let anchor = run_anchor(&frames, &TEST_QPS).unwrap();
        let mut oracle = OraclePredictor::new();
        for (q, runs) in anchor.runs.iter().enumerate() {
            oracle.insert_encoding(&runs[0], anchor.qps[q]);
        }
        let r = evaluate(&frames, &anchor, &oracle, "oracle", TopNConfig::uniform(1).unwrap()).unwrap();
        assert!(r.trees_identical);
        assert_eq!(r.bd_rate, Ok(0.0));
        assert!(r.delta_nodes > 0.0);
    }
}
