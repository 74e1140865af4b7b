//! Browser bindings: partition a 64x64 block exhaustively or with top-N
//! pruning, and list the splits legal at a CU shape.

use wasm_bindgen::prelude::*;

use qtmtt::codec::Frame;
use qtmtt::harness::{Pipeline, RdPoint};
use qtmtt::nn::Network;
use qtmtt::partition::{legal_splits, CuGeometry, ROOT_SIZE};
use qtmtt::rdo::{
    rdo_search, BlockContext, Predictor, RandomPredictor, SearchMode, SearchOutcome, TopNConfig, UniformPredictor,
};
use qtmtt::ModelBank;

fn err(e: impl ToString) -> String {
    e.to_string()
}

/// Outcome of one block search, flattened for JavaScript.
#[wasm_bindgen]
pub struct BlockResult {
    outcome: SearchOutcome,
}

#[wasm_bindgen]
impl BlockResult {
    #[wasm_bindgen(getter)]
    pub fn cost(&self) -> f64 {
        self.outcome.rd.cost
    }

    #[wasm_bindgen(getter)]
    pub fn rate(&self) -> f64 {
        self.outcome.rd.rate
    }

    #[wasm_bindgen(getter)]
    pub fn psnr(&self) -> f64 {
        RdPoint {
            qp: 0,
            rate: self.outcome.rd.rate,
            sse: self.outcome.rd.distortion,
            pixels: ROOT_SIZE * ROOT_SIZE,
        }
        .psnr()
    }

    #[wasm_bindgen(getter)]
    pub fn evaluated_nodes(&self) -> u32 {
        self.outcome.stats.evaluated_nodes as u32
    }

    /// `x, y, width, height` per leaf, block-relative.
    pub fn leaves(&self) -> Vec<u32> {
        self.outcome
            .tree
            .leaves()
            .flat_map(|l| [l.geometry.x, l.geometry.y, l.geometry.width, l.geometry.height])
            .map(|v| v as u32)
            .collect()
    }

    /// Indented tree listing, one node per line.
    pub fn tree_text(&self) -> String {
        self.outcome.tree.to_string()
    }
}

/// Grayscale test image, row-major.
#[wasm_bindgen]
pub fn synthetic_image(seed: u32, width: usize, height: usize) -> Result<Vec<u8>, String> {
    Ok(qtmtt::synth::image(seed as u64, width, height).map_err(err)?.luma().to_vec())
}

fn search(
    luma: &[u8],
    width: usize,
    height: usize,
    bx: usize,
    by: usize,
    qp: i32,
    mode: SearchMode<'_>,
) -> Result<BlockResult, String> {
    let frame = Frame::new(width, height, luma.to_vec())
        .map_err(err)?
        .pad_to_multiple(ROOT_SIZE);
    let block = BlockContext {
        frame: &frame,
        origin: (bx * ROOT_SIZE, by * ROOT_SIZE),
        qp,
    };
    let outcome = rdo_search(&block, &CuGeometry::root(), mode).map_err(err)?;
    Ok(BlockResult { outcome })
}

/// Exhaustive RD search of block `(bx, by)` (in 64-pixel units).
#[wasm_bindgen]
pub fn partition_exhaustive(
    luma: &[u8],
    width: usize,
    height: usize,
    bx: usize,
    by: usize,
    qp: i32,
) -> Result<BlockResult, String> {
    search(luma, width, height, bx, by, qp, SearchMode::Exhaustive)
}

/// Trained stage-1 network and classifiers loaded from their files.
#[wasm_bindgen]
pub struct LoadedPipeline {
    inner: Pipeline,
}

#[wasm_bindgen]
impl LoadedPipeline {
    #[wasm_bindgen(constructor)]
    pub fn new(weights: &[u8], bank: &[u8]) -> Result<LoadedPipeline, String> {
        Ok(LoadedPipeline {
            inner: Pipeline {
                net: Network::from_bytes(weights).map_err(err)?,
                bank: ModelBank::from_bytes(bank).map_err(err)?,
            },
        })
    }

    /// Top-N pruned search driven by the loaded models.
    #[allow(clippy::too_many_arguments)]
    pub fn partition(
        &self,
        luma: &[u8],
        width: usize,
        height: usize,
        bx: usize,
        by: usize,
        qp: i32,
        topn: &str,
    ) -> Result<BlockResult, String> {
        let config: TopNConfig = topn.parse().map_err(err)?;
        search(luma, width, height, bx, by, qp, SearchMode::Pruned { predictor: &self.inner, config })
    }
}

/// Top-N pruned search with a model-free predictor: `uniform`, or
/// `random` seeded by `seed`.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn partition_pruned(
    luma: &[u8],
    width: usize,
    height: usize,
    bx: usize,
    by: usize,
    qp: i32,
    topn: &str,
    predictor: &str,
    seed: u32,
) -> Result<BlockResult, String> {
    let config: TopNConfig = topn.parse().map_err(err)?;
    let random = RandomPredictor { seed: seed as u64 };
    let p: &dyn Predictor = match predictor {
        "uniform" => &UniformPredictor,
        "random" => &random,
        other => return Err(format!("unknown predictor {other:?}")),
    };
    search(luma, width, height, bx, by, qp, SearchMode::Pruned { predictor: p, config })
}

/// Space-separated legal split names for a `width x height` CU.
#[wasm_bindgen]
pub fn legal_split_names(width: usize, height: usize, mtt_ancestor: bool) -> Result<String, String> {
    let g = CuGeometry::new(0, 0, width, height, mtt_ancestor).map_err(err)?;
    Ok(legal_splits(&g).iter().map(|s| s.name()).collect::<Vec<_>>().join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_and_pruned_agree_at_full_top_n() {
        let img = synthetic_image(4, 128, 64).unwrap();
        let a = partition_exhaustive(&img, 128, 64, 1, 0, 32).unwrap();
        let b = partition_pruned(&img, 128, 64, 1, 0, 32, "full", "random", 1).unwrap();
        assert_eq!(a.tree_text(), b.tree_text());
        assert_eq!(a.cost(), b.cost());
        let area: u32 = a.leaves().chunks(4).map(|l| l[2] * l[3]).sum();
        assert_eq!(area, 64 * 64);
        let c = partition_pruned(&img, 128, 64, 1, 0, 32, "C4", "uniform", 0).unwrap();
        assert!(c.cost() >= a.cost());
        assert!(c.evaluated_nodes() < a.evaluated_nodes());
    }

    #[test]
    fn bad_inputs_are_errors() {
        let img = synthetic_image(4, 64, 64).unwrap();
        assert!(partition_pruned(&img, 64, 64, 0, 0, 32, "7:1", "uniform", 0).is_err());
        assert!(partition_pruned(&img, 64, 64, 0, 0, 32, "C1", "pipeline", 0).is_err());
        assert!(partition_exhaustive(&img, 64, 64, 1, 0, 32).is_err());
        assert!(LoadedPipeline::new(b"nope", b"nope").is_err());
    }

    #[test]
    fn legality_names() {
        assert_eq!(legal_split_names(8, 4, false).unwrap(), "NS BTV");
        assert_eq!(legal_split_names(16, 16, true).unwrap(), "NS BTH BTV TTH TTV");
        assert!(legal_split_names(12, 4, false).is_err());
    }
}
