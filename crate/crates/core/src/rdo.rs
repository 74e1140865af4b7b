//! Hierarchical partition search.
//!
//! [`rdo_exhaustive`] tries every legal split at every node and returns the
//! cheapest tree. [`rdo_pruned`] runs the same recursion but only expands
//! the top-N splits proposed by a [`Predictor`] at each node.
//!
//! Subtree results are memoized per `(geometry, mtt_ancestor)`, plus the
//! MTT depth when it is capped; this is sound because leaf costs do not
//! depend on coding order. A node counts as evaluated the first time its
//! candidate set is expanded.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::{lambda_of_qp, rd_cost_leaf, Frame, RdResult};
use crate::error::{Error, Result};
use crate::gbdt::SplitDistribution;
use crate::partition::{child_geometries, legal_splits, CuGeometry, EdgeVector, PartitionTree, SplitType, ROOT_SIZE};
use crate::timing::Stopwatch;

/// Bits charged for signalling an expanded split.
pub const SPLIT_SIGNAL_BITS: u32 = 2;
/// Bits charged for an NS decision where other splits were possible.
pub const NS_SIGNAL_BITS: u32 = 1;
/// Context rows/columns above and left of a root fed to predictors.
pub const CONTEXT: usize = 4;
/// Side of the predictor input window.
pub const INPUT_SIDE: usize = ROOT_SIZE + CONTEXT;

pub fn signal_bits(geometry: &CuGeometry, split: SplitType) -> u32 {
    match split {
        SplitType::Ns if legal_splits(geometry).len() > 1 => NS_SIGNAL_BITS,
        SplitType::Ns => 0,
        _ => SPLIT_SIGNAL_BITS,
    }
}

/// A 64x64 root inside a frame, coded at one QP.
#[derive(Clone, Copy, Debug)]
pub struct BlockContext<'a> {
    pub frame: &'a Frame,
    /// Absolute pixel position of the root's top-left sample.
    pub origin: (usize, usize),
    pub qp: i32,
}

impl BlockContext<'_> {
    /// 68x68 window: the root plus 4 rows above and 4 columns left,
    /// 128 where outside the frame.
    pub fn input_pixels(&self) -> Vec<u8> {
        self.frame.window(
            self.origin.0 as isize - CONTEXT as isize,
            self.origin.1 as isize - CONTEXT as isize,
            INPUT_SIDE,
            INPUT_SIDE,
        )
    }
}

/// Split-probability source for the pruned search.
///
/// `prepare` runs once per root and may return edge features shared by all
/// nodes of that root; `predict` is called per node. Implementations are
/// shared across threads.
pub trait Predictor: Sync {
    fn prepare(&self, _block: &BlockContext<'_>) -> Result<Option<EdgeVector>> {
        Ok(None)
    }

    fn predict(
        &self,
        block: &BlockContext<'_>,
        geometry: &CuGeometry,
        edges: Option<&EdgeVector>,
    ) -> Result<SplitDistribution>;
}

/// Number of splits to expand per node, keyed by the node's class count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TopNConfig {
    pub n_for_6: usize,
    pub n_for_5: usize,
    pub n_for_4: usize,
    pub n_for_3: usize,
    pub n_for_2: usize,
}

impl TopNConfig {
    pub fn new(n_for_6: usize, n_for_5: usize, n_for_4: usize, n_for_3: usize, n_for_2: usize) -> Result<Self> {
        let c = TopNConfig {
            n_for_6,
            n_for_5,
            n_for_4,
            n_for_3,
            n_for_2,
        };
        for classes in 2..=6 {
            let n = c.n_for(classes);
            if n == 0 || n > classes {
                return Err(Error::InvalidTopN(format!("N = {n} for {classes} classes")));
            }
        }
        Ok(c)
    }

    /// Every legal split expanded: identical to the exhaustive search.
    pub fn full() -> Self {
        TopNConfig::new(6, 5, 4, 3, 2).unwrap()
    }

    /// Same N everywhere, capped by the class count.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTopN("N = 0".into()));
        }
        TopNConfig::new(n.min(6), n.min(5), n.min(4), n.min(3), n.min(2))
    }

    /// Top-3 for 6-class nodes, top-4 elsewhere.
    pub fn c1() -> Self {
        TopNConfig::new(3, 4, 4, 3, 2).unwrap()
    }

    /// Top-3 everywhere.
    pub fn c2() -> Self {
        TopNConfig::uniform(3).unwrap()
    }

    /// Top-2 for 6-class nodes, top-3 elsewhere.
    pub fn c3() -> Self {
        TopNConfig::new(2, 3, 3, 3, 2).unwrap()
    }

    /// Top-2 everywhere.
    pub fn c4() -> Self {
        TopNConfig::uniform(2).unwrap()
    }

    pub fn presets() -> [(&'static str, TopNConfig); 4] {
        [("C1", Self::c1()), ("C2", Self::c2()), ("C3", Self::c3()), ("C4", Self::c4())]
    }

    pub fn n_for(&self, class_count: usize) -> usize {
        match class_count {
            6 => self.n_for_6,
            5 => self.n_for_5,
            4 => self.n_for_4,
            3 => self.n_for_3,
            2 => self.n_for_2,
            _ => 1,
        }
    }

    /// Every count at most the matching count of `other`.
    pub fn is_nested_in(&self, other: &TopNConfig) -> bool {
        (2..=6).all(|k| self.n_for(k) <= other.n_for(k))
    }
}

/// Parses `6:3,5:3,4:3,3:3,2:2`, a single `N`, or a preset name `C1`..`C4`
/// / `full`. Class counts missing from a list keep their full value.
impl FromStr for TopNConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_uppercase().as_str() {
            "C1" => return Ok(Self::c1()),
            "C2" => return Ok(Self::c2()),
            "C3" => return Ok(Self::c3()),
            "C4" => return Ok(Self::c4()),
            "FULL" => return Ok(Self::full()),
            _ => {}
        }
        if let Ok(n) = s.parse::<usize>() {
            return Self::uniform(n);
        }
        let mut counts = [6usize, 5, 4, 3, 2];
        for part in s.split(',') {
            let (k, n) = part
                .split_once(':')
                .ok_or_else(|| Error::InvalidTopN(format!("expected classes:N, got {part:?}")))?;
            let k: usize = k.trim().parse().map_err(|_| Error::InvalidTopN(format!("bad class count {k:?}")))?;
            let n: usize = n.trim().parse().map_err(|_| Error::InvalidTopN(format!("bad N {n:?}")))?;
            if !(2..=6).contains(&k) {
                return Err(Error::InvalidTopN(format!("class count {k} not in 2..=6")));
            }
            counts[6 - k] = n;
        }
        TopNConfig::new(counts[0], counts[1], counts[2], counts[3], counts[4])
    }
}

impl fmt::Display for TopNConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "6:{},5:{},4:{},3:{},2:{}",
            self.n_for_6, self.n_for_5, self.n_for_4, self.n_for_3, self.n_for_2
        )
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SearchStats {
    pub evaluated_nodes: u64,
    pub leaf_evaluations: u64,
    /// Seconds for the whole search, predictor included.
    pub wall_time: f64,
    /// Seconds spent inside the predictor.
    pub predictor_time: f64,
}

impl SearchStats {
    pub fn accumulate(&mut self, other: &SearchStats) {
        self.evaluated_nodes += other.evaluated_nodes;
        self.leaf_evaluations += other.leaf_evaluations;
        self.wall_time += other.wall_time;
        self.predictor_time += other.predictor_time;
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub tree: PartitionTree,
    pub rd: RdResult,
    pub stats: SearchStats,
}

#[derive(Clone, Copy)]
pub enum SearchMode<'p> {
    Exhaustive,
    Pruned {
        predictor: &'p dyn Predictor,
        config: TopNConfig,
    },
}

#[derive(Clone, Copy)]
struct Best {
    cost: f64,
    distortion: f64,
    rate: f64,
    split: SplitType,
}

struct Search<'a, 'p> {
    block: BlockContext<'a>,
    lambda: f64,
    mode: SearchMode<'p>,
    max_mtt_depth: Option<usize>,
    edges: Option<EdgeVector>,
    memo: Vec<Option<Best>>,
    leaves: Vec<Option<RdResult>>,
    stats: SearchStats,
}

impl<'a, 'p> Search<'a, 'p> {
    fn new(block: BlockContext<'a>, mode: SearchMode<'p>, max_mtt_depth: Option<usize>) -> Result<Self> {
        Ok(Search {
            block,
            lambda: lambda_of_qp(block.qp)?,
            mode,
            max_mtt_depth,
            edges: None,
            memo: vec![None; CuGeometry::SLOTS * Self::stride(max_mtt_depth)],
            leaves: vec![None; CuGeometry::SLOTS],
            stats: SearchStats::default(),
        })
    }

    fn stride(max_mtt_depth: Option<usize>) -> usize {
        max_mtt_depth.map_or(1, |m| m + 1)
    }

    fn memo_key(&self, g: &CuGeometry, mtt_depth: usize) -> usize {
        match self.max_mtt_depth {
            None => g.slot(),
            Some(m) => g.slot() * (m + 1) + mtt_depth,
        }
    }

    fn leaf(&mut self, g: &CuGeometry) -> Result<RdResult> {
        let key = CuGeometry {
            mtt_ancestor: false,
            ..*g
        }
        .slot();
        if let Some(r) = self.leaves[key] {
            return Ok(r);
        }
        let r = rd_cost_leaf(self.block.frame, self.block.origin, g, self.block.qp)?;
        self.stats.leaf_evaluations += 1;
        self.leaves[key] = Some(r);
        Ok(r)
    }

    fn candidates(&mut self, g: &CuGeometry, mtt_depth: usize) -> Result<Vec<SplitType>> {
        let mut chosen = self.proposed(g)?;
        if self.max_mtt_depth.is_some_and(|m| mtt_depth >= m) {
            chosen.retain(|s| !s.is_mtt());
            if chosen.is_empty() {
                chosen.push(SplitType::Ns);
            }
        }
        Ok(chosen)
    }

    fn proposed(&mut self, g: &CuGeometry) -> Result<Vec<SplitType>> {
        let legal = legal_splits(g);
        match self.mode {
            SearchMode::Exhaustive => Ok(legal.iter().collect()),
            SearchMode::Pruned { predictor, config } => {
                let n = config.n_for(legal.len());
                if n >= legal.len() {
                    return Ok(legal.iter().collect());
                }
                let watch = Stopwatch::start();
                let dist = predictor.predict(&self.block, g, self.edges.as_ref());
                self.stats.predictor_time += watch.elapsed();
                let dist = dist?;
                dist.check_for(g)?;
                let mut chosen = dist.top_n(n)?;
                chosen.sort();
                Ok(chosen)
            }
        }
    }

    fn solve(&mut self, g: &CuGeometry, mtt_depth: usize) -> Result<Best> {
        let slot = self.memo_key(g, mtt_depth);
        if let Some(b) = self.memo[slot] {
            return Ok(b);
        }
        self.stats.evaluated_nodes += 1;
        let mut best: Option<Best> = None;
        for split in self.candidates(g, mtt_depth)? {
            let bits = signal_bits(g, split);
            let mut cost = self.lambda * bits as f64;
            let mut distortion = 0.0;
            let mut rate = bits as f64;
            if split == SplitType::Ns {
                let leaf = self.leaf(g)?;
                cost += leaf.cost;
                distortion += leaf.distortion;
                rate += leaf.rate;
            } else {
                let depth = mtt_depth + split.is_mtt() as usize;
                for child in child_geometries(g, split)? {
                    let b = self.solve(&child, depth)?;
                    cost += b.cost;
                    distortion += b.distortion;
                    rate += b.rate;
                }
            }
            if best.is_none_or(|b| cost < b.cost) {
                best = Some(Best {
                    cost,
                    distortion,
                    rate,
                    split,
                });
            }
        }
        let best = best.expect("at least one candidate");
        self.memo[slot] = Some(best);
        Ok(best)
    }

    fn build_tree(&self, g: CuGeometry, mtt_depth: usize) -> PartitionTree {
        let best = self.memo[self.memo_key(&g, mtt_depth)].expect("solved node");
        if best.split == SplitType::Ns {
            return PartitionTree::leaf(g);
        }
        let depth = mtt_depth + best.split.is_mtt() as usize;
        let children = child_geometries(&g, best.split)
            .expect("legal split")
            .into_iter()
            .map(|c| self.build_tree(c, depth))
            .collect();
        PartitionTree {
            geometry: g,
            split: best.split,
            children,
        }
    }

    fn run(mut self, root: CuGeometry) -> Result<SearchOutcome> {
        let watch = Stopwatch::start();
        if let SearchMode::Pruned { predictor, .. } = self.mode {
            let p = Stopwatch::start();
            self.edges = predictor.prepare(&self.block)?;
            self.stats.predictor_time += p.elapsed();
        }
        let best = self.solve(&root, 0)?;
        self.stats.wall_time = watch.elapsed();
        let tree = self.build_tree(root, 0);
        Ok(SearchOutcome {
            tree,
            rd: RdResult {
                cost: best.cost,
                distortion: best.distortion,
                rate: best.rate,
                evaluated_nodes: self.stats.evaluated_nodes,
                best_mode: None,
            },
            stats: self.stats,
        })
    }
}

fn check_root(block: &BlockContext<'_>, root: &CuGeometry) -> Result<()> {
    let (x, y) = block.origin;
    if x + root.x + root.width > block.frame.width() || y + root.y + root.height > block.frame.height() {
        return Err(Error::InvalidGeometry(format!("{root} at {:?} outside the frame", block.origin)));
    }
    Ok(())
}

/// Cheapest legal partition of `root` (tie: lowest split index wins).
pub fn rdo_exhaustive(block: &BlockContext<'_>, root: &CuGeometry) -> Result<SearchOutcome> {
    check_root(block, root)?;
    Search::new(*block, SearchMode::Exhaustive, None)?.run(*root)
}

/// Like [`rdo_exhaustive`] but each node only expands the `N` most probable
/// splits according to `predictor` (probability ties: lowest split index).
pub fn rdo_pruned(
    block: &BlockContext<'_>,
    root: &CuGeometry,
    predictor: &dyn Predictor,
    config: TopNConfig,
) -> Result<SearchOutcome> {
    check_root(block, root)?;
    Search::new(*block, SearchMode::Pruned { predictor, config }, None)?.run(*root)
}

pub fn rdo_search(block: &BlockContext<'_>, root: &CuGeometry, mode: SearchMode<'_>) -> Result<SearchOutcome> {
    rdo_search_capped(block, root, mode, None)
}

/// [`rdo_search`] with at most `max_mtt_depth` nested MTT splits on any
/// path (`None`: only the 4-pixel size floor applies). The cap restricts
/// the search, not the grammar, so split signalling is unchanged.
pub fn rdo_search_capped(
    block: &BlockContext<'_>,
    root: &CuGeometry,
    mode: SearchMode<'_>,
    max_mtt_depth: Option<usize>,
) -> Result<SearchOutcome> {
    check_root(block, root)?;
    Search::new(*block, mode, max_mtt_depth)?.run(*root)
}

/// Re-walks a given tree and totals its RD cost with the same signalling
/// rules as the search.
pub fn evaluate_tree(block: &BlockContext<'_>, tree: &PartitionTree) -> Result<RdResult> {
    let lambda = lambda_of_qp(block.qp)?;
    fn walk(block: &BlockContext<'_>, lambda: f64, t: &PartitionTree, nodes: &mut u64) -> Result<(f64, f64, f64)> {
        *nodes += 1;
        let bits = signal_bits(&t.geometry, t.split);
        let mut cost = lambda * bits as f64;
        let mut distortion = 0.0;
        let mut rate = bits as f64;
        if t.split == SplitType::Ns {
            let leaf = rd_cost_leaf(block.frame, block.origin, &t.geometry, block.qp)?;
            cost += leaf.cost;
            distortion += leaf.distortion;
            rate += leaf.rate;
        } else {
            for c in &t.children {
                let (c_cost, c_d, c_r) = walk(block, lambda, c, nodes)?;
                cost += c_cost;
                distortion += c_d;
                rate += c_r;
            }
        }
        Ok((cost, distortion, rate))
    }
    tree.validate()?;
    let mut nodes = 0;
    let (cost, distortion, rate) = walk(block, lambda, tree, &mut nodes)?;
    Ok(RdResult {
        cost,
        distortion,
        rate,
        evaluated_nodes: nodes,
        best_mode: None,
    })
}

/// Counts the distinct `(geometry, mtt_ancestor)` nodes the pruned search
/// would expand, by walking the predictor's top-N choices without any RD
/// evaluation.
pub fn count_reachable_nodes(
    block: &BlockContext<'_>,
    root: &CuGeometry,
    predictor: &dyn Predictor,
    config: TopNConfig,
) -> Result<u64> {
    let edges = predictor.prepare(block)?;
    let mut seen = std::collections::HashSet::new();
    let mut stack = vec![*root];
    while let Some(g) = stack.pop() {
        if !seen.insert(g) {
            continue;
        }
        let legal = legal_splits(&g);
        let n = config.n_for(legal.len());
        let chosen: Vec<SplitType> = if n >= legal.len() {
            legal.iter().collect()
        } else {
            predictor.predict(block, &g, edges.as_ref())?.top_n(n)?
        };
        for s in chosen.into_iter().filter(|s| *s != SplitType::Ns) {
            stack.extend(child_geometries(&g, s)?);
        }
    }
    Ok(seen.len() as u64)
}

/// Result of coding a whole frame.
#[derive(Clone, Debug)]
pub struct FrameEncoding {
    /// Root origin and chosen tree, raster order.
    pub trees: Vec<((usize, usize), PartitionTree)>,
    pub rd: RdResult,
    pub stats: SearchStats,
    /// Samples coded (padded frame area).
    pub pixels: usize,
}

/// Codes a frame root by root in raster order. Frames whose sides are not
/// multiples of 64 are first padded by replicating the last column/row.
pub fn encode_frame(frame: &Frame, qp: i32, mode: SearchMode<'_>) -> Result<FrameEncoding> {
    encode_frame_capped(frame, qp, mode, None)
}

/// [`encode_frame`] with an MTT depth cap, see [`rdo_search_capped`].
pub fn encode_frame_capped(
    frame: &Frame,
    qp: i32,
    mode: SearchMode<'_>,
    max_mtt_depth: Option<usize>,
) -> Result<FrameEncoding> {
    let padded = frame.pad_to_multiple(ROOT_SIZE);
    let root = CuGeometry::root();
    let mut trees = Vec::new();
    let mut rd = RdResult {
        cost: 0.0,
        distortion: 0.0,
        rate: 0.0,
        evaluated_nodes: 0,
        best_mode: None,
    };
    let mut stats = SearchStats::default();
    for y in (0..padded.height()).step_by(ROOT_SIZE) {
        for x in (0..padded.width()).step_by(ROOT_SIZE) {
            let block = BlockContext {
                frame: &padded,
                origin: (x, y),
                qp,
            };
            let out = rdo_search_capped(&block, &root, mode, max_mtt_depth)?;
            rd.cost += out.rd.cost;
            rd.distortion += out.rd.distortion;
            rd.rate += out.rd.rate;
            rd.evaluated_nodes += out.rd.evaluated_nodes;
            stats.accumulate(&out.stats);
            trees.push(((x, y), out.tree));
        }
    }
    Ok(FrameEncoding {
        trees,
        rd,
        stats,
        pixels: padded.width() * padded.height(),
    })
}

/// Equal probability on every legal split.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformPredictor;

impl Predictor for UniformPredictor {
    fn predict(&self, _: &BlockContext<'_>, geometry: &CuGeometry, _: Option<&EdgeVector>) -> Result<SplitDistribution> {
        Ok(SplitDistribution::uniform(legal_splits(geometry)))
    }
}

/// One-hot on the split of known trees; uniform on nodes they don't contain.
#[derive(Clone, Debug, Default)]
pub struct OraclePredictor {
    splits: HashMap<((usize, usize), i32, CuGeometry), SplitType>,
}

impl OraclePredictor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_tree(&mut self, origin: (usize, usize), qp: i32, tree: &PartitionTree) {
        for n in tree.nodes() {
            self.splits.insert((origin, qp, n.geometry), n.split);
        }
    }

    pub fn insert_encoding(&mut self, enc: &FrameEncoding, qp: i32) {
        for (origin, tree) in &enc.trees {
            self.insert_tree(*origin, qp, tree);
        }
    }
}

impl Predictor for OraclePredictor {
    fn predict(&self, block: &BlockContext<'_>, geometry: &CuGeometry, _: Option<&EdgeVector>) -> Result<SplitDistribution> {
        let legal = legal_splits(geometry);
        Ok(match self.splits.get(&(block.origin, block.qp, *geometry)) {
            Some(&s) => SplitDistribution::one_hot(legal, s),
            None => SplitDistribution::uniform(legal),
        })
    }
}

/// Deterministic pseudo-random distributions, a fresh one per node and seed.
#[derive(Clone, Copy, Debug)]
pub struct RandomPredictor {
    pub seed: u64,
}

impl Predictor for RandomPredictor {
    fn predict(&self, block: &BlockContext<'_>, geometry: &CuGeometry, _: Option<&EdgeVector>) -> Result<SplitDistribution> {
        let key = (geometry.slot() as u64)
            ^ ((block.origin.0 as u64) << 20)
            ^ ((block.origin.1 as u64) << 40)
            ^ ((block.qp as u64) << 58);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ key);
        let legal = legal_splits(geometry);
        let mut scores = [0.0f64; 6];
        for s in legal.iter() {
            scores[s.index()] = rng.gen_range(-3.0..3.0);
        }
        Ok(SplitDistribution::from_logits(&scores, legal))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Frame::from_fn(64, 64, |x, y| {
            let base = if (x / 16 + y / 24) % 2 == 0 { 60.0 } else { 180.0 };
            (base + rng.gen_range(-20.0..20.0)) as u8
        })
        .unwrap()
    }

    #[test]
    fn flat_block_is_not_split() {
        let f = Frame::filled(64, 64, 128).unwrap();
        let block = BlockContext {
            frame: &f,
            origin: (0, 0),
            qp: 32,
        };
        let out = rdo_exhaustive(&block, &CuGeometry::root()).unwrap();
        assert_eq!(out.tree, PartitionTree::leaf(CuGeometry::root()));
        let leaf = rd_cost_leaf(&f, (0, 0), &CuGeometry::root(), 32).unwrap();
        let lambda = lambda_of_qp(32).unwrap();
        assert_eq!(out.rd.cost, lambda * NS_SIGNAL_BITS as f64 + leaf.cost);
    }

    #[test]
    fn returned_cost_matches_rewalk() {
        let f = textured(4);
        for qp in [22, 37] {
            let block = BlockContext {
                frame: &f,
                origin: (0, 0),
                qp,
            };
            let out = rdo_exhaustive(&block, &CuGeometry::root()).unwrap();
            let again = evaluate_tree(&block, &out.tree).unwrap();
            assert_eq!(out.rd.cost.to_bits(), again.cost.to_bits());
            assert_eq!(out.rd.rate, again.rate);
            assert_eq!(out.rd.distortion.to_bits(), again.distortion.to_bits());
            let lambda = lambda_of_qp(qp).unwrap();
            let direct = out.rd.distortion + lambda * out.rd.rate;
            assert!((direct - out.rd.cost).abs() <= 1e-9 * out.rd.cost.abs());
        }
    }

    #[test]
    fn full_config_is_identical_to_exhaustive() {
        let f = textured(8);
        let block = BlockContext {
            frame: &f,
            origin: (0, 0),
            qp: 27,
        };
        let a = rdo_exhaustive(&block, &CuGeometry::root()).unwrap();
        let b = rdo_pruned(&block, &CuGeometry::root(), &RandomPredictor { seed: 1 }, TopNConfig::full()).unwrap();
        assert_eq!(a.tree, b.tree);
        assert_eq!(a.rd.cost.to_bits(), b.rd.cost.to_bits());
        assert_eq!(a.stats.evaluated_nodes, b.stats.evaluated_nodes);
    }

    fn max_mtt_depth(t: &PartitionTree) -> usize {
        let own = t.split.is_mtt() as usize;
        own + t.children.iter().map(max_mtt_depth).max().unwrap_or(0)
    }

    #[test]
    fn mtt_depth_cap() {
        let f = textured(5);
        let block = BlockContext {
            frame: &f,
            origin: (0, 0),
            qp: 22,
        };
        let root = CuGeometry::root();
        let free = rdo_exhaustive(&block, &root).unwrap();
        let deepest = max_mtt_depth(&free.tree);
        assert!(deepest >= 2);
        let mut last = f64::INFINITY;
        for cap in 0..=deepest {
            let out = rdo_search_capped(&block, &root, SearchMode::Exhaustive, Some(cap)).unwrap();
            assert!(max_mtt_depth(&out.tree) <= cap);
            assert_eq!(evaluate_tree(&block, &out.tree).unwrap().cost.to_bits(), out.rd.cost.to_bits());
            assert!(out.rd.cost <= last && out.rd.cost >= free.rd.cost);
            last = out.rd.cost;
        }
        // a cap the tree never reaches changes nothing
        let loose = rdo_search_capped(&block, &root, SearchMode::Exhaustive, Some(deepest + 1)).unwrap();
        assert_eq!(loose.tree, free.tree);
        assert_eq!(loose.rd.cost.to_bits(), free.rd.cost.to_bits());
        let pruned = rdo_search_capped(
            &block,
            &root,
            SearchMode::Pruned {
                predictor: &RandomPredictor { seed: 3 },
                config: TopNConfig::c4(),
            },
            Some(1),
        )
        .unwrap();
        assert!(max_mtt_depth(&pruned.tree) <= 1);
    }

    #[test]
    fn oracle_top1_recovers_tree_with_fewer_nodes() {
        let f = textured(2);
        let block = BlockContext {
            frame: &f,
            origin: (0, 0),
            qp: 32,
        };
        let a = rdo_exhaustive(&block, &CuGeometry::root()).unwrap();
        let mut oracle = OraclePredictor::new();
        oracle.insert_tree((0, 0), 32, &a.tree);
        let b = rdo_pruned(&block, &CuGeometry::root(), &oracle, TopNConfig::uniform(1).unwrap()).unwrap();
        assert_eq!(a.tree, b.tree);
        assert_eq!(a.rd.cost.to_bits(), b.rd.cost.to_bits());
        assert!(b.stats.evaluated_nodes < a.stats.evaluated_nodes);
    }

    #[test]
    fn uniform_top1_never_splits() {
        let f = textured(3);
        let block = BlockContext {
            frame: &f,
            origin: (0, 0),
            qp: 22,
        };
        let a = rdo_exhaustive(&block, &CuGeometry::root()).unwrap();
        let b = rdo_pruned(&block, &CuGeometry::root(), &UniformPredictor, TopNConfig::uniform(1).unwrap()).unwrap();
        assert_eq!(b.tree, PartitionTree::leaf(CuGeometry::root()));
        assert!(b.rd.cost >= a.rd.cost);
        assert_eq!(b.stats.evaluated_nodes, 1);
    }

    #[test]
    fn reachable_recount_matches_evaluated_nodes() {
        let f = textured(6);
        let block = BlockContext {
            frame: &f,
            origin: (0, 0),
            qp: 27,
        };
        for config in [TopNConfig::c1(), TopNConfig::c4(), TopNConfig::uniform(1).unwrap()] {
            let p = RandomPredictor { seed: 11 };
            let out = rdo_pruned(&block, &CuGeometry::root(), &p, config).unwrap();
            let recount = count_reachable_nodes(&block, &CuGeometry::root(), &p, config).unwrap();
            assert_eq!(out.stats.evaluated_nodes, recount, "{config}");
        }
    }

    struct Broken;

    impl Predictor for Broken {
        fn predict(&self, _: &BlockContext<'_>, g: &CuGeometry, _: Option<&EdgeVector>) -> Result<SplitDistribution> {
            let mut d = SplitDistribution::uniform(legal_splits(g));
            d.probs[0] += 0.5;
            Ok(d)
        }
    }

    #[test]
    fn malformed_distribution_is_error() {
        let f = textured(1);
        let block = BlockContext {
            frame: &f,
            origin: (0, 0),
            qp: 27,
        };
        let err = rdo_pruned(&block, &CuGeometry::root(), &Broken, TopNConfig::c2()).unwrap_err();
        assert!(matches!(err, Error::MalformedDistribution { .. }));
    }

    #[test]
    fn topn_parsing() {
        let c: TopNConfig = "6:3,5:3,4:3,3:3,2:2".parse().unwrap();
        assert_eq!(c, TopNConfig::c2());
        assert_eq!("c4".parse::<TopNConfig>().unwrap(), TopNConfig::c4());
        assert_eq!("6:2".parse::<TopNConfig>().unwrap().n_for(5), 5);
        assert!("6:7".parse::<TopNConfig>().is_err());
        assert!("3:0".parse::<TopNConfig>().is_err());
        assert_eq!(c.to_string().parse::<TopNConfig>().unwrap(), c);
        assert!(TopNConfig::c4().is_nested_in(&TopNConfig::c3()));
        assert!(TopNConfig::c3().is_nested_in(&TopNConfig::c2()));
        assert!(TopNConfig::c2().is_nested_in(&TopNConfig::c1()));
        assert!(!TopNConfig::c1().is_nested_in(&TopNConfig::c2()));
    }

    #[test]
    fn frame_tiling() {
        let f = Frame::filled(128, 64, 100).unwrap();
        let enc = encode_frame(&f, 32, SearchMode::Exhaustive).unwrap();
        assert_eq!(enc.trees.len(), 2);
        let single = Frame::filled(64, 64, 100).unwrap();
        assert_eq!(encode_frame(&single, 32, SearchMode::Exhaustive).unwrap().trees.len(), 1);

        let g = textured(12);
        let wide = Frame::from_fn(128, 64, |x, y| g.at(x % 64, y)).unwrap();
        let enc = encode_frame(&wide, 27, SearchMode::Exhaustive).unwrap();
        let parts: Vec<f64> = enc
            .trees
            .iter()
            .map(|(o, _)| {
                let b = BlockContext {
                    frame: &wide,
                    origin: *o,
                    qp: 27,
                };
                rdo_exhaustive(&b, &CuGeometry::root()).unwrap().rd.cost
            })
            .collect();
        assert_eq!(enc.rd.cost, parts[0] + parts[1]);

        let odd = Frame::filled(70, 70, 90).unwrap();
        let enc = encode_frame(&odd, 37, SearchMode::Exhaustive).unwrap();
        assert_eq!(enc.trees.len(), 4);
        assert_eq!(enc.pixels, 128 * 128);
    }
}
