//! Training data from exhaustive searches: 68x68 block samples with soft
//! (edge vector) and hard (per-node split) labels, depth-class balancing and
//! the binary dataset format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::binio::{put_u32, put_u64, Reader};
use crate::codec::Frame;
use crate::error::{Error, Result};
use crate::partition::{
    child_geometries, crop_edge_vector, tree_to_edge_vector, CuGeometry, EdgeVector, PartitionTree, SizeId,
    SplitType, EDGE_COUNT, ROOT_SIZE,
};
use crate::rdo::{rdo_search_capped, BlockContext, SearchMode, INPUT_SIDE};

pub const DATASET_MAGIC: &str = "QTMT";
pub const DATASET_VERSION: u32 = 1;
pub const PIXELS_PER_SAMPLE: usize = INPUT_SIDE * INPUT_SIDE;
/// Number of depth classes used for balancing.
pub const DEPTH_CLASSES: usize = 8;

/// One 64x64 root with its context and exhaustive-search labels.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSample {
    /// 68x68 row-major: 4 context rows on top, 4 context columns on the left.
    pub pixels: Vec<u8>,
    pub qp: u8,
    pub soft_label: EdgeVector,
    pub tree: PartitionTree,
    /// (image index, tile index in raster order).
    pub source_id: (u32, u32),
}

impl BlockSample {
    pub fn new(pixels: Vec<u8>, qp: u8, tree: PartitionTree, source_id: (u32, u32)) -> Result<Self> {
        if pixels.len() != PIXELS_PER_SAMPLE {
            return Err(Error::LengthMismatch {
                expected: PIXELS_PER_SAMPLE,
                actual: pixels.len(),
            });
        }
        let soft_label = tree_to_edge_vector(&tree)?;
        Ok(BlockSample {
            pixels,
            qp,
            soft_label,
            tree,
            source_id,
        })
    }
}

/// Runs the exhaustive search on every 64x64 tile of `frame` (padded like
/// [`encode_frame`](crate::rdo::encode_frame)); tiles are searched in
/// parallel and returned in raster order.
pub fn extract_samples(frame: &Frame, qp: i32, image_id: u32) -> Result<Vec<BlockSample>> {
    extract_samples_capped(frame, qp, image_id, None)
}

/// [`extract_samples`] with the ground-truth search limited to
/// `max_mtt_depth` nested MTT splits.
pub fn extract_samples_capped(
    frame: &Frame,
    qp: i32,
    image_id: u32,
    max_mtt_depth: Option<usize>,
) -> Result<Vec<BlockSample>> {
    let qp_byte = u8::try_from(qp).map_err(|_| Error::QpOutOfRange(qp))?;
    let padded = frame.pad_to_multiple(ROOT_SIZE);
    let cols = padded.width() / ROOT_SIZE;
    let tiles = cols * (padded.height() / ROOT_SIZE);
    (0..tiles)
        .into_par_iter()
        .map(|t| {
            let block = BlockContext {
                frame: &padded,
                origin: ((t % cols) * ROOT_SIZE, (t / cols) * ROOT_SIZE),
                qp,
            };
            let out = rdo_search_capped(&block, &CuGeometry::root(), SearchMode::Exhaustive, max_mtt_depth)?;
            BlockSample::new(block.input_pixels(), qp_byte, out.tree, (image_id, t as u32))
        })
        .collect()
}

/// Bucket of the activated-edge count: 0, 1-8, 9-16, 17-32, 33-64, 65-128,
/// 129-256, 257-480.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DepthClass(pub u8);

pub fn depth_class(soft_label: &EdgeVector) -> DepthClass {
    let e = soft_label.active_count();
    if e == 0 {
        return DepthClass(0);
    }
    // 1..=8 -> 1, then one class per doubling
    let c = (usize::BITS - (e - 1).leading_zeros()).saturating_sub(2).max(1);
    DepthClass(c.min(7) as u8)
}

/// Subsamples so that each (depth class, qp) cell holds at most
/// `min(per_class_target, per_qp_target / 8)` samples. Cells with fewer
/// samples keep all of them. Output keeps the input order.
pub fn balance_soft(
    samples: Vec<BlockSample>,
    per_class_target: usize,
    per_qp_target: usize,
    seed: u64,
) -> Vec<BlockSample> {
    let cap = per_class_target.min(per_qp_target / DEPTH_CLASSES);
    let keys: Vec<(u8, u8)> = samples.iter().map(|s| (depth_class(&s.soft_label).0, s.qp)).collect();
    let keep = stratified_keep(&keys, cap, seed);
    samples
        .into_iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(s))
        .collect()
}

/// Marks at most `cap` items per key, chosen uniformly without replacement.
fn stratified_keep<K: Ord + Copy>(keys: &[K], cap: usize, seed: u64) -> Vec<bool> {
    let mut cells: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        cells.entry(*k).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; keys.len()];
    for idx in cells.values_mut() {
        if idx.len() > cap {
            idx.shuffle(&mut rng);
            idx.truncate(cap);
        }
        for &i in idx.iter() {
            keep[i] = true;
        }
    }
    keep
}

/// Counts per (depth class, qp).
pub fn class_histogram(samples: &[BlockSample]) -> BTreeMap<(DepthClass, u8), usize> {
    let mut h = BTreeMap::new();
    for s in samples {
        *h.entry((depth_class(&s.soft_label), s.qp)).or_insert(0) += 1;
    }
    h
}

/// One tree node as a classification example.
#[derive(Clone, Debug, PartialEq)]
pub struct HardRecord {
    pub size_id: SizeId,
    /// Decides which splits are legal at this node (QT is not after BT/TT).
    pub mtt_ancestor: bool,
    /// Edge vector cropped to the node.
    pub features: Vec<f32>,
    pub qp: u8,
    pub label: SplitType,
}

impl HardRecord {
    /// Classifier input: the crop followed by the raw QP.
    pub fn model_input(&self) -> Vec<f32> {
        let mut v = Vec::with_capacity(self.features.len() + 1);
        v.extend_from_slice(&self.features);
        v.push(self.qp as f32);
        v
    }
}

/// Where hard-record features come from.
#[derive(Clone, Copy, Debug)]
pub enum FeatureSource<'a> {
    /// Ground-truth soft labels.
    TeacherForcing,
    /// Stage-1 predictions, one per sample in the same order.
    Predicted(&'a [EdgeVector]),
}

/// One record per tree node of a classified size (everything except 4x4),
/// grouped by size in [`SizeId`] order. Not balanced; see [`balance_hard`].
pub fn explode_hard(samples: &[BlockSample], source: FeatureSource<'_>) -> Result<Vec<Vec<HardRecord>>> {
    if let FeatureSource::Predicted(p) = source {
        if p.len() != samples.len() {
            return Err(Error::LengthMismatch {
                expected: samples.len(),
                actual: p.len(),
            });
        }
    }
    let mut out: Vec<Vec<HardRecord>> = vec![Vec::new(); SizeId::COUNT];
    for (i, s) in samples.iter().enumerate() {
        let edges = match source {
            FeatureSource::TeacherForcing => &s.soft_label,
            FeatureSource::Predicted(p) => &p[i],
        };
        for node in s.tree.nodes() {
            let g = node.geometry;
            let Some(size_id) = SizeId::of(g.width, g.height) else { continue };
            out[size_id.index()].push(HardRecord {
                size_id,
                mtt_ancestor: g.mtt_ancestor,
                features: crop_edge_vector(edges, &g),
                qp: s.qp,
                label: node.split,
            });
        }
    }
    Ok(out)
}

/// Per size, caps each (label, qp) cell at `per_cell_target` records.
pub fn balance_hard(per_size: Vec<Vec<HardRecord>>, per_cell_target: usize, seed: u64) -> Vec<Vec<HardRecord>> {
    per_size
        .into_iter()
        .enumerate()
        .map(|(i, records)| {
            let keys: Vec<(u8, u8)> = records.iter().map(|r| (r.label as u8, r.qp)).collect();
            let keep = stratified_keep(&keys, per_cell_target, seed.wrapping_add(i as u64));
            records
                .into_iter()
                .zip(keep)
                .filter_map(|(r, k)| k.then_some(r))
                .collect()
        })
        .collect()
}

fn write_tree(out: &mut Vec<u8>, t: &PartitionTree) {
    out.extend(t.preorder().into_iter().map(|s| s as u8));
}

fn read_tree(r: &mut Reader<'_>, g: CuGeometry) -> Result<PartitionTree> {
    let b = r.u8("tree")?;
    let split = SplitType::from_index(b as usize).ok_or_else(|| Error::Corrupt(format!("split byte {b}")))?;
    if split == SplitType::Ns {
        return Ok(PartitionTree::leaf(g));
    }
    let children = child_geometries(&g, split)
        .map_err(|_| Error::Corrupt(format!("split {split} not legal at {g}")))?
        .into_iter()
        .map(|c| read_tree(r, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(PartitionTree {
        geometry: g,
        split,
        children,
    })
}

pub fn dataset_to_bytes(samples: &[BlockSample]) -> Vec<u8> {
    let mut out = DATASET_MAGIC.as_bytes().to_vec();
    put_u32(&mut out, DATASET_VERSION);
    put_u64(&mut out, samples.len() as u64);
    for s in samples {
        out.push(s.qp);
        out.extend_from_slice(&s.pixels);
        out.extend_from_slice(&s.soft_label.to_bitmap());
        write_tree(&mut out, &s.tree);
        put_u32(&mut out, s.source_id.0);
        put_u32(&mut out, s.source_id.1);
    }
    out
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<Vec<BlockSample>> {
    let mut r = Reader::new(bytes);
    r.header(DATASET_MAGIC, DATASET_VERSION)?;
    let count = r.u64("record count")?;
    let min_record = 1 + PIXELS_PER_SAMPLE + EDGE_COUNT / 8 + 1 + 8;
    if count > (r.remaining() / min_record) as u64 {
        return Err(Error::Truncated("records"));
    }
    let mut samples = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let qp = r.u8("qp")?;
        if qp > 51 {
            return Err(Error::Corrupt(format!("qp {qp}")));
        }
        let pixels = r.bytes(PIXELS_PER_SAMPLE, "pixels")?.to_vec();
        let bitmap: [u8; EDGE_COUNT / 8] = r.array("soft label")?;
        let tree = read_tree(&mut r, CuGeometry::root())?;
        let source_id = (r.u32("source id")?, r.u32("source id")?);
        let sample = BlockSample::new(pixels, qp, tree, source_id)?;
        if sample.soft_label != EdgeVector::from_bitmap(&bitmap) {
            return Err(Error::Corrupt("soft label does not match tree".into()));
        }
        samples.push(sample);
    }
    if r.remaining() != 0 {
        return Err(Error::Corrupt(format!("{} trailing bytes", r.remaining())));
    }
    Ok(samples)
}

pub fn write_dataset(path: impl AsRef<Path>, samples: &[BlockSample]) -> Result<()> {
    std::fs::write(path, dataset_to_bytes(samples))?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<BlockSample>> {
    dataset_from_bytes(&std::fs::read(path)?)
}

/// A named frame of a corpus.
#[derive(Clone, Debug)]
pub struct CorpusImage {
    pub name: String,
    pub frame: Frame,
    /// SHA-256 of the file contents, lowercase hex.
    pub digest: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(64);
    for b in Sha256::digest(bytes).iter() {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

/// Every `*.pgm` in `dir`, sorted by file name.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Vec<CorpusImage>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Empty("no .pgm files in corpus directory"));
    }
    paths
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p)?;
            Ok(CorpusImage {
                name: p.file_name().unwrap().to_string_lossy().into_owned(),
                frame: Frame::from_pgm_bytes(&bytes)?,
                digest: sha256_hex(&bytes),
            })
        })
        .collect()
}

/// Content digests of the images a dataset was built from, stored next to
/// it as `<dataset>.manifest` with one `digest  name` line per image.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn of(corpus: &[CorpusImage]) -> Self {
        Manifest {
            entries: corpus.iter().map(|c| (c.digest.clone(), c.name.clone())).collect(),
        }
    }

    pub fn path_for(dataset: impl AsRef<Path>) -> PathBuf {
        let mut p = dataset.as_ref().as_os_str().to_owned();
        p.push(".manifest");
        PathBuf::from(p)
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(d, n)| format!("{d}  {n}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (d, n) = l
                    .split_once("  ")
                    .ok_or_else(|| Error::Corrupt(format!("manifest line {l:?}")))?;
                Ok((d.to_string(), n.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Manifest { entries })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Fails if any image of `corpus` has a digest listed here.
    pub fn check_disjoint(&self, corpus: &[CorpusImage]) -> Result<()> {
        for c in corpus {
            if let Some((_, n)) = self.entries.iter().find(|(d, _)| *d == c.digest) {
                return Err(Error::CorpusOverlap(format!("{} has the same content as training image {n}", c.name)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::edge_vector_to_leaf_map;

    fn sample(tree: PartitionTree, qp: u8) -> BlockSample {
        BlockSample::new(vec![7; PIXELS_PER_SAMPLE], qp, tree, (1, 2)).unwrap()
    }

    #[test]
    fn depth_class_buckets() {
        let cases = [(0, 0), (1, 1), (8, 1), (9, 2), (16, 2), (17, 3), (32, 3), (33, 4), (64, 4), (65, 5), (128, 5), (129, 6), (256, 6), (257, 7), (480, 7)];
        for (e, c) in cases {
            let mut v = EdgeVector::zeros();
            for i in 0..e {
                v.as_mut_slice()[i] = 1.0;
            }
            assert_eq!(depth_class(&v), DepthClass(c), "{e} edges");
        }
        let qt = PartitionTree::single_split(CuGeometry::root(), SplitType::Qt).unwrap();
        assert_eq!(depth_class(&tree_to_edge_vector(&qt).unwrap()), DepthClass(3));
    }

    #[test]
    fn constant_frame_gives_all_ns_and_gray_context() {
        let f = Frame::filled(128, 64, 77).unwrap();
        let s = extract_samples(&f, 32, 0).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].soft_label.active_count(), 0);
        let px = &s[0].pixels;
        let context = (0..INPUT_SIDE * INPUT_SIDE)
            .filter(|i| i / INPUT_SIDE < 4 || i % INPUT_SIDE < 4)
            .filter(|&i| px[i] == 128)
            .count();
        // first tile: 4 top rows plus 4 left columns below them
        assert_eq!(context, 4 * INPUT_SIDE + 4 * (INPUT_SIDE - 4));
        // second tile's left context comes from the first tile
        assert_eq!(s[1].pixels[10 * INPUT_SIDE], 77);
        let regions = edge_vector_to_leaf_map(&s[1].soft_label).regions();
        assert_eq!(regions.len(), s[1].tree.leaves().count());
    }

    #[test]
    fn explode_counts_nodes() {
        let leaf = sample(PartitionTree::leaf(CuGeometry::root()), 22);
        let recs = explode_hard(std::slice::from_ref(&leaf), FeatureSource::TeacherForcing).unwrap();
        assert_eq!(recs.iter().map(Vec::len).sum::<usize>(), 1);
        assert_eq!(recs[0][0].label, SplitType::Ns);

        let qt = sample(PartitionTree::single_split(CuGeometry::root(), SplitType::Qt).unwrap(), 22);
        let recs = explode_hard(std::slice::from_ref(&qt), FeatureSource::TeacherForcing).unwrap();
        assert_eq!(recs[0].len(), 1);
        assert_eq!(recs[0][0].label, SplitType::Qt);
        assert_eq!(recs[0][0].features.len(), 480);
        assert_eq!(recs[1].len(), 4);
        assert!(recs[1].iter().all(|r| r.label == SplitType::Ns));
    }

    #[test]
    fn balance_is_deterministic_and_capped() {
        let mut samples = Vec::new();
        for i in 0..30 {
            samples.push(sample(PartitionTree::leaf(CuGeometry::root()), if i % 2 == 0 { 22 } else { 37 }));
        }
        samples.push(sample(PartitionTree::single_split(CuGeometry::root(), SplitType::Qt).unwrap(), 22));
        for (i, s) in samples.iter_mut().enumerate() {
            s.source_id = (0, i as u32);
        }
        let a = balance_soft(samples.clone(), 5, 1000, 9);
        let b = balance_soft(samples.clone(), 5, 1000, 9);
        assert_eq!(a, b);
        let h = class_histogram(&a);
        assert_eq!(h[&(DepthClass(0), 22)], 5);
        assert_eq!(h[&(DepthClass(0), 37)], 5);
        assert_eq!(h[&(DepthClass(3), 22)], 1);
        let c = balance_soft(samples, 5, 16, 9);
        assert_eq!(c.len(), 2 + 2 + 1);
    }

    #[test]
    fn bytes_round_trip_and_errors() {
        assert_eq!(dataset_to_bytes(&[]).len(), 16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<BlockSample> = (0..5)
            .map(|i| sample(PartitionTree::random(&mut rng, CuGeometry::root(), 0.6), 20 + i))
            .collect();
        let bytes = dataset_to_bytes(&samples);
        assert_eq!(dataset_from_bytes(&bytes).unwrap(), samples);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(dataset_from_bytes(&bad), Err(Error::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(dataset_from_bytes(&bad), Err(Error::UnsupportedVersion { .. })));
        assert!(matches!(dataset_from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Truncated(_))));
        let mut bad = bytes.clone();
        bad[16 + 1 + PIXELS_PER_SAMPLE] ^= 1;
        assert!(matches!(dataset_from_bytes(&bad), Err(Error::Corrupt(_))));
    }

    #[test]
    fn manifest_detects_overlap() {
        let img = |name: &str, v: u8| {
            let frame = Frame::filled(64, 64, v).unwrap();
            CorpusImage {
                name: name.into(),
                digest: sha256_hex(&frame.to_pgm_bytes()),
                frame,
            }
        };
        let m = Manifest::of(&[img("a.pgm", 1)]);
        assert_eq!(Manifest::parse(&m.to_text()).unwrap(), m);
        assert!(m.check_disjoint(&[img("b.pgm", 2)]).is_ok());
        assert!(matches!(m.check_disjoint(&[img("c.pgm", 1)]), Err(Error::CorpusOverlap(_))));
        assert_eq!(sha256_hex(b"").len(), 64);
    }
}
