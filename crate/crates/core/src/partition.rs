//! QT-MTT split grammar for a 64x64 luma root block.
//!
//! A root is recursively split by quad-tree (QT), binary-tree (BT) or
//! ternary-tree (TT) splits down to 4x4. Once a BT or TT split has been
//! applied on a path, QT is no longer allowed below it; the [`CuGeometry`]
//! carries that fact as `mtt_ancestor`.
//!
//! The partition of a root is also expressed as an [`EdgeVector`]: one
//! component per interior edge of the 16x16 grid of 4x4 cells, set when the
//! edge separates two different leaf CUs. Components `0..240` are horizontal
//! edges (bottom edge of cell `(r, c)`, `r < 15`, index `16 r + c`) and
//! components `240..480` are vertical edges (right edge of cell `(r, c)`,
//! `c < 15`, index `240 + 16 c + r`).

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// Side of the root block in pixels.
pub const ROOT_SIZE: usize = 64;
/// Side of the edge grid cell in pixels.
pub const CELL: usize = 4;
/// Cells per root side.
pub const GRID: usize = ROOT_SIZE / CELL;
/// Number of horizontal interior edges in the root.
pub const HORIZONTAL_EDGES: usize = GRID * (GRID - 1);
/// Length of the edge vector of a 64x64 root.
pub const EDGE_COUNT: usize = 2 * HORIZONTAL_EDGES;

#[repr(u8)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitType {
    Ns = 0,
    Qt = 1,
    Bth = 2,
    Btv = 3,
    Tth = 4,
    Ttv = 5,
}

impl SplitType {
    pub const ALL: [SplitType; 6] = [
        SplitType::Ns,
        SplitType::Qt,
        SplitType::Bth,
        SplitType::Btv,
        SplitType::Tth,
        SplitType::Ttv,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<SplitType> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SplitType::Ns => "NS",
            SplitType::Qt => "QT",
            SplitType::Bth => "BTH",
            SplitType::Btv => "BTV",
            SplitType::Tth => "TTH",
            SplitType::Ttv => "TTV",
        }
    }

    pub fn parse(name: &str) -> Option<SplitType> {
        Self::ALL
            .iter()
            .copied()
            .find(|s| s.name().eq_ignore_ascii_case(name))
    }

    pub fn is_mtt(self) -> bool {
        !matches!(self, SplitType::Ns | SplitType::Qt)
    }

    pub fn child_count(self) -> usize {
        match self {
            SplitType::Ns => 0,
            SplitType::Qt => 4,
            SplitType::Bth | SplitType::Btv => 2,
            SplitType::Tth | SplitType::Ttv => 3,
        }
    }
}

impl fmt::Display for SplitType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Small bit set of split types, iterated in canonical order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct SplitSet(u8);

impl SplitSet {
    pub const EMPTY: SplitSet = SplitSet(0);

    pub fn insert(&mut self, split: SplitType) {
        self.0 |= 1 << split.index();
    }

    pub fn contains(self, split: SplitType) -> bool {
        self.0 & (1 << split.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = SplitType> {
        SplitType::ALL.into_iter().filter(move |s| self.contains(*s))
    }

    pub fn bits(self) -> u8 {
        self.0
    }
}

impl FromIterator<SplitType> for SplitSet {
    fn from_iter<I: IntoIterator<Item = SplitType>>(iter: I) -> Self {
        let mut set = SplitSet::EMPTY;
        for s in iter {
            set.insert(s);
        }
        set
    }
}

/// Position and shape of a CU inside its 64x64 root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CuGeometry {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    /// Some ancestor was split by BT or TT.
    pub mtt_ancestor: bool,
}

fn valid_extent(v: usize) -> bool {
    matches!(v, 4 | 8 | 16 | 32 | 64)
}

impl CuGeometry {
    pub fn new(x: usize, y: usize, width: usize, height: usize, mtt_ancestor: bool) -> Result<Self> {
        let g = CuGeometry {
            x,
            y,
            width,
            height,
            mtt_ancestor,
        };
        if !valid_extent(width) || !valid_extent(height) {
            return Err(Error::InvalidGeometry(format!("{g}: extent not a power of two in 4..=64")));
        }
        if x % CELL != 0 || y % CELL != 0 {
            return Err(Error::InvalidGeometry(format!("{g}: offset not 4-aligned")));
        }
        if x + width > ROOT_SIZE || y + height > ROOT_SIZE {
            return Err(Error::InvalidGeometry(format!("{g}: exceeds the 64x64 root")));
        }
        Ok(g)
    }

    /// The full 64x64 root.
    pub const fn root() -> Self {
        CuGeometry {
            x: 0,
            y: 0,
            width: ROOT_SIZE,
            height: ROOT_SIZE,
            mtt_ancestor: false,
        }
    }

    pub fn is_root(&self) -> bool {
        *self == Self::root()
    }

    pub fn area(&self) -> usize {
        self.width * self.height
    }

    /// Table slot for memoization: unique per (position, shape, mtt flag).
    pub(crate) fn slot(&self) -> usize {
        let lw = self.width.trailing_zeros() as usize - 2;
        let lh = self.height.trailing_zeros() as usize - 2;
        ((((self.y / CELL) * GRID + self.x / CELL) * 5 + lw) * 5 + lh) * 2 + self.mtt_ancestor as usize
    }

    pub(crate) const SLOTS: usize = GRID * GRID * 5 * 5 * 2;
}

impl fmt::Display for CuGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}x{}", self.x, self.y, self.width, self.height)
    }
}

/// Splits allowed on `geometry`.
///
/// NS is always allowed. The 64x64 root only admits QT besides NS. Below it,
/// QT needs a square CU of at least 16 with no MTT ancestor, BT needs the
/// split extent to be at least 8, TT at least 16.
pub fn legal_splits(geometry: &CuGeometry) -> SplitSet {
    let mut set = SplitSet::EMPTY;
    set.insert(SplitType::Ns);
    let (w, h) = (geometry.width, geometry.height);
    if w == ROOT_SIZE && h == ROOT_SIZE {
        if !geometry.mtt_ancestor {
            set.insert(SplitType::Qt);
        }
        return set;
    }
    if w == h && w >= 16 && !geometry.mtt_ancestor {
        set.insert(SplitType::Qt);
    }
    if h >= 8 {
        set.insert(SplitType::Bth);
    }
    if w >= 8 {
        set.insert(SplitType::Btv);
    }
    if h >= 16 {
        set.insert(SplitType::Tth);
    }
    if w >= 16 {
        set.insert(SplitType::Ttv);
    }
    set
}

/// Children of `geometry` under `split`, in raster order.
pub fn child_geometries(geometry: &CuGeometry, split: SplitType) -> Result<Vec<CuGeometry>> {
    if split == SplitType::Ns || !legal_splits(geometry).contains(split) {
        return Err(Error::IllegalSplit {
            geometry: *geometry,
            split,
        });
    }
    let CuGeometry {
        x,
        y,
        width: w,
        height: h,
        mtt_ancestor,
    } = *geometry;
    let mtt = mtt_ancestor || split.is_mtt();
    let g = |x, y, width, height| CuGeometry {
        x,
        y,
        width,
        height,
        mtt_ancestor: mtt,
    };
    Ok(match split {
        SplitType::Ns => unreachable!(),
        SplitType::Qt => {
            let (hw, hh) = (w / 2, h / 2);
            vec![g(x, y, hw, hh), g(x + hw, y, hw, hh), g(x, y + hh, hw, hh), g(x + hw, y + hh, hw, hh)]
        }
        SplitType::Bth => vec![g(x, y, w, h / 2), g(x, y + h / 2, w, h / 2)],
        SplitType::Btv => vec![g(x, y, w / 2, h), g(x + w / 2, y, w / 2, h)],
        SplitType::Tth => {
            let q = h / 4;
            vec![g(x, y, w, q), g(x, y + q, w, 2 * q), g(x, y + 3 * q, w, q)]
        }
        SplitType::Ttv => {
            let q = w / 4;
            vec![g(x, y, q, h), g(x + q, y, 2 * q, h), g(x + 3 * q, y, q, h)]
        }
    })
}

/// Number of interior 4x4 edges of an `n x n` block: `n/2 * (n/4 - 1)`.
pub fn np_length(block_size: usize) -> Result<usize> {
    match block_size {
        8 | 16 | 32 | 64 => Ok(block_size / 2 * (block_size / 4 - 1)),
        _ => Err(Error::UnsupportedBlockSize(block_size)),
    }
}

/// Length of the cropped edge vector of a `width x height` CU.
pub fn crop_len(width: usize, height: usize) -> usize {
    let (cw, ch) = (width / CELL, height / CELL);
    cw * (ch - 1) + ch * (cw - 1)
}

#[inline]
pub fn horizontal_edge_index(row: usize, col: usize) -> usize {
    debug_assert!(row < GRID - 1 && col < GRID);
    GRID * row + col
}

#[inline]
pub fn vertical_edge_index(row: usize, col: usize) -> usize {
    debug_assert!(row < GRID && col < GRID - 1);
    HORIZONTAL_EDGES + GRID * col + row
}

/// The 16 CU sizes that carry a split decision, in a fixed order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SizeId(u8);

impl SizeId {
    pub const COUNT: usize = 16;

    /// (width, height) per id.
    pub const TABLE: [(usize, usize); 16] = [
        (64, 64),
        (32, 32),
        (32, 16),
        (16, 32),
        (32, 8),
        (8, 32),
        (32, 4),
        (4, 32),
        (16, 16),
        (16, 8),
        (8, 16),
        (16, 4),
        (4, 16),
        (8, 8),
        (8, 4),
        (4, 8),
    ];

    pub fn all() -> impl Iterator<Item = SizeId> {
        (0..Self::COUNT as u8).map(SizeId)
    }

    pub fn from_index(index: usize) -> Option<SizeId> {
        (index < Self::COUNT).then_some(SizeId(index as u8))
    }

    pub fn of(width: usize, height: usize) -> Option<SizeId> {
        Self::TABLE
            .iter()
            .position(|&wh| wh == (width, height))
            .map(|i| SizeId(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn width(self) -> usize {
        Self::TABLE[self.index()].0
    }

    pub fn height(self) -> usize {
        Self::TABLE[self.index()].1
    }

    /// Splits legal at this size without an MTT ancestor.
    pub fn legal_splits(self) -> SplitSet {
        legal_splits(&CuGeometry {
            x: 0,
            y: 0,
            width: self.width(),
            height: self.height(),
            mtt_ancestor: false,
        })
    }

    pub fn class_count(self) -> usize {
        self.legal_splits().len()
    }

    /// Classifier input length: cropped edges plus the QP.
    pub fn feature_len(self) -> usize {
        crop_len(self.width(), self.height()) + 1
    }
}

impl fmt::Display for SizeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width(), self.height())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionTree {
    pub geometry: CuGeometry,
    pub split: SplitType,
    pub children: Vec<PartitionTree>,
}

impl PartitionTree {
    pub fn leaf(geometry: CuGeometry) -> Self {
        PartitionTree {
            geometry,
            split: SplitType::Ns,
            children: Vec::new(),
        }
    }

    /// Builds a node, checking legality and that children tile the parent.
    pub fn node(geometry: CuGeometry, split: SplitType, children: Vec<PartitionTree>) -> Result<Self> {
        if split == SplitType::Ns {
            if !children.is_empty() {
                return Err(Error::Corrupt(format!("NS node {geometry} has children")));
            }
            return Ok(Self::leaf(geometry));
        }
        let expected = child_geometries(&geometry, split)?;
        if expected.len() != children.len()
            || expected.iter().zip(&children).any(|(g, c)| *g != c.geometry)
        {
            return Err(Error::Corrupt(format!("children of {geometry} do not tile {split}")));
        }
        Ok(PartitionTree {
            geometry,
            split,
            children,
        })
    }

    /// Every node split by `split` at the root, children all NS.
    pub fn single_split(geometry: CuGeometry, split: SplitType) -> Result<Self> {
        if split == SplitType::Ns {
            return Ok(Self::leaf(geometry));
        }
        let children = child_geometries(&geometry, split)?
            .into_iter()
            .map(PartitionTree::leaf)
            .collect();
        Self::node(geometry, split, children)
    }

    /// Rebuilds a tree from its preorder split sequence.
    pub fn from_preorder<I>(geometry: CuGeometry, splits: &mut I) -> Result<Self>
    where
        I: Iterator<Item = SplitType>,
    {
        let split = splits
            .next()
            .ok_or_else(|| Error::Corrupt("preorder split stream ended early".into()))?;
        if split == SplitType::Ns {
            return Ok(Self::leaf(geometry));
        }
        let children = child_geometries(&geometry, split)?
            .into_iter()
            .map(|g| Self::from_preorder(g, splits))
            .collect::<Result<Vec<_>>>()?;
        Ok(PartitionTree {
            geometry,
            split,
            children,
        })
    }

    /// Preorder split sequence; inverse of [`PartitionTree::from_preorder`].
    pub fn preorder(&self) -> Vec<SplitType> {
        self.nodes().map(|n| n.split).collect()
    }

    /// Preorder node iterator.
    pub fn nodes(&self) -> Nodes<'_> {
        Nodes { stack: vec![self] }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &PartitionTree> {
        self.nodes().filter(|n| n.split == SplitType::Ns)
    }

    pub fn node_count(&self) -> usize {
        self.nodes().count()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    /// Checks every structural invariant of the subtree.
    pub fn validate(&self) -> Result<()> {
        if self.split == SplitType::Ns {
            return if self.children.is_empty() {
                Ok(())
            } else {
                Err(Error::Corrupt(format!("NS node {} has children", self.geometry)))
            };
        }
        let expected = child_geometries(&self.geometry, self.split)?;
        if expected.len() != self.children.len() {
            return Err(Error::Corrupt(format!("wrong child count at {}", self.geometry)));
        }
        for (g, c) in expected.iter().zip(&self.children) {
            if *g != c.geometry {
                return Err(Error::Corrupt(format!("child {} does not tile {}", c.geometry, self.geometry)));
            }
            c.validate()?;
        }
        Ok(())
    }

    /// Random legal tree; each node splits with probability `split_prob`
    /// (uniformly among its legal non-NS splits).
    pub fn random<R: Rng + ?Sized>(rng: &mut R, geometry: CuGeometry, split_prob: f64) -> Self {
        let options: Vec<SplitType> = legal_splits(&geometry)
            .iter()
            .filter(|s| *s != SplitType::Ns)
            .collect();
        if options.is_empty() || !rng.gen_bool(split_prob) {
            return Self::leaf(geometry);
        }
        let split = options[rng.gen_range(0..options.len())];
        let children = child_geometries(&geometry, split)
            .expect("legal split")
            .into_iter()
            .map(|g| Self::random(rng, g, split_prob))
            .collect();
        PartitionTree {
            geometry,
            split,
            children,
        }
    }

    fn write_indented(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        writeln!(f, "{:indent$}{} {}", "", self.geometry, self.split, indent = 2 * depth)?;
        for c in &self.children {
            c.write_indented(f, depth + 1)?;
        }
        Ok(())
    }
}

/// One node per line, two spaces of indentation per depth level,
/// formatted as `x,y,WxH SPLIT`.
impl fmt::Display for PartitionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_indented(f, 0)
    }
}

pub struct Nodes<'a> {
    stack: Vec<&'a PartitionTree>,
}

impl<'a> Iterator for Nodes<'a> {
    type Item = &'a PartitionTree;

    fn next(&mut self) -> Option<Self::Item> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}

/// Per-edge split probabilities (or 0/1 activations) of a 64x64 root.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeVector(Vec<f32>);

impl EdgeVector {
    pub fn zeros() -> Self {
        EdgeVector(vec![0.0; EDGE_COUNT])
    }

    pub fn filled(value: f32) -> Self {
        EdgeVector(vec![value; EDGE_COUNT])
    }

    pub fn from_vec(values: Vec<f32>) -> Result<Self> {
        if values.len() != EDGE_COUNT {
            return Err(Error::LengthMismatch {
                expected: EDGE_COUNT,
                actual: values.len(),
            });
        }
        Ok(EdgeVector(values))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.0
    }

    pub fn is_binary(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Number of components at 1 (or above 0.5 for probabilities).
    pub fn active_count(&self) -> usize {
        self.0.iter().filter(|&&v| v > 0.5).count()
    }

    /// 60-byte LSB-first bitmap of the components above 0.5.
    pub fn to_bitmap(&self) -> [u8; EDGE_COUNT / 8] {
        let mut out = [0u8; EDGE_COUNT / 8];
        for (i, &v) in self.0.iter().enumerate() {
            if v > 0.5 {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    pub fn from_bitmap(bits: &[u8; EDGE_COUNT / 8]) -> Self {
        EdgeVector(
            (0..EDGE_COUNT)
                .map(|i| ((bits[i / 8] >> (i % 8)) & 1) as f32)
                .collect(),
        )
    }
}

impl std::ops::Index<usize> for EdgeVector {
    type Output = f32;

    fn index(&self, i: usize) -> &f32 {
        &self.0[i]
    }
}

/// Leaf id of every 4x4 cell, in raster order of the root grid.
fn paint_leaves(tree: &PartitionTree) -> [u16; GRID * GRID] {
    let mut cells = [0u16; GRID * GRID];
    for (id, leaf) in tree.leaves().enumerate() {
        let g = leaf.geometry;
        for r in g.y / CELL..(g.y + g.height) / CELL {
            for c in g.x / CELL..(g.x + g.width) / CELL {
                cells[r * GRID + c] = id as u16;
            }
        }
    }
    cells
}

/// Binary edge vector of a root partition tree.
pub fn tree_to_edge_vector(tree: &PartitionTree) -> Result<EdgeVector> {
    if !tree.geometry.is_root() {
        return Err(Error::NotRootTree(tree.geometry));
    }
    let cells = paint_leaves(tree);
    let mut v = EdgeVector::zeros();
    for r in 0..GRID - 1 {
        for c in 0..GRID {
            if cells[r * GRID + c] != cells[(r + 1) * GRID + c] {
                v.0[horizontal_edge_index(r, c)] = 1.0;
            }
        }
    }
    for r in 0..GRID {
        for c in 0..GRID - 1 {
            if cells[r * GRID + c] != cells[r * GRID + c + 1] {
                v.0[vertical_edge_index(r, c)] = 1.0;
            }
        }
    }
    Ok(v)
}

/// Connected components of the 16x16 cell grid, merging neighbours whose
/// shared edge is inactive.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafMap {
    /// Component label per cell (raster order); labels are numbered in
    /// order of first appearance.
    pub labels: [u16; GRID * GRID],
    pub count: usize,
}

/// A connected region of cells; `width`/`height` describe its bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Region {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    pub cells: usize,
}

impl Region {
    pub fn is_rectangle(&self) -> bool {
        self.cells * CELL * CELL == self.width * self.height
    }
}

impl LeafMap {
    pub fn regions(&self) -> Vec<Region> {
        let mut bounds = vec![(usize::MAX, usize::MAX, 0usize, 0usize, 0usize); self.count];
        for (i, &l) in self.labels.iter().enumerate() {
            let (r, c) = (i / GRID, i % GRID);
            let b = &mut bounds[l as usize];
            b.0 = b.0.min(c);
            b.1 = b.1.min(r);
            b.2 = b.2.max(c);
            b.3 = b.3.max(r);
            b.4 += 1;
        }
        bounds
            .into_iter()
            .map(|(c0, r0, c1, r1, n)| Region {
                x: c0 * CELL,
                y: r0 * CELL,
                width: (c1 - c0 + 1) * CELL,
                height: (r1 - r0 + 1) * CELL,
                cells: n,
            })
            .collect()
    }
}

pub fn edge_vector_to_leaf_map(v: &EdgeVector) -> LeafMap {
    const UNSET: u16 = u16::MAX;
    let mut labels = [UNSET; GRID * GRID];
    let mut count = 0usize;
    let mut stack = Vec::new();
    for start in 0..GRID * GRID {
        if labels[start] != UNSET {
            continue;
        }
        let label = count as u16;
        count += 1;
        labels[start] = label;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / GRID, i % GRID);
            let mut visit = |j: usize, edge: usize| {
                if labels[j] == UNSET && v.0[edge] <= 0.5 {
                    labels[j] = label;
                    stack.push(j);
                }
            };
            if r + 1 < GRID {
                visit(i + GRID, horizontal_edge_index(r, c));
            }
            if r > 0 {
                visit(i - GRID, horizontal_edge_index(r - 1, c));
            }
            if c + 1 < GRID {
                visit(i + 1, vertical_edge_index(r, c));
            }
            if c > 0 {
                visit(i - 1, vertical_edge_index(r, c - 1));
            }
        }
    }
    LeafMap { labels, count }
}

/// Indices of the edges strictly inside `geometry`, horizontal first, then
/// vertical, in the same relative order as the full vector.
pub fn crop_indices(geometry: &CuGeometry) -> Vec<usize> {
    let (c0, r0) = (geometry.x / CELL, geometry.y / CELL);
    let (cw, ch) = (geometry.width / CELL, geometry.height / CELL);
    let mut out = Vec::with_capacity(crop_len(geometry.width, geometry.height));
    for r in r0..r0 + ch - 1 {
        for c in c0..c0 + cw {
            out.push(horizontal_edge_index(r, c));
        }
    }
    for c in c0..c0 + cw - 1 {
        for r in r0..r0 + ch {
            out.push(vertical_edge_index(r, c));
        }
    }
    out
}

pub fn crop_edge_vector(v: &EdgeVector, geometry: &CuGeometry) -> Vec<f32> {
    crop_indices(geometry).into_iter().map(|i| v.0[i]).collect()
}

/// Edges lying on the internal boundary lines that `split` would draw
/// inside `geometry`. Empty for NS.
pub fn split_boundary_indices(geometry: &CuGeometry, split: SplitType) -> Vec<usize> {
    let (c0, r0) = (geometry.x / CELL, geometry.y / CELL);
    let (cw, ch) = (geometry.width / CELL, geometry.height / CELL);
    let horizontal_line = |row_offset: usize, out: &mut Vec<usize>| {
        for c in c0..c0 + cw {
            out.push(horizontal_edge_index(r0 + row_offset - 1, c));
        }
    };
    let vertical_line = |col_offset: usize, out: &mut Vec<usize>| {
        for r in r0..r0 + ch {
            out.push(vertical_edge_index(r, c0 + col_offset - 1));
        }
    };
    let mut out = Vec::new();
    match split {
        SplitType::Ns => {}
        SplitType::Qt if cw >= 2 && ch >= 2 => {
            horizontal_line(ch / 2, &mut out);
            vertical_line(cw / 2, &mut out);
        }
        SplitType::Bth if ch >= 2 => horizontal_line(ch / 2, &mut out),
        SplitType::Btv if cw >= 2 => vertical_line(cw / 2, &mut out),
        SplitType::Tth if ch >= 4 => {
            horizontal_line(ch / 4, &mut out);
            horizontal_line(3 * ch / 4, &mut out);
        }
        SplitType::Ttv if cw >= 4 => {
            vertical_line(cw / 4, &mut out);
            vertical_line(3 * cw / 4, &mut out);
        }
        _ => {}
    }
    out
}
