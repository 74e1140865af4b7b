//! Regression trees fitted to gradient/hessian pairs with exact greedy
//! splits, grown level by level.

/// Flattened node. `feature < 0` marks a leaf.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeNode {
    pub feature: i32,
    pub threshold: f32,
    pub left: u32,
    pub right: u32,
    pub value: f32,
}

impl TreeNode {
    pub fn leaf(value: f32) -> Self {
        TreeNode {
            feature: -1,
            threshold: 0.0,
            left: 0,
            right: 0,
            value,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature < 0
    }
}

/// Samples with `x[feature] <= threshold` go left.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f32]) -> f32 {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            if n.is_leaf() {
                return n.value;
            }
            i = if x[n.feature as usize] <= n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }

    /// Same as [`predict`](Self::predict) for row `i` of a column matrix.
    pub fn predict_row(&self, data: &Columns, i: usize) -> f32 {
        let mut k = 0;
        loop {
            let n = &self.nodes[k];
            if n.is_leaf() {
                return n.value;
            }
            k = if data.cols[n.feature as usize][i] <= n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Multiplies every leaf value by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for n in self.nodes.iter_mut().filter(|n| n.is_leaf()) {
            n.value = (n.value as f64 * factor) as f32;
        }
    }

    pub(crate) fn max_feature(&self) -> Option<usize> {
        self.nodes.iter().filter(|n| !n.is_leaf()).map(|n| n.feature as usize).max()
    }
}

/// Column-major feature matrix with per-column sort order.
pub struct Columns {
    pub cols: Vec<Vec<f32>>,
    sorted: Vec<Vec<u32>>,
    rows: usize,
}

impl Columns {
    /// `rows[i]` is the feature vector of sample `i`; all must share a length.
    pub fn from_rows(rows: &[Vec<f32>]) -> Self {
        let n = rows.len();
        let f = rows.first().map_or(0, Vec::len);
        let cols: Vec<Vec<f32>> = (0..f).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let sorted = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Columns { cols, sorted, rows: n }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn features(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize, buf: &mut Vec<f32>) {
        buf.clear();
        buf.extend(self.cols.iter().map(|c| c[i]));
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TreeParams {
    pub max_depth: usize,
    pub l2: f64,
    pub min_child_hessian: f64,
    pub min_child_samples: usize,
    /// Multiplies every Newton leaf value.
    pub leaf_factor: f64,
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Open {
    node: usize,
    g: f64,
    h: f64,
    count: usize,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f32,
}

#[derive(Clone, Copy, Default)]
struct Running {
    g: f64,
    h: f64,
    count: usize,
    last: f32,
}

fn score(g: f64, h: f64, l2: f64) -> f64 {
    if h + l2 > 0.0 {
        g * g / (h + l2)
    } else {
        0.0
    }
}

/// Threshold strictly separating `lo < hi` in f32 arithmetic.
fn midpoint(lo: f32, hi: f32) -> f32 {
    let t = lo + (hi - lo) * 0.5;
    if t >= hi || t < lo {
        lo
    } else {
        t
    }
}

/// Fits one tree to `(grad, hess)` over the rows with `in_bag[i]` set.
pub fn fit(data: &Columns, in_bag: &[bool], grad: &[f64], hess: &[f64], p: &TreeParams) -> RegressionTree {
    let n = data.rows();
    let leaf_value = |g: f64, h: f64| {
        if h + p.l2 > 0.0 {
            (-p.leaf_factor * g / (h + p.l2)) as f32
        } else {
            0.0
        }
    };

    // position of each row in the current frontier, NONE once settled
    let mut pos = vec![NONE; n];
    let (mut g0, mut h0, mut c0) = (0.0, 0.0, 0);
    for i in 0..n {
        if in_bag[i] {
            pos[i] = 0;
            g0 += grad[i];
            h0 += hess[i];
            c0 += 1;
        }
    }
    let mut nodes = vec![TreeNode::leaf(leaf_value(g0, h0))];
    let mut frontier = vec![Open {
        node: 0,
        g: g0,
        h: h0,
        count: c0,
    }];

    for _ in 0..p.max_depth {
        if frontier.is_empty() {
            break;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];
        let mut run = vec![Running::default(); frontier.len()];
        for (f, order) in data.sorted.iter().enumerate() {
            let col = &data.cols[f];
            run.iter_mut().for_each(|r| *r = Running::default());
            for &r in order {
                let r = r as usize;
                let k = pos[r];
                if k == NONE {
                    continue;
                }
                let k = k as usize;
                let v = col[r];
                let st = &mut run[k];
                if st.count > 0 && v > st.last {
                    let o = &frontier[k];
                    let (gr, hr) = (o.g - st.g, o.h - st.h);
                    let cr = o.count - st.count;
                    if st.h >= p.min_child_hessian
                        && hr >= p.min_child_hessian
                        && st.count >= p.min_child_samples
                        && cr >= p.min_child_samples
                    {
                        let gain = score(st.g, st.h, p.l2) + score(gr, hr, p.l2) - score(o.g, o.h, p.l2);
                        if gain > 1e-12 && best[k].is_none_or(|b| gain > b.gain) {
                            best[k] = Some(Candidate {
                                gain,
                                feature: f,
                                threshold: midpoint(st.last, v),
                            });
                        }
                    }
                }
                st.g += grad[r];
                st.h += hess[r];
                st.count += 1;
                st.last = v;
            }
        }

        let mut next = Vec::new();
        // frontier index -> (left frontier index, right frontier index)
        let mut route = vec![None; frontier.len()];
        for (k, cand) in best.iter().enumerate() {
            let Some(c) = cand else { continue };
            let left = nodes.len();
            nodes.push(TreeNode::leaf(0.0));
            nodes.push(TreeNode::leaf(0.0));
            let parent = &mut nodes[frontier[k].node];
            parent.feature = c.feature as i32;
            parent.threshold = c.threshold;
            parent.left = left as u32;
            parent.right = left as u32 + 1;
            parent.value = 0.0;
            route[k] = Some((next.len(), c.feature, c.threshold));
            for child in [left, left + 1] {
                next.push(Open {
                    node: child,
                    g: 0.0,
                    h: 0.0,
                    count: 0,
                });
            }
        }
        for i in 0..n {
            let k = pos[i];
            if k == NONE {
                continue;
            }
            match route[k as usize] {
                None => pos[i] = NONE,
                Some((base, f, t)) => {
                    let j = if data.cols[f][i] <= t { base } else { base + 1 };
                    pos[i] = j as u32;
                    next[j].g += grad[i];
                    next[j].h += hess[i];
                    next[j].count += 1;
                }
            }
        }
        for o in &next {
            nodes[o.node].value = leaf_value(o.g, o.h);
        }
        frontier = next;
    }
    RegressionTree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(depth: usize) -> TreeParams {
        TreeParams {
            max_depth: depth,
            l2: 0.0,
            min_child_hessian: 0.0,
            min_child_samples: 1,
            leaf_factor: 1.0,
        }
    }

    #[test]
    fn finds_the_separating_threshold() {
        let rows: Vec<Vec<f32>> = (0..10).map(|i| vec![0.3, i as f32 / 10.0]).collect();
        let data = Columns::from_rows(&rows);
        let grad: Vec<f64> = (0..10).map(|i| if i < 6 { 1.0 } else { -1.0 }).collect();
        let hess = vec![1.0; 10];
        let t = fit(&data, &[true; 10], &grad, &hess, &params(1));
        assert_eq!(t.nodes[0].feature, 1);
        assert!(t.nodes[0].threshold >= 0.5 && t.nodes[0].threshold < 0.6);
        assert_eq!(t.predict(&[0.0, 0.1]), -1.0);
        assert_eq!(t.predict(&[0.0, 0.9]), 1.0);
    }

    #[test]
    fn constant_gradient_gives_single_leaf() {
        let rows: Vec<Vec<f32>> = (0..8).map(|i| vec![i as f32]).collect();
        let data = Columns::from_rows(&rows);
        let t = fit(&data, &[true; 8], &[2.0; 8], &[1.0; 8], &params(3));
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.nodes[0].value, -2.0);
    }

    #[test]
    fn out_of_bag_rows_are_ignored() {
        let rows: Vec<Vec<f32>> = (0..4).map(|i| vec![i as f32]).collect();
        let data = Columns::from_rows(&rows);
        let bag = [true, true, false, false];
        let t = fit(&data, &bag, &[1.0, 1.0, -100.0, -100.0], &[1.0; 4], &params(2));
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.nodes[0].value, -1.0);
    }

    #[test]
    fn midpoint_is_strictly_between() {
        for (a, b) in [(0.0f32, 1.0f32), (1.0, 1.0 + f32::EPSILON), (-3.0, 7.5)] {
            let t = midpoint(a, b);
            assert!(a <= t && t < b);
        }
    }
}
