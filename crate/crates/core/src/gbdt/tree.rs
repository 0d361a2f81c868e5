use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::{BinnedMatrix, HistogramBinning, MISSING_BIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        /// Values `<= threshold` go left.
        threshold: f64,
        bin: u8,
        /// Direction taken by missing values.
        default_left: bool,
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Flat binary tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(value: f64) -> Tree {
        Tree { nodes: vec![TreeNode::Leaf { value }] }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, default_left, left, right, .. } => {
                    let v = x[*feature];
                    let go_left = if v.is_nan() { *default_left } else { v <= *threshold };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_binned(&self, m: &BinnedMatrix, row: usize) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, bin, default_left, left, right, .. } => {
                    let b = m.columns[*feature][row];
                    let go_left = if b == MISSING_BIN { *default_left } else { b <= *bin };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// `(feature, gain)` of every split.
    pub fn splits(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Split { feature, gain, .. } => Some((*feature, *gain)),
            TreeNode::Leaf { .. } => None,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub lambda: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct BinStat {
    g: f64,
    h: f64,
    n: u32,
}

const BINS: usize = 256;

/// Gradient/hessian histograms of one node, `BINS` slots per feature.
struct Histogram(Vec<BinStat>);

impl Histogram {
    fn build(m: &BinnedMatrix, rows: &[u32], g: &[f64], h: &[f64]) -> Histogram {
        let per_feature: Vec<Vec<BinStat>> = m
            .columns
            .par_iter()
            .map(|col| {
                let mut hist = vec![BinStat::default(); BINS];
                for &r in rows {
                    let r = r as usize;
                    let s = &mut hist[col[r] as usize];
                    s.g += g[r];
                    s.h += h[r];
                    s.n += 1;
                }
                hist
            })
            .collect();
        Histogram(per_feature.concat())
    }

    fn subtract(&self, other: &Histogram) -> Histogram {
        Histogram(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| BinStat { g: a.g - b.g, h: a.h - b.h, n: a.n - b.n })
                .collect(),
        )
    }

    fn feature(&self, f: usize) -> &[BinStat] {
        &self.0[f * BINS..(f + 1) * BINS]
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitCandidate {
    feature: usize,
    bin: u8,
    default_left: bool,
    gain: f64,
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

fn best_split_for_feature(
    stats: &[BinStat],
    n_edges: usize,
    feature: usize,
    total: (f64, f64, u32),
    p: &TreeParams,
) -> Option<SplitCandidate> {
    let (gt, ht, nt) = total;
    let missing = stats[MISSING_BIN as usize];
    let parent = score(gt, ht, p.lambda);
    let mut best: Option<SplitCandidate> = None;
    let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0u32);
    for j in 0..n_edges {
        gl += stats[j].g;
        hl += stats[j].h;
        nl += stats[j].n;
        for default_left in [false, true] {
            if default_left && missing.n == 0 {
                continue;
            }
            let (g_l, h_l, n_l) = if default_left {
                (gl + missing.g, hl + missing.h, nl + missing.n)
            } else {
                (gl, hl, nl)
            };
            let (g_r, h_r, n_r) = (gt - g_l, ht - h_l, nt - n_l);
            if n_l == 0 || n_r == 0 || h_l < p.min_child_weight || h_r < p.min_child_weight {
                continue;
            }
            if h_l + p.lambda <= 0.0 || h_r + p.lambda <= 0.0 || ht + p.lambda <= 0.0 {
                continue;
            }
            let gain = 0.5 * (score(g_l, h_l, p.lambda) + score(g_r, h_r, p.lambda) - parent);
            if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
                best = Some(SplitCandidate { feature, bin: j as u8, default_left, gain });
            }
        }
    }
    best
}

struct Builder<'a> {
    m: &'a BinnedMatrix,
    binning: &'a HistogramBinning,
    g: &'a [f64],
    h: &'a [f64],
    p: TreeParams,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        if h + self.p.lambda > 0.0 {
            -self.p.eta * g / (h + self.p.lambda)
        } else {
            0.0
        }
    }

    fn find_split(&self, hist: &Histogram, total: (f64, f64, u32)) -> Option<SplitCandidate> {
        let per_feature: Vec<Option<SplitCandidate>> = (0..self.binning.n_features())
            .into_par_iter()
            .map(|f| best_split_for_feature(hist.feature(f), self.binning.edges[f].len(), f, total, &self.p))
            .collect();
        // Sequential reduction keeps the lowest feature on ties.
        let mut best: Option<SplitCandidate> = None;
        for c in per_feature.into_iter().flatten() {
            if best.is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<u32>, hist: Histogram, depth: usize) -> usize {
        let (mut g, mut h) = (0.0, 0.0);
        for &r in &rows {
            g += self.g[r as usize];
            h += self.h[r as usize];
        }
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: self.leaf_value(g, h) });
        if depth >= self.p.max_depth || rows.len() < 2 {
            return id;
        }
        let f0 = hist.feature(0);
        let total = f0.iter().fold((0.0, 0.0, 0u32), |acc, s| (acc.0 + s.g, acc.1 + s.h, acc.2 + s.n));
        let Some(split) = self.find_split(&hist, total) else {
            return id;
        };
        let col = &self.m.columns[split.feature];
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows.iter().partition(|&&r| {
            let b = col[r as usize];
            if b == MISSING_BIN {
                split.default_left
            } else {
                b <= split.bin
            }
        });
        drop(rows);
        let (small_is_left, small) = if left_rows.len() <= right_rows.len() {
            (true, &left_rows)
        } else {
            (false, &right_rows)
        };
        let small_hist = Histogram::build(self.m, small, self.g, self.h);
        let large_hist = hist.subtract(&small_hist);
        drop(hist);
        let (left_hist, right_hist) = if small_is_left {
            (small_hist, large_hist)
        } else {
            (large_hist, small_hist)
        };
        let left = self.grow(left_rows, left_hist, depth + 1);
        let right = self.grow(right_rows, right_hist, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: self.binning.edges[split.feature][split.bin as usize],
            bin: split.bin,
            default_left: split.default_left,
            gain: split.gain,
            left,
            right,
        };
        id
    }
}

/// Grows one regression tree on gradient statistics of the given rows.
pub fn build_tree(
    m: &BinnedMatrix,
    binning: &HistogramBinning,
    rows: Vec<u32>,
    g: &[f64],
    h: &[f64],
    params: TreeParams,
) -> Tree {
    let hist = Histogram::build(m, &rows, g, h);
    let mut b = Builder { m, binning, g, h, p: params, nodes: Vec::new() };
    b.grow(rows, hist, 0);
    Tree { nodes: b.nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn params() -> TreeParams {
        TreeParams { max_depth: 6, min_child_weight: 0.0, lambda: 0.0, eta: 1.0 }
    }

    #[test]
    fn stump_recovers_step() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = xs.iter().map(|&x| if x < 5.0 { 1.0 } else { 3.0 }).collect();
        let x = Array2::from_shape_vec((10, 1), xs).unwrap();
        let binning = HistogramBinning::fit(x.view(), 255).unwrap();
        let m = binning.transform(x.view()).unwrap();
        // Squared error around prediction 0: g = -y, h = 1.
        let g: Vec<f64> = y.iter().map(|v| -v).collect();
        let h = vec![1.0; 10];
        let t = build_tree(&m, &binning, (0..10).collect(), &g, &h, params());
        assert_eq!(t.depth(), 1);
        for (r, &yr) in y.iter().enumerate() {
            assert_eq!(t.predict(x.row(r).as_slice().unwrap()), yr);
            assert_eq!(t.predict_binned(&m, r), yr);
        }
        match &t.nodes[0] {
            TreeNode::Split { threshold, .. } => assert_eq!(*threshold, 4.5),
            _ => panic!("expected split"),
        }
    }

    #[test]
    fn missing_values_routed_by_gain() {
        let xs = vec![0.0, 1.0, 2.0, f64::NAN, 10.0, 11.0, f64::NAN];
        let y = [0.0, 0.0, 0.0, 5.0, 5.0, 5.0, 5.0];
        let x = Array2::from_shape_vec((7, 1), xs).unwrap();
        let binning = HistogramBinning::fit(x.view(), 255).unwrap();
        let m = binning.transform(x.view()).unwrap();
        let g: Vec<f64> = y.iter().map(|v| -v).collect();
        let t = build_tree(&m, &binning, (0..7).collect(), &g, &[1.0; 7], params());
        assert_eq!(t.predict(&[f64::NAN]), 5.0);
        assert_eq!(t.predict(&[0.5]), 0.0);
    }

    #[test]
    fn constant_feature_never_split() {
        let x = Array2::from_shape_vec((6, 1), vec![2.0; 6]).unwrap();
        let binning = HistogramBinning::fit(x.view(), 255).unwrap();
        let m = binning.transform(x.view()).unwrap();
        let g = [1.0, -1.0, 2.0, -2.0, 0.5, 0.0];
        let t = build_tree(&m, &binning, (0..6).collect(), &g, &[1.0; 6], params());
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn respects_depth_and_child_weight() {
        let n = 64;
        let xs: Vec<f64> = (0..n).map(f64::from).collect();
        let x = Array2::from_shape_vec((n as usize, 1), xs.clone()).unwrap();
        let binning = HistogramBinning::fit(x.view(), 255).unwrap();
        let m = binning.transform(x.view()).unwrap();
        let g: Vec<f64> = xs.iter().map(|v| (v * 0.7).sin()).collect();
        let h = vec![1.0; n as usize];
        let p = TreeParams { max_depth: 3, min_child_weight: 5.0, lambda: 1.0, eta: 0.3 };
        let t = build_tree(&m, &binning, (0..n as u32).collect(), &g, &h, p);
        assert!(t.depth() <= 3);
        // Every leaf holds at least 5 rows (hessian 1 each).
        let mut counts = std::collections::HashMap::new();
        for r in 0..n as usize {
            let leaf = t.predict_binned(&m, r).to_bits();
            *counts.entry(leaf).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 5));
        assert!(t.splits().all(|(_, gain)| gain > 0.0));
    }
}
