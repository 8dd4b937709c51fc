//! Per-pixel random-forest classifier over a small multi-scale feature stack.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::filters;
use super::ProcessedGrid;
use crate::error::{Error, Result};
use crate::rng;

const SCALES: [f64; 3] = [1.0, 2.0, 4.0];
pub const N_FEATURES: usize = 1 + 2 * SCALES.len();

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Cap on training pixels per tree, split evenly between classes.
    pub max_samples: usize,
    /// Components smaller than this are dropped after prediction.
    pub min_px: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 24,
            max_depth: 12,
            min_leaf: 4,
            max_samples: 16000,
            min_px: 20,
            seed: 0,
        }
    }
}

/// Feature stack for every pixel: raw value, then for each scale the
/// frequency-smoothed value and its gradient magnitude.
pub fn features(pg: &ProcessedGrid) -> Vec<[f64; N_FEATURES]> {
    let (nr, nc) = (pg.n_bias(), pg.n_freq());
    let mut stack = vec![[0.0; N_FEATURES]; pg.values.len()];
    for (k, f) in stack.iter_mut().enumerate() {
        f[0] = pg.values[k];
    }
    for (s, &sigma) in SCALES.iter().enumerate() {
        let sm = filters::gaussian_rows(&pg.values, nc, sigma);
        let gr = filters::gradient_magnitude(&sm, nr, nc);
        for (k, f) in stack.iter_mut().enumerate() {
            f[1 + 2 * s] = sm[k];
            f[2 + 2 * s] = gr[k];
        }
    }
    stack
}

#[derive(Clone, Debug, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64; N_FEATURES]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf(p) => return p,
                Node::Split { feature, threshold, left, right } => {
                    k = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

struct Builder<'a, R: Rng> {
    x: &'a [[f64; N_FEATURES]],
    y: &'a [bool],
    params: &'a ForestParams,
    rng: R,
    nodes: Vec<Node>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p) * n as f64
}

impl<R: Rng> Builder<'_, R> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(pos as f64 / n.max(1) as f64));
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf || pos == 0 || pos == n {
            return id;
        }
        let mtry = (N_FEATURES as f64).sqrt().ceil() as usize;
        let mut feats: Vec<usize> = (0..N_FEATURES).collect();
        feats.shuffle(&mut self.rng);
        let parent = gini(pos, n);
        let mut best: Option<(f64, usize, f64)> = None;
        for &f in &feats[..mtry] {
            idx.sort_unstable_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left_pos = 0;
            for k in 0..n - 1 {
                if self.y[idx[k]] {
                    left_pos += 1;
                }
                let nl = k + 1;
                let (a, b) = (self.x[idx[k]][f], self.x[idx[k + 1]][f]);
                if a == b || nl < self.params.min_leaf || n - nl < self.params.min_leaf {
                    continue;
                }
                let gain = parent - gini(left_pos, nl) - gini(pos - left_pos, n - nl);
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, 0.5 * (a + b)));
                }
            }
        }
        let Some((gain, feature, threshold)) = best else {
            return id;
        };
        if gain <= 1e-12 {
            return id;
        }
        let split = partition(idx, |i| self.x[i][feature] <= threshold);
        let (l, r) = idx.split_at_mut(split);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut k = 0;
    for j in 0..idx.len() {
        if pred(idx[j]) {
            idx.swap(j, k);
            k += 1;
        }
    }
    k
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PixelForest {
    params: ForestParams,
    trees: Vec<Tree>,
}

impl PixelForest {
    pub fn new(params: ForestParams) -> Self {
        PixelForest { params, trees: Vec::new() }
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn is_trained(&self) -> bool {
        !self.trees.is_empty()
    }

    /// Trains on pairs of grids and same-shaped boolean label masks.
    pub fn train(&mut self, grids: &[ProcessedGrid], masks: &[Vec<bool>]) -> Result<()> {
        if grids.is_empty() || grids.len() != masks.len() {
            return Err(Error::Argument("need matching, non-empty grids and masks".into()));
        }
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (g, m) in grids.iter().zip(masks) {
            if m.len() != g.values.len() {
                return Err(Error::Argument("label mask shape differs from its grid".into()));
            }
            x.extend(features(g));
            y.extend_from_slice(m);
        }
        let positives: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
        let negatives: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
        if positives.is_empty() || negatives.is_empty() {
            return Err(Error::Argument("training labels need both classes".into()));
        }
        let per_class = self.params.max_samples / 2;
        let mut trees = Vec::with_capacity(self.params.n_trees);
        for t in 0..self.params.n_trees {
            let mut r = rng::substream(self.params.seed, "forest", t as u64);
            let mut idx: Vec<usize> = Vec::with_capacity(2 * per_class);
            for class in [&positives, &negatives] {
                let k = per_class.min(class.len());
                idx.extend((0..k).map(|_| class[r.random_range(0..class.len())]));
            }
            let mut b = Builder { x: &x, y: &y, params: &self.params, rng: r, nodes: Vec::new() };
            b.build(&mut idx, 0);
            trees.push(Tree { nodes: b.nodes });
        }
        self.trees = trees;
        Ok(())
    }

    /// Mean vote for the positive class at every pixel.
    pub fn probabilities(&self, pg: &ProcessedGrid) -> Result<Vec<f64>> {
        if !self.is_trained() {
            return Err(Error::Untrained);
        }
        let n = self.trees.len() as f64;
        Ok(features(pg)
            .iter()
            .map(|f| self.trees.iter().map(|t| t.predict(f)).sum::<f64>() / n)
            .collect())
    }

    pub fn predict(&self, pg: &ProcessedGrid) -> Result<Vec<bool>> {
        Ok(self.probabilities(pg)?.into_iter().map(|p| p > 0.5).collect())
    }
}
