use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng::child_rng;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Node {
    /// Fraction of positive training samples reaching the leaf.
    Leaf { positive: f64 },
    /// `x[feature] <= threshold` goes left.
    Split { feature: u8, threshold: f64, left: u32, right: u32 },
}

/// CART classification tree with Gini impurity.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

#[derive(Clone, Copy, Debug)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub features_per_split: usize,
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

struct Builder<'a, R> {
    xs: &'a [[f64; 3]],
    ys: &'a [bool],
    params: TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

impl<R: Rng> Builder<'_, R> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> u32 {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.ys[i]).count();
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf { positive: if n == 0 { 0.0 } else { pos as f64 / n as f64 } });
        if depth >= self.params.max_depth || n < self.params.min_samples_split || pos == 0 || pos == n {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(idx, pos) else {
            return id;
        };
        let mut cut = 0;
        for k in 0..n {
            if self.xs[idx[k]][feature] <= threshold {
                idx.swap(k, cut);
                cut += 1;
            }
        }
        let (l, r) = idx.split_at_mut(cut);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id as usize] = Node::Split { feature: feature as u8, threshold, left, right };
        id
    }

    /// Best Gini split over a random feature subset; further features are
    /// tried only if the subset admits no split at all.
    fn best_split(&mut self, idx: &[usize], pos: usize) -> Option<(usize, f64)> {
        let mut features = [0usize, 1, 2];
        features.shuffle(self.rng);
        let n = idx.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<usize> = idx.to_vec();
        for (rank, &f) in features.iter().enumerate() {
            if rank >= self.params.features_per_split && best.is_some() {
                break;
            }
            sorted.sort_by(|&a, &b| self.xs[a][f].total_cmp(&self.xs[b][f]));
            let mut left_pos = 0usize;
            for k in 0..sorted.len() - 1 {
                if self.ys[sorted[k]] {
                    left_pos += 1;
                }
                let (a, b) = (self.xs[sorted[k]][f], self.xs[sorted[k + 1]][f]);
                if a == b {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let score = nl * gini(left_pos as f64, nl) + nr * gini((pos - left_pos) as f64, nr);
                if best.is_none_or(|(s, _, _)| score < s) {
                    let mid = a + (b - a) / 2.0;
                    // guard against midpoints that round up to `b`
                    let threshold = if mid < b { mid } else { a };
                    best = Some((score, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

impl DecisionTree {
    pub fn fit<R: Rng>(xs: &[[f64; 3]], ys: &[bool], sample: &mut [usize], params: TreeParams, rng: &mut R) -> Self {
        let mut builder = Builder { xs, ys, params, rng, nodes: Vec::new() };
        builder.build(sample, 0);
        DecisionTree { nodes: builder.nodes }
    }

    pub fn leaf_value(&self, x: &[f64; 3]) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf { positive } => return positive,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature as usize] <= threshold { left as usize } else { right as usize };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left as usize).max(walk(nodes, right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Bagged CART trees; probability is the fraction of trees voting positive.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(xs: &[[f64; 3]], ys: &[bool], n_trees: usize, params: TreeParams, seed: u64) -> Self {
        let trees = (0..n_trees)
            .map(|t| {
                let mut rng = child_rng(seed, t as u64);
                let mut sample: Vec<usize> = (0..xs.len()).map(|_| rng.gen_range(0..xs.len())).collect();
                DecisionTree::fit(xs, ys, &mut sample, params, &mut rng)
            })
            .collect();
        RandomForest { trees }
    }

    pub fn predict_proba(&self, x: &[f64; 3]) -> f64 {
        if self.trees.is_empty() {
            return 0.0;
        }
        let votes = self.trees.iter().filter(|t| t.leaf_value(x) > 0.5).count();
        votes as f64 / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const PARAMS: TreeParams = TreeParams { max_depth: 12, min_samples_split: 2, features_per_split: 1 };

    #[test]
    fn tree_fits_xor_like_data() {
        // positive iff x0 and x1 on the same side of 0.5: needs depth 2
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..4 {
            for k in 0..5 {
                let jitter = k as f64 * 0.01;
                let (a, b) = ((i & 1) as f64 + jitter, (i >> 1) as f64 + jitter);
                xs.push([a, b, 0.0]);
                ys.push((i & 1) == (i >> 1));
            }
        }
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        let tree = DecisionTree::fit(&xs, &ys, &mut idx, PARAMS, &mut child_rng(1, 1));
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(tree.leaf_value(x) > 0.5, y);
        }
        assert!(tree.depth() >= 2);
    }

    #[test]
    fn depth_limit_is_respected() {
        let xs: Vec<[f64; 3]> = (0..200).map(|i| [i as f64, 0.0, 0.0]).collect();
        let ys: Vec<bool> = (0..200).map(|i| i % 2 == 0).collect();
        let mut idx: Vec<usize> = (0..200).collect();
        let p = TreeParams { max_depth: 3, ..PARAMS };
        let tree = DecisionTree::fit(&xs, &ys, &mut idx, p, &mut child_rng(0, 0));
        assert!(tree.depth() <= 3);
    }

    #[test]
    fn forest_vote_fraction() {
        let xs = vec![[0.0, 0.0, 0.0]; 10].into_iter().chain(vec![[1.0, 1.0, 1.0]; 10]).collect::<Vec<_>>();
        let ys: Vec<bool> = (0..20).map(|i| i < 10).collect();
        let rf = RandomForest::fit(&xs, &ys, 25, PARAMS, 4);
        assert_eq!(rf.predict_proba(&[0.0, 0.0, 0.0]), 1.0);
        assert_eq!(rf.predict_proba(&[1.0, 1.0, 1.0]), 0.0);
        assert_eq!(rf, RandomForest::fit(&xs, &ys, 25, PARAMS, 4));
    }
}
