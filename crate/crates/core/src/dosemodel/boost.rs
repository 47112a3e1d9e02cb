use serde::{Deserialize, Serialize};

use super::{DoseError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split { feature, left, right, .. } => {
                [Some(*feature), left.max_feature(), right.max_feature()].into_iter().flatten().max()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_trees: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<TreeNode>,
}

impl BoostedEnsemble {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.base + self.learning_rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.trees.iter().filter_map(TreeNode::max_feature).max()
    }
}

/// Ensemble plus training RMSE after each stage (`training_rmse[0]` is the base).
#[derive(Debug, Clone, PartialEq)]
pub struct BoostFit {
    pub ensemble: BoostedEnsemble,
    pub training_rmse: Vec<f64>,
}

fn rmse(y: &[f64], pred: &[f64]) -> f64 {
    (sse(y, pred) / y.len() as f64).sqrt()
}

fn sse(y: &[f64], pred: &[f64]) -> f64 {
    y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum()
}

struct Split {
    gain: f64,
    feature: usize,
    threshold: f64,
}

#[allow(clippy::needless_range_loop)]
fn best_split(x: &[Vec<f64>], resid: &[f64], idx: &[usize], min_leaf: usize) -> Option<Split> {
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| resid[i]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<Split> = None;
    for f in 0..x[0].len() {
        let mut order = idx.to_vec();
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left = 0.0;
        for p in 1..n {
            left += resid[order[p - 1]];
            let (lo, hi) = (x[order[p - 1]][f], x[order[p]][f]);
            if p < min_leaf || n - p < min_leaf || lo == hi {
                continue;
            }
            let right = total - left;
            let gain = left * left / p as f64 + right * right / (n - p) as f64 - parent;
            if gain > best.as_ref().map_or(0.0, |b| b.gain) {
                let mid = lo + (hi - lo) / 2.0;
                best = Some(Split {
                    gain,
                    feature: f,
                    threshold: if mid < hi { mid } else { lo },
                });
            }
        }
    }
    best
}

fn grow(x: &[Vec<f64>], resid: &[f64], idx: Vec<usize>, depth: usize, params: &BoostParams) -> TreeNode {
    let value = idx.iter().map(|&i| resid[i]).sum::<f64>() / idx.len() as f64;
    if depth >= params.max_depth || idx.len() < 2 * params.min_leaf {
        return TreeNode::Leaf { value };
    }
    let Some(split) = best_split(x, resid, &idx, params.min_leaf) else {
        return TreeNode::Leaf { value };
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| x[i][split.feature] <= split.threshold);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(x, resid, l, depth + 1, params)),
        right: Box::new(grow(x, resid, r, depth + 1, params)),
    }
}

/// Least-squares stagewise boosting of exact-split regression trees.
///
/// A stage that would raise training error through rounding is replaced by a
/// zero leaf, so the recorded RMSE never increases.
pub fn boosted_fit(x: &[Vec<f64>], y: &[f64], params: &BoostParams) -> Result<BoostFit> {
    if x.is_empty() || y.is_empty() {
        return Err(DoseError::EmptyTrainingSet);
    }
    if x.len() != y.len() || x.iter().any(|r| r.len() != x[0].len()) {
        return Err(DoseError::Shape("design and target disagree".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(DoseError::NonFiniteInput("boosting design"));
    }
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) || params.min_leaf == 0 {
        return Err(DoseError::BadParam("learning rate must be in (0, 1] and min_leaf ≥ 1".into()));
    }
    let base = y.iter().sum::<f64>() / y.len() as f64;
    let mut pred = vec![base; y.len()];
    let mut history = vec![rmse(y, &pred)];
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let mut tree = grow(x, &resid, (0..y.len()).collect(), 0, params);
        let next: Vec<f64> = pred
            .iter()
            .zip(x)
            .map(|(p, row)| p + params.learning_rate * tree.predict(row))
            .collect();
        if sse(y, &next) <= sse(y, &pred) {
            pred = next;
        } else {
            tree = TreeNode::Leaf { value: 0.0 };
        }
        history.push(rmse(y, &pred));
        trees.push(tree);
    }
    Ok(BoostFit {
        ensemble: BoostedEnsemble {
            base,
            learning_rate: params.learning_rate,
            trees,
        },
        training_rmse: history,
    })
}
