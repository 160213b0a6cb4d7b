//! CART regression trees plus the two ensembles built on them: gradient
//! boosting with squared loss and a bootstrap random forest.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("no training rows")]
    Empty,
    #[error("row {row} has {got} features, expected {want}")]
    Ragged { row: usize, got: usize, want: usize },
    #[error("{0} targets for {1} rows")]
    TargetLength(usize, usize),
    #[error("non-finite input value")]
    NonFinite,
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features sampled per split; `None` uses all.
    pub max_features: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 4,
            min_leaf: 5,
            max_features: None,
        }
    }
}

/// Array-encoded binary tree. Node `i` is a leaf when `feature[i] < 0`;
/// otherwise rows with `x[feature] <= threshold` go to `left[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        RegressionTree {
            feature: vec![-1],
            threshold: vec![0.0],
            left: vec![0],
            right: vec![0],
            value: vec![value],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        while self.feature[i] >= 0 {
            let f = self.feature[i] as usize;
            i = if x[f] <= self.threshold[i] {
                self.left[i]
            } else {
                self.right[i]
            } as usize;
        }
        self.value[i]
    }

    pub fn node_count(&self) -> usize {
        self.feature.len()
    }

    pub fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.feature
            .iter()
            .zip(&self.value)
            .filter(|(f, _)| **f < 0)
            .map(|(_, v)| *v)
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, i: usize) -> usize {
            if t.feature[i] < 0 {
                0
            } else {
                1 + go(t, t.left[i] as usize).max(go(t, t.right[i] as usize))
            }
        }
        go(self, 0)
    }

    fn push(&mut self, feature: i32, threshold: f64, value: f64) -> usize {
        self.feature.push(feature);
        self.threshold.push(threshold);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }

    /// Fits splits by squared-error reduction on `targets`; each leaf's
    /// value is `leaf_value(rows in leaf)`. `rows` may repeat (bootstrap).
    pub fn fit_with(
        x: &[Vec<f64>],
        targets: &[f64],
        rows: &[usize],
        config: &TreeConfig,
        rng: &mut impl Rng,
        leaf_value: &dyn Fn(&[usize]) -> f64,
    ) -> Self {
        let mut tree = RegressionTree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
        };
        let mut rows = rows.to_vec();
        tree.grow(x, targets, &mut rows, 0, config, rng, leaf_value);
        tree
    }

    /// Mean-valued leaves.
    pub fn fit(x: &[Vec<f64>], targets: &[f64], rows: &[usize], config: &TreeConfig, rng: &mut impl Rng) -> Self {
        let mean = |idx: &[usize]| idx.iter().map(|&i| targets[i]).sum::<f64>() / idx.len().max(1) as f64;
        Self::fit_with(x, targets, rows, config, rng, &mean)
    }

    #[allow(clippy::too_many_arguments)]
    fn grow(
        &mut self,
        x: &[Vec<f64>],
        y: &[f64],
        rows: &mut [usize],
        depth: usize,
        config: &TreeConfig,
        rng: &mut impl Rng,
        leaf_value: &dyn Fn(&[usize]) -> f64,
    ) -> usize {
        let split = if depth < config.max_depth && rows.len() >= 2 * config.min_leaf.max(1) {
            best_split(x, y, rows, config, rng)
        } else {
            None
        };
        let Some((feature, threshold)) = split else {
            return self.push(-1, 0.0, leaf_value(rows));
        };
        let node = self.push(feature as i32, threshold, 0.0);
        // stable partition keeps row order deterministic
        let (mut l, mut r): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| x[i][feature] <= threshold);
        let left = self.grow(x, y, &mut l, depth + 1, config, rng, leaf_value);
        let right = self.grow(x, y, &mut r, depth + 1, config, rng, leaf_value);
        self.left[node] = left as u32;
        self.right[node] = right as u32;
        node
    }
}

/// Best (feature, threshold) by squared-error reduction, respecting
/// `min_leaf` on both sides. `None` when nothing improves.
fn best_split(
    x: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    config: &TreeConfig,
    rng: &mut impl Rng,
) -> Option<(usize, f64)> {
    let p = x[rows[0]].len();
    let features: Vec<usize> = match config.max_features {
        Some(k) if k < p => {
            let mut f = sample(rng, p, k.max(1)).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..p).collect(),
    };
    let n = rows.len();
    let min_leaf = config.min_leaf.max(1);
    let total: f64 = rows.iter().map(|&i| y[i]).sum();
    let parent_score = total * total / n as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order: Vec<usize> = rows.to_vec();
    for &f in &features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += y[order[k]];
            let nl = k + 1;
            let nr = n - nl;
            let (lo, hi) = (x[order[k]][f], x[order[k + 1]][f]);
            if lo == hi || nl < min_leaf || nr < min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64;
            let gain = score - parent_score;
            if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, f, lo + (hi - lo) / 2.0));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

pub(crate) fn check_inputs(x: &[Vec<f64>], y: &[f64]) -> Result<usize, TreeError> {
    if x.is_empty() {
        return Err(TreeError::Empty);
    }
    if y.len() != x.len() {
        return Err(TreeError::TargetLength(y.len(), x.len()));
    }
    let p = x[0].len();
    for (row, r) in x.iter().enumerate() {
        if r.len() != p {
            return Err(TreeError::Ragged {
                row,
                got: r.len(),
                want: p,
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(TreeError::NonFinite);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(TreeError::NonFinite);
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostingConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub tree: TreeConfig,
    pub seed: u64,
}

impl Default for BoostingConfig {
    fn default() -> Self {
        BoostingConfig {
            n_trees: 100,
            learning_rate: 0.2,
            tree: TreeConfig {
                max_depth: 3,
                min_leaf: 1,
                max_features: None,
            },
            seed: 0,
        }
    }
}

/// Squared-loss gradient boosting: a constant start plus shrunken trees
/// fitted to residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl GradientBoosting {
    pub fn fit(x: &[Vec<f64>], y: &[f64], config: &BoostingConfig) -> Result<Self, TreeError> {
        check_inputs(x, y)?;
        if config.learning_rate.is_nan() || config.learning_rate <= 0.0 {
            return Err(TreeError::Config("learning_rate must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let base = y.iter().sum::<f64>() / y.len() as f64;
        let mut pred = vec![base; y.len()];
        let rows: Vec<usize> = (0..y.len()).collect();
        let mut trees = Vec::with_capacity(config.n_trees);
        for _ in 0..config.n_trees {
            let residual: Vec<f64> = y.iter().zip(&pred).map(|(t, p)| t - p).collect();
            let tree = RegressionTree::fit(x, &residual, &rows, &config.tree, &mut rng);
            for (p, row) in pred.iter_mut().zip(x) {
                *p += config.learning_rate * tree.predict(row);
            }
            trees.push(tree);
        }
        Ok(GradientBoosting {
            base,
            learning_rate: config.learning_rate,
            trees,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base
            + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` picks ⌈√p⌉ features per split.
    pub max_features: Option<usize>,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 500,
            max_features: None,
            max_depth: 16,
            min_leaf: 1,
            seed: 0,
        }
    }
}

/// Bootstrap-aggregated trees with per-split feature sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<RegressionTree>,
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[f64], config: &ForestConfig) -> Result<Self, TreeError> {
        let p = check_inputs(x, y)?;
        if config.n_trees == 0 {
            return Err(TreeError::Config("a forest needs at least one tree".into()));
        }
        let k = config
            .max_features
            .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
            .clamp(1, p.max(1));
        let tree_cfg = TreeConfig {
            max_depth: config.max_depth,
            min_leaf: config.min_leaf,
            max_features: Some(k),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n = y.len();
        let trees = (0..config.n_trees)
            .map(|_| {
                let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                RegressionTree::fit(x, y, &rows, &tree_cfg, &mut rng)
            })
            .collect();
        Ok(RandomForest { trees })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Coefficient of determination; 0 for constant targets.
pub fn r_squared(y: &[f64], pred: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    if ss_tot == 0.0 {
        return 0.0;
    }
    1.0 - ss_res / ss_tot
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_data() -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y = (0..20).map(|i| if i < 10 { -1.0 } else { 1.0 }).collect();
        (x, y)
    }

    #[test]
    fn single_split_recovers_step() {
        let (x, y) = step_data();
        let rows: Vec<usize> = (0..20).collect();
        let cfg = TreeConfig { max_depth: 1, min_leaf: 1, max_features: None };
        let t = RegressionTree::fit(&x, &y, &rows, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(t.node_count(), 3);
        assert_eq!(t.feature[0], 0);
        assert_eq!(t.threshold[0], 9.5);
        assert_eq!(t.predict(&[3.0, 0.0]), -1.0);
        assert_eq!(t.predict(&[12.0, 0.0]), 1.0);
    }

    #[test]
    fn min_leaf_and_depth_respected() {
        let (x, y) = step_data();
        let rows: Vec<usize> = (0..20).collect();
        let cfg = TreeConfig { max_depth: 2, min_leaf: 8, max_features: None };
        let t = RegressionTree::fit(&x, &y, &rows, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(t.depth() <= 2);
        let mut counts = std::collections::HashMap::new();
        for r in &x {
            *counts.entry(t.predict(r).to_bits()).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 8));
    }

    #[test]
    fn constant_targets_give_leaf() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y = vec![2.0; 6];
        let rows: Vec<usize> = (0..6).collect();
        let t = RegressionTree::fit(&x, &y, &rows, &TreeConfig::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(t, RegressionTree::leaf(2.0));
    }

    #[test]
    fn json_is_arrays() {
        let v = serde_json::to_value(RegressionTree::leaf(1.5)).unwrap();
        assert_eq!(v["feature"], serde_json::json!([-1]));
        assert_eq!(v["value"], serde_json::json!([1.5]));
    }

    #[test]
    fn input_checks() {
        assert_eq!(check_inputs(&[], &[]), Err(TreeError::Empty));
        assert!(matches!(check_inputs(&[vec![1.0], vec![1.0, 2.0]], &[0.0, 1.0]), Err(TreeError::Ragged { .. })));
        assert_eq!(check_inputs(&[vec![f64::NAN]], &[0.0]), Err(TreeError::NonFinite));
        assert_eq!(check_inputs(&[vec![1.0]], &[0.0, 1.0]), Err(TreeError::TargetLength(2, 1)));
    }

    #[test]
    fn ensembles_fit_step() {
        let (x, y) = step_data();
        let gb = GradientBoosting::fit(&x, &y, &BoostingConfig::default()).unwrap();
        let pred: Vec<f64> = x.iter().map(|r| gb.predict(r)).collect();
        assert!(r_squared(&y, &pred) > 0.99);
        let rf = RandomForest::fit(&x, &y, &ForestConfig { n_trees: 50, ..Default::default() }).unwrap();
        let pred: Vec<f64> = x.iter().map(|r| rf.predict(r)).collect();
        assert!(r_squared(&y, &pred) > 0.9);
    }

    #[test]
    fn r2_edge_cases() {
        assert_eq!(r_squared(&[1.0, 1.0], &[0.0, 2.0]), 0.0);
        assert_eq!(r_squared(&[1.0, 3.0], &[1.0, 3.0]), 1.0);
    }
}
