use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{RankError, RankingDataset};
use crate::trees::{RegressionTree, TreeConfig};

const SIGMA: f64 = 1.0;

/// Relevance grades 0..=4 from CTRs: an item's grade is
/// `min(4, ⌊5·r/(n−1)⌋)` where `r` counts the group's items with strictly
/// lower CTR, so equal CTRs share a grade.
pub fn grade_from_ctr(ctrs: &[f64]) -> Vec<u8> {
    let n = ctrs.len();
    if n < 2 {
        return vec![0; n];
    }
    ctrs.iter()
        .map(|c| {
            let r = ctrs.iter().filter(|o| *o < c).count();
            (5 * r / (n - 1)).min(4) as u8
        })
        .collect()
}

fn gain(grade: u8) -> f64 {
    (1u32 << grade) as f64 - 1.0
}

fn discount(pos: usize) -> f64 {
    1.0 / ((pos + 2) as f64).log2()
}

/// Positions (0 = top) of each item when sorted by descending score; equal
/// scores keep input order.
pub fn positions(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut pos = vec![0; scores.len()];
    for (p, &i) in order.iter().enumerate() {
        pos[i] = p;
    }
    pos
}

fn ideal_dcg(grades: &[u8]) -> f64 {
    let mut g = grades.to_vec();
    g.sort_unstable_by(|a, b| b.cmp(a));
    g.iter().enumerate().map(|(p, &x)| gain(x) * discount(p)).sum()
}

/// NDCG over the full list; 1 when every grade is zero.
pub fn ndcg(scores: &[f64], grades: &[u8]) -> f64 {
    let idcg = ideal_dcg(grades);
    if idcg == 0.0 {
        return 1.0;
    }
    let pos = positions(scores);
    grades
        .iter()
        .zip(&pos)
        .map(|(&g, &p)| gain(g) * discount(p))
        .sum::<f64>()
        / idcg
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LambdaMartConfig {
    pub n_trees: usize,
    pub shrinkage: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for LambdaMartConfig {
    fn default() -> Self {
        LambdaMartConfig {
            n_trees: 200,
            shrinkage: 0.1,
            max_depth: 4,
            min_leaf: 5,
            seed: 0,
        }
    }
}

/// Boosted ranking model: score = shrinkage · Σ tree outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmRankModel {
    pub feature_names: Vec<String>,
    pub shrinkage: f64,
    pub trees: Vec<RegressionTree>,
}

impl GbmRankModel {
    pub fn empty(feature_names: Vec<String>, shrinkage: f64) -> Self {
        GbmRankModel {
            feature_names,
            shrinkage,
            trees: Vec::new(),
        }
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        self.shrinkage * self.trees.iter().map(|t| t.predict(features)).sum::<f64>()
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RankError> {
        if let Some(dir) = path.as_ref().parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RankError> {
        let model: GbmRankModel = serde_json::from_slice(&std::fs::read(path)?)?;
        let thresholds_ok = model
            .trees
            .iter()
            .all(|t| t.threshold.iter().chain(&t.value).all(|v| v.is_finite()));
        if !thresholds_ok || !model.shrinkage.is_finite() {
            return Err(RankError::InvalidModel("non-finite value".into()));
        }
        Ok(model)
    }
}

/// Trained model plus the mean training NDCG before the first tree and
/// after each tree.
#[derive(Debug, Clone)]
pub struct LambdaMartOutput {
    pub model: GbmRankModel,
    pub ndcg_trace: Vec<f64>,
}

/// Gradient-boosted trees fitted to LambdaRank gradients.
///
/// For each in-group pair with `grade_i > grade_j`, `ρ = 1/(1+e^{σ(s_i−s_j)})`
/// and `λ = σ·ρ·|ΔNDCG_ij|` (the NDCG change from swapping the two at their
/// current positions) is added to item i's target and subtracted from j's;
/// both receive Hessian weight `σ²·ρ(1−ρ)·|ΔNDCG_ij|`. Leaves take the
/// Newton value Σλ / Σweight.
pub fn train_lambdamart(data: &RankingDataset, config: &LambdaMartConfig) -> Result<LambdaMartOutput, RankError> {
    data.validate()?;
    if config.shrinkage.is_nan() || config.shrinkage <= 0.0 {
        return Err(RankError::InvalidConfig("shrinkage must be positive".into()));
    }
    let grades: Vec<Vec<u8>> = data.groups.iter().map(|g| grade_from_ctr(&g.ctrs())).collect();
    if !grades.iter().any(|g| g.iter().any(|&x| x != g[0])) {
        return Err(RankError::DegenerateDataset);
    }
    let x: Vec<Vec<f64>> = data
        .groups
        .iter()
        .flat_map(|g| g.items.iter().map(|i| i.features.clone()))
        .collect();
    let mut offsets = Vec::with_capacity(data.groups.len());
    let mut start = 0;
    for g in &data.groups {
        offsets.push(start);
        start += g.items.len();
    }
    let all_rows: Vec<usize> = (0..x.len()).collect();
    let mut scores = vec![0.0; x.len()];
    let tree_cfg = TreeConfig {
        max_depth: config.max_depth,
        min_leaf: config.min_leaf,
        max_features: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = GbmRankModel::empty(data.feature_names.clone(), config.shrinkage);

    let mean_ndcg = |scores: &[f64]| {
        grades
            .iter()
            .zip(&offsets)
            .map(|(g, &o)| ndcg(&scores[o..o + g.len()], g))
            .sum::<f64>()
            / grades.len() as f64
    };
    let mut trace = vec![mean_ndcg(&scores)];

    for _ in 0..config.n_trees {
        let mut lambdas = vec![0.0; x.len()];
        let mut weights = vec![0.0; x.len()];
        for (g, &o) in grades.iter().zip(&offsets) {
            let idcg = ideal_dcg(g);
            if idcg == 0.0 {
                continue;
            }
            let s = &scores[o..o + g.len()];
            let pos = positions(s);
            for i in 0..g.len() {
                for j in 0..g.len() {
                    if g[i] <= g[j] {
                        continue;
                    }
                    let delta = ((gain(g[i]) - gain(g[j])) * (discount(pos[i]) - discount(pos[j]))).abs() / idcg;
                    let rho = 1.0 / (1.0 + (SIGMA * (s[i] - s[j])).exp());
                    let lambda = SIGMA * rho * delta;
                    let w = SIGMA * SIGMA * rho * (1.0 - rho) * delta;
                    lambdas[o + i] += lambda;
                    lambdas[o + j] -= lambda;
                    weights[o + i] += w;
                    weights[o + j] += w;
                }
            }
        }
        let newton = |rows: &[usize]| {
            let num: f64 = rows.iter().map(|&r| lambdas[r]).sum();
            let den: f64 = rows.iter().map(|&r| weights[r]).sum();
            if den > 1e-12 {
                num / den
            } else {
                0.0
            }
        };
        let tree = RegressionTree::fit_with(&x, &lambdas, &all_rows, &tree_cfg, &mut rng, &newton);
        for (s, row) in scores.iter_mut().zip(&x) {
            *s += config.shrinkage * tree.predict(row);
        }
        model.trees.push(tree);
        trace.push(mean_ndcg(&scores));
    }
    Ok(LambdaMartOutput {
        model,
        ndcg_trace: trace,
    })
}
