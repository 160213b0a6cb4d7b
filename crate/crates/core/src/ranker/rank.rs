use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RankError;

/// Scores mapped to [0, 1] by min-max within the group; a constant group
/// maps to 0.5 everywhere.
pub fn group_probabilities(scores: &[f64]) -> Vec<f64> {
    let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return vec![0.5; scores.len()];
    }
    scores.iter().map(|s| (s - lo) / (hi - lo)).collect()
}

/// Probability gap below which two items share a rank.
pub const TIE_GAP: f64 = 0.1;
/// Slack so that gaps of exactly 0.1 written in decimal are not tied by
/// binary rounding.
const TIE_SLACK: f64 = 1e-9;

/// Competition ranks (1 = best) where items whose probabilities are chained
/// by gaps below 0.1 form one cluster sharing the best rank of the cluster.
pub fn tie_ranks(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; probs.len()];
    let mut cluster_rank = 1;
    for (k, &i) in order.iter().enumerate() {
        if k > 0 {
            let prev = order[k - 1];
            if probs[prev] - probs[i] >= TIE_GAP - TIE_SLACK {
                cluster_rank = k + 1;
            }
        }
        ranks[i] = cluster_rank;
    }
    ranks
}

/// Kendall tau-b between two score assignments over the same items,
/// computed in O(n log n) by sorting and merge-counting swaps. Returns 0
/// when either side is entirely tied (the statistic is undefined there).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "kendall_tau needs equal-length inputs");
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i].total_cmp(&a[j]).then(b[i].total_cmp(&b[j])));

    let pairs = |run: u64| run * (run.saturating_sub(1)) / 2;
    let n0 = pairs(n as u64);
    let (mut ties_a, mut ties_ab) = (0u64, 0u64);
    let (mut run_a, mut run_ab) = (1u64, 1u64);
    for k in 1..n {
        let (p, q) = (idx[k - 1], idx[k]);
        if a[p] == a[q] {
            run_a += 1;
            if b[p] == b[q] {
                run_ab += 1;
            } else {
                ties_ab += pairs(run_ab);
                run_ab = 1;
            }
        } else {
            ties_a += pairs(run_a);
            ties_ab += pairs(run_ab);
            run_a = 1;
            run_ab = 1;
        }
    }
    ties_a += pairs(run_a);
    ties_ab += pairs(run_ab);

    let mut seq: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let swaps = merge_count(&mut seq);

    let mut ties_b = 0u64;
    let mut run_b = 1u64;
    for k in 1..n {
        if seq[k] == seq[k - 1] {
            run_b += 1;
        } else {
            ties_b += pairs(run_b);
            run_b = 1;
        }
    }
    ties_b += pairs(run_b);

    let denom = ((n0 - ties_a) as f64 * (n0 - ties_b) as f64).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    let num = n0 as f64 - ties_a as f64 - ties_b as f64 + ties_ab as f64 - 2.0 * swaps as f64;
    num / denom
}

/// Sorts ascending, returning the number of strictly inverted pairs.
fn merge_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            merged.push(v[j]);
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    swaps
}

/// Pairwise preference counts: `counts[i][j]` voters prefer i over j.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceMatrix {
    counts: Vec<Vec<u64>>,
}

impl PreferenceMatrix {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self, RankError> {
        let n = counts.len();
        if counts.iter().any(|r| r.len() != n) {
            return Err(RankError::InvalidMatrix("matrix must be square".into()));
        }
        if (0..n).any(|i| counts[i][i] != 0) {
            return Err(RankError::InvalidMatrix("diagonal must be zero".into()));
        }
        Ok(PreferenceMatrix { counts })
    }

    pub fn zeros(n: usize) -> Self {
        PreferenceMatrix {
            counts: vec![vec![0; n]; n],
        }
    }

    /// Adds one voter given as a rank per alternative (1 = best; equal
    /// ranks express no preference).
    pub fn add_ranking(&mut self, ranks: &[usize]) -> Result<(), RankError> {
        let n = self.len();
        if ranks.len() != n {
            return Err(RankError::InvalidMatrix(format!(
                "ranking has {} entries for {n} alternatives",
                ranks.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                if ranks[i] < ranks[j] {
                    self.counts[i][j] += 1;
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i][j]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    /// Sum of `counts[i][j]` over every pair ordered i before j.
    pub fn agreement(&self, order: &[usize]) -> u64 {
        let mut total = 0;
        for (k, &i) in order.iter().enumerate() {
            for &j in &order[k + 1..] {
                total += self.counts[i][j];
            }
        }
        total
    }
}

pub const MAX_KEMENY_ALTERNATIVES: usize = 8;

/// Rearranges into the next lexicographic permutation; false at the last.
fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Exact Kemeny-Young: the order (best first) with maximal
/// [`PreferenceMatrix::agreement`], the lexicographically smallest among
/// equals. Enumerates all n! orders, so n is limited to 8.
pub fn kemeny_young(prefs: &PreferenceMatrix) -> Result<Vec<usize>, RankError> {
    let n = prefs.len();
    if n > MAX_KEMENY_ALTERNATIVES {
        return Err(RankError::TooManyAlternatives(n));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_score = prefs.agreement(&perm);
    while next_permutation(&mut perm) {
        let s = prefs.agreement(&perm);
        if s > best_score {
            best_score = s;
            best.clone_from(&perm);
        }
    }
    Ok(best)
}

/// Group indices per fold: shuffled with the seed, then dealt round-robin.
pub fn fold_assignment(n_groups: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, RankError> {
    if k < 2 || k > n_groups {
        return Err(RankError::BadFoldCount { k, groups: n_groups });
    }
    let mut idx: Vec<usize> = (0..n_groups).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (n, g) in idx.into_iter().enumerate() {
        folds[n % k].push(g);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub fold_metrics: Vec<f64>,
    pub mean: f64,
}

/// k-fold cross-validation at group level: `eval(train, test)` receives
/// the group indices of each split and returns the fold's metric.
pub fn cross_validate<F>(n_groups: usize, k: usize, seed: u64, mut eval: F) -> Result<CvResult, RankError>
where
    F: FnMut(&[usize], &[usize]) -> Result<f64, RankError>,
{
    let folds = fold_assignment(n_groups, k, seed)?;
    let mut fold_metrics = Vec::with_capacity(k);
    for (f, test) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(o, _)| *o != f)
            .flat_map(|(_, g)| g.iter().copied())
            .collect();
        let mut train = train;
        train.sort_unstable();
        fold_metrics.push(eval(&train, test)?);
    }
    let mean = fold_metrics.iter().sum::<f64>() / fold_metrics.len() as f64;
    Ok(CvResult { fold_metrics, mean })
}
