//! Learning-to-rank over ad features and the rank statistics used to
//! compare ad variants.

mod lambdamart;
mod rank;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lambdamart::{
    grade_from_ctr, ndcg, positions, train_lambdamart, GbmRankModel, LambdaMartConfig, LambdaMartOutput,
};
pub use rank::{
    cross_validate, fold_assignment, group_probabilities, kemeny_young, kendall_tau, tie_ranks, CvResult,
    PreferenceMatrix, MAX_KEMENY_ALTERNATIVES, TIE_GAP,
};

use crate::ad::{concat_text, Ad};
use crate::features::{extract_features, FeatureError, LexiconSet, FEATURE_NAMES};
use crate::trees::TreeError;

#[derive(Debug, Error)]
pub enum RankError {
    #[error("no group has two distinct relevance grades")]
    DegenerateDataset,
    #[error("group {0:?} has fewer than two items")]
    SmallGroup(String),
    #[error("item in group {group:?} has {got} features, expected {want}")]
    FeatureCount { group: String, got: usize, want: usize },
    #[error("fold count {k} invalid for {groups} groups")]
    BadFoldCount { k: usize, groups: usize },
    #[error("exact Kemeny-Young supports at most 8 alternatives, got {0}")]
    TooManyAlternatives(usize),
    #[error("invalid preference matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankItem {
    pub id: String,
    pub features: Vec<f64>,
    pub ctr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryGroup {
    pub query_id: String,
    pub items: Vec<RankItem>,
}

impl QueryGroup {
    pub fn ctrs(&self) -> Vec<f64> {
        self.items.iter().map(|i| i.ctr).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingDataset {
    pub feature_names: Vec<String>,
    pub groups: Vec<QueryGroup>,
}

impl RankingDataset {
    pub fn validate(&self) -> Result<(), RankError> {
        let want = self.feature_names.len();
        for g in &self.groups {
            if g.items.len() < 2 {
                return Err(RankError::SmallGroup(g.query_id.clone()));
            }
            if let Some(item) = g.items.iter().find(|i| i.features.len() != want) {
                return Err(RankError::FeatureCount {
                    group: g.query_id.clone(),
                    got: item.features.len(),
                    want,
                });
            }
            if g.items.iter().any(|i| !i.ctr.is_finite() || i.features.iter().any(|f| !f.is_finite())) {
                return Err(RankError::Tree(TreeError::NonFinite));
            }
        }
        Ok(())
    }

    /// Groups ads by query (sorted), computing the nine text features of
    /// each ad's concatenated fields. Ads never shown and queries left with
    /// fewer than two ads are dropped.
    pub fn from_ads(ads: &[Ad], lex: &LexiconSet) -> Result<Self, RankError> {
        let mut by_query: std::collections::BTreeMap<&str, Vec<RankItem>> = Default::default();
        for ad in ads {
            let Some(ctr) = ad.ctr() else { continue };
            let text = concat_text(ad).map_err(|_| FeatureError::EmptyText)?;
            let features = extract_features(&text, lex)?.to_array().to_vec();
            by_query.entry(&ad.query).or_default().push(RankItem {
                id: ad.id.clone(),
                features,
                ctr,
            });
        }
        let groups = by_query
            .into_iter()
            .filter(|(_, items)| items.len() >= 2)
            .map(|(q, items)| QueryGroup {
                query_id: q.to_string(),
                items,
            })
            .collect();
        Ok(RankingDataset {
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            groups,
        })
    }

    /// The groups at the given indices, in that order.
    pub fn subset(&self, groups: &[usize]) -> RankingDataset {
        RankingDataset {
            feature_names: self.feature_names.clone(),
            groups: groups.iter().map(|&g| self.groups[g].clone()).collect(),
        }
    }
}

/// Score, group probability and tie-aware rank of one compared item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantRank {
    pub score: f64,
    pub probability: f64,
    pub rank: usize,
}

/// Scores the items as one group, converts to probabilities and assigns
/// tie-aware ranks.
pub fn rank_variants(model: &GbmRankModel, features: &[Vec<f64>]) -> Vec<VariantRank> {
    let scores = model.predict_batch(features);
    rank_from_scores(&scores)
}

pub fn rank_from_scores(scores: &[f64]) -> Vec<VariantRank> {
    let probs = group_probabilities(scores);
    let ranks = tie_ranks(&probs);
    scores
        .iter()
        .zip(probs)
        .zip(ranks)
        .map(|((&score, probability), rank)| VariantRank {
            score,
            probability,
            rank,
        })
        .collect()
}
