//! Content-based scoring: an inventory item's score for a user aggregates its
//! similarity to every item the user has already bought.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::store::{FeatureKind, FeatureStore};
use crate::{Error, Result};

/// How per-item similarities collapse into one score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Sum,
    Max,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Sum => "sum",
            Aggregation::Max => "max",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Aggregation::Sum),
            "max" => Ok(Aggregation::Max),
            _ => Err(Error::Format(format!("unknown aggregation `{s}` (expected sum or max)"))),
        }
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(v: &[f64], w: &[f64]) -> Result<f64> {
    check_dims(v, w)?;
    Ok(cosine_with_norms(v, w, norm(v), norm(w)))
}

fn check_dims(v: &[f64], w: &[f64]) -> Result<()> {
    if v.len() != w.len() {
        return Err(Error::Contract(format!("cannot compare vectors of dimension {} and {}", v.len(), w.len())));
    }
    Ok(())
}

#[inline]
fn dot(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(a, b)| a * b).sum()
}

#[inline]
fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[inline]
fn cosine_with_norms(v: &[f64], w: &[f64], nv: f64, nw: f64) -> f64 {
    if nv == 0.0 || nw == 0.0 {
        return 0.0;
    }
    (dot(v, w) / (nv * nw)).clamp(-1.0, 1.0)
}

/// `1 - |x - y| / range`, for one-dimensional features where cosine is
/// constant.
pub fn similarity_1d(x: f64, y: f64, range: f64) -> Result<f64> {
    if range <= 0.0 || !range.is_finite() {
        return Err(Error::Contract(format!("feature range must be positive, got {range}")));
    }
    Ok((1.0 - (x - y).abs() / range).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Similarity {
    Cosine,
    /// Normalized distance over a known value range.
    Range1d {
        range: f64,
    },
}

impl Similarity {
    /// Cosine for multi-dimensional kinds; single normalized scalars live in
    /// `[0, 1]` and use the range similarity.
    pub fn for_kind(kind: FeatureKind) -> Self {
        match kind {
            FeatureKind::Single(_) => Similarity::Range1d { range: 1.0 },
            _ => Similarity::Cosine,
        }
    }

    pub fn compute(&self, v: &[f64], w: &[f64]) -> Result<f64> {
        match *self {
            Similarity::Cosine => cosine(v, w),
            Similarity::Range1d { range } => {
                check_dims(v, w)?;
                if v.len() != 1 {
                    return Err(Error::Contract(format!(
                        "range similarity needs 1-dimensional vectors, got {}",
                        v.len()
                    )));
                }
                similarity_1d(v[0], w[0], range)
            }
        }
    }
}

/// Items a user has bought.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserProfile {
    pub user_id: String,
    pub items: BTreeSet<String>,
}

impl UserProfile {
    pub fn new(user_id: impl Into<String>, items: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self { user_id: user_id.into(), items: items.into_iter().map(Into::into).collect() }
    }
}

/// Scores one candidate against the vectors of a user's purchases.
pub fn score_item(candidate: &[f64], profile: &[&[f64]], similarity: Similarity, agg: Aggregation) -> Result<f64> {
    if profile.is_empty() {
        return Err(Error::Contract("cannot score against an empty profile".into()));
    }
    let mut sims = profile.iter().map(|p| similarity.compute(candidate, p));
    let first = sims.next().unwrap()?;
    sims.try_fold(first, |acc, s| {
        let s = s?;
        Ok(match agg {
            Aggregation::Sum => acc + s,
            Aggregation::Max => acc.max(s),
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub item_id: String,
    pub score: f64,
}

/// Items by non-increasing score; equal scores ordered by ascending id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub items: Vec<RankedItem>,
}

impl RankedList {
    pub fn ids(&self) -> Vec<&str> {
        self.items.iter().map(|r| r.item_id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Scores a store's items for many users, caching row norms.
#[derive(Debug)]
pub struct Recommender<'a> {
    store: &'a FeatureStore,
    norms: Vec<f64>,
    similarity: Similarity,
    aggregation: Aggregation,
}

impl<'a> Recommender<'a> {
    pub fn new(store: &'a FeatureStore, aggregation: Aggregation) -> Self {
        Self::with_similarity(store, Similarity::for_kind(store.kind()), aggregation)
    }

    pub fn with_similarity(store: &'a FeatureStore, similarity: Similarity, aggregation: Aggregation) -> Self {
        let norms = match similarity {
            Similarity::Cosine => (0..store.len()).map(|i| norm(store.row(i))).collect(),
            Similarity::Range1d { .. } => Vec::new(),
        };
        Self { store, norms, similarity, aggregation }
    }

    fn sim(&self, i: usize, j: usize) -> Result<f64> {
        match self.similarity {
            Similarity::Cosine => {
                Ok(cosine_with_norms(self.store.row(i), self.store.row(j), self.norms[i], self.norms[j]))
            }
            s => s.compute(self.store.row(i), self.store.row(j)),
        }
    }

    /// Top `k` store items for `profile`, excluding the profile's own items.
    pub fn recommend(&self, profile: &UserProfile, k: usize) -> Result<RankedList> {
        if k == 0 {
            return Err(Error::Contract("k must be at least 1".into()));
        }
        if profile.items.is_empty() {
            return Err(Error::Contract(format!("user `{}` has an empty profile", profile.user_id)));
        }
        let owned: Vec<usize> = profile
            .items
            .iter()
            .map(|id| self.store.position(id).ok_or_else(|| Error::MissingItem(id.clone())))
            .collect::<Result<_>>()?;

        let mut scored = Vec::with_capacity(self.store.len().saturating_sub(owned.len()));
        for (i, id) in self.store.ids().iter().enumerate() {
            if owned.contains(&i) {
                continue;
            }
            let mut score = match self.aggregation {
                Aggregation::Sum => 0.0,
                Aggregation::Max => f64::NEG_INFINITY,
            };
            for &j in &owned {
                let s = self.sim(i, j)?;
                score = match self.aggregation {
                    Aggregation::Sum => score + s,
                    Aggregation::Max => score.max(s),
                };
            }
            scored.push(RankedItem { item_id: id.clone(), score });
        }
        scored.sort_by(|a, b| {
            b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.item_id.cmp(&b.item_id))
        });
        scored.truncate(k);
        Ok(RankedList { items: scored })
    }
}

/// One-shot top-k recommendation. Prefer [`Recommender`] for many users.
pub fn recommend_topk(
    profile: &UserProfile,
    k: usize,
    candidates: &FeatureStore,
    agg: Aggregation,
) -> Result<RankedList> {
    Recommender::new(candidates, agg).recommend(profile, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evf::ScalarFeature;

    fn store(rows: &[(&str, &[f64])]) -> FeatureStore {
        let dim = rows.first().map_or(1, |r| r.1.len());
        FeatureStore::new(
            FeatureKind::Embedding,
            dim,
            rows.iter().map(|r| r.0.to_string()).collect(),
            rows.iter().flat_map(|r| r.1.iter().copied()).collect(),
            vec![],
            None,
        )
        .unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[1.0, 1.0], &[2.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(cosine(&[1.0], &[1.0, 2.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn similarity_1d_examples() {
        assert_eq!(similarity_1d(0.3, 0.3, 1.0).unwrap(), 1.0);
        assert_eq!(similarity_1d(0.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(similarity_1d(0.25, 0.75, 1.0).unwrap(), 0.5);
        assert!(similarity_1d(0.25, 0.75, 0.0).is_err());
    }

    #[test]
    fn score_item_examples() {
        let v = [0.3, 0.4, 0.5];
        let s = score_item(&v, &[&v], Similarity::Cosine, Aggregation::Sum).unwrap();
        assert!((s - 1.0).abs() < 1e-15);

        // 1-D range similarities of 0.5 and 0.3 against the candidate 0.0.
        let sim = Similarity::Range1d { range: 1.0 };
        let (a, b) = ([0.5], [0.7]);
        let sum = score_item(&[0.0], &[&a, &b], sim, Aggregation::Sum).unwrap();
        let max = score_item(&[0.0], &[&a, &b], sim, Aggregation::Max).unwrap();
        assert!((sum - 0.8).abs() < 1e-15);
        assert_eq!(max, 0.5);

        let basis = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]];
        let profile: Vec<&[f64]> = basis.iter().map(|r| r.as_slice()).collect();
        let c = [0.0, 0.0, 0.0, 1.0];
        assert_eq!(score_item(&c, &profile, Similarity::Cosine, Aggregation::Sum).unwrap(), 0.0);
        assert_eq!(score_item(&c, &profile, Similarity::Cosine, Aggregation::Max).unwrap(), 0.0);

        assert!(score_item(&c, &[], Similarity::Cosine, Aggregation::Sum).is_err());
    }

    #[test]
    fn topk_truncation_ties_and_exclusion() {
        let s = store(&[("u1", &[1.0, 0.0]), ("b", &[1.0, 1.0]), ("a", &[1.0, 1.0]), ("c", &[0.0, 1.0])]);
        let profile = UserProfile::new("u", ["u1"]);
        let ranked = recommend_topk(&profile, 10, &s, Aggregation::Sum).unwrap();
        assert_eq!(ranked.ids(), ["a", "b", "c"]);
        assert_eq!(ranked.items[0].score, ranked.items[1].score);
        let top1 = recommend_topk(&profile, 1, &s, Aggregation::Sum).unwrap();
        assert_eq!(top1.ids(), ["a"]);
        assert!(recommend_topk(&profile, 0, &s, Aggregation::Sum).is_err());
    }

    #[test]
    fn topk_with_no_candidates_is_empty() {
        let s = store(&[("only", &[1.0])]);
        let ranked = recommend_topk(&UserProfile::new("u", ["only"]), 5, &s, Aggregation::Max).unwrap();
        assert!(ranked.is_empty());
    }

    #[test]
    fn topk_missing_profile_item() {
        let s = store(&[("a", &[1.0])]);
        let err = recommend_topk(&UserProfile::new("u", ["ghost"]), 5, &s, Aggregation::Sum).unwrap_err();
        assert!(matches!(err, Error::MissingItem(id) if id == "ghost"));
    }

    #[test]
    fn single_feature_stores_use_range_similarity() {
        let s = FeatureStore::new(
            FeatureKind::Single(ScalarFeature::Entropy),
            1,
            vec!["p".into(), "near".into(), "far".into()],
            vec![0.5, 0.6, 1.0],
            vec![],
            None,
        )
        .unwrap();
        let ranked = recommend_topk(&UserProfile::new("u", ["p"]), 2, &s, Aggregation::Sum).unwrap();
        assert_eq!(ranked.ids(), ["near", "far"]);
        assert!((ranked.items[0].score - 0.9).abs() < 1e-12);
    }
}
