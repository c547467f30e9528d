//! Cumulative regret and average cumulative NDCG@k.

use serde::Serialize;

use crate::env::Environment;

/// `Y_{i,j*} - y` with `j*` the best candidate for the user.
pub fn instantaneous_regret(env: &Environment, user: usize, observed: f64) -> f64 {
    env.instantaneous_regret(user, observed)
}

/// NDCG@k of `ranking` (distinct items, best first). The ideal ordering is
/// the same items sorted by descending relevance. Returns 1 when the ideal
/// DCG is zero.
pub fn ndcg_at_k<F>(ranking: &[usize], relevance: F, k: usize) -> f64
where
    F: Fn(usize) -> f64,
{
    let rels: Vec<f64> = ranking.iter().map(|&j| relevance(j)).collect();
    let mut ideal = rels.clone();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(&ideal, k);
    if idcg == 0.0 {
        return 1.0;
    }
    (dcg(&rels, k) / idcg).clamp(0.0, 1.0)
}

fn dcg(rels: &[f64], k: usize) -> f64 {
    rels.iter()
        .take(k)
        .enumerate()
        .map(|(p, r)| r / ((p + 2) as f64).log2())
        .sum()
}

/// Ranks the user's candidates by `scores` (aligned with
/// `env.candidate_set(user)`; ties go to the lower item index) and scores the
/// ranking against shifted true ratings.
pub fn step_ndcg(scores: &[f64], env: &Environment, user: usize, k: usize) -> f64 {
    let candidates = env.candidate_set(user);
    debug_assert_eq!(scores.len(), candidates.len());
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| candidates[a].cmp(&candidates[b]))
    });
    let ranking: Vec<usize> = order.iter().map(|&p| candidates[p]).collect();
    let shift = env.relevance_shift();
    let cutoff = k.min(candidates.len());
    ndcg_at_k(
        &ranking,
        |j| env.true_rating(user, j).map_or(0.0, |y| y - shift),
        cutoff,
    )
}

/// `out_t = (Σ_{ℓ≤t} v_ℓ) / t`.
pub fn average_cumulative(series: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    series
        .iter()
        .enumerate()
        .map(|(t, v)| {
            acc += v;
            acc / (t + 1) as f64
        })
        .collect()
}

/// Prefix sums of a series.
pub fn cumulative(series: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    series
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    /// 1-based step.
    pub t: usize,
    pub user: usize,
    pub item: usize,
    pub rating: f64,
    pub regret: f64,
    pub ndcg: f64,
}

/// Everything a single run produces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run_id: String,
    pub policy: String,
    pub seed: u64,
    pub environment: String,
    pub parameters: serde_json::Value,
    pub steps: Vec<StepRecord>,
}

impl RunRecord {
    pub fn regrets(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.regret).collect()
    }

    pub fn cumulative_regret(&self) -> Vec<f64> {
        cumulative(&self.regrets())
    }

    pub fn final_regret(&self) -> f64 {
        self.steps.iter().map(|s| s.regret).sum()
    }

    /// Cumulative regret after `t` steps.
    pub fn regret_at(&self, t: usize) -> f64 {
        self.steps.iter().take(t).map(|s| s.regret).sum()
    }

    pub fn average_cumulative_ndcg(&self) -> Vec<f64> {
        average_cumulative(&self.steps.iter().map(|s| s.ndcg).collect::<Vec<_>>())
    }
}
