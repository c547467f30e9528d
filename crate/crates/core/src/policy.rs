use crate::error::Result;

/// A policy's decision for one step: the chosen item and one score per
/// candidate (aligned with the candidate slice it was given), used to rank
/// candidates for NDCG.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub item: usize,
    pub scores: Vec<f64>,
}

/// Common interface for ALB and the baselines. `select` must return a member
/// of `candidates`; `observe` feeds back the rating for the item just played.
pub trait Policy: Send {
    fn name(&self) -> &str;

    fn select(&mut self, user: usize, candidates: &[usize]) -> Result<Selection>;

    fn observe(&mut self, user: usize, item: usize, rating: f64) -> Result<()>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn select(&mut self, user: usize, candidates: &[usize]) -> Result<Selection> {
        (**self).select(user, candidates)
    }

    fn observe(&mut self, user: usize, item: usize, rating: f64) -> Result<()> {
        (**self).observe(user, item, rating)
    }
}

/// Position of the largest score, lowest item index on ties.
pub(crate) fn argmax_position(candidates: &[usize], scores: &[f64]) -> usize {
    let mut best = 0;
    for p in 1..candidates.len() {
        if scores[p] > scores[best] || (scores[p] == scores[best] && candidates[p] < candidates[best]) {
            best = p;
        }
    }
    best
}
