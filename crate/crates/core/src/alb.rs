//! Alternating linear bandits: an OFUL step picks the item and an optimistic
//! user vector from the user's confidence ellipsoid, then a ridge step
//! refits the played item's features from the users who consumed it.
//!
//! All per-user and per-item quantities are recomputed from the interaction
//! log each step, because both steps rewrite historical feature snapshots.

use rand::Rng;

use crate::env::Environment;
use crate::error::{AlbError, Result};
use crate::linalg::{dot, ridge, Matrix, SpdFactorization};
use crate::policy::{argmax_position, Policy, Selection};
use crate::state::{init_model, FactorModel, Hyperparameters, InteractionLog, NormBound, RidgeAnchor};

/// `{q : ‖q − center‖_gram ≤ radius}`.
#[derive(Debug, Clone)]
pub struct ConfidenceEllipsoid {
    pub center: Vec<f64>,
    pub gram: Matrix,
    pub factor: SpdFactorization,
    pub radius: f64,
}

impl ConfidenceEllipsoid {
    pub fn contains(&self, q: &[f64]) -> Result<bool> {
        let d: Vec<f64> = q.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        Ok(self.factor.weighted_norm(&d)? <= self.radius)
    }
}

/// `σ·√(2·[½ ln det V − ½ k ln λ1 − ln δ]) + √λ1·s`, with the bracket clamped
/// at zero.
pub fn confidence_radius(log_det_gram: f64, k: usize, lambda1: f64, sigma: f64, delta: f64, s: f64) -> f64 {
    let log_ratio = 0.5 * log_det_gram - 0.5 * k as f64 * lambda1.ln() - delta.ln();
    sigma * (2.0 * log_ratio.max(0.0)).sqrt() + lambda1.sqrt() * s
}

/// Ellipsoid for `user` from the history `{ℓ : i_ℓ = user}` recorded so far,
/// using the configured `s` and a ridge centered at zero.
pub fn build_confidence(log: &InteractionLog, user: usize, hp: &Hyperparameters) -> Result<ConfidenceEllipsoid> {
    build_confidence_with(log, user, hp, hp.s, None)
}

/// As [`build_confidence`] with an explicit norm bound and optional ridge
/// anchor (the current user estimate).
pub fn build_confidence_with(
    log: &InteractionLog,
    user: usize,
    hp: &Hyperparameters,
    s: f64,
    anchor: Option<&[f64]>,
) -> Result<ConfidenceEllipsoid> {
    let k = log.rank();
    let (center, gram, factor) = ridge(log.user_design(user), hp.lambda1, k, anchor)?;
    let radius = confidence_radius(factor.log_det(), k, hp.lambda1, hp.sigma, hp.delta, s);
    Ok(ConfidenceEllipsoid {
        center,
        gram,
        factor,
        radius,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfulChoice {
    pub item: usize,
    /// Optimistic user vector `μ + c·V⁻¹b / ‖V^{-1/2}b‖`.
    pub estimate: Vec<f64>,
    /// `μ·B_j + c·‖V^{-1/2}B_j‖` per candidate, aligned with the candidates.
    pub scores: Vec<f64>,
}

/// Joint maximization of `⟨q, B_j⟩` over the ellipsoid and the candidate
/// items, in closed form. Ties go to the lowest item index. When the chosen
/// item row is zero the estimate is the center.
pub fn oful_step(ell: &ConfidenceEllipsoid, items: &Matrix, candidates: &[usize]) -> Result<OfulChoice> {
    if candidates.is_empty() {
        return Err(AlbError::EmptyCandidateSet);
    }
    let mut scores = Vec::with_capacity(candidates.len());
    let mut widths = Vec::with_capacity(candidates.len());
    for &j in candidates {
        if j >= items.rows() {
            return Err(AlbError::ItemOutOfRange {
                item: j,
                items: items.rows(),
            });
        }
        let b = items.row(j);
        let w = ell.factor.forward_solve(b)?;
        let width = dot(&w, &w).sqrt();
        scores.push(dot(&ell.center, b) + ell.radius * width);
        widths.push(w);
    }
    let best = argmax_position(candidates, &scores);
    let item = candidates[best];
    let w = &widths[best];
    let width = dot(w, w).sqrt();
    let estimate = if width > 0.0 {
        let direction = ell.factor.backward_solve(w)?;
        ell.center
            .iter()
            .zip(&direction)
            .map(|(m, d)| m + ell.radius * d / width)
            .collect()
    } else {
        ell.center.clone()
    };
    Ok(OfulChoice { item, estimate, scores })
}

/// Ridge refit of `item` over the user snapshots `{Z_ℓ : j_ℓ = item}`.
pub fn ls_item_update(log: &InteractionLog, item: usize, hp: &Hyperparameters) -> Result<Vec<f64>> {
    ls_item_update_with(log, item, hp, None)
}

pub fn ls_item_update_with(
    log: &InteractionLog,
    item: usize,
    hp: &Hyperparameters,
    anchor: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let (b, _, _) = ridge(log.item_design(item), hp.lambda2, log.rank(), anchor)?;
    Ok(b)
}

/// Ridge refit of `user` over the item snapshots `{X_ℓ : i_ℓ = user}`.
pub fn ls_user_update(
    log: &InteractionLog,
    user: usize,
    hp: &Hyperparameters,
    anchor: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let (a, _, _) = ridge(log.user_design(user), hp.lambda1, log.rank(), anchor)?;
    Ok(a)
}

/// Applies one observation to a model/log pair: records the step with the
/// current snapshots, refits the item, rewrites the item's snapshot rows.
pub(crate) fn record_and_refit_item(
    model: &mut FactorModel,
    log: &mut InteractionLog,
    hp: &Hyperparameters,
    user: usize,
    item: usize,
    rating: f64,
) -> Result<()> {
    let a = model.users.row(user).to_vec();
    let b_old = model.items.row(item).to_vec();
    log.record_step(user, item, rating, &b_old, &a)?;
    log.rewrite_user_rows(user, &a)?;
    let anchor = (hp.ridge_anchor == RidgeAnchor::CurrentEstimate).then_some(b_old.as_slice());
    let b = ls_item_update_with(log, item, hp, anchor)?;
    model.items.set_row(item, &b);
    log.rewrite_item_rows(item, &b)
}

/// Result of one full ALB iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub item: usize,
    pub rating: f64,
    pub regret: f64,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AlbPolicy {
    model: FactorModel,
    log: InteractionLog,
    hp: Hyperparameters,
    name: String,
}

impl AlbPolicy {
    pub fn new<R: Rng + ?Sized>(n_users: usize, n_items: usize, hp: Hyperparameters, rng: &mut R) -> Result<Self> {
        hp.validate()?;
        let model = init_model(n_users, n_items, hp.rank, hp.init_sigma1, hp.init_sigma2, rng)?;
        Self::from_model(model, hp)
    }

    pub fn from_model(model: FactorModel, hp: Hyperparameters) -> Result<Self> {
        hp.validate()?;
        if model.rank() != hp.rank {
            return Err(AlbError::DimensionMismatch {
                expected: hp.rank,
                found: model.rank(),
            });
        }
        Ok(Self {
            log: InteractionLog::new(hp.rank),
            model,
            hp,
            name: "alb".into(),
        })
    }

    pub fn model(&self) -> &FactorModel {
        &self.model
    }

    pub fn log(&self) -> &InteractionLog {
        &self.log
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hp
    }

    fn norm_bound(&self) -> f64 {
        match self.hp.norm_bound {
            NormBound::Fixed => self.hp.s,
            NormBound::MaxRowNorm => self.model.max_user_norm(),
        }
    }

    /// Current ellipsoid for `user`.
    pub fn confidence(&self, user: usize) -> Result<ConfidenceEllipsoid> {
        let anchor = match self.hp.ridge_anchor {
            RidgeAnchor::Zero => None,
            RidgeAnchor::CurrentEstimate => Some(self.model.users.row(user)),
        };
        build_confidence_with(&self.log, user, &self.hp, self.norm_bound(), anchor)
    }

    /// One complete iteration against an environment: OFUL step, play,
    /// observe, LS step. Returns the environment's instantaneous regret.
    pub fn alb_step<R: Rng + ?Sized>(
        &mut self,
        env: &Environment,
        user: usize,
        noise: &mut R,
    ) -> Result<StepOutcome> {
        let candidates = env.candidate_set(user);
        let sel = self.select(user, candidates)?;
        let rating = env.observe(user, sel.item, noise)?;
        self.observe(user, sel.item, rating)?;
        Ok(StepOutcome {
            item: sel.item,
            rating,
            regret: env.instantaneous_regret(user, rating),
            scores: sel.scores,
        })
    }
}

impl Policy for AlbPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, user: usize, candidates: &[usize]) -> Result<Selection> {
        let ell = self.confidence(user)?;
        let choice = oful_step(&ell, &self.model.items, candidates)?;
        self.model.users.set_row(user, &choice.estimate);
        Ok(Selection {
            item: choice.item,
            scores: choice.scores,
        })
    }

    fn observe(&mut self, user: usize, item: usize, rating: f64) -> Result<()> {
        record_and_refit_item(&mut self.model, &mut self.log, &self.hp, user, item, rating)
    }
}
