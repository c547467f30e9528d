//! Evolving bandit state: factor estimates, the interaction history with its
//! per-step feature snapshots, and the hyperparameters that drive updates.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{AlbError, Result};
use crate::linalg::{norm2, Matrix};

/// Current estimates `A` (users × k) and `B` (items × k).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub users: Matrix,
    pub items: Matrix,
}

impl FactorModel {
    pub fn new(users: Matrix, items: Matrix) -> Result<Self> {
        if users.cols() != items.cols() {
            return Err(AlbError::DimensionMismatch {
                expected: users.cols(),
                found: items.cols(),
            });
        }
        Ok(Self { users, items })
    }

    pub fn n_users(&self) -> usize {
        self.users.rows()
    }

    pub fn n_items(&self) -> usize {
        self.items.rows()
    }

    pub fn rank(&self) -> usize {
        self.users.cols()
    }

    /// `max_i ‖A_i‖₂` over the current user estimates.
    pub fn max_user_norm(&self) -> f64 {
        (0..self.n_users())
            .map(|i| norm2(self.users.row(i)))
            .fold(0.0, f64::max)
    }
}

/// Draws `A_ij ~ N(0, σ1²)` and `B_ij ~ N(0, σ2²)`; `σ1`, `σ2` are standard
/// deviations.
pub fn init_model<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    k: usize,
    sigma1: f64,
    sigma2: f64,
    rng: &mut R,
) -> Result<FactorModel> {
    if n == 0 || m == 0 || k == 0 {
        return Err(AlbError::Config("n, m and k must be at least 1".into()));
    }
    if !(sigma1 > 0.0 && sigma2 > 0.0) {
        return Err(AlbError::Config("initialization scales must be positive".into()));
    }
    let users = gaussian_matrix(n, k, sigma1, rng);
    let items = gaussian_matrix(m, k, sigma2, rng);
    FactorModel::new(users?, items?)
}

pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    std_dev: f64,
    rng: &mut R,
) -> Result<Matrix> {
    let normal = Normal::new(0.0, std_dev)
        .map_err(|e| AlbError::Config(format!("invalid normal scale {std_dev}: {e}")))?;
    Matrix::from_row_major(rows, cols, (0..rows * cols).map(|_| normal.sample(rng)).collect())
}

/// How the norm bound `s` in the confidence radius is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormBound {
    /// Use the configured scalar `s`.
    #[default]
    Fixed,
    /// Recompute `s = max_i ‖A_i‖₂` over the current estimates every step.
    MaxRowNorm,
}

/// Center of the ridge penalty in the user and item least-squares fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RidgeAnchor {
    /// `(XᵀX + λI)⁻¹ Xᵀy`.
    #[default]
    Zero,
    /// `(XᵀX + λI)⁻¹ (Xᵀy + λ·current_row)`: shrink toward the current
    /// estimate instead of the origin.
    CurrentEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// User-side ridge.
    pub lambda1: f64,
    /// Item-side ridge.
    pub lambda2: f64,
    /// Noise scale in the confidence radius.
    pub sigma: f64,
    /// Failure probability of the confidence set.
    pub delta: f64,
    /// Norm bound scale.
    pub s: f64,
    pub rank: usize,
    pub init_sigma1: f64,
    pub init_sigma2: f64,
    #[serde(default)]
    pub norm_bound: NormBound,
    #[serde(default)]
    pub ridge_anchor: RidgeAnchor,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            lambda1: 0.01,
            lambda2: 0.01,
            sigma: 0.5,
            delta: 0.01,
            s: 1.0,
            rank: 5,
            init_sigma1: 1.0,
            init_sigma2: 1.0,
            norm_bound: NormBound::Fixed,
            ridge_anchor: RidgeAnchor::Zero,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(AlbError::Config(msg.to_string()));
        if !(self.lambda1 > 0.0 && self.lambda2 > 0.0) {
            return bad("lambda1 and lambda2 must be positive");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.sigma >= 0.0 && self.s >= 0.0) {
            return bad("sigma and s must be nonnegative");
        }
        if self.rank == 0 {
            return bad("rank must be at least 1");
        }
        if !(self.init_sigma1 > 0.0 && self.init_sigma2 > 0.0) {
            return bad("initialization scales must be positive");
        }
        Ok(())
    }
}

/// Time-indexed history. Each step stores the user, item, observed rating
/// and the item (`X_t`) and user (`Z_t`) feature snapshots; per-user and
/// per-item step lists index the history.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionLog {
    rank: usize,
    users: Vec<usize>,
    items: Vec<usize>,
    ratings: Vec<f64>,
    item_rows: Vec<f64>,
    user_rows: Vec<f64>,
    by_user: Vec<Vec<usize>>,
    by_item: Vec<Vec<usize>>,
}

impl InteractionLog {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            ..Self::default()
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn user_at(&self, t: usize) -> usize {
        self.users[t]
    }

    pub fn item_at(&self, t: usize) -> usize {
        self.items[t]
    }

    pub fn rating_at(&self, t: usize) -> f64 {
        self.ratings[t]
    }

    pub fn ratings(&self) -> &[f64] {
        &self.ratings
    }

    /// `X_t`.
    pub fn item_row(&self, t: usize) -> &[f64] {
        &self.item_rows[t * self.rank..(t + 1) * self.rank]
    }

    /// `Z_t`.
    pub fn user_row(&self, t: usize) -> &[f64] {
        &self.user_rows[t * self.rank..(t + 1) * self.rank]
    }

    /// Steps at which `user` was served, in increasing order. Before a step
    /// is recorded this is `{ℓ < t : i_ℓ = user}`.
    pub fn user_index_set(&self, user: usize) -> &[usize] {
        self.by_user.get(user).map_or(&[], Vec::as_slice)
    }

    /// Steps at which `item` was played, in increasing order. After the
    /// current step is recorded this is `{ℓ ≤ t : j_ℓ = item}`.
    pub fn item_index_set(&self, item: usize) -> &[usize] {
        self.by_item.get(item).map_or(&[], Vec::as_slice)
    }

    /// `{ℓ ≤ t : j_ℓ = item}` for an arbitrary past step `t`.
    pub fn item_index_set_until(&self, item: usize, t: usize) -> &[usize] {
        let all = self.item_index_set(item);
        &all[..all.partition_point(|&l| l <= t)]
    }

    /// `{ℓ < t : i_ℓ = user}` for an arbitrary step `t`.
    pub fn user_index_set_before(&self, user: usize, t: usize) -> &[usize] {
        let all = self.user_index_set(user);
        &all[..all.partition_point(|&l| l < t)]
    }

    /// `(X_ℓ, y_ℓ)` pairs for a user's history.
    pub fn user_design(&self, user: usize) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.user_index_set(user)
            .iter()
            .map(move |&l| (self.item_row(l), self.ratings[l]))
    }

    /// `(Z_ℓ, y_ℓ)` pairs for an item's history.
    pub fn item_design(&self, item: usize) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.item_index_set(item)
            .iter()
            .map(move |&l| (self.user_row(l), self.ratings[l]))
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() == self.rank {
            Ok(())
        } else {
            Err(AlbError::DimensionMismatch {
                expected: self.rank,
                found: row.len(),
            })
        }
    }

    pub fn record_step(
        &mut self,
        user: usize,
        item: usize,
        rating: f64,
        item_row: &[f64],
        user_row: &[f64],
    ) -> Result<()> {
        self.check_row(item_row)?;
        self.check_row(user_row)?;
        let t = self.len();
        self.users.push(user);
        self.items.push(item);
        self.ratings.push(rating);
        self.item_rows.extend_from_slice(item_row);
        self.user_rows.extend_from_slice(user_row);
        if self.by_user.len() <= user {
            self.by_user.resize_with(user + 1, Vec::new);
        }
        self.by_user[user].push(t);
        if self.by_item.len() <= item {
            self.by_item.resize_with(item + 1, Vec::new);
        }
        self.by_item[item].push(t);
        Ok(())
    }

    /// Overwrites `Z_ℓ` for every step of `user`.
    pub fn rewrite_user_rows(&mut self, user: usize, row: &[f64]) -> Result<()> {
        self.check_row(row)?;
        let k = self.rank;
        if let Some(steps) = self.by_user.get(user) {
            for &l in steps {
                self.user_rows[l * k..(l + 1) * k].copy_from_slice(row);
            }
        }
        Ok(())
    }

    /// Overwrites `X_ℓ` for every step of `item`.
    pub fn rewrite_item_rows(&mut self, item: usize, row: &[f64]) -> Result<()> {
        self.check_row(row)?;
        let k = self.rank;
        if let Some(steps) = self.by_item.get(item) {
            for &l in steps {
                self.item_rows[l * k..(l + 1) * k].copy_from_slice(row);
            }
        }
        Ok(())
    }
}
