//! Reward oracles: low-rank synthetic environments and replay over logged
//! ratings.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{AlbError, Result};
use crate::ingest::RatingsTable;
use crate::linalg::Matrix;
use crate::state::gaussian_matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    None,
    Gaussian { sigma: f64 },
    /// Uniform on `[Y - w/2, Y + w/2]`.
    Uniform { width: f64 },
    /// `{0, 1}` with success probability `Y`.
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arrival {
    /// Uniform with replacement over users that can be served.
    #[default]
    Uniform,
    RoundRobin,
}

#[derive(Debug, Clone)]
enum Truth {
    Dense(Matrix),
    /// Per-user `(item, rating)` lists sorted by item.
    Sparse { items: usize, rows: Vec<Vec<(usize, f64)>> },
}

#[derive(Debug, Clone)]
enum Candidates {
    All(Vec<usize>),
    PerUser(Vec<Vec<usize>>),
}

#[derive(Debug, Clone)]
pub struct Environment {
    descriptor: String,
    truth: Truth,
    noise: NoiseModel,
    candidates: Candidates,
    best: Vec<Option<(usize, f64)>>,
    active_users: Vec<usize>,
    factors: Option<(Matrix, Matrix)>,
    min_rating: f64,
    arrival: Arrival,
    cursor: usize,
}

impl Environment {
    fn from_dense(descriptor: String, y: Matrix, noise: NoiseModel, factors: (Matrix, Matrix)) -> Self {
        let all: Vec<usize> = (0..y.cols()).collect();
        let best = (0..y.rows())
            .map(|i| argmax_lowest(all.iter().map(|&j| (j, y[(i, j)]))))
            .collect();
        let min_rating = y.min_entry();
        Self {
            descriptor,
            active_users: (0..y.rows()).collect(),
            candidates: Candidates::All(all),
            best,
            truth: Truth::Dense(y),
            noise,
            factors: Some(factors),
            min_rating,
            arrival: Arrival::Uniform,
            cursor: 0,
        }
    }

    pub fn with_arrival(mut self, arrival: Arrival) -> Self {
        self.arrival = arrival;
        self
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn n_users(&self) -> usize {
        match &self.truth {
            Truth::Dense(y) => y.rows(),
            Truth::Sparse { rows, .. } => rows.len(),
        }
    }

    pub fn n_items(&self) -> usize {
        match &self.truth {
            Truth::Dense(y) => y.cols(),
            Truth::Sparse { items, .. } => *items,
        }
    }

    /// Users the arrival process can emit.
    pub fn active_users(&self) -> &[usize] {
        &self.active_users
    }

    /// True factors `(A*, B*)` for synthetic environments.
    pub fn true_factors(&self) -> Option<(&Matrix, &Matrix)> {
        self.factors.as_ref().map(|(a, b)| (a, b))
    }

    /// Dense true matrix for synthetic environments.
    pub fn true_matrix(&self) -> Option<&Matrix> {
        match &self.truth {
            Truth::Dense(y) => Some(y),
            Truth::Sparse { .. } => None,
        }
    }

    pub fn candidate_set(&self, user: usize) -> &[usize] {
        match &self.candidates {
            Candidates::All(all) => all,
            Candidates::PerUser(per) => per.get(user).map_or(&[], Vec::as_slice),
        }
    }

    /// True rating, or `None` where a replay dataset has no entry.
    pub fn true_rating(&self, user: usize, item: usize) -> Option<f64> {
        match &self.truth {
            Truth::Dense(y) => Some(y[(user, item)]),
            Truth::Sparse { rows, .. } => {
                let row = rows.get(user)?;
                row.binary_search_by_key(&item, |&(j, _)| j)
                    .ok()
                    .map(|p| row[p].1)
            }
        }
    }

    /// `(j*, Y_{i,j*})` over the user's candidate set, lowest index on ties.
    pub fn best_item(&self, user: usize) -> Option<(usize, f64)> {
        self.best.get(user).copied().flatten()
    }

    /// Smallest true rating over the whole environment.
    pub fn min_rating(&self) -> f64 {
        self.min_rating
    }

    /// Constant subtracted from true ratings to make NDCG relevances
    /// nonnegative: the global minimum when it is negative, else zero.
    pub fn relevance_shift(&self) -> f64 {
        self.min_rating.min(0.0)
    }

    pub fn next_user<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        match self.arrival {
            Arrival::Uniform => self.active_users[rng.random_range(0..self.active_users.len())],
            Arrival::RoundRobin => {
                let u = self.active_users[self.cursor % self.active_users.len()];
                self.cursor += 1;
                u
            }
        }
    }

    /// Draws an observed rating for `(user, item)`.
    pub fn observe<R: Rng + ?Sized>(&self, user: usize, item: usize, rng: &mut R) -> Result<f64> {
        let y = self
            .true_rating(user, item)
            .ok_or(AlbError::ItemOutOfRange {
                item,
                items: self.n_items(),
            })?;
        Ok(match self.noise {
            NoiseModel::None => y,
            NoiseModel::Gaussian { sigma } => {
                if sigma == 0.0 {
                    y
                } else {
                    let z: f64 = rand_distr::StandardNormal.sample(rng);
                    y + sigma * z
                }
            }
            NoiseModel::Uniform { width } => {
                if width == 0.0 {
                    y
                } else {
                    y + width * (rng.random::<f64>() - 0.5)
                }
            }
            NoiseModel::Bernoulli => {
                if rng.random::<f64>() < y {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    /// `Y_{i,j*} - y`.
    pub fn instantaneous_regret(&self, user: usize, observed: f64) -> f64 {
        let (_, best) = self.best_item(user).expect("user has candidates");
        best - observed
    }
}

fn argmax_lowest<I: IntoIterator<Item = (usize, f64)>>(iter: I) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in iter {
        match best {
            Some((bj, bv)) if v < bv || (v == bv && j > bj) => {}
            _ => best = Some((j, v)),
        }
    }
    best
}

fn check_dims(n: usize, m: usize, k: usize) -> Result<()> {
    if n == 0 || m == 0 || k == 0 {
        return Err(AlbError::Config("environment dimensions must be at least 1".into()));
    }
    Ok(())
}

/// Gaussian factors `A* ~ N(0, σ1²)`, `B* ~ N(0, σ2²)`, `Y = A*·B*ᵀ`, additive
/// `N(0, σ²)` observation noise.
pub fn make_gaussian_env<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    k: usize,
    sigma1: f64,
    sigma2: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<Environment> {
    check_dims(n, m, k)?;
    if !(sigma1 > 0.0 && sigma2 > 0.0 && sigma >= 0.0) {
        return Err(AlbError::Config("gaussian environment scales out of range".into()));
    }
    let a = gaussian_matrix(n, k, sigma1, rng)?;
    let b = gaussian_matrix(m, k, sigma2, rng)?;
    let y = a.matmul_transpose(&b)?;
    let descriptor = format!("gaussian(n={n},m={m},k={k},sigma1={sigma1},sigma2={sigma2},sigma={sigma})");
    Ok(Environment::from_dense(descriptor, y, NoiseModel::Gaussian { sigma }, (a, b)))
}

// Rows of `A*` uniform on the simplex, `B*` entries uniform on `[0, 1]`.
fn simplex_factors<R: Rng + ?Sized>(n: usize, m: usize, k: usize, rng: &mut R) -> Result<(Matrix, Matrix)> {
    let a = (0..n).flat_map(|_| sample_simplex_row(k, rng)).collect();
    let b = (0..m * k).map(|_| rng.random::<f64>()).collect();
    Ok((Matrix::from_row_major(n, k, a)?, Matrix::from_row_major(m, k, b)?))
}

/// One draw from the uniform distribution on the `k`-simplex.
pub fn sample_simplex_row<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let row: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = row.iter().sum();
    row.into_iter().map(|v| v / total).collect()
}

pub fn make_uniform_env<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    k: usize,
    width: f64,
    rng: &mut R,
) -> Result<Environment> {
    check_dims(n, m, k)?;
    if !(width >= 0.0) {
        return Err(AlbError::Config("uniform noise width must be nonnegative".into()));
    }
    let (a, b) = simplex_factors(n, m, k, rng)?;
    let y = a.matmul_transpose(&b)?;
    let descriptor = format!("uniform(n={n},m={m},k={k},width={width})");
    Ok(Environment::from_dense(descriptor, y, NoiseModel::Uniform { width }, (a, b)))
}

pub fn make_bernoulli_env<R: Rng + ?Sized>(n: usize, m: usize, k: usize, rng: &mut R) -> Result<Environment> {
    check_dims(n, m, k)?;
    let (a, b) = simplex_factors(n, m, k, rng)?;
    let y = a.matmul_transpose(&b)?;
    let descriptor = format!("bernoulli(n={n},m={m},k={k})");
    Ok(Environment::from_dense(descriptor, y, NoiseModel::Bernoulli, (a, b)))
}

/// Synthetic environment over caller-supplied factors; used for scripted
/// tests and the C ABI.
pub fn make_factor_env(a: Matrix, b: Matrix, noise: NoiseModel) -> Result<Environment> {
    let y = a.matmul_transpose(&b)?;
    let descriptor = format!("factors(n={},m={},k={})", a.rows(), b.rows(), a.cols());
    Ok(Environment::from_dense(descriptor, y, noise, (a, b)))
}

/// Cold-start replay: each user may only be offered items they rated, and
/// the observed rating is the logged one.
///
/// The random source is accepted for interface symmetry with the synthetic
/// constructors; construction itself is deterministic.
pub fn make_replay_env<R: Rng + ?Sized>(table: &RatingsTable, _rng: &mut R) -> Result<Environment> {
    if table.is_empty() {
        return Err(AlbError::EmptyTable);
    }
    let n = table.n_users();
    let m = table.n_items();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for t in table.triples() {
        rows[t.user].push((t.item, t.rating));
    }
    for r in &mut rows {
        r.sort_by_key(|&(j, _)| j);
    }
    let candidates: Vec<Vec<usize>> = rows.iter().map(|r| r.iter().map(|&(j, _)| j).collect()).collect();
    let best = rows.iter().map(|r| argmax_lowest(r.iter().copied())).collect();
    let active_users = (0..n).filter(|&i| !rows[i].is_empty()).collect();
    let min_rating = table
        .triples()
        .iter()
        .map(|t| t.rating)
        .fold(f64::INFINITY, f64::min);
    Ok(Environment {
        descriptor: format!("replay({},users={n},items={m},ratings={})", table.source(), table.len()),
        truth: Truth::Sparse { items: m, rows },
        noise: NoiseModel::None,
        candidates: Candidates::PerUser(candidates),
        best,
        active_users,
        factors: None,
        min_rating,
        arrival: Arrival::Uniform,
        cursor: 0,
    })
}
