//! Experiment configuration: a single TOML document per experiment, with
//! grid axes written as scalars or lists.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::Arrival;
use crate::error::{AlbError, Result};
use crate::ingest::{DatasetFormat, IngestOptions};
use crate::state::{Hyperparameters, NormBound, RidgeAnchor};

pub const DEFAULT_HORIZON: usize = 25_000;
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const DEFAULT_BUDGET_STEPS: u64 = 20_000_000_000;

/// A grid axis: one value or a list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    One(f64),
    Many(Vec<f64>),
}

impl Axis {
    /// Ascending, deduplicated values.
    pub fn values(&self) -> Vec<f64> {
        let mut v = match self {
            Axis::One(x) => vec![*x],
            Axis::Many(xs) => xs.clone(),
        };
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    Gaussian {
        #[serde(default = "d_size")]
        n: usize,
        #[serde(default = "d_size")]
        m: usize,
        #[serde(default = "d_rank")]
        k: usize,
        #[serde(default = "d_one")]
        sigma1: f64,
        #[serde(default = "d_one")]
        sigma2: f64,
        #[serde(default = "d_half")]
        noise: f64,
    },
    Uniform {
        #[serde(default = "d_size")]
        n: usize,
        #[serde(default = "d_size")]
        m: usize,
        #[serde(default = "d_rank")]
        k: usize,
        #[serde(default = "d_half")]
        width: f64,
    },
    Bernoulli {
        #[serde(default = "d_size")]
        n: usize,
        #[serde(default = "d_size")]
        m: usize,
        #[serde(default = "d_rank")]
        k: usize,
    },
    /// Replay over a ratings file. `format` overrides the parser chosen by
    /// `dataset`.
    Replay {
        dataset: DatasetFormat,
        path: PathBuf,
        #[serde(default)]
        format: Option<DatasetFormat>,
        #[serde(default)]
        ingest: IngestOptions,
    },
}

fn d_size() -> usize {
    200
}
fn d_rank() -> usize {
    5
}
fn d_one() -> f64 {
    1.0
}
fn d_half() -> f64 {
    0.5
}
fn d_lambda() -> Axis {
    Axis::One(0.01)
}
fn d_sigma() -> Axis {
    Axis::One(0.5)
}
fn d_epsilon() -> Axis {
    Axis::One(0.1)
}
fn d_delta() -> f64 {
    0.01
}

impl EnvironmentSpec {
    pub fn parser(&self) -> Option<DatasetFormat> {
        match self {
            EnvironmentSpec::Replay { dataset, format, .. } => Some(format.unwrap_or(*dataset)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyName {
    Alb,
    Random,
    Egreedy,
    /// Reserved in the output schema; not implemented.
    Pts,
    /// Reserved in the output schema; not implemented.
    NmfBandit,
}

impl PolicyName {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyName::Alb => "alb",
            PolicyName::Random => "random",
            PolicyName::Egreedy => "egreedy",
            PolicyName::Pts => "pts",
            PolicyName::NmfBandit => "nmf-bandit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub name: PolicyName,
    /// Ties `lambda1 = lambda2` unless `lambda2` is given.
    #[serde(default = "d_lambda")]
    pub lambda: Axis,
    #[serde(default)]
    pub lambda2: Option<Axis>,
    #[serde(default = "d_sigma")]
    pub sigma: Axis,
    #[serde(default = "d_epsilon")]
    pub epsilon: Axis,
    #[serde(default = "d_delta")]
    pub delta: f64,
    #[serde(default = "d_one")]
    pub s: f64,
    #[serde(default)]
    pub norm_bound: NormBound,
    #[serde(default)]
    pub ridge_anchor: RidgeAnchor,
    #[serde(default = "d_one")]
    pub init_sigma1: f64,
    #[serde(default = "d_one")]
    pub init_sigma2: f64,
    /// NMF-Bandit exploration parameter; schema-reserved.
    #[serde(default)]
    pub theta: Option<Axis>,
    /// NMF-Bandit exploration-set size; schema-reserved.
    #[serde(default)]
    pub exploration_set: Option<Axis>,
    /// PTS particle count; schema-reserved.
    #[serde(default)]
    pub particles: Option<Axis>,
}

impl PolicySpec {
    pub fn named(name: PolicyName) -> Self {
        Self {
            name,
            lambda: d_lambda(),
            lambda2: None,
            sigma: d_sigma(),
            epsilon: d_epsilon(),
            delta: d_delta(),
            s: 1.0,
            norm_bound: NormBound::Fixed,
            ridge_anchor: RidgeAnchor::Zero,
            init_sigma1: 1.0,
            init_sigma2: 1.0,
            theta: None,
            exploration_set: None,
            particles: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "d_horizon")]
    pub horizon: usize,
    #[serde(default = "d_seeds")]
    pub seeds: Vec<u64>,
    /// Model rank.
    #[serde(default = "d_rank")]
    pub rank: usize,
    #[serde(default = "d_rank")]
    pub ndcg_cutoff: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub arrival: Arrival,
    #[serde(default = "d_budget")]
    pub budget_steps: u64,
    /// Factorization ranks for `rank-sweep`.
    #[serde(default)]
    pub ranks: Option<Vec<usize>>,
    pub environment: EnvironmentSpec,
    pub policy: PolicySpec,
}

fn d_horizon() -> usize {
    DEFAULT_HORIZON
}
fn d_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}
fn d_budget() -> u64 {
    DEFAULT_BUDGET_STEPS
}

impl ExperimentConfig {
    pub fn new(environment: EnvironmentSpec, policy: PolicySpec) -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            seeds: DEFAULT_SEEDS.to_vec(),
            rank: 5,
            ndcg_cutoff: 5,
            output: None,
            arrival: Arrival::Uniform,
            budget_steps: DEFAULT_BUDGET_STEPS,
            ranks: None,
            environment,
            policy,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| AlbError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AlbError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(AlbError::Config(m));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.rank == 0 || self.ndcg_cutoff == 0 {
            return bad("rank and ndcg_cutoff must be at least 1".into());
        }
        if let Some(ranks) = &self.ranks {
            if ranks.is_empty() || ranks.contains(&0) {
                return bad("ranks must be a nonempty list of positive ranks".into());
            }
        }
        let p = &self.policy;
        match p.name {
            PolicyName::Pts | PolicyName::NmfBandit => {
                return bad(format!("policy `{}` is reserved in the output schema but not implemented", p.name.as_str()));
            }
            _ => {}
        }
        for (name, axis) in [("lambda", Some(&p.lambda)), ("lambda2", p.lambda2.as_ref()), ("sigma", Some(&p.sigma)), ("epsilon", Some(&p.epsilon))] {
            if let Some(a) = axis {
                let v = a.values();
                if v.is_empty() {
                    return bad(format!("grid axis `{name}` is empty"));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return bad(format!("grid axis `{name}` has non-finite values"));
                }
            }
        }
        for point in self.grid_points() {
            if p.name != PolicyName::Random {
                point.hyperparameters(self).validate()?;
            }
            if let Some(e) = point.epsilon {
                if !(0.0..=1.0).contains(&e) {
                    return bad(format!("epsilon must lie in [0, 1], got {e}"));
                }
            }
        }
        Ok(())
    }

    /// Cartesian product of the axes relevant to the policy, in ascending
    /// lexicographic order of `(lambda1, lambda2, sigma, epsilon)`.
    pub fn grid_points(&self) -> Vec<GridPoint> {
        let p = &self.policy;
        let lambdas = p.lambda.values();
        let lambda2s: Vec<Option<f64>> = match &p.lambda2 {
            Some(a) => a.values().into_iter().map(Some).collect(),
            None => vec![None],
        };
        let mut points = Vec::new();
        match p.name {
            PolicyName::Random => points.push(GridPoint::default()),
            PolicyName::Alb => {
                for &l in &lambdas {
                    for &l2 in &lambda2s {
                        for s in p.sigma.values() {
                            points.push(GridPoint {
                                lambda1: Some(l),
                                lambda2: Some(l2.unwrap_or(l)),
                                sigma: Some(s),
                                ..Default::default()
                            });
                        }
                    }
                }
            }
            PolicyName::Egreedy => {
                for &l in &lambdas {
                    for &l2 in &lambda2s {
                        for e in p.epsilon.values() {
                            points.push(GridPoint {
                                lambda1: Some(l),
                                lambda2: Some(l2.unwrap_or(l)),
                                epsilon: Some(e),
                                ..Default::default()
                            });
                        }
                    }
                }
            }
            PolicyName::Pts | PolicyName::NmfBandit => {}
        }
        for (i, pt) in points.iter_mut().enumerate() {
            pt.index = i;
        }
        points
    }
}

/// One resolved hyperparameter combination.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct GridPoint {
    pub index: usize,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
}

impl GridPoint {
    pub fn hyperparameters(&self, cfg: &ExperimentConfig) -> Hyperparameters {
        let p = &cfg.policy;
        let lambda1 = self.lambda1.unwrap_or(0.01);
        Hyperparameters {
            lambda1,
            lambda2: self.lambda2.unwrap_or(lambda1),
            // ε-greedy never explores through the radius.
            sigma: self.sigma.unwrap_or(0.0),
            delta: p.delta,
            s: if self.sigma.is_some() { p.s } else { 0.0 },
            rank: cfg.rank,
            init_sigma1: p.init_sigma1,
            init_sigma2: p.init_sigma2,
            norm_bound: p.norm_bound,
            ridge_anchor: p.ridge_anchor,
        }
    }

    /// Lexicographic order over the hyperparameter tuple.
    pub fn lexicographic_cmp(&self, other: &Self) -> std::cmp::Ordering {
        let key = |p: &Self| [p.lambda1, p.lambda2, p.sigma, p.epsilon].map(|v| v.unwrap_or(f64::NEG_INFINITY));
        let (a, b) = (key(self), key(other));
        a.iter()
            .zip(&b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    }

    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("sigma", self.sigma), ("epsilon", self.epsilon)] {
            if let Some(v) = v {
                parts.push(format!("{name}={v}"));
            }
        }
        parts.join(",")
    }
}
