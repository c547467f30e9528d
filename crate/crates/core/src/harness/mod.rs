//! Experiment driver: single runs, grid search, rank sweeps.

pub mod config;
pub mod output;

use std::path::Path;

use serde::Serialize;

use crate::alb::AlbPolicy;
use crate::baselines::{EpsilonGreedyPolicy, RandomPolicy};
use crate::env::{make_bernoulli_env, make_gaussian_env, make_replay_env, make_uniform_env, Environment};
use crate::error::{AlbError, Result};
use crate::ingest::{ingest, RatingsTable};
use crate::metrics::{step_ndcg, RunRecord, StepRecord};
use crate::policy::Policy;
use crate::seeding::{stream, Stream};

pub use config::{Axis, EnvironmentSpec, ExperimentConfig, GridPoint, PolicyName, PolicySpec};

/// A validated configuration with its dataset (if any) loaded once.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    table: Option<RatingsTable>,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let table = match &config.environment {
            EnvironmentSpec::Replay { path, ingest: options, .. } => {
                let format = config.environment.parser().expect("replay has a parser");
                Some(ingest(path, format, options)?)
            }
            _ => None,
        };
        Ok(Self { config, table })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn table(&self) -> Option<&RatingsTable> {
        self.table.as_ref()
    }

    /// Same experiment at a different model rank.
    pub fn with_rank(&self, rank: usize) -> Self {
        let mut e = self.clone();
        e.config.rank = rank;
        e
    }

    pub fn with_seeds(&self, seeds: Vec<u64>) -> Self {
        let mut e = self.clone();
        e.config.seeds = seeds;
        e
    }

    /// Builds the environment for a run. Synthetic matrices are drawn from
    /// the run's environment stream, so every grid point sees the same
    /// matrix for a given seed.
    pub fn environment(&self, seed: u64) -> Result<Environment> {
        let mut rng = stream(seed, Stream::Environment);
        let env = match &self.config.environment {
            &EnvironmentSpec::Gaussian { n, m, k, sigma1, sigma2, noise } => {
                make_gaussian_env(n, m, k, sigma1, sigma2, noise, &mut rng)?
            }
            &EnvironmentSpec::Uniform { n, m, k, width } => make_uniform_env(n, m, k, width, &mut rng)?,
            &EnvironmentSpec::Bernoulli { n, m, k } => make_bernoulli_env(n, m, k, &mut rng)?,
            EnvironmentSpec::Replay { .. } => {
                make_replay_env(self.table.as_ref().expect("table loaded"), &mut rng)?
            }
        };
        Ok(env.with_arrival(self.config.arrival))
    }

    fn policy(&self, point: &GridPoint, env: &Environment, seed: u64) -> Result<Box<dyn Policy>> {
        let n = env.n_users();
        let m = env.n_items();
        let hp = point.hyperparameters(&self.config);
        let mut init = stream(seed, Stream::ModelInit);
        Ok(match self.config.policy.name {
            PolicyName::Alb => Box::new(AlbPolicy::new(n, m, hp, &mut init)?),
            PolicyName::Random => Box::new(RandomPolicy::new(stream(seed, Stream::Policy))),
            PolicyName::Egreedy => Box::new(EpsilonGreedyPolicy::new(
                n,
                m,
                hp,
                point.epsilon.unwrap_or(0.1),
                &mut init,
                stream(seed, Stream::Policy),
            )?),
            other => {
                return Err(AlbError::Config(format!("policy `{}` is not implemented", other.as_str())));
            }
        })
    }

    pub fn run_id(&self, point: &GridPoint, seed: u64) -> String {
        format!(
            "{}-p{}-k{}-s{}",
            self.config.policy.name.as_str(),
            point.index,
            self.config.rank,
            seed
        )
    }

    /// Executes `horizon` steps of the configured policy at `point`.
    pub fn run_once(&self, point: &GridPoint, seed: u64) -> Result<RunRecord> {
        let mut env = self.environment(seed)?;
        let mut policy = self.policy(point, &env, seed)?;
        let mut arrivals = stream(seed, Stream::Arrivals);
        let mut noise = stream(seed, Stream::Noise);
        let cutoff = self.config.ndcg_cutoff;
        let mut steps = Vec::with_capacity(self.config.horizon);
        for t in 1..=self.config.horizon {
            let user = env.next_user(&mut arrivals);
            let sel = policy.select(user, env.candidate_set(user))?;
            let rating = env.observe(user, sel.item, &mut noise)?;
            policy.observe(user, sel.item, rating)?;
            steps.push(StepRecord {
                t,
                user,
                item: sel.item,
                rating,
                regret: env.instantaneous_regret(user, rating),
                ndcg: step_ndcg(&sel.scores, &env, user, cutoff),
            });
        }
        Ok(RunRecord {
            run_id: self.run_id(point, seed),
            policy: self.config.policy.name.as_str().to_string(),
            seed,
            environment: env.descriptor().to_string(),
            parameters: serde_json::to_value(point.hyperparameters(&self.config)).expect("serializable"),
            steps,
        })
    }

    /// Steps needed to run the whole grid over every seed.
    pub fn required_steps(&self) -> u128 {
        self.config.grid_points().len() as u128 * self.config.seeds.len() as u128 * self.config.horizon as u128
    }

    pub fn check_budget(&self, required: u128, cap: u64) -> Result<()> {
        if required > cap as u128 {
            Err(AlbError::BudgetExceeded {
                required,
                cap: cap as u128,
            })
        } else {
            Ok(())
        }
    }

    /// Runs every grid point over every seed. Runs execute in parallel on
    /// the current rayon pool; `sink` receives each completed record with
    /// its experiment, in `(point, seed)` order regardless of scheduling.
    pub fn grid_search<F>(&self, mut sink: F) -> Result<GridResult>
    where
        F: FnMut(&Experiment, &RunRecord) -> Result<()>,
    {
        use rayon::prelude::*;

        self.check_budget(self.required_steps(), self.config.budget_steps)?;
        let points = self.config.grid_points();
        let jobs: Vec<(usize, u64)> = (0..points.len())
            .flat_map(|p| self.config.seeds.iter().map(move |&s| (p, s)))
            .collect();
        let chunk = (rayon::current_num_threads() * 2).max(1);
        let mut finals: Vec<Vec<f64>> = vec![Vec::new(); points.len()];
        for batch in jobs.chunks(chunk) {
            let records: Vec<Result<RunRecord>> = batch
                .par_iter()
                .map(|&(p, seed)| self.run_once(&points[p], seed))
                .collect();
            for (&(p, _), rec) in batch.iter().zip(records) {
                let rec = rec?;
                sink(self, &rec)?;
                finals[p].push(rec.final_regret());
            }
        }
        let results: Vec<PointResult> = points
            .into_iter()
            .zip(finals)
            .map(|(point, regrets)| PointResult::new(point, self.config.seeds.clone(), regrets))
            .collect();
        let best = select_best(&results);
        Ok(GridResult {
            policy: self.config.policy.name.as_str().to_string(),
            rank: self.config.rank,
            points: results,
            best,
        })
    }

    /// Grid search repeated per model rank with everything else fixed.
    pub fn rank_sweep<F>(&self, ranks: &[usize], mut sink: F) -> Result<Vec<GridResult>>
    where
        F: FnMut(&Experiment, &RunRecord) -> Result<()>,
    {
        if ranks.is_empty() || ranks.contains(&0) {
            return Err(AlbError::Config("ranks must be a nonempty list of positive ranks".into()));
        }
        let required = self.required_steps() * ranks.len() as u128;
        self.check_budget(required, self.config.budget_steps)?;
        ranks
            .iter()
            .map(|&r| self.with_rank(r).grid_search(&mut sink))
            .collect()
    }
}

/// Final cumulative regrets of one grid point across seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub point: GridPoint,
    pub seeds: Vec<u64>,
    pub final_regrets: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over `√n`; zero for a single seed.
    pub std_error: f64,
}

impl PointResult {
    pub fn new(point: GridPoint, seeds: Vec<u64>, final_regrets: Vec<f64>) -> Self {
        let (mean, std_error) = mean_and_std_error(&final_regrets);
        Self {
            point,
            seeds,
            final_regrets,
            mean,
            std_error,
        }
    }
}

pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn select_best(results: &[PointResult]) -> usize {
    let mut best = 0;
    for (i, r) in results.iter().enumerate().skip(1) {
        let b = &results[best];
        if r.mean < b.mean || (r.mean == b.mean && r.point.lexicographic_cmp(&b.point).is_lt()) {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub policy: String,
    pub rank: usize,
    pub points: Vec<PointResult>,
    /// Index into `points` of the minimizer of mean final regret.
    pub best: usize,
}

impl GridResult {
    pub fn best_point(&self) -> &PointResult {
        &self.points[self.best]
    }
}

/// Runs `f` on a rayon pool with `threads` workers (all cores when `None`).
pub fn with_threads<T, F>(threads: Option<usize>, f: F) -> Result<T>
where
    F: FnOnce() -> Result<T> + Send,
    T: Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| AlbError::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(f)
}

/// Loads a config file and prepares it.
pub fn load_experiment(path: &Path) -> Result<Experiment> {
    Experiment::prepare(ExperimentConfig::load(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::IngestOptions;
    use std::io::Write;

    fn gaussian_config(policy: PolicySpec, horizon: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(
            EnvironmentSpec::Gaussian { n: 20, m: 25, k: 3, sigma1: 1.0, sigma2: 1.0, noise: 0.5 },
            policy,
        );
        cfg.horizon = horizon;
        cfg.rank = 3;
        cfg.seeds = vec![0, 1];
        cfg
    }

    #[test]
    fn single_user_single_item_replay() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "7\t3\t4\t0").unwrap();
        let mut cfg = ExperimentConfig::new(
            EnvironmentSpec::Replay {
                dataset: crate::ingest::DatasetFormat::Movielens,
                path: f.path().to_path_buf(),
                format: None,
                ingest: IngestOptions::default(),
            },
            PolicySpec::named(PolicyName::Alb),
        );
        cfg.horizon = 1;
        let exp = Experiment::prepare(cfg).unwrap();
        let rec = exp.run_once(&exp.config().grid_points()[0], 0).unwrap();
        assert_eq!(rec.steps.len(), 1);
        assert_eq!(rec.steps[0].regret, 0.0);
        assert_eq!(rec.steps[0].ndcg, 1.0);
    }

    #[test]
    fn run_once_is_deterministic() {
        let exp = Experiment::prepare(gaussian_config(PolicySpec::named(PolicyName::Alb), 300)).unwrap();
        let p = exp.config().grid_points()[0];
        assert_eq!(exp.run_once(&p, 3).unwrap(), exp.run_once(&p, 3).unwrap());
        assert_ne!(exp.run_once(&p, 3).unwrap().steps, exp.run_once(&p, 4).unwrap().steps);
    }

    #[test]
    fn single_point_grid_is_run_aggregation() {
        let exp = Experiment::prepare(gaussian_config(PolicySpec::named(PolicyName::Alb), 200)).unwrap();
        let grid = exp.grid_search(|_, _| Ok(())).unwrap();
        assert_eq!(grid.points.len(), 1);
        assert_eq!(grid.best, 0);
        let p = exp.config().grid_points()[0];
        let finals: Vec<f64> = [0, 1].iter().map(|&s| exp.run_once(&p, s).unwrap().final_regret()).collect();
        assert_eq!(grid.points[0].final_regrets, finals);
        let (mean, se) = mean_and_std_error(&finals);
        assert_eq!((grid.points[0].mean, grid.points[0].std_error), (mean, se));
    }

    #[test]
    fn huge_sigma_loses_grid() {
        let mut spec = PolicySpec::named(PolicyName::Alb);
        spec.lambda = Axis::One(0.01);
        spec.sigma = Axis::Many(vec![0.5, 1000.0]);
        let mut cfg = gaussian_config(spec, 2000);
        cfg.seeds = vec![0, 1, 2];
        let exp = Experiment::prepare(cfg).unwrap();
        let grid = exp.grid_search(|_, _| Ok(())).unwrap();
        assert_eq!(grid.best_point().point.sigma, Some(0.5));
        assert!(grid.points[0].mean < grid.points[1].mean);
    }

    #[test]
    fn parallel_matches_serial() {
        let mut spec = PolicySpec::named(PolicyName::Egreedy);
        spec.epsilon = Axis::Many(vec![0.05, 0.2]);
        let exp = Experiment::prepare(gaussian_config(spec, 150)).unwrap();
        let collect = |threads| {
            let mut ids = Vec::new();
            let g = with_threads(Some(threads), || {
                exp.grid_search(|_, r| {
                    ids.push((r.run_id.clone(), r.final_regret()));
                    Ok(())
                })
            })
            .unwrap();
            (g, ids)
        };
        assert_eq!(collect(1), collect(4));
    }

    #[test]
    fn budget_refusal() {
        let mut cfg = gaussian_config(PolicySpec::named(PolicyName::Random), 100);
        cfg.budget_steps = 150;
        let exp = Experiment::prepare(cfg).unwrap();
        match exp.grid_search(|_, _| Ok(())) {
            Err(AlbError::BudgetExceeded { required, cap }) => assert_eq!((required, cap), (200, 150)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(exp.rank_sweep(&[3, 5], |_, _| Ok(())), Err(AlbError::BudgetExceeded { .. })));
    }

    #[test]
    fn rank_sweep_single_rank_equals_grid() {
        let exp = Experiment::prepare(gaussian_config(PolicySpec::named(PolicyName::Alb), 100)).unwrap();
        let sweep = exp.rank_sweep(&[3], |_, _| Ok(())).unwrap();
        assert_eq!(sweep, vec![exp.grid_search(|_, _| Ok(())).unwrap()]);
        let sweep = exp.rank_sweep(&[2, 3, 4], |_, _| Ok(())).unwrap();
        assert_eq!(sweep.len(), 3);
        assert!(sweep.iter().all(|g| g.best_point().mean.is_finite()));
    }
}
