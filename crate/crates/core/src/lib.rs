//! Alternating-linear-bandit recommenders: the ALB policy, baselines,
//! synthetic and replay environments, metrics and an experiment harness.

pub mod alb;
pub mod baselines;
pub mod env;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod policy;
pub mod seeding;
pub mod state;

pub use alb::AlbPolicy;
pub use baselines::{EpsilonGreedyPolicy, RandomPolicy};
pub use env::Environment;
pub use error::{AlbError, Result};
pub use harness::{Experiment, ExperimentConfig};
pub use metrics::RunRecord;
pub use policy::{Policy, Selection};
