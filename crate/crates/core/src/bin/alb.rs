use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use alb_core::error::{AlbError, Result};
use alb_core::harness::output::{write_grid_csv, ResultWriter};
use alb_core::harness::{with_threads, Experiment, ExperimentConfig, GridResult};
use alb_core::ingest::{ingest, DatasetFormat, IngestOptions};

#[derive(Parser)]
#[command(name = "alb", version, about = "Alternating linear bandit recommender experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single-point configuration for every seed.
    Run(Common),
    /// Exhaustive grid search over the configured axes.
    Grid(Common),
    /// Grid search repeated for several model ranks.
    RankSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ranks; overrides `ranks` in the config.
        #[arg(long, value_delimiter = ',')]
        ranks: Option<Vec<usize>>,
    },
    /// Parse a dataset and print its summary.
    IngestCheck {
        #[arg(long)]
        path: PathBuf,
        #[arg(long)]
        format: DatasetFormat,
        /// Keep Book-Crossing implicit (rating 0) rows.
        #[arg(long)]
        include_implicit: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Seed override; repeat for several seeds.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Cap on total simulated steps; overrides `budget_steps`.
    #[arg(long)]
    budget: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if !self.seeds.is_empty() {
            cfg.seeds = self.seeds.clone();
        }
        if let Some(b) = self.budget {
            cfg.budget_steps = b;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output.clone())
            .unwrap_or_else(|| PathBuf::from("results"));
        Ok((cfg, out))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run(c) => {
            let (cfg, out) = c.load()?;
            if cfg.grid_points().len() != 1 {
                return Err(AlbError::Config(format!(
                    "`run` needs a single hyperparameter point, the config expands to {}; use `grid`",
                    cfg.grid_points().len()
                )));
            }
            let grid = execute(cfg, &out, c.threads, None)?;
            report(&grid);
            Ok(())
        }
        Command::Grid(c) => {
            let (cfg, out) = c.load()?;
            let grid = execute(cfg, &out, c.threads, None)?;
            report(&grid);
            Ok(())
        }
        Command::RankSweep { common, ranks } => {
            let (cfg, out) = common.load()?;
            let ranks = ranks
                .or_else(|| cfg.ranks.clone())
                .ok_or_else(|| AlbError::Config("rank-sweep needs --ranks or `ranks` in the config".into()))?;
            let grid = execute(cfg, &out, common.threads, Some(ranks))?;
            report(&grid);
            Ok(())
        }
        Command::IngestCheck {
            path,
            format,
            include_implicit,
        } => {
            let opts = IngestOptions {
                include_implicit,
                ..Default::default()
            };
            let table = ingest(&path, format, &opts)?;
            println!("format\t{}", format.name());
            println!("triples\t{}", table.len());
            println!("users\t{}", table.n_users());
            println!("items\t{}", table.n_items());
            println!("density\t{:.6}", table.density());
            if let Some((lo, hi)) = table.rating_range() {
                println!("ratings\t[{lo}, {hi}]");
            }
            if let Some(c) = table.columns() {
                println!("columns\t{c}");
            }
            if let Some(c) = table.checksum() {
                println!("sha256\t{c}");
            }
            Ok(())
        }
    }
}

fn execute(cfg: ExperimentConfig, out: &Path, threads: Option<usize>, ranks: Option<Vec<usize>>) -> Result<Vec<GridResult>> {
    let exp = Experiment::prepare(cfg)?;
    // Refuse before touching the output directory.
    match &ranks {
        Some(r) => exp.check_budget(exp.required_steps() * r.len() as u128, exp.config().budget_steps)?,
        None => exp.check_budget(exp.required_steps(), exp.config().budget_steps)?,
    }
    let mut writer = ResultWriter::create(out)?;
    let grids = with_threads(threads, || match &ranks {
        Some(r) => exp.rank_sweep(r, |e, rec| writer.write_run(e, rec)),
        None => exp.grid_search(|e, rec| writer.write_run(e, rec)).map(|g| vec![g]),
    })?;
    writer.finish()?;
    let table = if ranks.is_some() { "rank_sweep.csv" } else { "grid.csv" };
    write_grid_csv(&out.join(table), &grids)?;
    Ok(grids)
}

fn report(grids: &[GridResult]) {
    for g in grids {
        let b = g.best_point();
        println!(
            "{} rank={} best point {} [{}]: mean final regret {:.6} (se {:.6}, {} seeds)",
            g.policy,
            g.rank,
            b.point.index,
            b.point.describe(),
            b.mean,
            b.std_error,
            b.seeds.len()
        );
    }
}
