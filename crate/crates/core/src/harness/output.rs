//! Result files: a long-format per-step CSV, one JSON metadata document per
//! run, and summary tables for grids and rank sweeps.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{AlbError, Result};
use crate::metrics::{RunRecord, StepRecord};

use super::{Experiment, GridResult};

pub const STEPS_HEADER: &str = "run_id,policy,seed,t,user,item,y,regret,cum_regret,ndcg,avg_cum_ndcg";
pub const GRID_HEADER: &str = "policy,rank,point,lambda1,lambda2,sigma,epsilon,seeds,mean_regret,std_error,best";
pub const STEPS_FILE: &str = "steps.csv";
pub const META_DIR: &str = "meta";
pub const NDCG_CONVENTION: &str =
    "per-candidate policy scores rank the arriving user's candidate set; relevance is the true rating shifted to be nonnegative";

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn write_steps_header<W: Write>(w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{STEPS_HEADER}")
}

/// Appends one row per step of `rec`.
pub fn write_steps<W: Write>(w: &mut W, rec: &RunRecord) -> std::io::Result<()> {
    let mut cum = 0.0;
    let mut ndcg_sum = 0.0;
    for s in &rec.steps {
        cum += s.regret;
        ndcg_sum += s.ndcg;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            rec.run_id,
            rec.policy,
            rec.seed,
            s.t,
            s.user,
            s.item,
            fmt_f64(s.rating),
            fmt_f64(s.regret),
            fmt_f64(cum),
            fmt_f64(s.ndcg),
            fmt_f64(ndcg_sum / s.t as f64),
        )?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RunMeta<'a> {
    run_id: &'a str,
    policy: &'a str,
    seed: u64,
    horizon: usize,
    environment: &'a str,
    parameters: &'a serde_json::Value,
    config: &'a super::ExperimentConfig,
    dataset_source: Option<&'a str>,
    dataset_sha256: Option<&'a str>,
    dataset_columns: Option<usize>,
    ndcg_convention: &'a str,
    library_version: &'a str,
    timestamp_unix: u64,
}

pub fn run_metadata(exp: &Experiment, rec: &RunRecord) -> serde_json::Value {
    let table = exp.table();
    let meta = RunMeta {
        run_id: &rec.run_id,
        policy: &rec.policy,
        seed: rec.seed,
        horizon: rec.steps.len(),
        environment: &rec.environment,
        parameters: &rec.parameters,
        config: exp.config(),
        dataset_source: table.map(|t| t.source()),
        dataset_sha256: table.and_then(|t| t.checksum()),
        dataset_columns: table.and_then(|t| t.columns()),
        ndcg_convention: NDCG_CONVENTION,
        library_version: env!("CARGO_PKG_VERSION"),
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    serde_json::to_value(meta).expect("metadata serializes")
}

/// Streams run records into `dir/steps.csv` and `dir/meta/<run_id>.json`.
pub struct ResultWriter {
    dir: PathBuf,
    steps: BufWriter<File>,
    rows: usize,
}

impl ResultWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir.join(META_DIR)).map_err(|e| AlbError::io(format!("creating {}", dir.display()), e))?;
        let path = dir.join(STEPS_FILE);
        let file = File::create(&path).map_err(|e| AlbError::io(format!("creating {}", path.display()), e))?;
        let mut steps = BufWriter::new(file);
        write_steps_header(&mut steps).map_err(|e| AlbError::io("writing steps header", e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            steps,
            rows: 0,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn write_run(&mut self, exp: &Experiment, rec: &RunRecord) -> Result<()> {
        write_steps(&mut self.steps, rec).map_err(|e| AlbError::io("writing steps", e))?;
        self.rows += rec.steps.len();
        let path = self.dir.join(META_DIR).join(format!("{}.json", rec.run_id));
        let text = serde_json::to_string_pretty(&run_metadata(exp, rec)).expect("json");
        fs::write(&path, text + "\n").map_err(|e| AlbError::io(format!("writing {}", path.display()), e))
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.steps.flush().map_err(|e| AlbError::io("flushing steps", e))?;
        Ok(self.dir)
    }
}

pub fn write_grid_csv(path: &Path, grids: &[GridResult]) -> Result<()> {
    let mut out = String::from(GRID_HEADER);
    out.push('\n');
    for g in grids {
        for (i, p) in g.points.iter().enumerate() {
            let seeds: Vec<String> = p.seeds.iter().map(u64::to_string).collect();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                g.policy,
                g.rank,
                p.point.index,
                fmt_opt(p.point.lambda1),
                fmt_opt(p.point.lambda2),
                fmt_opt(p.point.sigma),
                fmt_opt(p.point.epsilon),
                seeds.join(" "),
                fmt_f64(p.mean),
                fmt_f64(p.std_error),
                i == g.best,
            ));
        }
    }
    fs::write(path, out).map_err(|e| AlbError::io(format!("writing {}", path.display()), e))
}

/// One row of a reloaded steps file.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub run_id: String,
    pub policy: String,
    pub seed: u64,
    pub step: StepRecord,
    pub cum_regret: f64,
    pub avg_cum_ndcg: f64,
}

/// Parses a steps file, checking the header and every field.
pub fn read_steps(path: &Path) -> Result<Vec<StepRow>> {
    let file = File::open(path).map_err(|e| AlbError::io(format!("opening {}", path.display()), e))?;
    let bad = |line: usize, message: String| AlbError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rows = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let n = idx + 1;
        let line = line.map_err(|e| AlbError::io(format!("reading {}", path.display()), e))?;
        if n == 1 {
            if line != STEPS_HEADER {
                return Err(bad(n, format!("unexpected header `{line}`")));
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(bad(n, format!("expected 11 fields, found {}", f.len())));
        }
        let int = |i: usize| f[i].parse::<u64>().map_err(|e| bad(n, format!("field {}: {e}", i + 1)));
        let float = |i: usize| f[i].parse::<f64>().map_err(|e| bad(n, format!("field {}: {e}", i + 1)));
        rows.push(StepRow {
            run_id: f[0].to_string(),
            policy: f[1].to_string(),
            seed: int(2)?,
            step: StepRecord {
                t: int(3)? as usize,
                user: int(4)? as usize,
                item: int(5)? as usize,
                rating: float(6)?,
                regret: float(7)?,
                ndcg: float(9)?,
            },
            cum_regret: float(8)?,
            avg_cum_ndcg: float(10)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: u64, regrets: &[f64]) -> RunRecord {
        RunRecord {
            run_id: format!("alb-p0-k2-s{seed}"),
            policy: "alb".into(),
            seed,
            environment: "test".into(),
            parameters: serde_json::Value::Null,
            steps: regrets
                .iter()
                .enumerate()
                .map(|(i, &r)| StepRecord {
                    t: i + 1,
                    user: i % 3,
                    item: i % 5,
                    rating: 1.0 / (i as f64 + 3.0),
                    regret: r,
                    ndcg: 0.1 * i as f64 % 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn one_step_run_gives_header_and_row() {
        let mut buf = Vec::new();
        write_steps_header(&mut buf).unwrap();
        write_steps(&mut buf, &record(0, &[0.25])).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], STEPS_HEADER);
        assert!(lines[1].starts_with("alb-p0-k2-s0,alb,0,1,0,0,"));
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, std::f64::consts::PI, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn reload_recomputes_cumulative_regret_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("steps.csv");
        let recs = [record(0, &[0.3, 0.1, 0.7, 1e-17]), record(1, &[0.9, -0.2, 0.4, 0.6])];
        let mut f = File::create(&path).unwrap();
        write_steps_header(&mut f).unwrap();
        for r in &recs {
            write_steps(&mut f, r).unwrap();
        }
        drop(f);
        let rows = read_steps(&path).unwrap();
        assert_eq!(rows.len(), 8);
        for r in &recs {
            let mine: Vec<&StepRow> = rows.iter().filter(|row| row.seed == r.seed).collect();
            assert_eq!(mine.len(), 4);
            let mut cum = 0.0;
            for (row, step) in mine.iter().zip(&r.steps) {
                assert_eq!(row.step, *step);
                cum += row.step.regret;
                assert_eq!(row.cum_regret, cum);
            }
            assert_eq!(cum, r.final_regret());
        }
    }

    #[test]
    fn rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("steps.csv");
        fs::write(&path, "t,regret\n").unwrap();
        assert!(matches!(read_steps(&path), Err(AlbError::Parse { line: 1, .. })));
        fs::write(&path, format!("{STEPS_HEADER}\na,b,c\n")).unwrap();
        assert!(matches!(read_steps(&path), Err(AlbError::Parse { line: 2, .. })));
    }
}
