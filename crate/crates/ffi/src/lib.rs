//! C ABI over `alb-core`.
//!
//! Every entry point returns an [`AlbStatus`]; on failure the message is
//! available from [`alb_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Panics never
//! cross the boundary; they surface as `ALB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use alb_core::baselines::{EpsilonGreedyPolicy, RandomPolicy};
use alb_core::error::AlbError;
use alb_core::harness::output::{write_steps, write_steps_header};
use alb_core::harness::{Experiment, ExperimentConfig};
use alb_core::metrics::{ndcg_at_k, RunRecord};
use alb_core::policy::Policy;
use alb_core::seeding::{stream, Stream};
use alb_core::state::Hyperparameters;
use alb_core::AlbPolicy;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlbStatus {
    Ok = 0,
    InvalidArgument = 1,
    Config = 2,
    Ingestion = 3,
    Budget = 4,
    Numeric = 5,
    Io = 6,
    Panic = 7,
}

/// A prepared experiment (config plus any loaded dataset).
pub struct AlbExperiment {
    inner: Experiment,
}

/// The per-step record of one completed run.
pub struct AlbRun {
    inner: RunRecord,
}

/// A policy driven step by step from the caller.
pub struct AlbPolicyHandle {
    inner: Box<dyn Policy>,
    n_users: usize,
    n_items: usize,
}

impl AlbPolicyHandle {
    fn check(&self, user: usize, items: &[usize]) -> Result<(), Failure> {
        if user >= self.n_users {
            return Err(invalid(&format!("user {user} out of range ({} users)", self.n_users)));
        }
        match items.iter().find(|&&j| j >= self.n_items) {
            Some(j) => Err(invalid(&format!("item {j} out of range ({} items)", self.n_items))),
            None => Ok(()),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &AlbError) -> AlbStatus {
    match e {
        AlbError::Config(_) => AlbStatus::Config,
        AlbError::Parse { .. } | AlbError::EmptyTable | AlbError::DatasetIo { .. } => AlbStatus::Ingestion,
        AlbError::BudgetExceeded { .. } => AlbStatus::Budget,
        AlbError::Io { .. } => AlbStatus::Io,
        AlbError::EmptyCandidateSet | AlbError::ItemOutOfRange { .. } => AlbStatus::InvalidArgument,
        AlbError::DimensionMismatch { .. }
        | AlbError::NotSquare { .. }
        | AlbError::NotSymmetric { .. }
        | AlbError::NotPositiveDefinite { .. }
        | AlbError::NonFinite => AlbStatus::Numeric,
    }
}

struct Failure(AlbStatus, String);

impl From<AlbError> for Failure {
    fn from(e: AlbError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(AlbStatus::InvalidArgument, msg.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AlbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AlbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            AlbStatus::Panic
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| invalid(&format!("{what} is null")))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| invalid("handle is null"))
}

/// Message for the last failed call on this thread; empty after success.
/// Valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn alb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// NUL-terminated library version.
#[no_mangle]
pub extern "C" fn alb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses and validates a TOML experiment configuration, loading any replay
/// dataset it names.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn alb_experiment_from_toml(toml: *const c_char, out: *mut *mut AlbExperiment) -> AlbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let text = c_str(toml, "toml")?;
        let inner = Experiment::prepare(ExperimentConfig::from_toml(text)?)?;
        *out = Box::into_raw(Box::new(AlbExperiment { inner }));
        Ok(())
    })
}

/// # Safety
/// `exp` must come from `alb_experiment_from_toml` and not be used again.
#[no_mangle]
pub unsafe extern "C" fn alb_experiment_free(exp: *mut AlbExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Number of hyperparameter grid points.
///
/// # Safety
/// `exp` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn alb_experiment_grid_points(exp: *const AlbExperiment, out: *mut usize) -> AlbStatus {
    guard(|| {
        let exp = handle(exp)?;
        *out_ptr(out, "out")? = exp.inner.config().grid_points().len();
        Ok(())
    })
}

/// Runs grid point `point` with master seed `seed`.
///
/// # Safety
/// `exp` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn alb_experiment_run(
    exp: *const AlbExperiment,
    point: usize,
    seed: u64,
    out: *mut *mut AlbRun,
) -> AlbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let exp = &handle(exp)?.inner;
        let points = exp.config().grid_points();
        let p = points
            .get(point)
            .ok_or_else(|| invalid(&format!("grid point {point} out of range ({} points)", points.len())))?;
        let inner = exp.run_once(p, seed)?;
        *out = Box::into_raw(Box::new(AlbRun { inner }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from `alb_experiment_run` and not be used again.
#[no_mangle]
pub unsafe extern "C" fn alb_run_free(run: *mut AlbRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of steps in the run; 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn alb_run_len(run: *const AlbRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.steps.len())
}

/// Copies the instantaneous regrets into `buf`, which must hold `len` values
/// with `len` at least the run length.
///
/// # Safety
/// `run` must be a live handle; `buf` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn alb_run_regrets(run: *const AlbRun, buf: *mut f64, len: usize) -> AlbStatus {
    guard(|| {
        let run = &handle(run)?.inner;
        let n = run.steps.len();
        if len < n {
            return Err(invalid(&format!("buffer holds {len} values, run has {n} steps")));
        }
        if n == 0 {
            return Ok(());
        }
        if buf.is_null() {
            return Err(invalid("buf is null"));
        }
        let dst = std::slice::from_raw_parts_mut(buf, n);
        for (d, s) in dst.iter_mut().zip(&run.steps) {
            *d = s.regret;
        }
        Ok(())
    })
}

/// Final cumulative regret.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn alb_run_cumulative_regret(run: *const AlbRun, out: *mut f64) -> AlbStatus {
    guard(|| {
        let run = &handle(run)?.inner;
        *out_ptr(out, "out")? = run.final_regret();
        Ok(())
    })
}

/// Writes the run as a per-step CSV file (header included).
///
/// # Safety
/// `run` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn alb_run_write_csv(run: *const AlbRun, path: *const c_char) -> AlbStatus {
    guard(|| {
        let run = &handle(run)?.inner;
        let path = c_str(path, "path")?;
        let io = |e: std::io::Error| Failure(AlbStatus::Io, format!("{path}: {e}"));
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        write_steps_header(&mut f).map_err(io)?;
        write_steps(&mut f, run).map_err(io)?;
        std::io::Write::flush(&mut f).map_err(io)
    })
}

/// Creates a policy by name: `"alb"`, `"egreedy"` or `"random"`. `lambda`
/// regularizes both factors; `sigma` is used by ALB, `epsilon` by
/// ε-greedy. `seed` drives initialization and policy randomness.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn alb_policy_new(
    name: *const c_char,
    n_users: usize,
    n_items: usize,
    rank: usize,
    lambda: f64,
    sigma: f64,
    epsilon: f64,
    seed: u64,
    out: *mut *mut AlbPolicyHandle,
) -> AlbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        if n_users == 0 || n_items == 0 {
            return Err(invalid("n_users and n_items must be positive"));
        }
        let name = c_str(name, "name")?;
        let mut hp = Hyperparameters {
            lambda1: lambda,
            lambda2: lambda,
            sigma,
            rank,
            ..Default::default()
        };
        let mut init = stream(seed, Stream::ModelInit);
        let inner: Box<dyn Policy> = match name {
            "alb" => Box::new(AlbPolicy::new(n_users, n_items, hp, &mut init)?),
            "egreedy" => {
                if !(0.0..=1.0).contains(&epsilon) {
                    return Err(Failure(AlbStatus::Config, format!("epsilon must lie in [0, 1], got {epsilon}")));
                }
                hp.sigma = 0.0;
                hp.s = 0.0;
                Box::new(EpsilonGreedyPolicy::new(
                    n_users,
                    n_items,
                    hp,
                    epsilon,
                    &mut init,
                    stream(seed, Stream::Policy),
                )?)
            }
            "random" => Box::new(RandomPolicy::new(stream(seed, Stream::Policy))),
            other => return Err(Failure(AlbStatus::Config, format!("unknown policy `{other}`"))),
        };
        *out = Box::into_raw(Box::new(AlbPolicyHandle { inner, n_users, n_items }));
        Ok(())
    })
}

/// # Safety
/// `policy` must come from `alb_policy_new` and not be used again.
#[no_mangle]
pub unsafe extern "C" fn alb_policy_free(policy: *mut AlbPolicyHandle) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Chooses an item for `user` among `candidates`. When `scores` is non-null
/// it receives one score per candidate.
///
/// # Safety
/// `policy` must be a live handle; `candidates` readable for `n` values;
/// `scores` null or writable for `n` doubles; `out_item` writable.
#[no_mangle]
pub unsafe extern "C" fn alb_policy_select(
    policy: *mut AlbPolicyHandle,
    user: usize,
    candidates: *const usize,
    n: usize,
    scores: *mut f64,
    out_item: *mut usize,
) -> AlbStatus {
    guard(|| {
        let policy = policy.as_mut().ok_or_else(|| invalid("handle is null"))?;
        let out_item = out_ptr(out_item, "out_item")?;
        let candidates = slice(candidates, n, "candidates")?;
        policy.check(user, candidates)?;
        let sel = policy.inner.select(user, candidates)?;
        if !scores.is_null() {
            std::slice::from_raw_parts_mut(scores, n).copy_from_slice(&sel.scores);
        }
        *out_item = sel.item;
        Ok(())
    })
}

/// Feeds back the rating `user` gave to `item`.
///
/// # Safety
/// `policy` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn alb_policy_observe(
    policy: *mut AlbPolicyHandle,
    user: usize,
    item: usize,
    rating: f64,
) -> AlbStatus {
    guard(|| {
        let policy = policy.as_mut().ok_or_else(|| invalid("handle is null"))?;
        if !rating.is_finite() {
            return Err(Failure(AlbStatus::Numeric, "rating is not finite".into()));
        }
        policy.check(user, &[item])?;
        policy.inner.observe(user, item, rating)?;
        Ok(())
    })
}

/// NDCG@k of the ranking induced by `scores` (descending, ties to the lower
/// position) against `relevance`, both of length `n`.
///
/// # Safety
/// `scores` and `relevance` readable for `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn alb_ndcg_at_k(
    scores: *const f64,
    relevance: *const f64,
    n: usize,
    k: usize,
    out: *mut f64,
) -> AlbStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let scores = slice(scores, n, "scores")?;
        let rel = slice(relevance, n, "relevance")?;
        if n == 0 || k == 0 {
            return Err(invalid("n and k must be positive"));
        }
        if scores.iter().chain(rel).any(|v| !v.is_finite()) {
            return Err(Failure(AlbStatus::Numeric, "non-finite input".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        *out = ndcg_at_k(&order, |j| rel[j], k.min(n));
        Ok(())
    })
}
