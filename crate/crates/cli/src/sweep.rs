//! Grid sweeps over a bounded worker pool, and per-observable summaries.
//!
//! Chain `k` of the grid (points outermost, then sizes, then replicas) uses
//! the master seed with ChaCha stream `stream + k`, so results do not
//! depend on the number of workers or the order in which chains finish.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Mutex};

use ncgauge::{Error, Result};

use crate::config::{render, ConfigMap, RunConfig, SweepSpec};
use crate::report::{parse_report, ReportRow};
use crate::run::{resume_point, run_point, ChainOutcome, ChainPaths};

/// Environment variable overriding the default worker count.
pub const WORKERS_ENV: &str = "NCGAUGE_WORKERS";
pub const SWEEP_FILE: &str = "sweep.conf";
pub const SUMMARY_HEADER: &str = "axis_value,n,mean,error,tau_int";

/// Worker count: explicit value, else the environment variable, else the
/// available parallelism.
pub fn worker_count(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| {
            std::env::var(WORKERS_ENV)
                .ok()
                .and_then(|v| v.trim().parse().ok())
        })
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

#[derive(Clone, Debug)]
pub struct ChainJob {
    pub point: usize,
    pub axis_value: f64,
    pub n: usize,
    pub replica: usize,
    pub config: RunConfig,
    pub paths: ChainPaths,
}

pub fn point_dir(out: &Path, point: usize) -> PathBuf {
    out.join(format!("point_{point:03}"))
}

/// All chains of the grid in canonical order.
pub fn plan(spec: &SweepSpec) -> Result<Vec<ChainJob>> {
    let mut jobs = Vec::new();
    for (point, &value) in spec.axis_values().iter().enumerate() {
        for &n in &spec.n_list {
            for replica in 0..spec.replicas {
                let stream = spec.base.mc.stream + jobs.len() as u64;
                jobs.push(ChainJob {
                    point,
                    axis_value: value,
                    n,
                    replica,
                    config: spec.chain_config(value, n, stream)?,
                    paths: ChainPaths::new(point_dir(&spec.out, point), n, replica),
                });
            }
        }
    }
    Ok(jobs)
}

#[derive(Debug, Default)]
pub struct SweepOutcome {
    pub completed: Vec<ChainOutcome>,
    /// Chain tag (with point directory) and the error that stopped it.
    pub failed: Vec<(String, Error)>,
}

impl SweepOutcome {
    pub fn exit_code(&self) -> i32 {
        match (self.completed.is_empty(), self.failed.is_empty()) {
            (_, true) => 0,
            (false, false) => 1,
            (true, false) => 2,
        }
    }
}

/// Runs `f` over `jobs` on `workers` threads; results come back in job order.
pub fn run_pool<T, R, F>(jobs: Vec<T>, workers: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let count = jobs.len();
    let queue = Mutex::new(jobs.into_iter().enumerate().collect::<VecDeque<_>>());
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(count).max(1) {
            let tx = tx.clone();
            let (queue, f) = (&queue, &f);
            scope.spawn(move || loop {
                let next = queue.lock().unwrap().pop_front();
                let Some((k, job)) = next else { break };
                if tx.send((k, f(job))).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut slots: Vec<Option<R>> = (0..count).map(|_| None).collect();
    for (k, r) in rx {
        slots[k] = Some(r);
    }
    slots
        .into_iter()
        .map(|r| r.expect("worker dropped a job"))
        .collect()
}

fn execute(
    jobs: Vec<ChainJob>,
    workers: usize,
    runner: fn(&ChainJob) -> Result<ChainOutcome>,
) -> SweepOutcome {
    let results = run_pool(jobs, workers, |job| {
        let label = format!("{}/{}", job.paths.dir.display(), job.paths.tag);
        (label, runner(&job))
    });
    let mut outcome = SweepOutcome::default();
    for (label, r) in results {
        match r {
            Ok(o) => outcome.completed.push(o),
            Err(e) => outcome.failed.push((label, e)),
        }
    }
    outcome
}

/// Runs every chain of the grid and writes the summaries.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepOutcome> {
    spec.validate()?;
    fs::create_dir_all(&spec.out)?;
    fs::write(spec.out.join(SWEEP_FILE), render(&spec.to_map()))?;
    let jobs = plan(spec)?;
    let outcome = execute(jobs, workers, |job| run_point(&job.config, &job.paths));
    write_summaries(spec)?;
    Ok(outcome)
}

/// Finishes the incomplete chains of a sweep directory, then rewrites the
/// summaries.
pub fn resume_sweep(out: &Path, workers: usize) -> Result<SweepOutcome> {
    let spec = load_spec(out)?;
    let pending: Vec<ChainJob> = plan(&spec)?
        .into_iter()
        .filter(|j| !j.paths.is_complete())
        .collect();
    let outcome = execute(pending, workers, |job| {
        if job.paths.raw_conf().is_file() {
            resume_point(&job.paths)
        } else {
            run_point(&job.config, &job.paths)
        }
    });
    write_summaries(&spec)?;
    Ok(outcome)
}

pub fn load_spec(out: &Path) -> Result<SweepSpec> {
    SweepSpec::from_map(&ConfigMap::load(&out.join(SWEEP_FILE))?, out.to_path_buf())
}

/// One summary row per grid point and size.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub axis_value: f64,
    pub n: usize,
    pub mean: f64,
    pub error: f64,
    pub tau_int: f64,
}

/// Reads the reports of completed chains and merges replicas: the mean of
/// replica means, its error `sqrt(sum err^2) / R` and the average `tau_int`.
pub fn collect_summaries(spec: &SweepSpec) -> Result<BTreeMap<String, Vec<SummaryRow>>> {
    let mut grouped: BTreeMap<(usize, usize), (f64, Vec<Vec<ReportRow>>)> = BTreeMap::new();
    for job in plan(spec)? {
        if !job.paths.is_complete() {
            continue;
        }
        let Ok(text) = fs::read_to_string(job.paths.report()) else {
            continue;
        };
        let Ok(rows) = parse_report(&text) else {
            continue;
        };
        grouped
            .entry((job.point, job.n))
            .or_insert_with(|| (job.axis_value, Vec::new()))
            .1
            .push(rows);
    }
    let mut out: BTreeMap<String, Vec<SummaryRow>> = BTreeMap::new();
    for ((_, n), (axis_value, replicas)) in grouped {
        let mut by_obs: BTreeMap<&str, Vec<&ReportRow>> = BTreeMap::new();
        for rows in &replicas {
            for r in rows {
                by_obs.entry(r.observable.as_str()).or_default().push(r);
            }
        }
        for (obs, rs) in by_obs {
            let k = rs.len() as f64;
            out.entry(obs.to_string()).or_default().push(SummaryRow {
                axis_value,
                n,
                mean: rs.iter().map(|r| r.mean).sum::<f64>() / k,
                error: rs
                    .iter()
                    .map(|r| r.corrected_error.powi(2))
                    .sum::<f64>()
                    .sqrt()
                    / k,
                tau_int: rs.iter().map(|r| r.tau_int).sum::<f64>() / k,
            });
        }
    }
    for rows in out.values_mut() {
        rows.sort_by(|a, b| a.n.cmp(&b.n).then(a.axis_value.total_cmp(&b.axis_value)));
    }
    Ok(out)
}

pub fn render_summary(rows: &[SummaryRow]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{:?},{},{:?},{:?},{:?}",
            r.axis_value, r.n, r.mean, r.error, r.tau_int
        )
        .unwrap();
    }
    s
}

/// Rewrites `summary/<observable>.csv` from the chain reports.
pub fn write_summaries(spec: &SweepSpec) -> Result<BTreeMap<String, Vec<SummaryRow>>> {
    let dir = spec.out.join("summary");
    if dir.is_dir() {
        fs::remove_dir_all(&dir)?;
    }
    fs::create_dir_all(&dir)?;
    let all = collect_summaries(spec)?;
    for (obs, rows) in &all {
        fs::write(dir.join(format!("{obs}.csv")), render_summary(rows))?;
    }
    Ok(all)
}
