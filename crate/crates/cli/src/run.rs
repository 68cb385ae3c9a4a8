//! Single-chain execution, resumption and re-analysis on disk.
//!
//! A point directory holds `raw/`, `analysis/` and `checkpoint/`. Each chain
//! is identified by a tag `nNNN_rRR` and owns
//!
//! - `raw/<tag>.csv`: the measurement time series,
//! - `raw/<tag>.conf`: its fully resolved configuration,
//! - `analysis/<tag>.csv`: the statistics report,
//! - `analysis/<tag>.done`: the completion marker with run metadata,
//! - `checkpoint/<tag>.ckpt`: the latest resumable state.

use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use ncgauge::observables::{read_csv, write_csv, Timeseries};
use ncgauge::sampler::{Chain, ChainMeta, RunOptions};
use ncgauge::{Error, Result};

use crate::config::{ConfigMap, RunConfig};
use crate::report::{analyze_timeseries, render_report};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainPaths {
    pub dir: PathBuf,
    pub tag: String,
}

impl ChainPaths {
    pub fn new(dir: impl Into<PathBuf>, n: usize, replica: usize) -> Self {
        Self {
            dir: dir.into(),
            tag: format!("n{n:03}_r{replica:02}"),
        }
    }

    fn file(&self, sub: &str, ext: &str) -> PathBuf {
        self.dir.join(sub).join(format!("{}.{ext}", self.tag))
    }

    pub fn raw_csv(&self) -> PathBuf {
        self.file("raw", "csv")
    }
    pub fn raw_conf(&self) -> PathBuf {
        self.file("raw", "conf")
    }
    pub fn report(&self) -> PathBuf {
        self.file("analysis", "csv")
    }
    pub fn marker(&self) -> PathBuf {
        self.file("analysis", "done")
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.file("checkpoint", "ckpt")
    }

    pub fn create_dirs(&self) -> Result<()> {
        for sub in ["raw", "analysis", "checkpoint"] {
            fs::create_dir_all(self.dir.join(sub))?;
        }
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.marker().is_file()
    }

    /// Every chain with a raw configuration under `dir/raw`.
    pub fn discover(dir: &Path) -> Result<Vec<ChainPaths>> {
        let raw = dir.join("raw");
        if !raw.is_dir() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in fs::read_dir(&raw)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "conf") {
                if let Some(stem) = path.file_stem() {
                    out.push(ChainPaths {
                        dir: dir.to_path_buf(),
                        tag: stem.to_string_lossy().into_owned(),
                    });
                }
            }
        }
        out.sort_by(|a, b| a.tag.cmp(&b.tag));
        Ok(out)
    }
}

/// Outcome of a finished chain.
#[derive(Clone, Debug)]
pub struct ChainOutcome {
    pub paths: ChainPaths,
    pub timeseries: Timeseries,
    pub warnings: Vec<String>,
}

fn chain_error(e: Error, paths: &ChainPaths) -> Error {
    let ck = paths.checkpoint();
    let where_ = if ck.is_file() {
        format!("last checkpoint {}", ck.display())
    } else {
        "no checkpoint written".to_string()
    };
    match e {
        Error::Blowup(m) => Error::Blowup(format!("{m} ({where_})")),
        Error::Drift { .. } | Error::NegativeAction { .. } => {
            Error::InvalidParameter(format!("chain {} aborted: {e} ({where_})", paths.tag))
        }
        other => other,
    }
}

fn drive(mut chain: Chain, cfg: &RunConfig, paths: &ChainPaths) -> Result<ChainOutcome> {
    chain
        .run(&mut RunOptions {
            checkpoint: Some(paths.checkpoint()),
            checkpoint_every: cfg.checkpoint_every,
            ..Default::default()
        })
        .map_err(|e| chain_error(e, paths))?;
    let ts = chain.into_timeseries();
    let warnings = write_outputs(&ts, cfg, paths)?;
    Ok(ChainOutcome {
        paths: paths.clone(),
        timeseries: ts,
        warnings,
    })
}

/// Runs one chain from scratch and writes all of its files.
pub fn run_point(cfg: &RunConfig, paths: &ChainPaths) -> Result<ChainOutcome> {
    paths.create_dirs()?;
    let _ = fs::remove_file(paths.marker());
    fs::write(paths.raw_conf(), cfg.render())?;
    let chain = Chain::new(cfg.params, cfg.mc)?;
    drive(chain, cfg, paths)
}

/// Continues a chain from its checkpoint, or starts it if none exists.
pub fn resume_point(paths: &ChainPaths) -> Result<ChainOutcome> {
    let cfg = RunConfig::from_map(&ConfigMap::load(&paths.raw_conf())?)?;
    if !paths.checkpoint().is_file() {
        return run_point(&cfg, paths);
    }
    let chain = Chain::resume(&paths.checkpoint())?;
    if chain.params() != &cfg.params || chain.mc() != &cfg.mc {
        return Err(Error::Checkpoint(format!(
            "{} does not match {}",
            paths.checkpoint().display(),
            paths.raw_conf().display()
        )));
    }
    drive(chain, &cfg, paths)
}

fn write_outputs(ts: &Timeseries, cfg: &RunConfig, paths: &ChainPaths) -> Result<Vec<String>> {
    let mut buf = Vec::new();
    write_csv(&mut buf, &ts.records)?;
    fs::write(paths.raw_csv(), buf)?;
    let warnings = write_report(ts, paths)?;
    fs::write(paths.marker(), marker_text(cfg, &ts.meta, &warnings))?;
    Ok(warnings)
}

fn write_report(ts: &Timeseries, paths: &ChainPaths) -> Result<Vec<String>> {
    let (rows, warnings) = analyze_timeseries(ts);
    fs::write(paths.report(), render_report(&rows))?;
    Ok(warnings)
}

fn marker_text(cfg: &RunConfig, meta: &ChainMeta, warnings: &[String]) -> String {
    let mut s = String::from("# completed chain\n");
    s.push_str(&cfg.render());
    writeln!(s, "code_version = {}", meta.code_version).unwrap();
    writeln!(s, "rng = {}", meta.rng).unwrap();
    writeln!(s, "sweeps_done = {}", meta.sweeps_done).unwrap();
    writeln!(s, "acceptance_rate = {:?}", meta.acceptance_rate).unwrap();
    writeln!(
        s,
        "therm_acceptance_rate = {:?}",
        meta.therm_acceptance_rate
    )
    .unwrap();
    writeln!(s, "final_sigma = {:?}", meta.final_sigma).unwrap();
    writeln!(s, "max_drift = {:?}", meta.max_drift).unwrap();
    writeln!(s, "wall_time_secs = {:.3}", meta.runtime_secs).unwrap();
    for w in warnings {
        writeln!(s, "# warning: {w}").unwrap();
    }
    s
}

/// Loads a chain's raw series and configuration back into a [`Timeseries`].
/// Run metadata other than the configuration is not stored with the raw
/// data and comes back as defaults.
pub fn load_timeseries(paths: &ChainPaths) -> Result<Timeseries> {
    let cfg = RunConfig::from_map(&ConfigMap::load(&paths.raw_conf())?)?;
    let file = fs::File::open(paths.raw_csv())?;
    let records = read_csv(BufReader::new(file)).map_err(|e| match e {
        Error::InvalidParameter(m) => {
            Error::InvalidParameter(format!("{}: {m}", paths.raw_csv().display()))
        }
        other => other,
    })?;
    Ok(Timeseries {
        params: cfg.params,
        mc: cfg.mc,
        records,
        meta: ChainMeta::default(),
    })
}

/// Recomputes one chain's report from its raw files.
pub fn analyze_point(paths: &ChainPaths) -> Result<Vec<String>> {
    let ts = load_timeseries(paths)?;
    write_report(&ts, paths)
}
