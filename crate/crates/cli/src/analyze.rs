//! Re-analysis of stored raw series without re-simulation.

use std::fs;
use std::path::{Path, PathBuf};

use ncgauge::{Error, Result};

use crate::run::{analyze_point, ChainPaths};
use crate::sweep::{load_spec, write_summaries, SWEEP_FILE};

#[derive(Debug, Default)]
pub struct AnalyzeOutcome {
    pub analyzed: Vec<PathBuf>,
    /// Raw series that failed validation; their reports are removed.
    pub failed: Vec<(PathBuf, Error)>,
    pub warnings: Vec<String>,
}

impl AnalyzeOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.failed.is_empty() {
            0
        } else {
            1
        }
    }
}

/// Chain directories: `dir` itself and its immediate subdirectories.
fn chain_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = vec![dir.to_path_buf()];
    let mut subs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subs.sort();
    dirs.extend(subs);
    Ok(dirs)
}

pub fn analyze_dir(dir: &Path) -> Result<AnalyzeOutcome> {
    if !dir.is_dir() {
        return Err(Error::InvalidParameter(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let mut outcome = AnalyzeOutcome::default();
    for d in chain_dirs(dir)? {
        for paths in ChainPaths::discover(&d)? {
            if !paths.raw_csv().is_file() {
                continue;
            }
            match analyze_point(&paths) {
                Ok(w) => {
                    outcome.warnings.extend(
                        w.into_iter()
                            .map(|w| format!("{}: {w}", paths.raw_csv().display())),
                    );
                    outcome.analyzed.push(paths.raw_csv());
                }
                Err(e) => {
                    let _ = fs::remove_file(paths.report());
                    outcome.failed.push((paths.raw_csv(), e));
                }
            }
        }
    }
    if outcome.analyzed.is_empty() && outcome.failed.is_empty() {
        outcome
            .warnings
            .push(format!("no time series found under {}", dir.display()));
    }
    if dir.join(SWEEP_FILE).is_file() {
        write_summaries(&load_spec(dir)?)?;
    }
    Ok(outcome)
}
