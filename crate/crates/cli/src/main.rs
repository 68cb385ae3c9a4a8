use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ncgauge::Result;
use ncgauge_cli::analyze::analyze_dir;
use ncgauge_cli::config::{ConfigMap, RunConfig, SweepSpec};
use ncgauge_cli::run::{resume_point, run_point, ChainPaths};
use ncgauge_cli::sweep::{resume_sweep, run_sweep, worker_count, SweepOutcome, SWEEP_FILE};

/// Monte Carlo engine for the two-copy matrix gauge model.
///
/// Exit codes: 0 success, 1 partial failure, 2 fatal error.
#[derive(Parser)]
#[command(name = "ncgauge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// key=value configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set mu=2.5`; repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(short, long, default_value = "ncgauge_out")]
    out: PathBuf,
}

impl ConfigArgs {
    fn map(&self) -> Result<ConfigMap> {
        let mut map = match &self.config {
            Some(p) => ConfigMap::load(p)?,
            None => ConfigMap::default(),
        };
        for o in &self.overrides {
            map.set(o)?;
        }
        Ok(map)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a single chain.
    Run(ConfigArgs),
    /// Run a grid over one of omega, mu, alpha for several sizes.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Worker threads (default: $NCGAUGE_WORKERS, else all cores).
        #[arg(short, long)]
        workers: Option<usize>,
    },
    /// Recompute reports and summaries from stored raw series.
    Analyze { dir: PathBuf },
    /// Finish incomplete chains from their checkpoints.
    Resume {
        dir: PathBuf,
        #[arg(short, long)]
        workers: Option<usize>,
    },
}

fn report_sweep(outcome: &SweepOutcome) -> u8 {
    for o in &outcome.completed {
        for w in &o.warnings {
            eprintln!("warning: {}/{}: {w}", o.paths.dir.display(), o.paths.tag);
        }
    }
    for (label, e) in &outcome.failed {
        eprintln!("error: {label}: {e}");
    }
    eprintln!(
        "{} chain(s) completed, {} failed",
        outcome.completed.len(),
        outcome.failed.len()
    );
    outcome.exit_code() as u8
}

fn resume_plain(dir: &Path) -> Result<u8> {
    let mut failed = 0;
    let mut done = 0;
    for paths in ChainPaths::discover(dir)? {
        if paths.is_complete() {
            continue;
        }
        match resume_point(&paths) {
            Ok(_) => done += 1,
            Err(e) => {
                eprintln!("error: {}: {e}", paths.tag);
                failed += 1;
            }
        }
    }
    eprintln!("{done} chain(s) resumed, {failed} failed");
    Ok(match (done, failed) {
        (_, 0) => 0,
        (0, _) => 2,
        _ => 1,
    })
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run(args) => {
            let cfg = RunConfig::from_map(&args.map()?)?;
            let paths = ChainPaths::new(&args.out, cfg.params.n(), 0);
            let outcome = run_point(&cfg, &paths)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            let m = &outcome.timeseries.meta;
            eprintln!(
                "{}: {} records, acceptance {:.3}, sigma {:.4}, max drift {:.2e}",
                paths.raw_csv().display(),
                outcome.timeseries.records.len(),
                m.acceptance_rate,
                m.final_sigma,
                m.max_drift
            );
            Ok(0)
        }
        Command::Sweep { cfg, workers } => {
            let spec = SweepSpec::from_map(&cfg.map()?, cfg.out.clone())?;
            let outcome = run_sweep(&spec, worker_count(workers))?;
            Ok(report_sweep(&outcome))
        }
        Command::Analyze { dir } => {
            let outcome = analyze_dir(&dir)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for (p, e) in &outcome.failed {
                eprintln!("error: {}: {e}", p.display());
            }
            eprintln!(
                "{} series analyzed, {} flagged",
                outcome.analyzed.len(),
                outcome.failed.len()
            );
            Ok(outcome.exit_code() as u8)
        }
        Command::Resume { dir, workers } => {
            if dir.join(SWEEP_FILE).is_file() {
                Ok(report_sweep(&resume_sweep(&dir, worker_count(workers))?))
            } else {
                resume_plain(&dir)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fatal: {e}");
            ExitCode::from(2)
        }
    }
}
