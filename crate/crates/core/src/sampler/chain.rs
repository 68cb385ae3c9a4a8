use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::checkpoint::{write_checkpoint, Checkpoint};
use super::{
    adapt_sigma, metropolis_accept, ChainMeta, McConfig, StartMode, WeightMode, DRIFT_ABORT,
    NEGATIVE_ACTION_ABORT,
};
use crate::error::{Error, Result};
use crate::model::incremental::ActionCache;
use crate::model::{
    random_configuration, ActionBreakdown, FieldConfiguration, ModelParams, FIELDS_PER_COPY,
};
use crate::observables::{measure, MeasurementRecord, Timeseries};

/// Source of single-copy action values and single-entry deltas.
pub trait Evaluator: Sized {
    fn build(cfg: &FieldConfiguration, params: &ModelParams) -> Result<Self>;
    fn total(&self) -> f64;
    fn breakdown(&self) -> Result<ActionBreakdown>;
    fn entry(&self, field: usize, row: usize, col: usize) -> Complex64;
    /// Stages one entry change and returns the change of the copy action.
    fn propose(&mut self, field: usize, row: usize, col: usize, entry: Complex64) -> Result<f64>;
    fn accept(&mut self);
    fn reject(&mut self);
    /// Recomputes from scratch and returns `|cached - fresh| / (1 + |fresh|)`.
    fn refresh(&mut self, params: &ModelParams) -> Result<f64>;
    fn configuration(&self) -> FieldConfiguration;
}

impl Evaluator for ActionCache {
    fn build(cfg: &FieldConfiguration, params: &ModelParams) -> Result<Self> {
        ActionCache::new(cfg, params)
    }
    fn total(&self) -> f64 {
        ActionCache::total(self)
    }
    fn breakdown(&self) -> Result<ActionBreakdown> {
        ActionCache::breakdown(self)
    }
    fn entry(&self, field: usize, row: usize, col: usize) -> Complex64 {
        ActionCache::entry(self, field, row, col)
    }
    fn propose(&mut self, field: usize, row: usize, col: usize, entry: Complex64) -> Result<f64> {
        ActionCache::propose(self, field, row, col, entry)
    }
    fn accept(&mut self) {
        ActionCache::accept(self);
    }
    fn reject(&mut self) {
        ActionCache::reject(self)
    }
    fn refresh(&mut self, params: &ModelParams) -> Result<f64> {
        ActionCache::refresh(self, params)
    }
    fn configuration(&self) -> FieldConfiguration {
        ActionCache::configuration(self)
    }
}

/// Both copies, the generator and the acceptance counters.
#[derive(Clone, Debug)]
pub struct ChainState<E: Evaluator = ActionCache> {
    pub copies: [E; 2],
    pub rng: ChaCha8Rng,
    pub accept_count: u64,
    pub propose_count: u64,
    pub window_accept: u64,
    pub window_propose: u64,
    pub sigma: f64,
}

impl<E: Evaluator> ChainState<E> {
    pub fn s_a(&self) -> f64 {
        self.copies[0].total()
    }

    pub fn s_b(&self) -> f64 {
        self.copies[1].total()
    }

    /// One pass over all `10 n^2` entries.
    pub fn sweep(&mut self, n: usize, weight_mode: WeightMode) -> Result<()> {
        for copy in 0..2 {
            let coupling = match weight_mode {
                WeightMode::ProductTwoCopies => self.copies[1 - copy].total(),
                WeightMode::SingleCopy => 1.0,
            };
            for field in 0..FIELDS_PER_COPY {
                for row in 0..n {
                    for col in 0..n {
                        self.update_entry(copy, field, row, col, coupling)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn update_entry(
        &mut self,
        copy: usize,
        field: usize,
        row: usize,
        col: usize,
        coupling: f64,
    ) -> Result<()> {
        let re: f64 = StandardNormal.sample(&mut self.rng);
        let im: f64 = StandardNormal.sample(&mut self.rng);
        let ev = &mut self.copies[copy];
        let proposal = ev.entry(field, row, col) + Complex64::new(self.sigma * re, self.sigma * im);
        let delta = ev.propose(field, row, col, proposal)? * coupling;
        if !delta.is_finite() {
            ev.reject();
            return Err(Error::Blowup(format!(
                "non-finite weight change at copy {copy}, field {field}, entry ({row}, {col})"
            )));
        }
        self.propose_count += 1;
        self.window_propose += 1;
        let accepted = delta <= 0.0 || metropolis_accept(delta, self.rng.random::<f64>());
        if accepted {
            ev.accept();
            self.accept_count += 1;
            self.window_accept += 1;
        } else {
            ev.reject();
        }
        Ok(())
    }

    pub fn adapt(&mut self, target: f64) {
        self.sigma = adapt_sigma(self.sigma, self.window_accept, self.window_propose, target);
        self.window_accept = 0;
        self.window_propose = 0;
    }
}

/// Measurement callback, invoked on the chain's own thread.
pub type Observer<'a> = &'a mut dyn FnMut(&MeasurementRecord);

#[derive(Default)]
pub struct RunOptions<'a> {
    pub observers: Vec<Observer<'a>>,
    /// Checkpoint file, rewritten at refresh points.
    pub checkpoint: Option<PathBuf>,
    /// Minimum number of sweeps between checkpoint writes.
    pub checkpoint_every: u64,
    /// Stop (without finishing) once this many sweeps are done.
    pub stop_after: Option<u64>,
}

/// A resumable chain: state plus schedule progress and collected records.
#[derive(Clone, Debug)]
pub struct Chain<E: Evaluator = ActionCache> {
    params: ModelParams,
    mc: McConfig,
    state: ChainState<E>,
    sweeps_done: u64,
    records: Vec<MeasurementRecord>,
    max_drift: f64,
    therm_counts: (u64, u64),
    measure_counts: (u64, u64),
    runtime_secs: f64,
    last_checkpoint: u64,
}

pub(crate) fn chain_rng(mc: &McConfig) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    rng.set_stream(mc.stream);
    rng
}

impl<E: Evaluator> Chain<E> {
    pub fn new(params: ModelParams, mc: McConfig) -> Result<Self> {
        mc.validate()?;
        let mut rng = chain_rng(&mc);
        let n = params.n();
        let (a, b) = match mc.start {
            StartMode::Cold => (FieldConfiguration::vacuum(n), FieldConfiguration::vacuum(n)),
            StartMode::Hot(scale) => (
                random_configuration(&params, scale, &mut rng)?,
                random_configuration(&params, scale, &mut rng)?,
            ),
        };
        let state = ChainState {
            copies: [E::build(&a, &params)?, E::build(&b, &params)?],
            rng,
            accept_count: 0,
            propose_count: 0,
            window_accept: 0,
            window_propose: 0,
            sigma: mc.step_sigma,
        };
        Ok(Self {
            params,
            mc,
            state,
            sweeps_done: 0,
            records: Vec::new(),
            max_drift: 0.0,
            therm_counts: (0, 0),
            measure_counts: (0, 0),
            runtime_secs: 0.0,
            last_checkpoint: 0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn mc(&self) -> &McConfig {
        &self.mc
    }

    pub fn state(&self) -> &ChainState<E> {
        &self.state
    }

    pub fn sweeps_done(&self) -> u64 {
        self.sweeps_done
    }

    pub fn records(&self) -> &[MeasurementRecord] {
        &self.records
    }

    pub fn total_sweeps(&self) -> u64 {
        self.mc.n_therm + self.mc.n_measure
    }

    pub fn is_finished(&self) -> bool {
        self.sweeps_done >= self.total_sweeps()
    }

    /// Runs until the schedule is complete or `opts.stop_after` is reached.
    pub fn run(&mut self, opts: &mut RunOptions<'_>) -> Result<()> {
        let start = Instant::now();
        let result = self.run_inner(opts, start);
        if let Err(Error::Blowup(msg)) = &result {
            let msg = match &opts.checkpoint {
                Some(path) => {
                    let dump = blowup_path(path);
                    match write_checkpoint(&dump, &self.to_checkpoint()) {
                        Ok(()) => format!("{msg}; state dumped to {}", dump.display()),
                        Err(e) => format!("{msg}; state dump to {} failed: {e}", dump.display()),
                    }
                }
                None => msg.clone(),
            };
            return Err(Error::Blowup(msg));
        }
        result
    }

    fn run_inner(&mut self, opts: &mut RunOptions<'_>, start: Instant) -> Result<()> {
        let base_runtime = self.runtime_secs;
        while !self.is_finished() {
            if opts.stop_after.is_some_and(|s| self.sweeps_done >= s) {
                break;
            }
            let refreshed = self.step(&mut opts.observers)?;
            self.runtime_secs = base_runtime + start.elapsed().as_secs_f64();
            if refreshed {
                if let Some(path) = &opts.checkpoint {
                    let due =
                        self.sweeps_done - self.last_checkpoint >= opts.checkpoint_every.max(1);
                    if due || self.is_finished() {
                        write_checkpoint(path, &self.to_checkpoint())?;
                        self.last_checkpoint = self.sweeps_done;
                    }
                }
            }
        }
        self.runtime_secs = base_runtime + start.elapsed().as_secs_f64();
        Ok(())
    }

    /// One sweep plus its bookkeeping. Returns whether the caches were
    /// refreshed, which is when the chain is exactly checkpointable.
    fn step(&mut self, observers: &mut [Observer<'_>]) -> Result<bool> {
        let (acc0, prop0) = (self.state.accept_count, self.state.propose_count);
        self.state.sweep(self.params.n(), self.mc.weight_mode)?;
        self.sweeps_done += 1;
        let t = self.sweeps_done;
        let (da, dp) = (
            self.state.accept_count - acc0,
            self.state.propose_count - prop0,
        );

        for (copy, s) in [self.state.s_a(), self.state.s_b()].into_iter().enumerate() {
            if s < NEGATIVE_ACTION_ABORT {
                return Err(Error::NegativeAction {
                    value: s,
                    sweep: t,
                    copy,
                });
            }
        }

        if t <= self.mc.n_therm {
            self.therm_counts.0 += da;
            self.therm_counts.1 += dp;
            if t % self.mc.adapt_interval == 0 {
                self.state.adapt(self.mc.target_accept);
            }
        } else {
            self.measure_counts.0 += da;
            self.measure_counts.1 += dp;
            if (t - self.mc.n_therm) % self.mc.measure_every == 0 {
                let record = self.measure(t)?;
                for obs in observers.iter_mut() {
                    obs(&record);
                }
                self.records.push(record);
            }
        }

        let refresh = t % self.mc.recompute_every == 0 || self.is_finished();
        if refresh {
            for ev in &mut self.state.copies {
                let drift = ev.refresh(&self.params)?;
                self.max_drift = self.max_drift.max(drift);
                if drift > DRIFT_ABORT {
                    return Err(Error::Drift { drift, sweep: t });
                }
            }
        }
        Ok(refresh)
    }

    fn measure(&self, sweep: u64) -> Result<MeasurementRecord> {
        let [a, b] = &self.state.copies;
        Ok(measure(
            sweep,
            &a.configuration(),
            &b.configuration(),
            &a.breakdown()?,
            &b.breakdown()?,
            self.mc.weight_mode,
        ))
    }

    pub fn meta(&self) -> ChainMeta {
        let rate = |(a, p): (u64, u64)| if p == 0 { 0.0 } else { a as f64 / p as f64 };
        let measured = if self.measure_counts.1 > 0 {
            self.measure_counts
        } else {
            self.therm_counts
        };
        ChainMeta {
            final_sigma: self.state.sigma,
            acceptance_rate: rate(measured),
            therm_acceptance_rate: rate(self.therm_counts),
            max_drift: self.max_drift,
            sweeps_done: self.sweeps_done,
            runtime_secs: self.runtime_secs,
            ..ChainMeta::default()
        }
    }

    pub fn timeseries(&self) -> Timeseries {
        Timeseries {
            params: self.params,
            mc: self.mc,
            records: self.records.clone(),
            meta: self.meta(),
        }
    }

    pub fn into_timeseries(self) -> Timeseries {
        let meta = self.meta();
        Timeseries {
            params: self.params,
            mc: self.mc,
            records: self.records,
            meta,
        }
    }

    pub(crate) fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            params: self.params,
            mc: self.mc,
            rng_seed: self.state.rng.get_seed(),
            rng_stream: self.state.rng.get_stream(),
            rng_word_pos: self.state.rng.get_word_pos(),
            accept_count: self.state.accept_count,
            propose_count: self.state.propose_count,
            window_accept: self.state.window_accept,
            window_propose: self.state.window_propose,
            sigma: self.state.sigma,
            sweeps_done: self.sweeps_done,
            max_drift: self.max_drift,
            therm_counts: self.therm_counts,
            measure_counts: self.measure_counts,
            runtime_secs: self.runtime_secs,
            copies: [
                self.state.copies[0].configuration(),
                self.state.copies[1].configuration(),
            ],
            records: self.records.clone(),
        }
    }

    /// Rebuilds a chain; continuation is bitwise identical when the
    /// checkpoint was taken at a refresh point.
    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        ck.mc.validate()?;
        let mut rng = ChaCha8Rng::from_seed(ck.rng_seed);
        rng.set_stream(ck.rng_stream);
        rng.set_word_pos(ck.rng_word_pos);
        let [a, b] = &ck.copies;
        let state = ChainState {
            copies: [E::build(a, &ck.params)?, E::build(b, &ck.params)?],
            rng,
            accept_count: ck.accept_count,
            propose_count: ck.propose_count,
            window_accept: ck.window_accept,
            window_propose: ck.window_propose,
            sigma: ck.sigma,
        };
        Ok(Self {
            params: ck.params,
            mc: ck.mc,
            state,
            sweeps_done: ck.sweeps_done,
            records: ck.records,
            max_drift: ck.max_drift,
            therm_counts: ck.therm_counts,
            measure_counts: ck.measure_counts,
            runtime_secs: ck.runtime_secs,
            last_checkpoint: ck.sweeps_done,
        })
    }

    pub fn resume(path: &Path) -> Result<Self> {
        Self::from_checkpoint(super::read_checkpoint(path)?)
    }
}

fn blowup_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".blowup");
    path.with_file_name(name)
}

/// Runs a complete chain with the incremental evaluator.
pub fn run_chain(
    params: ModelParams,
    mc: McConfig,
    observers: Vec<Observer<'_>>,
) -> Result<Timeseries> {
    let mut chain: Chain = Chain::new(params, mc)?;
    chain.run(&mut RunOptions {
        observers,
        ..Default::default()
    })?;
    Ok(chain.into_timeseries())
}
