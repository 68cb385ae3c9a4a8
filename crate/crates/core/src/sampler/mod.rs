//! Random-walk Metropolis over the two-copy, ten-matrix state.
//!
//! Every sweep visits each entry of the five matrices of copy `a`, then of
//! copy `b`, proposing `entry + sigma (xi_re + i xi_im)` with standard normal
//! `xi`. The step size adapts only during thermalization.

mod chain;
mod checkpoint;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use chain::{run_chain, Chain, ChainState, Evaluator, RunOptions};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

/// Name of the generator behind every chain, recorded in output metadata.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed) + set_stream(stream)";

/// Relative cache drift at a refresh point that aborts the chain.
pub const DRIFT_ABORT: f64 = 1e-6;

/// A copy action below this value means the chain left the region where
/// the weight is normalizable.
pub const NEGATIVE_ACTION_ABORT: f64 = -1e-6;

pub const SIGMA_MIN: f64 = 1e-6;
pub const SIGMA_MAX: f64 = 10.0;
const ADAPT_BAND: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// `exp(-S_a S_b)`.
    #[default]
    ProductTwoCopies,
    /// `exp(-S_a - S_b)`: two independent single-copy replicas, with
    /// `s_tot = s_a`.
    SingleCopy,
}

impl WeightMode {
    pub fn name(self) -> &'static str {
        match self {
            WeightMode::ProductTwoCopies => "product_two_copies",
            WeightMode::SingleCopy => "single_copy",
        }
    }
}

impl fmt::Display for WeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "product_two_copies" | "product" => Ok(WeightMode::ProductTwoCopies),
            "single_copy" | "single" => Ok(WeightMode::SingleCopy),
            other => Err(Error::InvalidParameter(format!(
                "unknown weight mode `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum StartMode {
    /// All fields zero, i.e. the classical vacuum.
    #[default]
    Cold,
    /// Gaussian fields of the given standard deviation per component.
    Hot(f64),
}

impl fmt::Display for StartMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StartMode::Cold => f.write_str("cold"),
            StartMode::Hot(s) => write!(f, "hot:{s:?}"),
        }
    }
}

impl FromStr for StartMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "cold" {
            return Ok(StartMode::Cold);
        }
        if s == "hot" {
            return Ok(StartMode::Hot(1.0));
        }
        if let Some(scale) = s.strip_prefix("hot:") {
            let v: f64 = scale
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad hot-start scale `{scale}`")))?;
            return Ok(StartMode::Hot(v));
        }
        Err(Error::InvalidParameter(format!("unknown start mode `{s}`")))
    }
}

/// Monte Carlo schedule. Defaults are plumbing choices, not tuned physics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McConfig {
    pub n_therm: u64,
    pub n_measure: u64,
    pub measure_every: u64,
    pub step_sigma: f64,
    pub target_accept: f64,
    pub adapt_interval: u64,
    pub recompute_every: u64,
    pub seed: u64,
    /// ChaCha stream; distinct streams of one seed never overlap.
    pub stream: u64,
    pub weight_mode: WeightMode,
    pub start: StartMode,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_therm: 2_000,
            n_measure: 10_000,
            measure_every: 1,
            step_sigma: 0.1,
            target_accept: 0.4,
            adapt_interval: 20,
            recompute_every: 100,
            seed: 1,
            stream: 0,
            weight_mode: WeightMode::default(),
            start: StartMode::default(),
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.measure_every == 0 {
            return bad("measure_every must be >= 1".into());
        }
        if self.recompute_every == 0 {
            return bad("recompute_every must be >= 1".into());
        }
        if self.adapt_interval == 0 {
            return bad("adapt_interval must be >= 1".into());
        }
        if !(self.step_sigma > 0.0 && self.step_sigma.is_finite()) {
            return bad(format!("step_sigma must be > 0, got {}", self.step_sigma));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            ));
        }
        if let StartMode::Hot(s) = self.start {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("hot-start scale must be > 0, got {s}"));
            }
        }
        Ok(())
    }
}

/// Metropolis decision for a change `delta` of the weight exponent and a
/// uniform variate `u` in `[0, 1)`.
pub fn metropolis_accept(delta: f64, u: f64) -> bool {
    delta <= 0.0 || u < (-delta).exp()
}

/// Step-size update from the acceptance over the last adaptation window.
pub fn adapt_sigma(sigma: f64, accepted: u64, proposed: u64, target: f64) -> f64 {
    if proposed == 0 {
        return sigma;
    }
    let rate = accepted as f64 / proposed as f64;
    let next = if rate > target + ADAPT_BAND {
        sigma * 1.1
    } else if rate < target - ADAPT_BAND {
        sigma * 0.9
    } else {
        sigma
    };
    next.clamp(SIGMA_MIN, SIGMA_MAX)
}

/// Summary of a finished (or checkpointed) chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainMeta {
    pub final_sigma: f64,
    /// Acceptance over the measurement phase (thermalization if none ran).
    pub acceptance_rate: f64,
    pub therm_acceptance_rate: f64,
    /// Largest relative refresh drift seen over the whole chain.
    pub max_drift: f64,
    pub sweeps_done: u64,
    pub runtime_secs: f64,
    pub code_version: String,
    pub rng: String,
}

impl Default for ChainMeta {
    fn default() -> Self {
        Self {
            final_sigma: 0.0,
            acceptance_rate: 0.0,
            therm_acceptance_rate: 0.0,
            max_drift: 0.0,
            sweeps_done: 0,
            runtime_secs: 0.0,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            rng: RNG_NAME.to_string(),
        }
    }
}
