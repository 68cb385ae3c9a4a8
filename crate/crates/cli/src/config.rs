//! Plain-text `key = value` configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Later assignments
//! win, so command-line overrides are applied by merging after the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ncgauge::model::{DVariant, ModelParams, PrefactorMode};
use ncgauge::sampler::{McConfig, StartMode, WeightMode};
use ncgauge::{Error, Result};

/// Keys understood by a single run.
pub const RUN_KEYS: &[&str] = &[
    "omega",
    "mu",
    "alpha",
    "n",
    "therm",
    "sweeps",
    "measure_every",
    "step_sigma",
    "target_accept",
    "adapt_interval",
    "recompute_every",
    "seed",
    "stream",
    "weight_mode",
    "d_variant",
    "prefactor_mode",
    "init",
    "checkpoint_every",
];

/// Additional keys of a grid sweep.
pub const SWEEP_KEYS: &[&str] = &[
    "axis",
    "axis_start",
    "axis_stop",
    "axis_points",
    "n_list",
    "replicas",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap(pub BTreeMap<String, String>);

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("config line {}: expected key=value", k + 1))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidParameter(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("override `{assignment}` is not key=value"))
        })?;
        self.0.insert(k.trim().to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfigMap) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad value for `{key}`: `{v}`"))),
        }
    }

    fn check_keys(&self, allowed: &[&[&str]]) -> Result<()> {
        for key in self.0.keys() {
            if !allowed.iter().any(|set| set.contains(&key.as_str())) {
                return Err(Error::InvalidParameter(format!(
                    "unknown config key `{key}`"
                )));
            }
        }
        Ok(())
    }
}

/// A fully resolved single-chain configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub mc: McConfig,
    /// Minimum sweeps between checkpoint writes.
    pub checkpoint_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::new(1.0, 1.0, 0.0, 5).unwrap(),
            mc: McConfig::default(),
            checkpoint_every: 1_000,
        }
    }
}

impl RunConfig {
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        map.check_keys(&[RUN_KEYS])?;
        Self::from_map_unchecked(map)
    }

    fn from_map_unchecked(map: &ConfigMap) -> Result<Self> {
        let d = RunConfig::default();
        let params = ModelParams::new(
            map.parsed("omega", d.params.omega())?,
            map.parsed("mu", d.params.mu())?,
            map.parsed("alpha", d.params.alpha())?,
            map.parsed("n", d.params.n())?,
        )?
        .with_d_variant(map.parsed::<DVariant>("d_variant", d.params.d_variant)?)
        .with_prefactor(map.parsed::<PrefactorMode>("prefactor_mode", d.params.prefactor_mode)?);
        let mc = McConfig {
            n_therm: map.parsed("therm", d.mc.n_therm)?,
            n_measure: map.parsed("sweeps", d.mc.n_measure)?,
            measure_every: map.parsed("measure_every", d.mc.measure_every)?,
            step_sigma: map.parsed("step_sigma", d.mc.step_sigma)?,
            target_accept: map.parsed("target_accept", d.mc.target_accept)?,
            adapt_interval: map.parsed("adapt_interval", d.mc.adapt_interval)?,
            recompute_every: map.parsed("recompute_every", d.mc.recompute_every)?,
            seed: map.parsed("seed", d.mc.seed)?,
            stream: map.parsed("stream", d.mc.stream)?,
            weight_mode: map.parsed::<WeightMode>("weight_mode", d.mc.weight_mode)?,
            start: map.parsed::<StartMode>("init", d.mc.start)?,
        };
        mc.validate()?;
        Ok(Self {
            params,
            mc,
            checkpoint_every: map.parsed("checkpoint_every", d.checkpoint_every)?,
        })
    }

    /// Every key with its resolved value; parses back to `self`.
    pub fn to_map(&self) -> ConfigMap {
        let p = &self.params;
        let mc = &self.mc;
        let pairs: [(&str, String); 18] = [
            ("omega", format!("{:?}", p.omega())),
            ("mu", format!("{:?}", p.mu())),
            ("alpha", format!("{:?}", p.alpha())),
            ("n", p.n().to_string()),
            ("therm", mc.n_therm.to_string()),
            ("sweeps", mc.n_measure.to_string()),
            ("measure_every", mc.measure_every.to_string()),
            ("step_sigma", format!("{:?}", mc.step_sigma)),
            ("target_accept", format!("{:?}", mc.target_accept)),
            ("adapt_interval", mc.adapt_interval.to_string()),
            ("recompute_every", mc.recompute_every.to_string()),
            ("seed", mc.seed.to_string()),
            ("stream", mc.stream.to_string()),
            ("weight_mode", mc.weight_mode.to_string()),
            ("d_variant", p.d_variant.to_string()),
            ("prefactor_mode", p.prefactor_mode.to_string()),
            ("init", mc.start.to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
        ];
        ConfigMap(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn render(&self) -> String {
        render(&self.to_map())
    }
}

/// Renders keys in the documented order, then any others alphabetically.
pub fn render(map: &ConfigMap) -> String {
    let mut out = String::new();
    let order = RUN_KEYS.iter().chain(SWEEP_KEYS);
    for key in order.clone() {
        if let Some(v) = map.get(key) {
            writeln!(out, "{key} = {v}").unwrap();
        }
    }
    for (k, v) in &map.0 {
        if !order.clone().any(|o| o == k) {
            writeln!(out, "{k} = {v}").unwrap();
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Omega,
    Mu,
    Alpha,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Omega => "omega",
            Axis::Mu => "mu",
            Axis::Alpha => "alpha",
        }
    }

    /// Default grid: `[0, 3]` with 31 points, `[0, 3.1]` with 32, `[0, 2 pi]` with 25.
    pub fn default_grid(self) -> (f64, f64, usize) {
        match self {
            Axis::Omega => (0.0, 3.0, 31),
            Axis::Mu => (0.0, 3.1, 32),
            Axis::Alpha => (0.0, std::f64::consts::TAU, 25),
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "omega" => Ok(Axis::Omega),
            "mu" => Ok(Axis::Mu),
            "alpha" => Ok(Axis::Alpha),
            other => Err(Error::InvalidParameter(format!("unknown axis `{other}`"))),
        }
    }
}

/// A grid over one of `omega`, `mu`, `alpha` times a list of sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    /// Fixed parameters and Monte Carlo schedule; `n` and the swept value
    /// are overwritten per chain.
    pub base: RunConfig,
    pub axis: Axis,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub out: PathBuf,
}

impl SweepSpec {
    pub fn from_map(map: &ConfigMap, out: PathBuf) -> Result<Self> {
        map.check_keys(&[RUN_KEYS, SWEEP_KEYS])?;
        let axis: Axis = map.parsed("axis", Axis::Omega)?;
        let (s0, s1, pts) = axis.default_grid();
        let n_list = match map.get("n_list") {
            None => vec![RunConfig::default().params.n()],
            Some(v) => v
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::InvalidParameter(format!("bad n_list entry `{t}`")))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let spec = Self {
            base: RunConfig::from_map_unchecked(map)?,
            axis,
            start: map.parsed("axis_start", s0)?,
            stop: map.parsed("axis_stop", s1)?,
            points: map.parsed("axis_points", pts)?,
            n_list,
            replicas: map.parsed("replicas", 1)?,
            out,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.start.is_finite() && self.stop.is_finite()) || self.start > self.stop {
            return bad("sweep requires finite axis_start <= axis_stop");
        }
        if self.points == 0 {
            return bad("axis_points must be >= 1");
        }
        if self.n_list.is_empty()
            || self.n_list.windows(2).any(|w| w[0] >= w[1])
            || self.n_list[0] == 0
        {
            return bad("n_list must be nonempty, positive and strictly increasing");
        }
        if self.replicas == 0 {
            return bad("replicas must be >= 1");
        }
        Ok(())
    }

    pub fn axis_values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.stop
                } else {
                    self.start + step * i as f64
                }
            })
            .collect()
    }

    pub fn to_map(&self) -> ConfigMap {
        let mut m = self.base.to_map();
        let sweep: [(&str, String); 6] = [
            ("axis", self.axis.name().to_string()),
            ("axis_start", format!("{:?}", self.start)),
            ("axis_stop", format!("{:?}", self.stop)),
            ("axis_points", self.points.to_string()),
            (
                "n_list",
                self.n_list
                    .iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("replicas", self.replicas.to_string()),
        ];
        for (k, v) in sweep {
            m.0.insert(k.to_string(), v);
        }
        m
    }

    /// Resolved configuration of one chain of the grid.
    pub fn chain_config(&self, axis_value: f64, n: usize, stream: u64) -> Result<RunConfig> {
        let p = &self.base.params;
        let (mut omega, mut mu, mut alpha) = (p.omega(), p.mu(), p.alpha());
        match self.axis {
            Axis::Omega => omega = axis_value,
            Axis::Mu => mu = axis_value,
            Axis::Alpha => alpha = axis_value,
        }
        let params = ModelParams::new(omega, mu, alpha, n)?
            .with_d_variant(p.d_variant)
            .with_prefactor(p.prefactor_mode);
        Ok(RunConfig {
            params,
            mc: McConfig {
                stream,
                ..self.base.mc
            },
            checkpoint_every: self.base.checkpoint_every,
        })
    }
}
