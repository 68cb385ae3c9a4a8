//! Parameters, field content and the truncated action of the harmonic
//! gauge-Higgs matrix model.
//!
//! One copy of the model carries five complex `n x n` matrices: the shifted
//! Higgs field `psi` and the four complex gauge combinations `Z0..Z3`
//! (`Z0`, `Z2` built from the `A` connection, `Z1`, `Z3` from `B`). The
//! partition function factorizes into two such copies whose actions multiply.

mod action;
mod gauge;
pub mod incremental;

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

pub use action::{evaluate_action, total_weight_exponent, TermMatrices};
pub use gauge::gauge_transform;

/// Which printed form of the Yang-Mills coefficient `D` to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DVariant {
    /// `(1-W^2)^2/2 - (1+W^2)^4 / (6 (1+W^2)^2)`, the form carried into the
    /// discretized action.
    #[default]
    AsPrintedSf,
    /// `(1+W^2)^2/2 - (1-W^2)^4 / (6 (1+W^2)^2)`, the form of the continuum
    /// expansion.
    AsPrintedSpecAct,
}

/// Global factor `(1+W^2)^-p` in front of the trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PrefactorMode {
    #[default]
    PowerOne,
    PowerTwo,
    None,
}

impl DVariant {
    pub fn name(self) -> &'static str {
        match self {
            DVariant::AsPrintedSf => "as_printed_sf",
            DVariant::AsPrintedSpecAct => "as_printed_specact",
        }
    }
}

impl PrefactorMode {
    pub fn name(self) -> &'static str {
        match self {
            PrefactorMode::PowerOne => "power_one",
            PrefactorMode::PowerTwo => "power_two",
            PrefactorMode::None => "none",
        }
    }
}

impl fmt::Display for DVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for PrefactorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "as_printed_sf" | "sf" => Ok(DVariant::AsPrintedSf),
            "as_printed_specact" | "specact" => Ok(DVariant::AsPrintedSpecAct),
            other => Err(Error::InvalidParameter(format!(
                "unknown d_variant `{other}`"
            ))),
        }
    }
}

impl FromStr for PrefactorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "power_one" | "1" => Ok(PrefactorMode::PowerOne),
            "power_two" | "2" => Ok(PrefactorMode::PowerTwo),
            "none" | "0" => Ok(PrefactorMode::None),
            other => Err(Error::InvalidParameter(format!(
                "unknown prefactor_mode `{other}`"
            ))),
        }
    }
}

/// Model parameters `(omega, mu, alpha, n)` plus formula switches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    omega: f64,
    mu: f64,
    alpha: f64,
    n: usize,
    pub d_variant: DVariant,
    pub prefactor_mode: PrefactorMode,
}

impl ModelParams {
    /// Validates the parameters; `alpha` is reduced into `[0, 2 pi)`.
    pub fn new(omega: f64, mu: f64, alpha: f64, n: usize) -> Result<Self> {
        if !omega.is_finite() || omega < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "omega must be finite and >= 0, got {omega}"
            )));
        }
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mu must be finite and >= 0, got {mu}"
            )));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite, got {alpha}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("matrix size n must be >= 1".into()));
        }
        let mut alpha = alpha.rem_euclid(TAU);
        if alpha >= TAU {
            alpha = 0.0;
        }
        Ok(Self {
            omega,
            mu,
            alpha,
            n,
            d_variant: DVariant::default(),
            prefactor_mode: PrefactorMode::default(),
        })
    }

    pub fn with_d_variant(mut self, v: DVariant) -> Self {
        self.d_variant = v;
        self
    }

    pub fn with_prefactor(mut self, p: PrefactorMode) -> Self {
        self.prefactor_mode = p;
        self
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coefficients(&self) -> DerivedCoefficients {
        DerivedCoefficients::from_params(self)
    }
}

/// Coefficients of the discretized action derived from [`ModelParams`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedCoefficients {
    /// `C = (1+W^2)/(4 W^2)`; `None` at `omega = 0` where it diverges.
    /// `C` only enters through `vac_lin`, which stays finite.
    pub c_coeff: Option<f64>,
    pub d_coeff: f64,
    /// `mu sin(alpha) W / sqrt(1+W^2)`, equal to `mu sin(alpha) / (2 sqrt C)`.
    pub vac_lin: f64,
    /// `mu cos(alpha)`.
    pub dcos: f64,
    /// `sqrt(2 (1+W^2))`.
    pub dfac: f64,
    pub prefactor: f64,
}

impl DerivedCoefficients {
    pub fn from_params(p: &ModelParams) -> Self {
        let w2 = p.omega * p.omega;
        let one_plus = 1.0 + w2;
        let one_minus = 1.0 - w2;
        let c_coeff = (p.omega > 0.0).then(|| one_plus / (4.0 * w2));
        let d_coeff = match p.d_variant {
            DVariant::AsPrintedSf => {
                one_minus.powi(2) / 2.0 - one_plus.powi(4) / (6.0 * one_plus.powi(2))
            }
            DVariant::AsPrintedSpecAct => {
                one_plus.powi(2) / 2.0 - one_minus.powi(4) / (6.0 * one_plus.powi(2))
            }
        };
        let (sin_a, cos_a) = p.alpha.sin_cos();
        let vac_lin = p.mu * sin_a * p.omega / one_plus.sqrt();
        let prefactor = match p.prefactor_mode {
            PrefactorMode::PowerOne => 1.0 / one_plus,
            PrefactorMode::PowerTwo => 1.0 / (one_plus * one_plus),
            PrefactorMode::None => 1.0,
        };
        Self {
            c_coeff,
            d_coeff,
            vac_lin,
            dcos: p.mu * cos_a,
            dfac: (2.0 * one_plus).sqrt(),
            prefactor,
        }
    }
}

/// Number of matrices in one copy.
pub const FIELDS_PER_COPY: usize = 5;

/// One copy's fields. Field index 0 is `psi`, indices 1..=4 are `Z0..Z3`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldConfiguration {
    pub psi: ComplexMatrix,
    pub z: [ComplexMatrix; 4],
}

impl FieldConfiguration {
    /// The shifted vacuum: all matrices zero.
    pub fn vacuum(n: usize) -> Self {
        Self {
            psi: ComplexMatrix::zeros(n),
            z: std::array::from_fn(|_| ComplexMatrix::zeros(n)),
        }
    }

    pub fn new(psi: ComplexMatrix, z: [ComplexMatrix; 4]) -> Result<Self> {
        let cfg = Self { psi, z };
        let n = cfg.psi.dim();
        for m in &cfg.z {
            if m.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.dim(),
                });
            }
        }
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.psi.dim()
    }

    pub fn field(&self, index: usize) -> &ComplexMatrix {
        match index {
            0 => &self.psi,
            i => &self.z[i - 1],
        }
    }

    pub fn field_mut(&mut self, index: usize) -> &mut ComplexMatrix {
        match index {
            0 => &mut self.psi,
            i => &mut self.z[i - 1],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.psi.is_finite() && self.z.iter().all(ComplexMatrix::is_finite)
    }

    pub(crate) fn check_dim(&self, params: &ModelParams) -> Result<()> {
        for i in 0..FIELDS_PER_COPY {
            let d = self.field(i).dim();
            if d != params.n() {
                return Err(Error::DimensionMismatch {
                    expected: params.n(),
                    found: d,
                });
            }
        }
        Ok(())
    }
}

/// Hot-start configuration: every real and imaginary component i.i.d.
/// `normal(0, scale^2)`.
pub fn random_configuration<R: Rng + ?Sized>(
    params: &ModelParams,
    scale: f64,
    rng: &mut R,
) -> Result<FieldConfiguration> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "scale must be > 0, got {scale}"
        )));
    }
    let n = params.n();
    let psi = ComplexMatrix::random_gaussian(n, scale, rng);
    let z = std::array::from_fn(|_| ComplexMatrix::random_gaussian(n, scale, rng));
    Ok(FieldConfiguration { psi, z })
}

/// Traces of the separate Lagrangian pieces of one copy.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ActionBreakdown {
    pub f_term: f64,
    pub v0_term: f64,
    pub v1_term: f64,
    /// `sum_k Tr(L_Dk L_Dk^dagger)`.
    pub d_term: f64,
    /// `prefactor * (f + v0 + v1 + d)`.
    pub total: f64,
}

impl ActionBreakdown {
    pub fn from_terms(
        f_term: f64,
        v0_term: f64,
        v1_term: f64,
        d_term: f64,
        prefactor: f64,
    ) -> Self {
        Self {
            f_term,
            v0_term,
            v1_term,
            d_term,
            total: prefactor * (f_term + v0_term + v1_term + d_term),
        }
    }

    pub fn raw_sum(&self) -> f64 {
        self.f_term + self.v0_term + self.v1_term + self.d_term
    }

    pub fn is_finite(&self) -> bool {
        [
            self.f_term,
            self.v0_term,
            self.v1_term,
            self.d_term,
            self.total,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}
