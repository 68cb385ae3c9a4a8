use num_complex::Complex64;

use super::{ActionBreakdown, DerivedCoefficients, FieldConfiguration, ModelParams};
use crate::error::{Error, Result};
use crate::linalg::{adjoint, comm, frobenius_sq, mul, trace_of_square, ComplexMatrix};

/// Hermitian (`P = Z + Z^dagger`) or anti-Hermitian (`Q = Z - Z^dagger`) part.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Part {
    P,
    Q,
}

/// Core matrix slots. Every term of the action is the trace of the square
/// (or of `M M^dagger`) of one of these.
pub(crate) const KA: usize = 0;
pub(crate) const KB: usize = 1;
pub(crate) const MIX0: usize = 2;
pub(crate) const X0: usize = 10;
pub(crate) const X1: usize = 11;
pub(crate) const LD0: usize = 12;
pub(crate) const CORE_COUNT: usize = 16;

/// The eight mixed commutators of the Yang-Mills term: `[left, right]` with
/// the sign it enters the `1/4 (...)` bracket.
pub(crate) const MIXED: [(Part, usize, Part, usize, f64); 8] = [
    (Part::P, 0, Part::Q, 2, 1.0),
    (Part::P, 0, Part::P, 2, -1.0),
    (Part::Q, 0, Part::P, 2, 1.0),
    (Part::Q, 0, Part::Q, 2, -1.0),
    (Part::P, 1, Part::P, 3, -1.0),
    (Part::P, 1, Part::Q, 3, 1.0),
    (Part::Q, 1, Part::P, 3, 1.0),
    (Part::Q, 1, Part::Q, 3, -1.0),
];

/// Covariant-derivative bilinears
/// `L = dfac (dcos (W_hi - W_lo) + psi W_hi - W_lo psi)` as `(part, hi, lo)`.
///
/// The last row uses `Z3 - Z3^dagger` throughout; the printed form has a
/// stray `Z1^dagger` in the `dcos` bracket, which breaks the gauge symmetry.
pub(crate) const COVARIANT: [(Part, usize, usize); 4] = [
    (Part::P, 1, 0),
    (Part::Q, 1, 0),
    (Part::P, 3, 2),
    (Part::Q, 3, 2),
];

/// Coefficient pair of the vacuum-angle linear term
/// `vac_lin ((1-i) W + (1+i) W^dagger)`, which is Hermitian.
pub(crate) const VAC_Z: Complex64 = Complex64::new(1.0, -1.0);
pub(crate) const VAC_ZD: Complex64 = Complex64::new(1.0, 1.0);

/// Every intermediate matrix of the action for one copy.
#[derive(Clone, Debug)]
pub struct TermMatrices {
    pub(crate) coeffs: DerivedCoefficients,
    pub(crate) psi: ComplexMatrix,
    pub(crate) psi_d: ComplexMatrix,
    pub(crate) z: [ComplexMatrix; 4],
    pub(crate) zd: [ComplexMatrix; 4],
    pub(crate) p: [ComplexMatrix; 4],
    pub(crate) q: [ComplexMatrix; 4],
    pub(crate) core: Vec<ComplexMatrix>,
}

impl TermMatrices {
    pub fn build(cfg: &FieldConfiguration, params: &ModelParams) -> Result<Self> {
        cfg.check_dim(params)?;
        let coeffs = params.coefficients();
        let n = params.n();
        let psi = cfg.psi.clone();
        let psi_d = adjoint(&psi);
        let z = cfg.z.clone();
        let zd: [ComplexMatrix; 4] = std::array::from_fn(|i| adjoint(&z[i]));
        let p: [ComplexMatrix; 4] = std::array::from_fn(|i| &z[i] + &zd[i]);
        let q: [ComplexMatrix; 4] = std::array::from_fn(|i| &z[i] - &zd[i]);

        let mut core = vec![ComplexMatrix::zeros(n); CORE_COUNT];
        core[KA] = comm(&zd[0], &z[0]);
        core[KB] = comm(&zd[1], &z[1]);

        let part = |which: Part, i: usize| match which {
            Part::P => &p[i],
            Part::Q => &q[i],
        };
        for (m, &(lp, li, rp, ri, _)) in MIXED.iter().enumerate() {
            core[MIX0 + m] = comm(part(lp, li), part(rp, ri));
        }

        let dcos = Complex64::new(coeffs.dcos, 0.0);
        let half = Complex64::new(0.5, 0.0);
        let vac = Complex64::new(coeffs.vac_lin, 0.0);
        let herm_psi = &psi + &psi_d;
        let potential = |sq: ComplexMatrix, a: usize, b: usize| {
            let anti = &(&(&mul(&zd[a], &z[a]) + &mul(&z[a], &zd[a])) + &mul(&zd[b], &z[b]))
                + &mul(&z[b], &zd[b]);
            let zs = &z[a] + &z[b];
            let zds = &zd[a] + &zd[b];
            let lin = &(&zs * (vac * VAC_Z)) + &(&zds * (vac * VAC_ZD));
            &(&(&sq + &(&herm_psi * dcos)) + &(&anti * half)) + &lin
        };
        core[X0] = potential(mul(&psi, &psi_d), 0, 2);
        core[X1] = potential(mul(&psi_d, &psi), 1, 3);

        let dfac = coeffs.dfac;
        for (k, &(pt, hi, lo)) in COVARIANT.iter().enumerate() {
            let (w_hi, w_lo) = (part(pt, hi), part(pt, lo));
            let l = &(&(&(w_hi - w_lo) * dcos) + &mul(&psi, w_hi)) - &mul(w_lo, &psi);
            core[LD0 + k] = &l * dfac;
        }

        Ok(Self {
            coeffs,
            psi,
            psi_d,
            z,
            zd,
            p,
            q,
            core,
        })
    }

    /// Bracket of commutator squares multiplying `D/2`.
    pub(crate) fn commutator_sum(&self) -> f64 {
        let mut acc = trace_of_square(&self.core[KA]).re + trace_of_square(&self.core[KB]).re;
        let mut mixed = 0.0;
        for (m, &(.., sign)) in MIXED.iter().enumerate() {
            mixed += sign * trace_of_square(&self.core[MIX0 + m]).re;
        }
        acc += 0.25 * mixed;
        acc
    }

    pub(crate) fn term_values(&self) -> [f64; 4] {
        let f = 0.5 * self.coeffs.d_coeff * self.commutator_sum();
        let v0 = frobenius_sq(&self.core[X0]);
        let v1 = frobenius_sq(&self.core[X1]);
        let d = (0..4).map(|k| frobenius_sq(&self.core[LD0 + k])).sum();
        [f, v0, v1, d]
    }

    pub fn breakdown(&self) -> Result<ActionBreakdown> {
        let [f, v0, v1, d] = self.term_values();
        let b = ActionBreakdown::from_terms(f, v0, v1, d, self.coeffs.prefactor);
        if !b.is_finite() {
            return Err(Error::Blowup(format!("non-finite action terms {b:?}")));
        }
        Ok(b)
    }
}

/// Evaluates the discretized action of one copy term by term.
pub fn evaluate_action(cfg: &FieldConfiguration, params: &ModelParams) -> Result<ActionBreakdown> {
    TermMatrices::build(cfg, params)?.breakdown()
}

/// Exponent `S_a * S_b` of the two-copy Boltzmann weight.
pub fn total_weight_exponent(
    cfg_a: &FieldConfiguration,
    cfg_b: &FieldConfiguration,
    params: &ModelParams,
) -> Result<f64> {
    let sa = evaluate_action(cfg_a, params)?.total;
    let sb = evaluate_action(cfg_b, params)?.total;
    Ok(sa * sb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;
    use crate::model::{random_configuration, DVariant, PrefactorMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_config(psi: f64) -> FieldConfiguration {
        let mut c = FieldConfiguration::vacuum(1);
        c.psi[(0, 0)] = Complex64::new(psi, 0.0);
        c
    }

    #[test]
    fn vacuum_has_zero_action() {
        for &omega in &[0.0, 0.4, 1.0, 3.0] {
            for &mu in &[0.0, 1.0, 3.0] {
                for &alpha in &[0.0, 1.0, 4.0] {
                    let p = ModelParams::new(omega, mu, alpha, 3).unwrap();
                    let b = evaluate_action(&FieldConfiguration::vacuum(3), &p).unwrap();
                    assert!(b.total.abs() <= 1e-14, "{b:?}");
                }
            }
        }
    }

    #[test]
    fn scalar_hand_evaluation() {
        let p = ModelParams::new(1.0, 0.0, 0.0, 1).unwrap();
        let b = evaluate_action(&scalar_config(1.0), &p).unwrap();
        assert_eq!(b.v0_term, 1.0);
        assert_eq!(b.v1_term, 1.0);
        assert_eq!(b.f_term, 0.0);
        assert_eq!(b.d_term, 0.0);
        assert!((b.total - 1.0).abs() < 1e-15);
        let s = total_weight_exponent(&scalar_config(1.0), &scalar_config(1.0), &p).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_with_vacuum_vanishes() {
        let p = ModelParams::new(0.7, 1.0, 0.3, 3).unwrap();
        let cfg = random_configuration(&p, 0.5, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let s = total_weight_exponent(&FieldConfiguration::vacuum(3), &cfg, &p).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn yang_mills_sign_follows_d() {
        let p = ModelParams::new(1.0, 0.5, 0.0, 4).unwrap();
        assert_eq!(p.d_variant, DVariant::AsPrintedSf);
        let cfg = random_configuration(&p, 0.6, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let tm = TermMatrices::build(&cfg, &p).unwrap();
        let comm_sq = trace_of_square(&tm.core[KA]).re + trace_of_square(&tm.core[KB]).re;
        assert!(comm_sq > 0.0);
        let b = tm.breakdown().unwrap();
        assert!(b.f_term < 0.0);
    }

    #[test]
    fn potential_matrices_are_hermitian() {
        let p = ModelParams::new(0.6, 1.5, 1.1, 4).unwrap();
        let cfg = random_configuration(&p, 0.8, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let tm = TermMatrices::build(&cfg, &p).unwrap();
        assert!(tm.core[X0].hermiticity_defect() < 1e-12);
        assert!(tm.core[X1].hermiticity_defect() < 1e-12);
        for m in 0..8 {
            // [H, H] is anti-Hermitian, [H, A] Hermitian: either way Tr M^2 is real.
            assert!(trace_of_square(&tm.core[MIX0 + m]).im.abs() < 1e-10);
        }
    }

    #[test]
    fn total_is_prefactor_times_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for mode in [
            PrefactorMode::PowerOne,
            PrefactorMode::PowerTwo,
            PrefactorMode::None,
        ] {
            let p = ModelParams::new(1.7, 2.0, 0.4, 5)
                .unwrap()
                .with_prefactor(mode);
            let cfg = random_configuration(&p, 0.4, &mut rng).unwrap();
            let b = evaluate_action(&cfg, &p).unwrap();
            let expect = p.coefficients().prefactor * b.raw_sum();
            assert!((b.total - expect).abs() <= 1e-14 * expect.abs());
            assert!(b.v0_term >= 0.0 && b.v1_term >= 0.0 && b.d_term >= 0.0);
        }
    }

    #[test]
    fn constant_psi_shift_enters_only_through_potential() {
        // psi = c I commutes with everything, so with Z = 0 only the potential survives.
        let n = 3;
        let p = ModelParams::new(0.5, 1.0, 0.0, n).unwrap();
        let mut cfg = FieldConfiguration::vacuum(n);
        cfg.psi = ComplexMatrix::scalar(n, ONE * 0.5);
        let b = evaluate_action(&cfg, &p).unwrap();
        // X = (0.25 + 1.0 * 1.0) I on both sides.
        let x = 0.25 + 1.0;
        assert!((b.v0_term - n as f64 * x * x).abs() < 1e-14);
        assert_eq!(b.d_term, 0.0);
        assert_eq!(b.f_term, 0.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = ModelParams::new(1.0, 1.0, 0.0, 3).unwrap();
        assert!(matches!(
            evaluate_action(&FieldConfiguration::vacuum(2), &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn blowup_is_flagged() {
        let p = ModelParams::new(1.0, 1.0, 0.0, 2).unwrap();
        let mut cfg = FieldConfiguration::vacuum(2);
        cfg.psi[(0, 1)] = Complex64::new(1e200, 0.0);
        assert!(matches!(evaluate_action(&cfg, &p), Err(Error::Blowup(_))));
    }
}
