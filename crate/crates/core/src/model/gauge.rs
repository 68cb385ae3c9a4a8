use num_complex::Complex64;

use super::{FieldConfiguration, ModelParams};
use crate::error::{Error, Result};
use crate::linalg::{adjoint, mul, ComplexMatrix};

const UNITARY_TOL: f64 = 1e-12;

/// Applies `(u_a, u_b)` in `U(n) x U(n)` to one copy.
///
/// With `Phi = psi + mu I` the transformation is `Phi -> u_a Phi u_b^dagger`,
/// `Z0, Z2 -> u_a Z u_a^dagger` and `Z1, Z3 -> u_b Z u_b^dagger`. It is only a
/// symmetry in the `alpha = 0` parametrization of the vacuum.
pub fn gauge_transform(
    cfg: &FieldConfiguration,
    u_a: &ComplexMatrix,
    u_b: &ComplexMatrix,
    params: &ModelParams,
) -> Result<FieldConfiguration> {
    cfg.check_dim(params)?;
    for u in [u_a, u_b] {
        if u.dim() != params.n() {
            return Err(Error::DimensionMismatch {
                expected: params.n(),
                found: u.dim(),
            });
        }
        let deviation = u.unitarity_defect();
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
    }
    if params.alpha() != 0.0 {
        return Err(Error::InvalidParameter(
            "gauge transformation requires alpha = 0".into(),
        ));
    }

    let n = params.n();
    let shift = ComplexMatrix::scalar(n, Complex64::new(params.mu(), 0.0));
    let ua_d = adjoint(u_a);
    let ub_d = adjoint(u_b);
    let conj = |u: &ComplexMatrix, m: &ComplexMatrix, ud: &ComplexMatrix| mul(&mul(u, m), ud);

    let phi = &cfg.psi + &shift;
    let psi = &conj(u_a, &phi, &ub_d) - &shift;
    let z = [
        conj(u_a, &cfg.z[0], &ua_d),
        conj(u_b, &cfg.z[1], &ub_d),
        conj(u_a, &cfg.z[2], &ua_d),
        conj(u_b, &cfg.z[3], &ub_d),
    ];
    Ok(FieldConfiguration { psi, z })
}
