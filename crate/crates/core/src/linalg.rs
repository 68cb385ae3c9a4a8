//! Dense complex matrices and the handful of kernels the action needs.
//!
//! In the matrix base the star product is the ordinary matrix product and
//! the integral is the trace, so everything downstream is expressed with
//! [`multiply`], [`adjoint`], [`trace`] and the (anti)commutators.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Square matrix of `f64` complex entries stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, ONE)
    }

    /// `value * I`.
    pub fn scalar(dim: usize, value: Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = value;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from row-major entries; `data.len()` must be a square.
    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows(rows: &[&[Complex64]]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(dim, data)
    }

    /// Entries drawn i.i.d. with real and imaginary parts `normal(0, scale^2)`.
    pub fn random_gaussian<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> Self {
        let mut m = Self::zeros(dim);
        for z in m.data.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z = Complex64::new(scale * re, scale * im);
        }
        m
    }

    /// Haar-like random unitary from the QR factorization of a Gaussian matrix.
    pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let g = Self::random_gaussian(dim, 1.0, rng);
        g.orthonormalize_columns()
    }

    /// Modified Gram-Schmidt on the columns, i.e. the `Q` factor of a QR.
    fn orthonormalize_columns(&self) -> Self {
        let n = self.dim;
        let mut cols: Vec<Vec<Complex64>> = (0..n)
            .map(|j| (0..n).map(|i| self[(i, j)]).collect())
            .collect();
        for j in 0..n {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let qk = &done[k];
                let proj: Complex64 = qk
                    .iter()
                    .zip(rest[0].iter())
                    .map(|(q, v)| q.conj() * v)
                    .sum();
                for (v, q) in rest[0].iter_mut().zip(qk.iter()) {
                    *v -= proj * q;
                }
            }
            let norm = cols[j].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            for v in cols[j].iter_mut() {
                *v /= norm;
            }
        }
        Self::from_fn(n, |i, j| cols[j][i])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// Largest entrywise deviation from Hermiticity, `max |a_ij - conj(a_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Largest entrywise deviation of `a^dagger a` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let p = mul(&adjoint(self), self);
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((p[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// Block-diagonal direct sum `self (+) other`.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let mut out = Self::zeros(n + m);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = self[(i, j)];
            }
        }
        for i in 0..m {
            for j in 0..m {
                out[(n + i, n + j)] = other[(i, j)];
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

fn check_dims(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    Ok(())
}

/// `out = a * b`. The single dense product kernel used everywhere.
pub(crate) fn gemm_into(out: &mut [Complex64], a: &[Complex64], b: &[Complex64], n: usize) {
    out.iter_mut().for_each(|z| *z = ZERO);
    for i in 0..n {
        let out_row = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == ZERO {
                continue;
            }
            let b_row = &b[k * n..(k + 1) * n];
            for (o, bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
}

/// Product without the dimension check, for internal callers that already
/// validated shapes.
pub(crate) fn mul(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    debug_assert_eq!(a.dim, b.dim);
    let mut out = ComplexMatrix::zeros(a.dim);
    gemm_into(&mut out.data, &a.data, &b.data, a.dim);
    out
}

pub fn multiply(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_dims(a, b)?;
    Ok(mul(a, b))
}

/// Conjugate transpose.
pub fn adjoint(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.dim;
    ComplexMatrix::from_fn(n, |i, j| a[(j, i)].conj())
}

/// `ab - ba`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_dims(a, b)?;
    Ok(comm(a, b))
}

/// `ab + ba`.
pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_dims(a, b)?;
    Ok(&mul(a, b) + &mul(b, a))
}

pub(crate) fn comm(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    &mul(a, b) - &mul(b, a)
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    (0..a.dim).map(|i| a[(i, i)]).sum()
}

/// `Tr(a^dagger a) = sum |a_ij|^2`.
pub fn frobenius_sq(a: &ComplexMatrix) -> f64 {
    a.data.iter().map(|z| z.norm_sqr()).sum()
}

/// `Tr(a^2)` without forming the product.
pub fn trace_of_square(a: &ComplexMatrix) -> Complex64 {
    let n = a.dim;
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * a[(j, i)];
        }
    }
    acc
}

/// `Tr(a b)` without forming the product.
pub fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Complex64> {
    check_dims(a, b)?;
    let n = a.dim;
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    Ok(acc)
}

macro_rules! entrywise_op {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                assert_eq!(self.dim, rhs.dim, "dimension mismatch");
                ComplexMatrix {
                    dim: self.dim,
                    data: self.data.iter().zip(rhs.data.iter()).map(|(a, b)| a $op b).collect(),
                }
            }
        }
    };
}

entrywise_op!(Add, add, +);
entrywise_op!(Sub, sub, -);

impl Mul<&ComplexMatrix> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        mul(self, rhs)
    }
}

impl Mul<Complex64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Complex64) -> ComplexMatrix {
        self.scale(rhs)
    }
}

impl Mul<f64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: f64) -> ComplexMatrix {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale(-ONE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn loop_trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
        let n = a.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += a[(i, k)] * b[(k, i)];
            }
        }
        acc
    }

    #[test]
    fn identity_is_neutral() {
        let a = ComplexMatrix::random_gaussian(4, 1.0, &mut rng(1));
        let id = ComplexMatrix::identity(4);
        assert_eq!(multiply(&id, &a).unwrap(), a);
        assert_eq!(multiply(&a, &id).unwrap(), a);
    }

    #[test]
    fn shift_algebra() {
        let a = ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ZERO, ZERO]]).unwrap();
        let b = ComplexMatrix::from_rows(&[&[ZERO, ZERO], &[ONE, ZERO]]).unwrap();
        let ab = multiply(&a, &b).unwrap();
        let expected = ComplexMatrix::from_rows(&[&[ONE, ZERO], &[ZERO, ZERO]]).unwrap();
        assert_eq!(ab, expected);
    }

    #[test]
    fn multiply_rejects_mismatch() {
        let a = ComplexMatrix::zeros(2);
        let b = ComplexMatrix::zeros(3);
        assert!(matches!(
            multiply(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(commutator(&a, &b).is_err());
        assert!(anticommutator(&a, &b).is_err());
    }

    #[test]
    fn trace_ab_equals_trace_ba() {
        let mut r = rng(2);
        let a = ComplexMatrix::random_gaussian(3, 1.0, &mut r);
        let b = ComplexMatrix::random_gaussian(3, 1.0, &mut r);
        let oracle = loop_trace_of_product(&a, &b);
        let ab = trace(&multiply(&a, &b).unwrap());
        let ba = trace(&multiply(&b, &a).unwrap());
        assert!((ab - oracle).norm() <= 1e-12 * oracle.norm().max(1.0));
        assert!((ab - ba).norm() <= 1e-12 * ab.norm().max(1.0));
    }

    #[test]
    fn adjoint_by_hand() {
        let a = ComplexMatrix::from_rows(&[&[ZERO, I], &[ZERO, ZERO]]).unwrap();
        let expected = ComplexMatrix::from_rows(&[&[ZERO, ZERO], &[-I, ZERO]]).unwrap();
        assert_eq!(adjoint(&a), expected);
    }

    #[test]
    fn adjoint_of_hermitian() {
        let a = ComplexMatrix::random_gaussian(5, 1.0, &mut rng(3));
        let h = &a + &adjoint(&a);
        assert_eq!(adjoint(&h), h);
    }

    #[test]
    fn gram_trace_is_entry_power() {
        let a = ComplexMatrix::random_gaussian(6, 0.7, &mut rng(4));
        let g = trace(&multiply(&adjoint(&a), &a).unwrap());
        let mut oracle = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                oracle += a[(i, j)].re * a[(i, j)].re + a[(i, j)].im * a[(i, j)].im;
            }
        }
        assert!(g.im.abs() < 1e-12);
        assert!(g.re >= 0.0);
        assert!((g.re - oracle).abs() < 1e-12 * oracle);
        assert!((frobenius_sq(&a) - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn commutator_with_identity_vanishes() {
        let a = ComplexMatrix::random_gaussian(4, 1.0, &mut rng(5));
        let z = commutator(&a, &ComplexMatrix::identity(4)).unwrap();
        assert_eq!(z, ComplexMatrix::zeros(4));
        assert_eq!(commutator(&a, &a).unwrap(), ComplexMatrix::zeros(4));
    }

    #[test]
    fn square_of_hermitian_commutator_is_nonnegative() {
        let mut r = rng(6);
        for _ in 0..20 {
            let z = ComplexMatrix::random_gaussian(5, 1.0, &mut r);
            let k = commutator(&adjoint(&z), &z).unwrap();
            assert!(k.hermiticity_defect() <= 1e-12);
            // Tr(K^2) = sum of squared eigenvalues = ||K||_F^2 for Hermitian K.
            let t = trace(&multiply(&k, &k).unwrap());
            assert!(t.re >= 0.0);
            assert!((t.re - frobenius_sq(&k)).abs() <= 1e-10 * t.re.max(1.0));
        }
    }

    #[test]
    fn trace_and_norm_of_simple_matrices() {
        assert_eq!(trace(&ComplexMatrix::zeros(3)), ZERO);
        assert_eq!(frobenius_sq(&ComplexMatrix::zeros(3)), 0.0);
        let id = ComplexMatrix::identity(5);
        assert_eq!(trace(&id), c(5.0, 0.0));
        assert_eq!(frobenius_sq(&id), 5.0);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let u = ComplexMatrix::random_unitary(8, &mut rng(7));
        assert!(u.unitarity_defect() < 1e-12);
    }

    #[test]
    fn associativity_to_tolerance() {
        let mut r = rng(8);
        let a = ComplexMatrix::random_gaussian(6, 1.0, &mut r);
        let b = ComplexMatrix::random_gaussian(6, 1.0, &mut r);
        let cc = ComplexMatrix::random_gaussian(6, 1.0, &mut r);
        let left = &(&a * &b) * &cc;
        let right = &a * &(&b * &cc);
        assert!(left.max_abs_diff(&right) < 1e-12);
    }

    proptest! {
        #[test]
        fn trace_is_cyclic(seed in any::<u64>()) {
            let mut r = rng(seed);
            let a = ComplexMatrix::random_gaussian(8, 1.0, &mut r);
            let b = ComplexMatrix::random_gaussian(8, 1.0, &mut r);
            let cc = ComplexMatrix::random_gaussian(8, 1.0, &mut r);
            let abc = trace(&(&(&a * &b) * &cc));
            let bca = trace(&(&(&b * &cc) * &a));
            prop_assert!((abc - bca).norm() <= 1e-10 * abc.norm().max(1.0));
        }

        #[test]
        fn hermitian_closure(seed in any::<u64>()) {
            let z = ComplexMatrix::random_gaussian(6, 1.0, &mut rng(seed));
            let zd = adjoint(&z);
            prop_assert!(commutator(&zd, &z).unwrap().hermiticity_defect() <= 1e-12);
            prop_assert!(anticommutator(&zd, &z).unwrap().hermiticity_defect() <= 1e-12);
        }

        #[test]
        fn adjoint_is_an_exact_involution(seed in any::<u64>(), n in 1usize..9) {
            let a = ComplexMatrix::random_gaussian(n, 3.0, &mut rng(seed));
            let back = adjoint(&adjoint(&a));
            for (x, y) in back.as_slice().iter().zip(a.as_slice()) {
                prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
                prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }
}
