//! Thin wrappers over faer that pin every dense kernel to sequential
//! execution, so numeric output does not depend on the worker count.

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::linalg::matmul::matmul;
use faer::traits::ComplexField;
use faer::{Accum, Mat, MatRef, Par};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// `dst = lhs · rhs`.
pub fn mul_into<T: ComplexField>(dst: &mut Mat<T>, lhs: MatRef<'_, T>, rhs: MatRef<'_, T>) {
    matmul(dst.as_mut(), Accum::Replace, lhs, rhs, T::one_impl(), Par::Seq);
}

pub fn mul<T: ComplexField>(lhs: MatRef<'_, T>, rhs: MatRef<'_, T>) -> Mat<T> {
    let mut out = Mat::zeros(lhs.nrows(), rhs.ncols());
    mul_into(&mut out, lhs, rhs);
    out
}

fn evd_impl<T: ComplexField>(a: MatRef<'_, T>, vectors: bool) -> Result<(Diag<T>, Option<Mat<T>>)> {
    let n = a.nrows();
    let mut s = Diag::<T>::zeros(n);
    let mut u = vectors.then(|| Mat::<T>::zeros(n, n));
    let compute = if vectors {
        ComputeEigenvectors::Yes
    } else {
        ComputeEigenvectors::No
    };
    let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<T>(
        n,
        compute,
        Par::Seq,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        a,
        s.as_mut(),
        u.as_mut().map(|m| m.as_mut()),
        Par::Seq,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::Eigen {
        size: n,
        reason: format!("{e:?}"),
    })?;
    Ok((s, u))
}

/// Eigenvalues (ascending) and eigenvectors of a real symmetric matrix;
/// only the lower triangle is read.
pub fn symmetric_eigen(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let (s, u) = evd_impl(a, true)?;
    let values = s.column_vector().iter().copied().collect();
    Ok((values, u.expect("eigenvectors requested")))
}

/// Ascending eigenvalues of a Hermitian matrix, with eigenvectors on request.
pub fn hermitian_eigen(a: MatRef<'_, C64>, vectors: bool) -> Result<(Vec<f64>, Option<Mat<C64>>)> {
    let (s, u) = evd_impl(a, vectors)?;
    let values = s.column_vector().iter().map(|z| z.re).collect();
    Ok((values, u))
}

pub fn frobenius(a: MatRef<'_, C64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// `‖A − A†‖_F`.
pub fn hermiticity_defect(a: MatRef<'_, C64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..j {
            acc += 2.0 * (a[(i, j)] - a[(j, i)].conj()).norm_sqr();
        }
        acc += (a[(j, j)].im * 2.0).powi(2);
    }
    acc.sqrt()
}
