//! Dense Fock-basis operators and density matrices.

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::params::SystemParams;

/// A general complex `N × N` operator in the truncated Fock basis. Need not
/// be Hermitian: coherence blocks `|α⟩⟨β|` are evolved as operators too.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    mat: Mat<C64>,
}

impl OperatorMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { mat: Mat::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: Mat::from_fn(
                n,
                n,
                |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) },
            ),
        }
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self {
            mat: Mat::from_fn(n, n, f),
        }
    }

    pub fn from_mat(mat: Mat<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::SizeMismatch {
                expected: mat.nrows(),
                got: mat.ncols(),
            });
        }
        Ok(Self { mat })
    }

    /// `|a⟩⟨b|`.
    pub fn outer(a: &[C64], b: &[C64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::SizeMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        Ok(Self::from_fn(a.len(), |i, j| a[i] * b[j].conj()))
    }

    /// Diagonal operator with real entries.
    pub fn diagonal(d: &[f64]) -> Self {
        Self::from_fn(d.len(), |i, j| {
            if i == j {
                C64::new(d[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &Mat<C64> {
        &self.mat
    }

    pub fn mat_mut(&mut self) -> &mut Mat<C64> {
        &mut self.mat
    }

    pub fn as_ref(&self) -> MatRef<'_, C64> {
        self.mat.as_ref()
    }

    pub fn into_mat(self) -> Mat<C64> {
        self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.mat[(i, j)] = v;
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.mat[(i, i)]).sum()
    }

    pub fn transpose(&self) -> Self {
        Self {
            mat: self.mat.transpose().to_owned(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: self.mat.adjoint().to_owned(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            mat: Mat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)] * s),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim())?;
        Ok(Self {
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim())?;
        Ok(Self {
            mat: &self.mat - &other.mat,
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim())?;
        Ok(Self {
            mat: linalg::mul(self.as_ref(), other.as_ref()),
        })
    }

    /// `AB − BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.check_dim(v.len())?;
        let n = self.dim();
        Ok((0..n).map(|i| (0..n).map(|j| self.mat[(i, j)] * v[j]).sum()).collect())
    }

    pub fn frobenius(&self) -> f64 {
        linalg::frobenius(self.as_ref())
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(self.as_ref())
    }

    /// `(A + A†)/2` in place.
    pub fn symmetrize(&mut self) {
        let n = self.dim();
        for j in 0..n {
            for i in 0..j {
                let avg = (self.mat[(i, j)] + self.mat[(j, i)].conj()) * 0.5;
                self.mat[(i, j)] = avg;
                self.mat[(j, i)] = avg.conj();
            }
            self.mat[(j, j)].im = 0.0;
        }
    }

    /// `‖A P − P A‖_F` for the Fock parity `P = diag((−1)ⁿ)`: twice the
    /// norm of the entries with odd `n + m`.
    pub fn parity_commutator(&self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for j in 0..n {
            for i in ((j + 1) % 2..n).step_by(2) {
                acc += self.mat[(i, j)].norm_sqr();
            }
        }
        2.0 * acc.sqrt()
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim() != n {
            return Err(Error::SizeMismatch {
                expected: self.dim(),
                got: n,
            });
        }
        Ok(())
    }
}

/// A Hermitian, unit-trace operator with its parameter stamp and kick count.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: OperatorMatrix,
    params: SystemParams,
    kick: u64,
}

impl DensityMatrix {
    /// Wraps `op` after checking size, Hermiticity and unit trace.
    pub fn new(op: OperatorMatrix, params: SystemParams, kick: u64) -> Result<Self> {
        op.check_dim(params.basis_n())?;
        let scale = op.frobenius().max(1.0);
        if op.hermiticity_defect() > 1e-10 * scale {
            return Err(Error::InvalidParams("density matrix is not Hermitian".into()));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::InvalidParams(format!("density matrix trace {tr} is not 1")));
        }
        Ok(Self { op, params, kick })
    }

    /// `|ψ⟩⟨ψ|`, renormalized if the vector lost weight to truncation.
    pub fn pure(psi: &[C64], params: SystemParams) -> Result<Self> {
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(Error::InvalidParams("zero state vector".into()));
        }
        let s = 1.0 / norm.sqrt();
        let v: Vec<C64> = psi.iter().map(|c| c * s).collect();
        Self::new(OperatorMatrix::outer(&v, &v)?, params, 0)
    }

    /// Equal-weight mixture of pure states.
    pub fn mixture(states: &[&[C64]], params: SystemParams) -> Result<Self> {
        let n = params.basis_n();
        let mut acc = OperatorMatrix::zeros(n);
        for psi in states {
            let rho = Self::pure(psi, params)?;
            acc = acc.add(&rho.op)?;
        }
        Self::new(acc.scale(C64::new(1.0 / states.len() as f64, 0.0)), params, 0)
    }

    /// Trusted construction for engine output.
    pub(crate) fn from_parts(op: OperatorMatrix, params: SystemParams, kick: u64) -> Self {
        Self { op, params, kick }
    }

    pub fn op(&self) -> &OperatorMatrix {
        &self.op
    }

    pub fn into_op(self) -> OperatorMatrix {
        self.op
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn kick(&self) -> u64 {
        self.kick
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn trace(&self) -> f64 {
        self.op.trace().re
    }

    pub fn population(&self, n: usize) -> f64 {
        self.op.get(n, n).re
    }
}
