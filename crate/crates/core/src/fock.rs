//! Fock-basis operators: `cos(q x̂)`, the kick unitary, coherent states,
//! ladder and parity operators.
//!
//! Conventions: `x̂ = √(ħ/2)(a + a†)`, `p̂ = i√(ħ/2)(a† − a)`, and a
//! coherent label `α = (x + i p)/√(2ħ)` so that `⟨x̂⟩ = x`, `⟨p̂⟩ = p`.

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::OperatorMatrix;
use crate::params::SystemParams;

/// `ln k!` for `k = 0..=n`.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Real symmetric matrix of `cos(q x̂)` in the first `N` oscillator states.
#[derive(Clone, Debug, PartialEq)]
pub struct CosMatrix {
    entries: Mat<f64>,
    q: f64,
    hbar: f64,
}

impl CosMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.entries[(n, m)]
    }

    pub fn entries(&self) -> &Mat<f64> {
        &self.entries
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Rows and columns of one parity class (`0` even, `1` odd).
    fn parity_block(&self, parity: usize) -> Mat<f64> {
        let idx: Vec<usize> = (parity..self.dim()).step_by(2).collect();
        Mat::from_fn(idx.len(), idx.len(), |i, j| self.entries[(idx[i], idx[j])])
    }
}

/// Above this magnitude the recurrence pair is rescaled.
const RESCALE_AT: f64 = 1e150;

/// Matrix elements
/// `⟨n| cos q x̂ |n+m⟩ = [(1+(−1)^m)/2] (−1)^{m/2} 2^{−m/2} √(n!/(n+m)!) ħ^{m/2} q^m e^{−ħq²/4} L_n^m(ħq²/2)`.
///
/// With `z = ħq²/2` the prefactor is `(−1)^{m/2} √(zᵐ e^{−z}/m!) · √(m! n!/(n+m)!)`.
/// The second factor is folded into `G_n = √(m! n!/(n+m)!) L_n^m(z)`, which
/// obeys
/// `√((n+1)(n+m+1)) G_{n+1} = (2n+m+1−z) G_n − √(n(n+m)) G_{n−1}`, `G_0 = 1`,
/// run forward in `n` with a tracked log scale. Nothing overflows for any
/// `N` the engine can hold in memory.
pub fn cos_matrix(n: usize, q: f64, hbar: f64) -> Result<CosMatrix> {
    if n < 2 {
        return Err(Error::InvalidParams("cos_matrix needs N >= 2".into()));
    }
    let z = 0.5 * hbar * q * q;
    let mut entries = Mat::<f64>::zeros(n, n);
    if z == 0.0 {
        for i in 0..n {
            entries[(i, i)] = 1.0;
        }
        return Ok(CosMatrix { entries, q, hbar });
    }
    let lnf = ln_factorials(n);
    let ln_z = z.ln();
    for m in (0..n).step_by(2) {
        let mf = m as f64;
        let log_pref = 0.5 * (mf * ln_z - z - lnf[m]);
        let sign = if m % 4 == 0 { 1.0 } else { -1.0 };
        let mut log_scale = 0.0;
        let mut g_prev = 0.0;
        let mut g = 1.0;
        for row in 0..n - m {
            let val = sign * g * (log_pref + log_scale).exp();
            entries[(row, row + m)] = val;
            entries[(row + m, row)] = val;
            let r = row as f64;
            let next =
                ((2.0 * r + mf + 1.0 - z) * g - (r * (r + mf)).sqrt() * g_prev) / ((r + 1.0) * (r + mf + 1.0)).sqrt();
            g_prev = g;
            g = next;
            if g.abs() > RESCALE_AT {
                g /= RESCALE_AT;
                g_prev /= RESCALE_AT;
                log_scale += RESCALE_AT.ln();
            }
        }
    }
    Ok(CosMatrix { entries, q, hbar })
}

/// Largest Gauss–Hermite order the quadrature oracle accepts.
pub const QUADRATURE_ORDER_LIMIT: usize = 600;

/// Gauss–Hermite rule for the weight `e^{−y²}`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Orthonormal Hermite polynomials `h_0..h_{len−1}` at `y` with respect to
/// `e^{−y²}`.
fn hermite_orthonormal(y: f64, len: usize, out: &mut Vec<f64>) {
    out.clear();
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    for k in 0..len {
        out.push(cur);
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * y * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
}

impl GaussHermite {
    /// Nodes from the Jacobi matrix eigenvalues, polished by Newton steps on
    /// `h_order`; weights from the Christoffel formula `1/Σ h_k(y)²`.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 || order > QUADRATURE_ORDER_LIMIT {
            return Err(Error::QuadratureOrder {
                requested: order,
                limit: QUADRATURE_ORDER_LIMIT,
            });
        }
        let jacobi = Mat::<f64>::from_fn(order, order, |i, j| {
            if i == j + 1 || j == i + 1 {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let (mut nodes, _) = linalg::symmetric_eigen(jacobi.as_ref())?;
        let mut h = Vec::with_capacity(order + 1);
        for y in nodes.iter_mut() {
            for _ in 0..3 {
                hermite_orthonormal(*y, order + 1, &mut h);
                // h_n' = √(2n) h_{n−1}
                let deriv = (2.0 * order as f64).sqrt() * h[order - 1];
                if deriv == 0.0 {
                    break;
                }
                let step = h[order] / deriv;
                *y -= step;
                if step.abs() < 1e-16 * y.abs().max(1.0) {
                    break;
                }
            }
        }
        let weights = nodes
            .iter()
            .map(|&y| {
                hermite_orthonormal(y, order, &mut h);
                1.0 / h.iter().map(|v| v * v).sum::<f64>()
            })
            .collect();
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

/// Quadrature order used by [`cos_element_quadrature`].
pub fn default_quadrature_order(n: usize, m: usize) -> usize {
    2 * (n + m) + 64
}

/// `∫ cos(q x) ψ_n(x) ψ_{n+m}(x) dx` by Gauss–Hermite quadrature with the
/// Hermite functions evaluated by recurrence. Independent of [`cos_matrix`].
pub fn cos_element_quadrature(n: usize, m: usize, q: f64, hbar: f64) -> Result<f64> {
    let rule = GaussHermite::new(default_quadrature_order(n, m))?;
    cos_element_with_rule(&rule, n, m, q, hbar)
}

pub fn cos_element_with_rule(rule: &GaussHermite, n: usize, m: usize, q: f64, hbar: f64) -> Result<f64> {
    if 2 * rule.order() < 2 * (n + m) + 2 {
        return Err(Error::QuadratureOrder {
            requested: n + m + 1,
            limit: rule.order(),
        });
    }
    // x = √ħ y turns ψ_n(x)ψ_k(x)dx into h_n(y) h_k(y) e^{−y²} dy.
    let scale = q * hbar.sqrt();
    let mut h = Vec::with_capacity(n + m + 1);
    let mut acc = 0.0;
    for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
        hermite_orthonormal(y, n + m + 1, &mut h);
        acc += w * (scale * y).cos() * h[n] * h[n + m];
    }
    Ok(acc)
}

/// `exp(i (K/ħ) cos q x̂)` stored as its two parity blocks.
#[derive(Clone, Debug)]
pub struct KickOperator {
    dim: usize,
    even: Mat<C64>,
    odd: Mat<C64>,
    k_over_hbar: f64,
}

impl KickOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_over_hbar(&self) -> f64 {
        self.k_over_hbar
    }

    /// Block acting on even (`0`) or odd (`1`) Fock states.
    pub fn block(&self, parity: usize) -> &Mat<C64> {
        if parity == 0 {
            &self.even
        } else {
            &self.odd
        }
    }

    pub fn to_dense(&self) -> OperatorMatrix {
        let mut out = OperatorMatrix::zeros(self.dim);
        for parity in 0..2 {
            let b = self.block(parity);
            for j in 0..b.ncols() {
                for i in 0..b.nrows() {
                    out.set(2 * i + parity, 2 * j + parity, b[(i, j)]);
                }
            }
        }
        out
    }

    /// `U A U†`, computed block by block in the parity ordering.
    pub fn conjugate(&self, op: &OperatorMatrix) -> Result<OperatorMatrix> {
        op.check_dim(self.dim)?;
        let mut out = OperatorMatrix::zeros(self.dim);
        let src = op.mat();
        let sizes = [self.even.nrows(), self.odd.nrows()];
        let adjoints = [self.even.adjoint().to_owned(), self.odd.adjoint().to_owned()];
        for a in 0..2 {
            for b in 0..2 {
                let block = Mat::from_fn(sizes[a], sizes[b], |i, j| src[(2 * i + a, 2 * j + b)]);
                let mut left = Mat::<C64>::zeros(sizes[a], sizes[b]);
                linalg::mul_into(&mut left, self.block(a).as_ref(), block.as_ref());
                let mut res = Mat::<C64>::zeros(sizes[a], sizes[b]);
                linalg::mul_into(&mut res, left.as_ref(), adjoints[b].as_ref());
                let dst = out.mat_mut();
                for j in 0..sizes[b] {
                    for i in 0..sizes[a] {
                        dst[(2 * i + a, 2 * j + b)] = res[(i, j)];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `U = V e^{i(K/ħ)Λ} Vᵀ` from `C = V Λ Vᵀ`, per parity block.
pub fn kick_unitary(c: &CosMatrix, k_over_hbar: f64) -> Result<KickOperator> {
    let mut blocks = Vec::with_capacity(2);
    for parity in 0..2 {
        let block = c.parity_block(parity);
        let size = block.nrows();
        let (vals, vecs) = linalg::symmetric_eigen(block.as_ref())?;
        let phases: Vec<C64> = vals.iter().map(|&l| C64::from_polar(1.0, k_over_hbar * l)).collect();
        let left = Mat::<C64>::from_fn(size, size, |i, k| phases[k] * vecs[(i, k)]);
        let right = Mat::<C64>::from_fn(size, size, |k, j| C64::new(vecs[(j, k)], 0.0));
        blocks.push(linalg::mul(left.as_ref(), right.as_ref()));
    }
    let odd = blocks.pop().expect("two blocks");
    let even = blocks.pop().expect("two blocks");
    Ok(KickOperator {
        dim: c.dim(),
        even,
        odd,
        k_over_hbar,
    })
}

/// Kick operator for a parameter set.
pub fn kick_for(params: &SystemParams) -> Result<KickOperator> {
    let c = cos_matrix(params.basis_n(), params.q(), params.hbar())?;
    kick_unitary(&c, params.kick_over_hbar())
}

/// Truncated Fock amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct FockVector {
    pub amps: Vec<C64>,
    /// `1 − Σ|c_n|²` for a state that would be normalized in the full space.
    pub truncated_weight: f64,
}

impl FockVector {
    /// Truncated weight above which a coherent state is flagged.
    pub const WARN_WEIGHT: f64 = 1e-6;

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn truncation_warning(&self) -> bool {
        self.truncated_weight > Self::WARN_WEIGHT
    }

    /// `Σ n |c_n|²`.
    pub fn mean_number(&self) -> f64 {
        self.amps.iter().enumerate().map(|(n, c)| n as f64 * c.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &FockVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }
}

pub fn coherent_label(x: f64, p: f64, hbar: f64) -> C64 {
    C64::new(x, p) / (2.0 * hbar).sqrt()
}

/// Fills `out` with `e^{−|α|²/2} αⁿ/√(n!)` for `n < out.len()`, starting
/// the ratio recurrence at the peak `n ≈ |α|²` so neither direction
/// underflows before the amplitudes become negligible.
pub fn coherent_amplitudes(alpha: C64, lnf: &[f64], out: &mut [C64]) {
    let n = out.len();
    let r2 = alpha.norm_sqr();
    if r2 == 0.0 {
        out.fill(C64::new(0.0, 0.0));
        out[0] = C64::new(1.0, 0.0);
        return;
    }
    let peak = (r2.floor() as usize).min(n - 1);
    let ln_abs = 0.5 * r2.ln();
    let arg = alpha.arg();
    let pf = peak as f64;
    out[peak] = C64::from_polar((-0.5 * r2 + pf * ln_abs - 0.5 * lnf[peak]).exp(), pf * arg);
    for k in peak + 1..n {
        out[k] = out[k - 1] * alpha / (k as f64).sqrt();
    }
    let inv = 1.0 / alpha;
    for k in (0..peak).rev() {
        out[k] = out[k + 1] * inv * ((k + 1) as f64).sqrt();
    }
}

/// Minimal coherent state centred at `(x, p)`.
pub fn coherent_state(x: f64, p: f64, params: &SystemParams) -> FockVector {
    let n = params.basis_n();
    let lnf = ln_factorials(n);
    let mut amps = vec![C64::new(0.0, 0.0); n];
    coherent_amplitudes(coherent_label(x, p, params.hbar()), &lnf, &mut amps);
    let norm: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
    FockVector {
        amps,
        truncated_weight: (1.0 - norm).max(0.0),
    }
}

/// `|⟨α|β⟩| = e^{−|α−β|²/2}` for untruncated coherent states.
pub fn coherent_overlap(a: (f64, f64), b: (f64, f64), hbar: f64) -> f64 {
    let d = coherent_label(a.0, a.1, hbar) - coherent_label(b.0, b.1, hbar);
    (-0.5 * d.norm_sqr()).exp()
}

/// Lowering operator `a` with `√n` on the superdiagonal (`a|n⟩ = √n|n−1⟩`).
pub fn lowering_matrix(n: usize) -> OperatorMatrix {
    OperatorMatrix::from_fn(n, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Diagonal of the Fock parity operator, `(−1)ⁿ`.
pub fn parity_vector(n: usize) -> Vec<f64> {
    (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect()
}
