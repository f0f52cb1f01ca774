//! Quantities extracted from states and evolutions: Husimi grids, spectra,
//! entropy, negativity and scalar diagnostics.

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{self, FockVector};
use crate::grid::{GridSpec, PhaseGrid};
use crate::linalg;
use crate::lindblad::{self, LindbladEngine};
use crate::operator::{DensityMatrix, OperatorMatrix};
use crate::params::SystemParams;

pub use crate::grid::grid_correlation;

/// Grid nodes handled per dense product.
const HUSIMI_CHUNK: usize = 512;

/// Husimi values with the most negative raw value seen before clipping.
#[derive(Clone, Debug, PartialEq)]
pub struct HusimiGrid {
    pub grid: PhaseGrid,
    /// Smallest value before clipping at zero; negative values are roundoff.
    pub min_raw: f64,
}

fn node_amplitudes(spec: &GridSpec, hbar: f64, dim: usize, nodes: std::ops::Range<usize>, lnf: &[f64]) -> Mat<C64> {
    let mut cols = Mat::<C64>::zeros(dim, nodes.len());
    let mut buf = vec![C64::new(0.0, 0.0); dim];
    for (c, node) in nodes.enumerate() {
        let (ix, jp) = (node % spec.m_x, node / spec.m_x);
        let alpha = fock::coherent_label(spec.x_center(ix), spec.p_center(jp), hbar);
        fock::coherent_amplitudes(alpha, lnf, &mut buf);
        for (n, v) in buf.iter().enumerate() {
            cols[(n, c)] = *v;
        }
    }
    cols
}

fn finish_grid(spec: GridSpec, mut values: Vec<f64>, hbar: f64) -> HusimiGrid {
    let norm = 1.0 / (2.0 * std::f64::consts::PI * hbar);
    let mut min_raw = f64::INFINITY;
    for v in values.iter_mut() {
        *v *= norm;
        min_raw = min_raw.min(*v);
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let mut grid = PhaseGrid {
        spec,
        values,
        overflow_mass: 0.0,
    };
    grid.overflow_mass = (1.0 - grid.mass()).max(0.0);
    HusimiGrid { grid, min_raw }
}

/// `H(x, p) = ⟨α|A|α⟩ / (2πħ)` at every node, `α = (x + ip)/√(2ħ)`.
/// Nodes are processed in column batches as `Re(c† (A c))`.
pub fn husimi_grid(op: &OperatorMatrix, spec: &GridSpec, hbar: f64) -> HusimiGrid {
    let dim = op.dim();
    let lnf = fock::ln_factorials(dim);
    let total = spec.len();
    let starts: Vec<usize> = (0..total).step_by(HUSIMI_CHUNK).collect();
    let values: Vec<f64> = starts
        .par_iter()
        .flat_map_iter(|&start| {
            let nodes = start..(start + HUSIMI_CHUNK).min(total);
            let cols = node_amplitudes(spec, hbar, dim, nodes.clone(), &lnf);
            let prod = linalg::mul(op.as_ref(), cols.as_ref());
            (0..nodes.len())
                .map(|c| (0..dim).map(|n| (cols[(n, c)].conj() * prod[(n, c)]).re).sum::<f64>())
                .collect::<Vec<_>>()
        })
        .collect();
    finish_grid(*spec, values, hbar)
}

/// Husimi function of a pure state, `|⟨α|ψ⟩|² / (2πħ)`.
pub fn husimi_vector(psi: &[C64], spec: &GridSpec, hbar: f64) -> HusimiGrid {
    let dim = psi.len();
    let lnf = fock::ln_factorials(dim);
    let values: Vec<f64> = (0..spec.len())
        .into_par_iter()
        .map_init(
            || vec![C64::new(0.0, 0.0); dim],
            |buf, node| {
                let (ix, jp) = (node % spec.m_x, node / spec.m_x);
                let alpha = fock::coherent_label(spec.x_center(ix), spec.p_center(jp), hbar);
                fock::coherent_amplitudes(alpha, &lnf, buf);
                buf.iter().zip(psi).map(|(c, v)| c.conj() * v).sum::<C64>().norm_sqr()
            },
        )
        .collect();
    finish_grid(*spec, values, hbar)
}

pub fn husimi_density(rho: &DensityMatrix, spec: &GridSpec) -> HusimiGrid {
    husimi_grid(rho.op(), spec, rho.params().hbar())
}

/// Eigen-decomposition of a density matrix in descending order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors for the leading `eigenvectors.len()` eigenvalues.
    pub eigenvectors: Vec<FockVector>,
    pub kick: u64,
}

impl SpectrumResult {
    pub fn sum(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

pub fn spectrum(rho: &DensityMatrix, k_top: usize) -> Result<SpectrumResult> {
    let n = rho.dim();
    let k_top = k_top.min(n);
    let (mut vals, vecs) = linalg::hermitian_eigen(rho.op().as_ref(), k_top > 0)?;
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen {
            size: n,
            reason: "non-finite eigenvalue".into(),
        });
    }
    vals.reverse();
    let eigenvectors = match vecs {
        Some(v) => (0..k_top)
            .map(|k| FockVector {
                amps: (0..n).map(|i| v[(i, n - 1 - k)]).collect(),
                truncated_weight: 0.0,
            })
            .collect(),
        None => Vec::new(),
    };
    Ok(SpectrumResult {
        eigenvalues: vals,
        eigenvectors,
        kick: rho.kick(),
    })
}

/// `(λ₀−λ₁, λ₂−λ₃, λ₄−λ₅)`.
pub fn pair_splittings(sr: &SpectrumResult) -> Result<[f64; 3]> {
    let l = &sr.eigenvalues;
    if l.len() < 6 {
        return Err(Error::InvalidParams(format!(
            "pair splittings need 6 eigenvalues, have {}",
            l.len()
        )));
    }
    Ok([l[0] - l[1], l[2] - l[3], l[4] - l[5]])
}

/// `−Σ λ ln λ` over positive eigenvalues.
pub fn entanglement_entropy(sr: &SpectrumResult) -> f64 {
    sr.eigenvalues.iter().filter(|&&l| l > 0.0).map(|&l| -l * l.ln()).sum()
}

/// `⟨χ|P|χ⟩` for Fock parity `P`.
pub fn parity_expectation(psi: &FockVector) -> f64 {
    psi.amps
        .iter()
        .enumerate()
        .map(|(n, c)| if n % 2 == 0 { c.norm_sqr() } else { -c.norm_sqr() })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDiagnostics {
    pub trace: f64,
    pub purity: f64,
    pub min_eigenvalue: f64,
    pub edge_population: f64,
}

pub fn purity_trace_diagnostics(rho: &DensityMatrix) -> Result<StateDiagnostics> {
    let cheap = lindblad::kick_diagnostics(rho);
    let (vals, _) = linalg::hermitian_eigen(rho.op().as_ref(), false)?;
    Ok(StateDiagnostics {
        trace: cheap.trace,
        purity: cheap.purity,
        min_eigenvalue: vals.first().copied().unwrap_or(0.0),
        edge_population: cheap.edge_population,
    })
}

/// `ħ Σ ρ_nn (n + ½)`.
pub fn mean_energy(rho: &DensityMatrix) -> f64 {
    lindblad::kick_diagnostics(rho).mean_energy
}

/// Deviation from Hermiticity tolerated in the negativity assembly.
pub const ASSEMBLY_HERMITICITY_TOL: f64 = 1e-8;
/// Coherent-label overlap above which the Bell-state normalization is off.
pub const OVERLAP_WARN: f64 = 1e-6;

/// The four evolved blocks `L(|a⟩⟨b|)` of the qubit-oscillator state.
#[derive(Clone, Debug)]
pub struct NegativityAssembly {
    pub aa: OperatorMatrix,
    pub ab: OperatorMatrix,
    pub ba: OperatorMatrix,
    pub bb: OperatorMatrix,
}

impl NegativityAssembly {
    /// `½ [[L(αα)ᵗ, L(αβ)ᵗ], [L(βα)ᵗ, L(ββ)ᵗ]]`.
    pub fn partial_transpose(&self) -> Mat<C64> {
        let n = self.aa.dim();
        Mat::from_fn(2 * n, 2 * n, |i, j| {
            let block = match (i < n, j < n) {
                (true, true) => &self.aa,
                (true, false) => &self.ab,
                (false, true) => &self.ba,
                (false, false) => &self.bb,
            };
            block.get(j % n, i % n) * 0.5
        })
    }

    /// `G_N = |Σ_{λ<0} λ|` of the partial transpose, together with its trace
    /// and most negative eigenvalue.
    pub fn negativity(&self) -> Result<NegativitySample> {
        let pt = self.partial_transpose();
        let defect = linalg::hermiticity_defect(pt.as_ref());
        if defect > ASSEMBLY_HERMITICITY_TOL {
            return Err(Error::AssemblyNotHermitian(defect));
        }
        let trace: f64 = (0..pt.nrows()).map(|k| pt[(k, k)].re).sum();
        let (vals, _) = linalg::hermitian_eigen(pt.as_ref(), false)?;
        let g_n = vals.iter().filter(|&&l| l < 0.0).sum::<f64>().abs();
        Ok(NegativitySample {
            kick: 0,
            g_n,
            trace,
            min_eigenvalue: vals.first().copied().unwrap_or(0.0),
            hermiticity_defect: defect,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NegativitySample {
    pub kick: u64,
    pub g_n: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub hermiticity_defect: f64,
}

#[derive(Clone, Debug)]
pub struct NegativitySeries {
    pub samples: Vec<NegativitySample>,
    /// `|⟨α|β⟩|` of the (truncated, normalized) initial states.
    pub overlap: f64,
    pub warnings: Vec<String>,
    pub max_edge_population: f64,
}

fn normalized(v: &FockVector) -> Vec<C64> {
    let s = 1.0 / v.norm_sqr().sqrt();
    v.amps.iter().map(|c| c * s).collect()
}

/// Evolves the four blocks of `(|g₀⟩|α⟩ + |g₁⟩|β⟩)/√2` and samples `G_N`
/// whenever `sample(kick)` holds. `alpha` and `beta` are phase-space
/// centres `(x, p)`.
pub fn evolve_negativity(
    alpha: (f64, f64),
    beta: (f64, f64),
    params: &SystemParams,
    n_kicks: u64,
    sample: impl Fn(u64) -> bool,
    force: bool,
) -> Result<NegativitySeries> {
    let engine = LindbladEngine::new(params)?;
    evolve_negativity_with(&engine, alpha, beta, n_kicks, sample, force)
}

pub fn evolve_negativity_with(
    engine: &LindbladEngine,
    alpha: (f64, f64),
    beta: (f64, f64),
    n_kicks: u64,
    sample: impl Fn(u64) -> bool,
    force: bool,
) -> Result<NegativitySeries> {
    let params = engine.params();
    let a = fock::coherent_state(alpha.0, alpha.1, params);
    let b = fock::coherent_state(beta.0, beta.1, params);
    let mut warnings = Vec::new();
    for (name, v) in [("alpha", &a), ("beta", &b)] {
        if v.truncation_warning() {
            warnings.push(format!(
                "{name} coherent state loses {:.3e} to truncation",
                v.truncated_weight
            ));
        }
    }
    let (va, vb) = (normalized(&a), normalized(&b));
    let overlap = va.iter().zip(&vb).map(|(x, y)| x.conj() * y).sum::<C64>().norm();
    if overlap > OVERLAP_WARN {
        warnings.push(format!("coherent labels overlap |<alpha|beta>| = {overlap:.3e}"));
    }
    let mut blocks = NegativityAssembly {
        aa: OperatorMatrix::outer(&va, &va)?,
        ab: OperatorMatrix::outer(&va, &vb)?,
        ba: OperatorMatrix::outer(&vb, &va)?,
        bb: OperatorMatrix::outer(&vb, &vb)?,
    };
    let mut samples = Vec::new();
    let mut max_edge = 0.0f64;
    let mut forced = false;
    for kick in 0..=n_kicks {
        if kick > 0 {
            let stepped: Vec<OperatorMatrix> = [
                (&blocks.aa, true),
                (&blocks.ab, false),
                (&blocks.ba, false),
                (&blocks.bb, true),
            ]
            .into_par_iter()
            .map(|(op, herm)| engine.period_step(op, herm))
            .collect::<Result<_>>()?;
            let mut it = stepped.into_iter();
            blocks = NegativityAssembly {
                aa: it.next().expect("four blocks"),
                ab: it.next().expect("four blocks"),
                ba: it.next().expect("four blocks"),
                bb: it.next().expect("four blocks"),
            };
        }
        let edge = lindblad::edge_population(&blocks.aa).max(lindblad::edge_population(&blocks.bb));
        max_edge = max_edge.max(edge);
        if edge > lindblad::EDGE_ABORT {
            if !force {
                return Err(Error::Truncation {
                    kick,
                    edge_population: edge,
                    limit: lindblad::EDGE_ABORT,
                });
            }
            if !forced {
                warnings.push(format!(
                    "edge population {edge:.3e} above abort limit {:.0e} at kick {kick} (forced)",
                    lindblad::EDGE_ABORT
                ));
                forced = true;
            }
        }
        if sample(kick) {
            let mut s = blocks.negativity()?;
            s.kick = kick;
            samples.push(s);
        }
    }
    if !forced && max_edge > lindblad::EDGE_WARN {
        warnings.push(format!("edge population reached {max_edge:.3e}"));
    }
    Ok(NegativitySeries {
        samples,
        overlap,
        warnings,
        max_edge_population: max_edge,
    })
}
