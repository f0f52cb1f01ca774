//! Independent reference computations and the comparisons that check the
//! production paths against them.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classical::{self, Ensemble, PhasePoint};
use crate::error::Result;
use crate::fock;
use crate::grid::{grid_correlation, GridSpec, PhaseGrid};
use crate::lindblad::{self, ChannelCache, EvolveOptions, KickDiagnostics, LindbladEngine};
use crate::observables;
use crate::operator::{DensityMatrix, OperatorMatrix};
use crate::params::SystemParams;

/// Dormand–Prince 5(4) integration of `ẋ = p, ṗ = −2γp − x` with an
/// adaptive step controlled to relative tolerance `tol`.
pub fn free_flow_ode(x: f64, p: f64, gamma: f64, t_end: f64, tol: f64) -> (f64, f64) {
    let f = |y: [f64; 2]| [y[1], -2.0 * gamma * y[1] - y[0]];
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let mut y = [x, p];
    let mut t = 0.0;
    let mut h = 1e-3;
    while t < t_end {
        if t + h > t_end {
            h = t_end - t;
        }
        let mut k = [[0.0; 2]; 7];
        k[0] = f(y);
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                ys[0] += h * A[s - 1][j] * kj[0];
                ys[1] += h * A[s - 1][j] * kj[1];
            }
            k[s] = f(ys);
        }
        let mut y_new = y;
        let mut err = [0.0; 2];
        for j in 0..7 {
            let b = if j < 6 { A[5][j] } else { 0.0 };
            y_new[0] += h * b * k[j][0];
            y_new[1] += h * b * k[j][1];
            err[0] += h * E[j] * k[j][0];
            err[1] += h * E[j] * k[j][1];
        }
        let scale = 1.0 + y[0].abs().max(y[1].abs());
        let e = err[0].abs().max(err[1].abs()) / (tol * scale);
        if e <= 1.0 {
            t += h;
            y = y_new;
        }
        h *= (0.9 * e.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
    }
    (y[0], y[1])
}

/// One row of an oracle table.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCheck {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
    /// `true` when the quantity must stay at or above `tolerance` instead.
    pub lower_bound: bool,
}

impl OracleCheck {
    pub fn new(name: impl Into<String>, error: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            error,
            tolerance,
            lower_bound: false,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            error: value,
            tolerance: threshold,
            lower_bound: true,
        }
    }

    pub fn passed(&self) -> bool {
        if self.lower_bound {
            self.error >= self.tolerance
        } else {
            self.error <= self.tolerance
        }
    }
}

/// Largest `|cos_matrix − quadrature|` over `n, n+m ≤ max_index`. A nonzero
/// `perturbation` scales the closed-form elements by `1 + perturbation`.
pub fn cos_matrix_error(max_index: usize, q: f64, hbar: f64, perturbation: f64) -> Result<f64> {
    let c = fock::cos_matrix(max_index + 1, q, hbar)?;
    let rule = fock::GaussHermite::new(fock::default_quadrature_order(max_index, 0).max(2 * max_index + 64))?;
    let mut worst = 0.0f64;
    for n in 0..=max_index {
        for m in 0..=max_index - n {
            let quad = fock::cos_element_with_rule(&rule, n, m, q, hbar)?;
            let closed = c.get(n, n + m) * (1.0 + perturbation);
            worst = worst.max((closed - quad).abs());
        }
    }
    Ok(worst)
}

/// Random operator with entries uniform in the unit square.
pub fn random_operator(n: usize, seed: u64, hermitian: bool) -> OperatorMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut op = OperatorMatrix::from_fn(n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    if hermitian {
        op.symmetrize();
    }
    op
}

/// RK4 step used against the exact channel: comfortably inside the
/// stability bound so the integrator error stays far below 1e−6.
pub fn channel_rk_step(gamma: f64, n: usize) -> f64 {
    1.0 / (64.0 * gamma.max(1e-300) * n as f64)
}

/// Largest Frobenius distance between [`lindblad::damping_channel`] and the
/// RK4 integration over `count` random operators (alternately Hermitian).
pub fn channel_error(n: usize, gamma: f64, t: f64, count: usize, seed: u64) -> Result<f64> {
    let cache = ChannelCache::new(gamma, t, n);
    let dt = channel_rk_step(gamma, n);
    let mut worst = 0.0f64;
    for k in 0..count {
        let op = random_operator(n, seed.wrapping_add(k as u64), k % 2 == 0);
        let exact = lindblad::damping_channel(&op, &cache)?;
        let rk = lindblad::damping_channel_rk(&op, gamma, t, dt)?;
        worst = worst.max(exact.sub(&rk)?.frobenius());
    }
    Ok(worst)
}

/// Largest coordinate difference between the closed-form free step and the
/// ODE integration over `count` random inputs in `[−20, 20]²`.
pub fn free_flow_error(gamma: f64, t: f64, count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let (x, p) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let pt = classical::free_dissipative_step(PhasePoint::new(x, p), gamma, t);
        let (ox, op) = free_flow_ode(x, p, gamma, t, 1e-14);
        worst = worst.max((pt.x - ox).abs()).max((pt.p - op).abs());
    }
    worst
}

/// Husimi function of the evolved coherent state next to the classical
/// density evolved from the matching Wigner Gaussian and smoothed by the
/// coherent-state width.
#[derive(Clone, Debug)]
pub struct Correspondence {
    pub husimi: PhaseGrid,
    pub classical: PhaseGrid,
    pub correlation: f64,
    pub quantum_energy: f64,
    pub classical_energy: f64,
    pub max_edge_population: f64,
    pub warnings: Vec<String>,
}

#[allow(clippy::too_many_arguments)]
pub fn correspondence(
    params: &SystemParams,
    start: (f64, f64),
    n_kicks: u64,
    spec: &GridSpec,
    ensemble: usize,
    seed: u64,
    force: bool,
) -> Result<Correspondence> {
    let engine = LindbladEngine::new(params)?;
    let psi = fock::coherent_state(start.0, start.1, params);
    let rho0 = DensityMatrix::pure(&psi.amps, *params)?;
    let mut sink = |_: &DensityMatrix, _: &KickDiagnostics| Ok(());
    let record = lindblad::evolve(&engine, &rho0, &EvolveOptions { n_kicks, force }, |_| false, &mut sink)?;
    let husimi = observables::husimi_density(&record.final_state, spec).grid;

    let width = (0.5 * params.hbar()).sqrt();
    let ens = Ensemble::gaussian(PhasePoint::new(start.0, start.1), width, ensemble, seed)?;
    let (classical, classical_energy) = if n_kicks == 0 {
        (
            classical::bin_points(&ens.points, *spec),
            classical::energy_moments(&ens).energy,
        )
    } else {
        let hist = classical::accumulate_histogram(&ens, params, 1, n_kicks as usize - 1, *spec)?;
        let e = classical::energy_moments(&hist.final_ensemble).energy;
        (hist.grid, e)
    };
    let classical = classical.gaussian_smooth(width, width);
    let correlation = grid_correlation(&husimi, &classical)?;
    Ok(Correspondence {
        husimi,
        classical,
        correlation,
        quantum_energy: record.history.last().map(|d| d.mean_energy).unwrap_or(0.0),
        classical_energy,
        max_edge_population: record.max_edge_population(),
        warnings: record.warnings,
    })
}
