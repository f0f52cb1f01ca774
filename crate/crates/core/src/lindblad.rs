//! Stroboscopic Lindblad evolution in the Fock basis.
//!
//! Between kicks the master equation with dissipator `2γ D[a]` splits into a
//! free rotation `ρ_nm → ρ_nm e^{i(m−n)t}` and, in the interaction picture,
//!
//! ```text
//! dρ̃_nm/dt = 2γ ( √((n+1)(m+1)) ρ̃_{n+1,m+1} − (n+m) ρ̃_nm / 2 )
//! ```
//!
//! which only couples entries with equal offset `k = m − n`. Its exact
//! solution over time `t`, with `η = e^{−2γt}`, is the feed-down series
//!
//! ```text
//! ρ̃_ab(t) = Σ_j S_a(j) S_b(j) ρ̃_{a+j,b+j}(0),   S_n(j)² = C(n+j, j) ηⁿ (1−η)^j
//! ```
//!
//! i.e. each factor is the square root of a binomial survival probability.
//! The kick is the unitary conjugation `ρ → U ρ U†` with
//! `U = exp(i (K/ħ) cos q x̂)`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{self, KickOperator};
use crate::operator::{DensityMatrix, OperatorMatrix};
use crate::params::SystemParams;

/// Feed-down terms whose weight factor falls below this are dropped.
pub const WEIGHT_CUTOFF: f64 = 1e-18;

/// Edge population (`Σ_{n > 0.9N} ρ_nn`) that triggers a warning.
pub const EDGE_WARN: f64 = 1e-6;
/// Edge population that aborts an evolution unless forced.
pub const EDGE_ABORT: f64 = 1e-3;

/// Coefficient tables of the exact damping channel at fixed `(γ, t, N)`.
#[derive(Clone, Debug)]
pub struct ChannelCache {
    dim: usize,
    gamma: f64,
    time: f64,
    /// Row `n` holds `S_n(j)` for `j` in `starts[n] .. starts[n] + rows[n].len()`.
    rows: Vec<Vec<f64>>,
    starts: Vec<usize>,
}

impl ChannelCache {
    pub fn new(gamma: f64, time: f64, dim: usize) -> Self {
        let eta = (-2.0 * gamma * time).exp();
        let lnf = fock::ln_factorials(2 * dim);
        let ln_cut = WEIGHT_CUTOFF.ln();
        let mut rows = Vec::with_capacity(dim);
        let mut starts = Vec::with_capacity(dim);
        for n in 0..dim {
            let max_j = dim - 1 - n;
            if eta >= 1.0 {
                rows.push(vec![1.0]);
                starts.push(0);
                continue;
            }
            let ln_eta = -2.0 * gamma * time;
            let ln_loss = (-(-2.0 * gamma * time).exp_m1()).ln();
            let log_s = |j: usize| 0.5 * (lnf[n + j] - lnf[n] - lnf[j] + n as f64 * ln_eta + j as f64 * ln_loss);
            let mut row = Vec::new();
            let mut start = None;
            for j in 0..=max_j {
                let ls = log_s(j);
                if ls >= ln_cut {
                    if start.is_none() {
                        start = Some(j);
                    }
                    row.push(ls.exp());
                } else if start.is_some() {
                    // unimodal in j: nothing further clears the cutoff
                    break;
                }
            }
            starts.push(start.unwrap_or(0));
            rows.push(row);
        }
        Self {
            dim,
            gamma,
            time,
            rows,
            starts,
        }
    }

    pub fn for_params(params: &SystemParams) -> Self {
        Self::new(params.gamma(), params.period_t(), params.basis_n())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `S_n(j)`, zero outside the stored window.
    pub fn factor(&self, n: usize, j: usize) -> f64 {
        let start = self.starts[n];
        if j < start {
            return 0.0;
        }
        self.rows[n].get(j - start).copied().unwrap_or(0.0)
    }

    /// Diagonal-sector weight for population moving from `n + j` down to `n`.
    pub fn transfer_weight(&self, n: usize, j: usize) -> f64 {
        self.factor(n, j).powi(2)
    }

    fn window(&self, n: usize) -> (usize, usize) {
        (self.starts[n], self.starts[n] + self.rows[n].len())
    }
}

/// Exact solution of the interaction-picture damping equation over the
/// cache's time. Linear; accepts non-Hermitian input.
pub fn damping_channel(op: &OperatorMatrix, cache: &ChannelCache) -> Result<OperatorMatrix> {
    op.check_dim(cache.dim)?;
    let n = cache.dim;
    let src: Vec<C64> = (0..n * n).map(|idx| op.get(idx % n, idx / n)).collect();
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(b, col)| {
        let (lo_b, hi_b) = cache.window(b);
        let row_b = &cache.rows[b];
        for (a, slot) in col.iter_mut().enumerate() {
            let (lo_a, hi_a) = cache.window(a);
            let lo = lo_a.max(lo_b);
            let hi = hi_a.min(hi_b);
            if lo >= hi {
                continue;
            }
            let row_a = &cache.rows[a];
            let mut acc = C64::new(0.0, 0.0);
            let mut idx = (a + lo) + (b + lo) * n;
            for j in lo..hi {
                let w = row_a[j - lo_a] * row_b[j - lo_b];
                acc += src[idx] * w;
                idx += n + 1;
            }
            *slot = acc;
        }
    });
    Ok(OperatorMatrix::from_fn(n, |i, j| out[i + j * n]))
}

fn damping_rhs(src: &[C64], n: usize, rate: f64, dst: &mut [C64]) {
    for b in 0..n {
        for a in 0..n {
            let mut d = -0.5 * (a + b) as f64 * src[a + b * n];
            if a + 1 < n && b + 1 < n {
                d += (((a + 1) * (b + 1)) as f64).sqrt() * src[(a + 1) + (b + 1) * n];
            }
            dst[a + b * n] = d * rate;
        }
    }
}

/// Fixed-step classical RK4 integration of the interaction-picture damping
/// equation. Kept as an independent check on [`damping_channel`]; refuses
/// steps above the stiffness bound `1/(4γN)`.
pub fn damping_channel_rk(op: &OperatorMatrix, gamma: f64, time: f64, dt: f64) -> Result<OperatorMatrix> {
    let n = op.dim();
    if gamma == 0.0 || time == 0.0 {
        return Ok(op.clone());
    }
    let bound = 1.0 / (4.0 * gamma * n as f64);
    if !(dt > 0.0 && dt <= bound) {
        return Err(Error::StepTooLarge { dt, bound });
    }
    let steps = (time / dt).ceil() as usize;
    let h = time / steps as f64;
    let rate = 2.0 * gamma;
    let mut y: Vec<C64> = (0..n * n).map(|idx| op.get(idx % n, idx / n)).collect();
    let mut k1 = vec![C64::new(0.0, 0.0); n * n];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    for _ in 0..steps {
        damping_rhs(&y, n, rate, &mut k1);
        for i in 0..n * n {
            tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        damping_rhs(&tmp, n, rate, &mut k2);
        for i in 0..n * n {
            tmp[i] = y[i] + k2[i] * (0.5 * h);
        }
        damping_rhs(&tmp, n, rate, &mut k3);
        for i in 0..n * n {
            tmp[i] = y[i] + k3[i] * h;
        }
        damping_rhs(&tmp, n, rate, &mut k4);
        for i in 0..n * n {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    Ok(OperatorMatrix::from_fn(n, |i, j| y[i + j * n]))
}

/// `t / (π/2)` when it is an integer number of quarter turns.
fn quarter_turns(time: f64) -> Option<i64> {
    let turns = time / FRAC_PI_2;
    let rounded = turns.round();
    ((turns - rounded).abs() <= 1e-12 * turns.abs().max(1.0)).then_some(rounded as i64)
}

/// Free-oscillator phases `e^{i(m−n)t}`. Quarter-period multiples use exact
/// powers of `i`.
pub fn free_phase_rotation(op: &OperatorMatrix, time: f64) -> OperatorMatrix {
    let n = op.dim();
    // phases[k + n − 1] = e^{i k t} for k = m − n in −(N−1)..=N−1
    let phases: Vec<C64> = match quarter_turns(time) {
        Some(q) => (0..2 * n - 1)
            .map(|idx| {
                let k = idx as i64 - (n as i64 - 1);
                match (k * q).rem_euclid(4) {
                    0 => C64::new(1.0, 0.0),
                    1 => C64::new(0.0, 1.0),
                    2 => C64::new(-1.0, 0.0),
                    _ => C64::new(0.0, -1.0),
                }
            })
            .collect(),
        None => (0..2 * n - 1)
            .map(|idx| C64::from_polar(1.0, (idx as f64 - (n as f64 - 1.0)) * time))
            .collect(),
    };
    OperatorMatrix::from_fn(n, |a, b| op.get(a, b) * phases[b + n - 1 - a])
}

pub fn kick_conjugation(op: &OperatorMatrix, kick: &KickOperator) -> Result<OperatorMatrix> {
    kick.conjugate(op)
}

/// Cached channel and kick for one parameter set.
#[derive(Clone, Debug)]
pub struct LindbladEngine {
    params: SystemParams,
    channel: ChannelCache,
    kick: KickOperator,
}

impl LindbladEngine {
    pub fn new(params: &SystemParams) -> Result<Self> {
        Ok(Self {
            params: *params,
            channel: ChannelCache::for_params(params),
            kick: fock::kick_for(params)?,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn channel(&self) -> &ChannelCache {
        &self.channel
    }

    pub fn kick(&self) -> &KickOperator {
        &self.kick
    }

    /// One period: damping over `T`, free phases, then the kick. Hermitian
    /// inputs are re-symmetrized afterwards.
    pub fn period_step(&self, op: &OperatorMatrix, hermitian: bool) -> Result<OperatorMatrix> {
        let damped = damping_channel(op, &self.channel)?;
        let rotated = free_phase_rotation(&damped, self.params.period_t());
        let mut kicked = kick_conjugation(&rotated, &self.kick)?;
        if hermitian {
            kicked.symmetrize();
        }
        Ok(kicked)
    }

    pub fn step_density(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        rho.op().check_dim(self.params.basis_n())?;
        let next = self.period_step(rho.op(), true)?;
        Ok(DensityMatrix::from_parts(next, self.params, rho.kick() + 1))
    }
}

/// Cheap per-kick scalars.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KickDiagnostics {
    pub kick: u64,
    pub trace: f64,
    pub purity: f64,
    pub mean_energy: f64,
    pub edge_population: f64,
}

/// First Fock index counted as the truncation edge (`n > 0.9 N`).
pub fn edge_start(n: usize) -> usize {
    (9 * n) / 10 + 1
}

pub fn edge_population(op: &OperatorMatrix) -> f64 {
    (edge_start(op.dim())..op.dim()).map(|k| op.get(k, k).re).sum()
}

pub fn kick_diagnostics(rho: &DensityMatrix) -> KickDiagnostics {
    let op = rho.op();
    let n = op.dim();
    let mut purity = 0.0;
    for j in 0..n {
        for i in 0..n {
            purity += op.get(i, j).norm_sqr();
        }
    }
    let hbar = rho.params().hbar();
    let mean_energy = hbar * (0..n).map(|k| op.get(k, k).re * (k as f64 + 0.5)).sum::<f64>();
    KickDiagnostics {
        kick: rho.kick(),
        trace: rho.trace(),
        purity,
        mean_energy,
        edge_population: edge_population(op),
    }
}

/// Receives states at snapshot times.
pub trait SnapshotSink {
    fn on_snapshot(&mut self, rho: &DensityMatrix, diag: &KickDiagnostics) -> Result<()>;
}

impl<F> SnapshotSink for F
where
    F: FnMut(&DensityMatrix, &KickDiagnostics) -> Result<()>,
{
    fn on_snapshot(&mut self, rho: &DensityMatrix, diag: &KickDiagnostics) -> Result<()> {
        self(rho, diag)
    }
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub n_kicks: u64,
    /// Continue past the edge-population abort limit, recording a warning.
    pub force: bool,
}

#[derive(Clone, Debug)]
pub struct EvolutionRecord {
    /// Diagnostics for every kick, starting with the initial state.
    pub history: Vec<KickDiagnostics>,
    pub warnings: Vec<String>,
    pub final_state: DensityMatrix,
}

impl EvolutionRecord {
    pub fn energies(&self) -> Vec<f64> {
        self.history.iter().map(|d| d.mean_energy).collect()
    }

    pub fn max_edge_population(&self) -> f64 {
        self.history.iter().map(|d| d.edge_population).fold(0.0, f64::max)
    }
}

/// Iterates [`LindbladEngine::step_density`], handing the state to `sink`
/// whenever `is_snapshot(kick)` holds. Kick 0 is the initial state.
pub fn evolve(
    engine: &LindbladEngine,
    rho0: &DensityMatrix,
    opts: &EvolveOptions,
    is_snapshot: impl Fn(u64) -> bool,
    sink: &mut dyn SnapshotSink,
) -> Result<EvolutionRecord> {
    let mut rho = rho0.clone();
    let mut history = Vec::with_capacity(opts.n_kicks as usize + 1);
    let mut warnings = Vec::new();
    let mut warned = false;
    let mut forced = false;
    for step in 0..=opts.n_kicks {
        if step > 0 {
            rho = engine.step_density(&rho)?;
        }
        let diag = kick_diagnostics(&rho);
        if diag.edge_population > EDGE_ABORT {
            if !opts.force {
                return Err(Error::Truncation {
                    kick: rho.kick(),
                    edge_population: diag.edge_population,
                    limit: EDGE_ABORT,
                });
            }
            if !forced {
                warnings.push(format!(
                    "edge population {:.3e} above abort limit {EDGE_ABORT:.0e} at kick {} (forced)",
                    diag.edge_population,
                    rho.kick()
                ));
                forced = true;
            }
        } else if diag.edge_population > EDGE_WARN && !warned {
            warnings.push(format!(
                "edge population {:.3e} above {EDGE_WARN:.0e} at kick {}",
                diag.edge_population,
                rho.kick()
            ));
            warned = true;
        }
        if is_snapshot(step) {
            sink.on_snapshot(&rho, &diag)?;
        }
        history.push(diag);
    }
    Ok(EvolutionRecord {
        history,
        warnings,
        final_state: rho,
    })
}

pub const DEFAULT_STEADY_WINDOW: usize = 20;
pub const DEFAULT_STEADY_TOL: f64 = 1e-3;

/// Earliest index `i` where the mean of `history[i..i+w]` and of
/// `history[i+w..i+2w]` differ by less than `tol` relative to the first.
pub fn steady_state_detect(history: &[f64], window: usize, tol: f64) -> Option<usize> {
    if window == 0 || history.len() < 2 * window {
        return None;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (0..=history.len() - 2 * window).find(|&i| {
        let first = mean(&history[i..i + window]);
        let second = mean(&history[i + window..i + 2 * window]);
        (second - first).abs() <= tol * first.abs()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, lowering_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_op(n: usize, seed: u64, hermitian: bool) -> OperatorMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut op = OperatorMatrix::from_fn(n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        if hermitian {
            op.symmetrize();
        }
        op
    }

    fn projector(n: usize, k: usize) -> OperatorMatrix {
        OperatorMatrix::from_fn(n, |i, j| if i == k && j == k { c(1.0) } else { c(0.0) })
    }

    #[test]
    fn single_excitation_decays_to_vacuum() {
        let (gamma, t) = (0.07, 2.3);
        let out = damping_channel(&projector(6, 1), &ChannelCache::new(gamma, t, 6)).unwrap();
        let eta = (-2.0 * gamma * t).exp();
        assert!((out.get(1, 1).re - eta).abs() < 1e-15);
        assert!((out.get(0, 0).re - (1.0 - eta)).abs() < 1e-15);
        assert!((out.frobenius().powi(2) - eta * eta - (1.0 - eta).powi(2)).abs() < 1e-14);
        let rk = damping_channel_rk(&projector(6, 1), gamma, t, 1e-3).unwrap();
        assert!(rk.sub(&out).unwrap().frobenius() < 1e-10);
    }

    #[test]
    fn vacuum_is_dark() {
        for gamma in [0.0, 0.05, 0.5] {
            let out = damping_channel(&projector(8, 0), &ChannelCache::new(gamma, 3.0, 8)).unwrap();
            assert_eq!(out, projector(8, 0));
        }
    }

    #[test]
    fn coherent_amplitude_decays() {
        let n = 256;
        let gamma = 0.05;
        let t = FRAC_PI_2;
        let params = SystemParams::new(1.0, 1.0, 0.0, gamma, n).unwrap();
        let a = lowering_matrix(n);
        for (x, p) in [(3.0, 4.0), (-6.0, 2.0), (0.5, -7.0)] {
            let psi = coherent_state(x, p, &params);
            let alpha = fock::coherent_label(x, p, 1.0);
            let rho = OperatorMatrix::outer(&psi.amps, &psi.amps).unwrap();
            let out = damping_channel(&rho, &ChannelCache::new(gamma, t, n)).unwrap();
            let mean_a = a.matmul(&out).unwrap().trace();
            assert!((mean_a - alpha * (-gamma * t).exp()).norm() < 1e-8);
        }
    }

    #[test]
    fn exact_channel_agrees_with_rk() {
        let n = 64;
        let (gamma, t) = (0.05, FRAC_PI_2);
        let cache = ChannelCache::new(gamma, t, n);
        for (seed, herm) in [(1, true), (2, false)] {
            let op = random_op(n, seed, herm);
            let exact = damping_channel(&op, &cache).unwrap();
            let rk = damping_channel_rk(&op, gamma, t, 1.0 / (64.0 * gamma * n as f64)).unwrap();
            let diff = exact.sub(&rk).unwrap().frobenius();
            assert!(diff < 1e-7, "seed {seed}: {diff}");
        }
    }

    #[test]
    fn rk_edge_cases() {
        let op = random_op(16, 4, true);
        assert_eq!(damping_channel_rk(&op, 0.0, 1.0, 1.0).unwrap(), op);
        assert!(matches!(
            damping_channel_rk(&op, 0.1, 1.0, 1.0),
            Err(Error::StepTooLarge { .. })
        ));
        let out = damping_channel_rk(&op, 0.1, 1.0, 1.0 / (4.0 * 0.1 * 16.0)).unwrap();
        assert!((out.trace() - op.trace()).norm() < 1e-10);
    }

    #[test]
    fn channel_is_a_semigroup() {
        let n = 48;
        let gamma = 0.13;
        let op = random_op(n, 7, false);
        let once = damping_channel(&op, &ChannelCache::new(gamma, 1.7, n)).unwrap();
        let a = damping_channel(&op, &ChannelCache::new(gamma, 0.6, n)).unwrap();
        let twice = damping_channel(&a, &ChannelCache::new(gamma, 1.1, n)).unwrap();
        assert!(once.sub(&twice).unwrap().frobenius() < 1e-10);
    }

    #[test]
    fn diagonal_transfer_conserves_population() {
        let n = 200;
        let cache = ChannelCache::new(0.05, FRAC_PI_2, n);
        for source in 0..n {
            let total: f64 = (0..=source)
                .map(|target| cache.transfer_weight(target, source - target))
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "source {source}: {total}");
        }
    }

    #[test]
    fn phase_rotation_examples() {
        let op = random_op(9, 3, false);
        let rot = free_phase_rotation(&op, FRAC_PI_2);
        for k in 0..9 {
            assert_eq!(rot.get(k, k), op.get(k, k));
        }
        assert_eq!(rot.get(0, 1), op.get(0, 1) * C64::new(0.0, 1.0));
        assert_eq!(rot.get(3, 1), op.get(3, 1) * C64::new(-1.0, 0.0));
        let full = free_phase_rotation(&op, std::f64::consts::TAU);
        assert_eq!(full, op);
        let general = free_phase_rotation(&op, 0.3);
        assert!((general.get(2, 7) - op.get(2, 7) * C64::from_polar(1.0, 1.5)).norm() < 1e-15);
    }

    #[test]
    fn phase_rotation_matches_classical_orientation() {
        let n = 128;
        let params = SystemParams::new(1.0, 1.0, 0.0, 0.0, n).unwrap();
        let psi = coherent_state(3.0, 1.0, &params);
        let rho = OperatorMatrix::outer(&psi.amps, &psi.amps).unwrap();
        let rot = free_phase_rotation(&rho, FRAC_PI_2);
        let alpha = lowering_matrix(n).matmul(&rot).unwrap().trace() * 2f64.sqrt();
        // (x, p) = (3, 1) → (1, −3)
        assert!((alpha - C64::new(1.0, -3.0)).norm() < 1e-10);
    }

    #[test]
    fn undriven_undamped_step_is_rotation() {
        let params = SystemParams::new(1.0, 1.0, 0.0, 0.0, 12).unwrap();
        let engine = LindbladEngine::new(&params).unwrap();
        let diag = OperatorMatrix::diagonal(&[0.5, 0.2, 0.1, 0.1, 0.05, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let out = engine.period_step(&diag, true).unwrap();
        assert!(out.sub(&diag).unwrap().frobenius() < 1e-13);
        let op = random_op(12, 5, false);
        let out = engine.period_step(&op, false).unwrap();
        assert!(out.sub(&free_phase_rotation(&op, FRAC_PI_2)).unwrap().frobenius() < 1e-13);
    }

    #[test]
    fn parity_weak_symmetry_is_kept() {
        let params = SystemParams::new(1.0, 1.0, 8.0, 0.05, 64).unwrap();
        let engine = LindbladEngine::new(&params).unwrap();
        let mut op = random_op(64, 9, true);
        for j in 0..64 {
            for i in 0..64 {
                if (i + j) % 2 == 1 {
                    op.set(i, j, c(0.0));
                }
            }
        }
        for _ in 0..5 {
            op = engine.period_step(&op, true).unwrap();
            assert!(op.parity_commutator() < 1e-12);
        }
    }

    #[test]
    fn evolve_echoes_and_reports() {
        let params = SystemParams::new(1.0, 1.0, 2.0, 0.1, 48).unwrap();
        let engine = LindbladEngine::new(&params).unwrap();
        let psi = coherent_state(2.0, 0.0, &params);
        let rho0 = DensityMatrix::pure(&psi.amps, params).unwrap();
        let mut seen = Vec::new();
        let mut sink = |rho: &DensityMatrix, _d: &KickDiagnostics| {
            seen.push(rho.kick());
            Ok(())
        };
        let rec = evolve(
            &engine,
            &rho0,
            &EvolveOptions {
                n_kicks: 0,
                force: false,
            },
            |_| true,
            &mut sink,
        )
        .unwrap();
        assert_eq!(rec.final_state, rho0);
        assert_eq!(seen, vec![0]);

        let mut seen = Vec::new();
        let mut sink = |rho: &DensityMatrix, _d: &KickDiagnostics| {
            seen.push(rho.kick());
            Ok(())
        };
        let rec = evolve(
            &engine,
            &rho0,
            &EvolveOptions {
                n_kicks: 6,
                force: false,
            },
            |t| t % 3 == 0,
            &mut sink,
        )
        .unwrap();
        assert_eq!(seen, vec![0, 3, 6]);
        assert_eq!(rec.history.len(), 7);
        assert!(rec.history.iter().all(|d| (d.trace - 1.0).abs() < 1e-12));
    }

    #[test]
    fn truncation_aborts_unless_forced() {
        // strong kicks in a tiny basis fill the edge immediately
        let params = SystemParams::new(1.0, 1.0, 20.0, 0.01, 16).unwrap();
        let engine = LindbladEngine::new(&params).unwrap();
        let psi = coherent_state(1.0, 0.0, &params);
        let rho0 = DensityMatrix::pure(&psi.amps, params).unwrap();
        let mut sink = |_: &DensityMatrix, _: &KickDiagnostics| Ok(());
        let err = evolve(
            &engine,
            &rho0,
            &EvolveOptions {
                n_kicks: 3,
                force: false,
            },
            |_| false,
            &mut sink,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
        let rec = evolve(
            &engine,
            &rho0,
            &EvolveOptions {
                n_kicks: 3,
                force: true,
            },
            |_| false,
            &mut sink,
        )
        .unwrap();
        assert!(rec.warnings.iter().any(|w| w.contains("forced")));
    }

    #[test]
    fn undriven_relaxation_follows_exponential_envelope() {
        let gamma = 0.1;
        let params = SystemParams::new(1.0, 1.0, 0.0, gamma, 96).unwrap();
        let engine = LindbladEngine::new(&params).unwrap();
        let psi = coherent_state(3.0, 2.0, &params);
        let rho0 = DensityMatrix::pure(&psi.amps, params).unwrap();
        let mut sink = |_: &DensityMatrix, _: &KickDiagnostics| Ok(());
        let rec = evolve(
            &engine,
            &rho0,
            &EvolveOptions {
                n_kicks: 30,
                force: false,
            },
            |_| false,
            &mut sink,
        )
        .unwrap();
        let e0 = rec.history[0].mean_energy - 0.5;
        for d in &rec.history {
            let t = d.kick as f64 * FRAC_PI_2;
            let expected = 0.5 + e0 * (-2.0 * gamma * t).exp();
            assert!((d.mean_energy - expected).abs() < 1e-10);
        }
        // vacuum fidelity of a displaced state: ρ_00 = e^{−|α|² e^{−2γt}}
        let alpha2 = (9.0 + 4.0) / 2.0;
        let t = 30.0 * FRAC_PI_2;
        let fid = rec.final_state.population(0);
        assert!((fid - (-alpha2 * (-2.0 * gamma * t).exp()).exp()).abs() < 1e-10);
    }

    #[test]
    fn steady_state_detection_cases() {
        assert_eq!(steady_state_detect(&[2.0; 40], 20, 1e-3), Some(0));
        assert_eq!(steady_state_detect(&[2.0; 39], 20, 1e-3), None);
        let ramp: Vec<f64> = (0..100).map(|t| t as f64).collect();
        assert_eq!(steady_state_detect(&ramp, 20, 1e-3), None);
    }

    #[test]
    fn steady_state_of_damped_energy_matches_arithmetic() {
        let gamma = 0.05;
        let params = SystemParams::new(1.0, 1.0, 0.0, gamma, 200).unwrap();
        let engine = LindbladEngine::new(&params).unwrap();
        let psi = coherent_state(10.0, 1.0, &params);
        let rho0 = DensityMatrix::pure(&psi.amps, params).unwrap();
        let mut sink = |_: &DensityMatrix, _: &KickDiagnostics| Ok(());
        let rec = evolve(
            &engine,
            &rho0,
            &EvolveOptions {
                n_kicks: 200,
                force: false,
            },
            |_| false,
            &mut sink,
        )
        .unwrap();
        let analytic: Vec<f64> = (0..=200)
            .map(|k| 0.5 + 50.5 * (-2.0 * gamma * k as f64 * FRAC_PI_2).exp())
            .collect();
        let expected = steady_state_detect(&analytic, 20, 1e-3);
        assert!(expected.is_some());
        assert_eq!(steady_state_detect(&rec.energies(), 20, 1e-3), expected);
    }
}
