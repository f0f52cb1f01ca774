//! Classical dissipative kicked oscillator.
//!
//! Between kicks the motion obeys `ṗ + 2γp + x = 0, ẋ = p`, which is solved
//! exactly; the kick then shifts `p → p − K q sin(q x)`. One period is the
//! free flow over `T` followed by the kick.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, PhaseGrid};
use crate::params::SystemParams;

/// Values beyond this magnitude are treated as a numerical blow-up.
const OVERFLOW_LIMIT: f64 = 1e150;

const ORTHONORMALIZE_EVERY: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

impl PhasePoint {
    pub const fn new(x: f64, p: f64) -> Self {
        Self { x, p }
    }

    pub fn energy(&self) -> f64 {
        0.5 * (self.x * self.x + self.p * self.p)
    }

    fn is_sane(&self) -> bool {
        self.x.is_finite() && self.p.is_finite() && self.x.abs() < OVERFLOW_LIMIT && self.p.abs() < OVERFLOW_LIMIT
    }
}

/// Real 2×2 matrix, row-major.
pub type Mat2 = [[f64; 2]; 2];

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Exact propagator of the damped oscillator over a fixed time. The flow is
/// linear, so it is stored as a matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeFlow {
    matrix: Mat2,
}

impl FreeFlow {
    /// `γ < 1` is required for the underdamped solution.
    pub fn new(gamma: f64, t: f64) -> Self {
        let omega = (1.0 - gamma * gamma).sqrt();
        let decay = (-gamma * t).exp();
        let (s, c) = (omega * t).sin_cos();
        // x(t) = e^{-γt} [x cos ωt + (p + γx)/ω sin ωt],  p(t) = ẋ(t)
        let matrix = [
            [decay * (c + gamma * s / omega), decay * s / omega],
            [-decay * s / omega, decay * (c - gamma * s / omega)],
        ];
        Self { matrix }
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.matrix
    }

    pub fn apply(&self, pt: PhasePoint) -> PhasePoint {
        let m = &self.matrix;
        PhasePoint {
            x: m[0][0] * pt.x + m[0][1] * pt.p,
            p: m[1][0] * pt.x + m[1][1] * pt.p,
        }
    }
}

pub fn free_dissipative_step(pt: PhasePoint, gamma: f64, t: f64) -> PhasePoint {
    FreeFlow::new(gamma, t).apply(pt)
}

pub fn kick_step(pt: PhasePoint, kick_k: f64, q: f64) -> PhasePoint {
    PhasePoint {
        x: pt.x,
        p: pt.p - kick_k * q * (q * pt.x).sin(),
    }
}

/// One full period: free flow over `T`, then the kick.
#[derive(Clone, Copy, Debug)]
pub struct PeriodMap {
    flow: FreeFlow,
    kick_k: f64,
    q: f64,
}

impl PeriodMap {
    pub fn new(params: &SystemParams) -> Self {
        Self {
            flow: FreeFlow::new(params.gamma(), params.period_t()),
            kick_k: params.kick_k(),
            q: params.q(),
        }
    }

    #[inline]
    pub fn step(&self, pt: PhasePoint) -> PhasePoint {
        kick_step(self.flow.apply(pt), self.kick_k, self.q)
    }

    /// Tangent map at `pt`: the kick shear applied after the linear flow.
    pub fn jacobian(&self, pt: PhasePoint) -> Mat2 {
        let x_free = self.flow.apply(pt).x;
        let shear = -self.kick_k * self.q * self.q * (self.q * x_free).cos();
        let m = self.flow.matrix();
        [m[0], [m[1][0] + shear * m[0][0], m[1][1] + shear * m[0][1]]]
    }
}

pub fn period_map(pt: PhasePoint, params: &SystemParams) -> PhasePoint {
    PeriodMap::new(params).step(pt)
}

pub fn jacobian(pt: PhasePoint, params: &SystemParams) -> Mat2 {
    PeriodMap::new(params).jacobian(pt)
}

/// A set of independent trajectories together with the seed that drew them.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub points: Vec<PhasePoint>,
    pub seed: u64,
}

impl Ensemble {
    /// `size` points uniform in the disk of `radius` around `center`.
    pub fn disk(center: PhasePoint, radius: f64, size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..size)
            .map(|_| {
                let r = radius * rng.random::<f64>().sqrt();
                let (s, c) = (std::f64::consts::TAU * rng.random::<f64>()).sin_cos();
                PhasePoint::new(center.x + r * c, center.p + r * s)
            })
            .collect();
        Self { points, seed }
    }

    /// `size` points with independent normal coordinates of standard
    /// deviation `sigma` around `center`.
    pub fn gaussian(center: PhasePoint, sigma: f64, size: usize, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParams(format!("gaussian ensemble: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..size)
            .map(|_| {
                let dx = normal.sample(&mut rng);
                let dp = normal.sample(&mut rng);
                PhasePoint::new(center.x + dx, center.p + dp)
            })
            .collect();
        Ok(Self { points, seed })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Trajectories per parallel work item. Fixed so that partitioning does not
/// depend on the worker count.
const CHUNK: usize = 4096;

fn check_nonempty(ens: &Ensemble) -> Result<()> {
    if ens.is_empty() {
        return Err(Error::InvalidParams("ensemble is empty".into()));
    }
    Ok(())
}

/// Advances every point by `n_steps` periods.
pub fn evolve_ensemble(ens: &Ensemble, params: &SystemParams, n_steps: usize) -> Result<Ensemble> {
    check_nonempty(ens)?;
    let map = PeriodMap::new(params);
    let mut points = ens.points.clone();
    points
        .par_chunks_mut(CHUNK)
        .enumerate()
        .try_for_each(|(chunk_idx, chunk)| {
            for (k, pt) in chunk.iter_mut().enumerate() {
                for step in 0..n_steps {
                    *pt = map.step(*pt);
                    if !pt.is_sane() {
                        return Err(Error::Overflow {
                            index: chunk_idx * CHUNK + k,
                            step: step + 1,
                        });
                    }
                }
            }
            Ok(())
        })?;
    Ok(Ensemble { points, seed: ens.seed })
}

/// Transient discarded before accumulation: `max(100, 5/γ)` periods.
pub fn default_discard(params: &SystemParams) -> usize {
    if params.gamma() == 0.0 {
        return 100;
    }
    (5.0 / params.gamma()).ceil().max(100.0) as usize
}

/// Occupancy histogram with its integer tallies.
#[derive(Clone, Debug)]
pub struct Histogram {
    pub grid: PhaseGrid,
    pub in_count: u64,
    pub overflow_count: u64,
    /// The ensemble after the last accumulated step.
    pub final_ensemble: Ensemble,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.in_count + self.overflow_count
    }
}

/// Runs `discard + n_steps` periods and bins every post-transient iterate.
/// The grid holds densities normalized to the total sample count, so grid
/// mass plus `overflow_mass` is one.
pub fn accumulate_histogram(
    ens: &Ensemble,
    params: &SystemParams,
    n_steps: usize,
    discard: usize,
    spec: GridSpec,
) -> Result<Histogram> {
    check_nonempty(ens)?;
    if n_steps == 0 {
        return Err(Error::InvalidParams("histogram needs at least one step".into()));
    }
    let map = PeriodMap::new(params);
    let mut points = ens.points.clone();
    let partials: Vec<(Vec<u64>, u64)> = points
        .par_chunks_mut(CHUNK)
        .enumerate()
        .map(|(chunk_idx, chunk)| {
            let mut counts = vec![0u64; spec.len()];
            let mut overflow = 0u64;
            for (k, pt) in chunk.iter_mut().enumerate() {
                for step in 0..discard + n_steps {
                    *pt = map.step(*pt);
                    if !pt.is_sane() {
                        return Err(Error::Overflow {
                            index: chunk_idx * CHUNK + k,
                            step: step + 1,
                        });
                    }
                    if step >= discard {
                        match spec.locate(pt.x, pt.p) {
                            Some(cell) => counts[cell] += 1,
                            None => overflow += 1,
                        }
                    }
                }
            }
            Ok((counts, overflow))
        })
        .collect::<Result<_>>()?;

    let mut counts = vec![0u64; spec.len()];
    let mut overflow_count = 0u64;
    for (c, o) in partials {
        counts.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        overflow_count += o;
    }
    let in_count: u64 = counts.iter().sum();
    let total = (in_count + overflow_count) as f64;
    let scale = 1.0 / (total * spec.cell_area());
    let grid = PhaseGrid {
        spec,
        values: counts.iter().map(|&c| c as f64 * scale).collect(),
        overflow_mass: overflow_count as f64 / total,
    };
    Ok(Histogram {
        grid,
        in_count,
        overflow_count,
        final_ensemble: Ensemble { points, seed: ens.seed },
    })
}

/// Normalized density of the given points on `spec`, without evolving them.
pub fn bin_points(points: &[PhasePoint], spec: GridSpec) -> PhaseGrid {
    let mut counts = vec![0u64; spec.len()];
    let mut overflow = 0u64;
    for pt in points {
        match spec.locate(pt.x, pt.p) {
            Some(cell) => counts[cell] += 1,
            None => overflow += 1,
        }
    }
    let total = points.len().max(1) as f64;
    let scale = 1.0 / (total * spec.cell_area());
    PhaseGrid {
        spec,
        values: counts.iter().map(|&c| c as f64 * scale).collect(),
        overflow_mass: overflow as f64 / total,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyMoments {
    /// Mean of `(x² + p²)/2`.
    pub energy: f64,
    pub dx: f64,
    pub dp: f64,
}

pub fn energy_moments(ens: &Ensemble) -> EnergyMoments {
    let n = ens.len() as f64;
    if ens.is_empty() {
        return EnergyMoments {
            energy: 0.0,
            dx: 0.0,
            dp: 0.0,
        };
    }
    let (mut sx, mut sp, mut e) = (0.0, 0.0, 0.0);
    for pt in &ens.points {
        sx += pt.x;
        sp += pt.p;
        e += pt.energy();
    }
    let (mx, mp) = (sx / n, sp / n);
    let (mut vx, mut vp) = (0.0, 0.0);
    for pt in &ens.points {
        vx += (pt.x - mx) * (pt.x - mx);
        vp += (pt.p - mp) * (pt.p - mp);
    }
    EnergyMoments {
        energy: e / n,
        dx: (vx / n).sqrt(),
        dp: (vp / n).sqrt(),
    }
}

/// Energy moments after each of `n_steps` periods; entry 0 is the input.
pub fn energy_series(ens: &Ensemble, params: &SystemParams, n_steps: usize) -> Result<(Vec<EnergyMoments>, Ensemble)> {
    let mut series = Vec::with_capacity(n_steps + 1);
    let mut cur = ens.clone();
    series.push(energy_moments(&cur));
    for _ in 0..n_steps {
        cur = evolve_ensemble(&cur, params, 1)?;
        series.push(energy_moments(&cur));
    }
    Ok((series, cur))
}

/// Both Lyapunov exponents, per unit time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovResult {
    pub lambda1: f64,
    pub lambda2: f64,
    pub n_steps: usize,
    pub transient: usize,
    /// Period `T` used to convert per-kick logarithms to rates.
    pub period: f64,
    /// Times the tangent frame degenerated and was reset.
    pub reseeds: usize,
}

impl LyapunovResult {
    pub fn lambda1_per_kick(&self) -> f64 {
        self.lambda1 * self.period
    }

    pub fn lambda2_per_kick(&self) -> f64 {
        self.lambda2 * self.period
    }
}

/// Gram–Schmidt on the columns of `m`: returns the orthonormal frame and the
/// diagonal of R. `det` is the known determinant of `m`. `None` if the
/// first column vanished.
fn orthonormalize(m: &Mat2, det: f64) -> Option<(Mat2, f64, f64)> {
    let (a0, a1) = (m[0][0], m[1][0]);
    let (b0, b1) = (m[0][1], m[1][1]);
    let r11 = a0.hypot(a1);
    if !(r11.is_finite() && r11 > 0.0) {
        return None;
    }
    let (e0, e1) = (a0 / r11, a1 / r11);
    // The second direction is fixed up to sign; R22 follows from the
    // determinant, which keeps the sum rule exact.
    let s = (a0 * b1 - a1 * b0).signum();
    let r22 = det.abs() / r11;
    if !(r22.is_finite() && r22 != 0.0) {
        return None;
    }
    Some(([[e0, -e1 * s], [e1, e0 * s]], r11, r22))
}

/// Iterates the tangent map along the orbit of `seed`, re-orthonormalizing
/// every 10 periods. The first `transient` periods are not averaged.
pub fn lyapunov_spectrum(
    params: &SystemParams,
    seed: PhasePoint,
    n_steps: usize,
    transient: usize,
) -> Result<LyapunovResult> {
    if n_steps == 0 {
        return Err(Error::InvalidParams("lyapunov_spectrum needs n_steps > 0".into()));
    }
    let map = PeriodMap::new(params);
    let mut pt = seed;
    for step in 0..transient {
        pt = map.step(pt);
        if !pt.is_sane() {
            return Err(Error::Overflow {
                index: 0,
                step: step + 1,
            });
        }
    }
    let mut frame: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
    let (mut sum1, mut sum2) = (0.0, 0.0);
    let mut reseeds = 0;
    let step_det = det2(&map.jacobian(seed));
    let mut since = 0;
    for step in 0..n_steps {
        since += 1;
        frame = mat2_mul(&map.jacobian(pt), &frame);
        pt = map.step(pt);
        if !pt.is_sane() {
            return Err(Error::Overflow {
                index: 0,
                step: transient + step + 1,
            });
        }
        if (step + 1) % ORTHONORMALIZE_EVERY == 0 || step + 1 == n_steps {
            let det = step_det.powi(since);
            since = 0;
            match orthonormalize(&frame, det) {
                Some((q, r11, r22)) => {
                    sum1 += r11.ln();
                    sum2 += r22.ln();
                    frame = q;
                }
                None => {
                    reseeds += 1;
                    frame = [[1.0, 0.0], [0.0, 1.0]];
                }
            }
        }
    }
    let time = n_steps as f64 * params.period_t();
    Ok(LyapunovResult {
        lambda1: sum1 / time,
        lambda2: sum2 / time,
        n_steps,
        transient,
        period: params.period_t(),
        reseeds,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DimensionEstimate {
    Fractal {
        /// `2 − γ/Λ` with `Λ` the per-kick leading exponent.
        d_info: f64,
        /// Same formula with `Λ` per unit time.
        d_info_rate: f64,
        /// Kaplan–Yorke `1 + λ₁/|λ₂|`.
        d_kaplan_yorke: f64,
    },
    NoStrangeAttractor,
}

pub fn information_dimension(lr: &LyapunovResult, gamma: f64) -> DimensionEstimate {
    if !(lr.lambda1 > 0.0 && lr.lambda2 < 0.0) {
        return DimensionEstimate::NoStrangeAttractor;
    }
    DimensionEstimate::Fractal {
        d_info: 2.0 - gamma / lr.lambda1_per_kick(),
        d_info_rate: 2.0 - gamma / lr.lambda1,
        d_kaplan_yorke: 1.0 + lr.lambda1 / lr.lambda2.abs(),
    }
}
