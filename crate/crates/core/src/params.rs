//! Model and run parameters.
//!
//! Everything downstream (classical map, Fock operators, Lindblad engine,
//! observables) reads its numbers from a [`SystemParams`], so derived
//! quantities such as the classical chaos parameter `K q²` and the effective
//! Planck constant `ħ q²` are computed here and nowhere else.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};

/// Dimensionless parameters of the kicked, damped oscillator
/// `H = (p² + x²)/2 − K cos(q x) Σ δ(t − mT)` with amplitude damping rate γ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    hbar: f64,
    q: f64,
    kick_k: f64,
    gamma: f64,
    period_t: f64,
    basis_n: usize,
}

/// Unvalidated parameter fields, as read from a config or a caller.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RawParams {
    pub hbar: Option<f64>,
    pub q: Option<f64>,
    pub kick_k: Option<f64>,
    pub gamma: Option<f64>,
    pub period_t: Option<f64>,
    pub basis_n: Option<usize>,
}

/// Checks raw fields and fills `T = π/2` when absent.
pub fn validate_params(raw: &RawParams) -> Result<SystemParams> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::InvalidParams(format!("missing {name}")));
    let hbar = need(raw.hbar, "hbar")?;
    let q = need(raw.q, "q")?;
    let kick_k = need(raw.kick_k, "K")?;
    let gamma = need(raw.gamma, "gamma")?;
    let basis_n = raw.basis_n.ok_or_else(|| Error::InvalidParams("missing N".into()))?;
    let period_t = raw.period_t.unwrap_or(FRAC_PI_2);

    for (name, v) in [
        ("hbar", hbar),
        ("q", q),
        ("K", kick_k),
        ("gamma", gamma),
        ("T", period_t),
    ] {
        if !v.is_finite() {
            return Err(Error::InvalidParams(format!("{name} must be finite")));
        }
    }
    if hbar <= 0.0 {
        return Err(Error::InvalidParams("hbar must be positive".into()));
    }
    if q <= 0.0 {
        return Err(Error::InvalidParams("q must be positive".into()));
    }
    if kick_k < 0.0 {
        return Err(Error::InvalidParams("K must be nonnegative".into()));
    }
    if gamma < 0.0 {
        return Err(Error::InvalidParams("gamma must be nonnegative".into()));
    }
    if gamma >= 1.0 {
        return Err(Error::InvalidParams(
            "overdamped regime unsupported (gamma >= 1)".into(),
        ));
    }
    if period_t <= 0.0 {
        return Err(Error::InvalidParams("T must be positive".into()));
    }
    if basis_n < 2 {
        return Err(Error::InvalidParams("N must be at least 2".into()));
    }
    Ok(SystemParams {
        hbar,
        q,
        kick_k,
        gamma,
        period_t,
        basis_n,
    })
}

impl SystemParams {
    /// Validating constructor with the default period `T = π/2`.
    pub fn new(hbar: f64, q: f64, kick_k: f64, gamma: f64, basis_n: usize) -> Result<Self> {
        validate_params(&RawParams {
            hbar: Some(hbar),
            q: Some(q),
            kick_k: Some(kick_k),
            gamma: Some(gamma),
            period_t: None,
            basis_n: Some(basis_n),
        })
    }

    pub fn with_period(self, period_t: f64) -> Result<Self> {
        validate_params(&RawParams {
            period_t: Some(period_t),
            ..self.raw()
        })
    }

    pub fn with_basis(self, basis_n: usize) -> Result<Self> {
        validate_params(&RawParams {
            basis_n: Some(basis_n),
            ..self.raw()
        })
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        validate_params(&RawParams {
            gamma: Some(gamma),
            ..self.raw()
        })
    }

    pub fn with_kick(self, kick_k: f64) -> Result<Self> {
        validate_params(&RawParams {
            kick_k: Some(kick_k),
            ..self.raw()
        })
    }

    pub fn raw(&self) -> RawParams {
        RawParams {
            hbar: Some(self.hbar),
            q: Some(self.q),
            kick_k: Some(self.kick_k),
            gamma: Some(self.gamma),
            period_t: Some(self.period_t),
            basis_n: Some(self.basis_n),
        }
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn kick_k(&self) -> f64 {
        self.kick_k
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn period_t(&self) -> f64 {
        self.period_t
    }

    pub fn basis_n(&self) -> usize {
        self.basis_n
    }

    /// `K q²`, the chaos parameter of the equivalent `q = 1` classical map.
    pub fn k_classical(&self) -> f64 {
        self.kick_k * self.q * self.q
    }

    /// `ħ q²`, the Planck constant of the equivalent `q = 1` quantum system.
    pub fn hbar_eff(&self) -> f64 {
        self.hbar * self.q * self.q
    }

    /// Number of kick quanta `K/ħ`.
    pub fn kick_over_hbar(&self) -> f64 {
        self.kick_k / self.hbar
    }

    /// Damped oscillation frequency `√(1 − γ²)`.
    pub fn omega(&self) -> f64 {
        (1.0 - self.gamma * self.gamma).sqrt()
    }

    /// Resonance ratio `R = 2π/T`.
    pub fn resonance_r(&self) -> f64 {
        std::f64::consts::TAU / self.period_t
    }

    /// Order-of-magnitude attractor width `q K / √(2γ)`; infinite at γ = 0.
    pub fn predicted_width(&self) -> f64 {
        self.q * self.kick_k / (2.0 * self.gamma).sqrt()
    }

    /// Basis-sufficiency rule `N ħ ≥ 1.5 Δp²/2` with `Δp = qK/√(2γ)`.
    pub fn basis_sufficient(&self) -> bool {
        let dp = self.predicted_width();
        dp.is_finite() && self.basis_n as f64 * self.hbar >= 0.75 * dp * dp
    }
}

/// Maps a `(q, ħ, K)` parameter set onto the equivalent `q = 1` system:
/// `K → K q²` classically and `ħ → ħ q²` quantum mechanically. `K/ħ` is
/// unchanged by the pair of maps. Coordinates scale as `q x, q p → x, p`.
pub fn rescale_to_unit_q(p: &SystemParams) -> SystemParams {
    SystemParams {
        hbar: p.hbar_eff(),
        q: 1.0,
        kick_k: p.k_classical(),
        ..*p
    }
}

/// Circuit energies of a pulsed fluxonium, in common frequency units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxoniumParams {
    pub e_c: f64,
    pub e_l: f64,
    pub e_j: f64,
    pub pulse_dt: f64,
}

impl FluxoniumParams {
    pub fn new(e_c: f64, e_l: f64, e_j: f64, pulse_dt: f64) -> Result<Self> {
        for (name, v) in [("E_C", e_c), ("E_L", e_l), ("E_J", e_j), ("pulse_dt", pulse_dt)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive")));
            }
        }
        Ok(Self {
            e_c,
            e_l,
            e_j,
            pulse_dt,
        })
    }
}

/// Oscillator frequency `Ω = 2√(2 E_C E_L)` and kick strength `K/ħ = J/Ω`
/// with `J = E_J δt`, at `q = 1` and `ħ = 1`.
pub fn fluxonium_to_dimensionless(fp: &FluxoniumParams) -> (f64, f64) {
    let omega = 2.0 * (2.0 * fp.e_c * fp.e_l).sqrt();
    let j = fp.e_j * fp.pulse_dt;
    (omega, j / omega)
}

pub const DEFAULT_X0: f64 = 10.0;
pub const DEFAULT_P0: f64 = 1.0;
pub const DEFAULT_GRID_L: f64 = 40.0;
pub const DEFAULT_GRID_M: usize = 128;
pub const DEFAULT_ENSEMBLE: usize = 10_000;

/// A complete run description. Serializes to the `key = value` config format.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    pub n_kicks: u64,
    pub x0: f64,
    pub p0: f64,
    /// Second coherent label for negativity runs; `None` means `β = −α`.
    pub beta: Option<(f64, f64)>,
    /// Grid covers `[−L, L]` in both x and p.
    pub grid_l: f64,
    pub grid_m: usize,
    pub ensemble: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// `None` selects the default cadence: every kick up to 60, then every 10.
    pub snapshot_every: Option<u64>,
}

impl RunConfig {
    pub fn new(params: SystemParams) -> Self {
        Self {
            params,
            n_kicks: 0,
            x0: DEFAULT_X0,
            p0: DEFAULT_P0,
            beta: None,
            grid_l: DEFAULT_GRID_L,
            grid_m: DEFAULT_GRID_M,
            ensemble: DEFAULT_ENSEMBLE,
            seed: 0,
            out_dir: PathBuf::from("out"),
            snapshot_every: None,
        }
    }

    pub fn beta_or_default(&self) -> (f64, f64) {
        self.beta.unwrap_or((-self.x0, -self.p0))
    }

    /// Whether kick `t` is a snapshot time under the configured cadence.
    pub fn is_snapshot(&self, t: u64) -> bool {
        match self.snapshot_every {
            Some(0) => t == 0 || t == self.n_kicks,
            Some(every) => t.is_multiple_of(every) || t == self.n_kicks,
            None => t <= 60 || t.is_multiple_of(10) || t == self.n_kicks,
        }
    }

    /// Config text; `parse_run_config` reads it back to an equal value.
    pub fn serialize(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "hbar = {}", p.hbar);
        let _ = writeln!(s, "q = {}", p.q);
        let _ = writeln!(s, "K = {}", p.kick_k);
        let _ = writeln!(s, "gamma = {}", p.gamma);
        let _ = writeln!(s, "T = {}", p.period_t);
        let _ = writeln!(s, "N = {}", p.basis_n);
        let _ = writeln!(s, "n_kicks = {}", self.n_kicks);
        let _ = writeln!(s, "x0 = {}", self.x0);
        let _ = writeln!(s, "p0 = {}", self.p0);
        if let Some((xb, pb)) = self.beta {
            let _ = writeln!(s, "xb = {xb}");
            let _ = writeln!(s, "pb = {pb}");
        }
        let _ = writeln!(s, "grid_L = {}", self.grid_l);
        let _ = writeln!(s, "grid_M = {}", self.grid_m);
        let _ = writeln!(s, "ensemble = {}", self.ensemble);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        if let Some(every) = self.snapshot_every {
            let _ = writeln!(s, "snapshot_every = {every}");
        }
        s
    }
}

const KNOWN_KEYS: &[&str] = &[
    "hbar",
    "q",
    "K",
    "gamma",
    "T",
    "N",
    "n_kicks",
    "x0",
    "p0",
    "xb",
    "pb",
    "grid_L",
    "grid_M",
    "ensemble",
    "seed",
    "out_dir",
    "snapshot_every",
];

/// Parses `key = value` lines. `#` starts a comment; blank lines are ignored.
/// Unknown and repeated keys are errors, as are malformed numbers.
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let mut entries: Vec<(&str, &str, usize)> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: line_no,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::Config {
                line: line_no,
                msg: format!("unknown key `{key}`"),
            });
        }
        if let Some((_, _, first)) = entries.iter().find(|(k, _, _)| *k == key) {
            return Err(Error::Config {
                line: line_no,
                msg: format!("duplicate key `{key}` (first set on line {first})"),
            });
        }
        entries.push((key, value, line_no));
    }

    let lookup = |key: &str| entries.iter().find(|(k, _, _)| *k == key).copied();
    let float = |key: &str| -> Result<Option<f64>> {
        match lookup(key) {
            None => Ok(None),
            Some((_, v, line)) => v.parse::<f64>().map(Some).map_err(|_| Error::Config {
                line,
                msg: format!("`{key}`: malformed number `{v}`"),
            }),
        }
    };
    let uint = |key: &str| -> Result<Option<u64>> {
        match lookup(key) {
            None => Ok(None),
            Some((_, v, line)) => v.parse::<u64>().map(Some).map_err(|_| Error::Config {
                line,
                msg: format!("`{key}`: malformed unsigned integer `{v}`"),
            }),
        }
    };
    let mandatory =
        |key: &str, v: Option<f64>| v.ok_or_else(|| Error::ConfigMissing(format!("missing mandatory key `{key}`")));

    let raw = RawParams {
        hbar: Some(mandatory("hbar", float("hbar")?)?),
        q: Some(mandatory("q", float("q")?)?),
        kick_k: Some(mandatory("K", float("K")?)?),
        gamma: Some(mandatory("gamma", float("gamma")?)?),
        period_t: float("T")?,
        basis_n: Some(uint("N")?.ok_or_else(|| Error::ConfigMissing("missing mandatory key `N`".into()))? as usize),
    };
    let params = validate_params(&raw)?;

    let mut cfg = RunConfig::new(params);
    if let Some(v) = uint("n_kicks")? {
        cfg.n_kicks = v;
    }
    if let Some(v) = float("x0")? {
        cfg.x0 = v;
    }
    if let Some(v) = float("p0")? {
        cfg.p0 = v;
    }
    cfg.beta = match (float("xb")?, float("pb")?) {
        (None, None) => None,
        (xb, pb) => Some((xb.unwrap_or(0.0), pb.unwrap_or(0.0))),
    };
    if let Some(v) = float("grid_L")? {
        if !(v.is_finite() && v > 0.0) {
            let line = lookup("grid_L").map_or(0, |e| e.2);
            return Err(Error::Config {
                line,
                msg: "grid_L must be positive".into(),
            });
        }
        cfg.grid_l = v;
    }
    if let Some(v) = uint("grid_M")? {
        if v == 0 {
            let line = lookup("grid_M").map_or(0, |e| e.2);
            return Err(Error::Config {
                line,
                msg: "grid_M must be positive".into(),
            });
        }
        cfg.grid_m = v as usize;
    }
    if let Some(v) = uint("ensemble")? {
        cfg.ensemble = v as usize;
    }
    if let Some(v) = uint("seed")? {
        cfg.seed = v;
    }
    if let Some((_, v, _)) = lookup("out_dir") {
        cfg.out_dir = PathBuf::from(v);
    }
    cfg.snapshot_every = uint("snapshot_every")?;
    Ok(cfg)
}
