//! The five experiment recipes. Each writes its outputs through a
//! [`Manifest`] so that every file is checksummed.

use std::fmt::Write as _;

use anyhow::{Context, Result};
use kfx_core::classical::{self, DimensionEstimate, Ensemble, PhasePoint};
use kfx_core::lindblad::{self, EvolveOptions, KickDiagnostics, LindbladEngine};
use kfx_core::observables;
use kfx_core::oracle::{self, OracleCheck};
use kfx_core::{fock, snapshot, DensityMatrix, GridSpec, RunConfig};

use crate::manifest::Manifest;
use crate::{ConfigProblem, OracleFailure};

/// Leading eigenvalues written per spectrum row.
pub const SPECTRUM_COLUMNS: usize = 10;
/// Periods used for the Lyapunov estimate.
pub const LYAPUNOV_STEPS: usize = 20_000;

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub force: bool,
}

fn grid_spec(cfg: &RunConfig) -> Result<GridSpec> {
    Ok(GridSpec::square(cfg.grid_l, cfg.grid_m)?)
}

fn check_basis(cfg: &RunConfig, opts: &RunOptions, m: &mut Manifest) -> Result<()> {
    let p = &cfg.params;
    if p.basis_sufficient() {
        return Ok(());
    }
    let msg = format!(
        "basis N = {} is below the sufficiency bound 0.75 (qK)^2/(2 gamma hbar) = {:.1}",
        p.basis_n(),
        0.75 * p.predicted_width().powi(2) / p.hbar()
    );
    if !opts.force {
        return Err(ConfigProblem(format!("{msg}; rerun with --force to proceed")).into());
    }
    m.warn(format!("{msg} (forced)"));
    Ok(())
}

fn initial_state(cfg: &RunConfig, m: &mut Manifest) -> Result<DensityMatrix> {
    let psi = fock::coherent_state(cfg.x0, cfg.p0, &cfg.params);
    if psi.truncation_warning() {
        m.warn(format!(
            "initial coherent state loses {:.3e} of its weight to truncation",
            psi.truncated_weight
        ));
    }
    Ok(DensityMatrix::pure(&psi.amps, cfg.params)?)
}

fn csv_line(out: &mut String, t: u64, values: &[f64]) {
    let _ = write!(out, "{t}");
    for v in values {
        let _ = write!(out, ",{v}");
    }
    out.push('\n');
}

pub fn classical(cfg: &RunConfig, _opts: &RunOptions, m: &mut Manifest) -> Result<()> {
    let p = &cfg.params;
    let spec = grid_spec(cfg)?;
    let start = PhasePoint::new(cfg.x0, cfg.p0);
    let ens = Ensemble::gaussian(start, (0.5 * p.hbar()).sqrt(), cfg.ensemble, cfg.seed)?;
    let discard = classical::default_discard(p);
    let steps = (cfg.n_kicks as usize).max(1);

    let (series, _) = classical::energy_series(&ens, p, discard + steps)?;
    let mut energy = String::from("t,energy,dx,dp\n");
    for (t, e) in series.iter().enumerate() {
        csv_line(&mut energy, t as u64, &[e.energy, e.dx, e.dp]);
    }
    m.emit("energy.csv", energy.as_bytes())?;

    let hist = classical::accumulate_histogram(&ens, p, steps, discard, spec)?;
    m.emit("grid.csv", hist.grid.to_csv().as_bytes())?;
    m.emit("grid.pgm", hist.grid.to_pgm().as_bytes())?;
    let fin = classical::energy_moments(&hist.final_ensemble);
    m.record("discard", discard);
    m.record("accumulated_steps", steps);
    m.record("overflow_fraction", hist.grid.overflow_mass);
    m.record("final_energy", fin.energy);
    m.record("final_dx", fin.dx);
    m.record("final_dp", fin.dp);
    m.record("predicted_dp", p.predicted_width());
    if hist.grid.overflow_mass > 0.0 {
        m.warn(format!(
            "{:.3e} of the samples fell outside the grid",
            hist.grid.overflow_mass
        ));
    }

    let lr = classical::lyapunov_spectrum(p, start, LYAPUNOV_STEPS, discard)?;
    let mut lyap = String::new();
    let _ = writeln!(lyap, "lambda1_per_time = {}", lr.lambda1);
    let _ = writeln!(lyap, "lambda2_per_time = {}", lr.lambda2);
    let _ = writeln!(lyap, "lambda1_per_kick = {}", lr.lambda1_per_kick());
    let _ = writeln!(lyap, "lambda2_per_kick = {}", lr.lambda2_per_kick());
    let _ = writeln!(lyap, "steps = {}", lr.n_steps);
    let _ = writeln!(lyap, "transient = {}", lr.transient);
    let _ = writeln!(lyap, "reseeds = {}", lr.reseeds);
    match classical::information_dimension(&lr, p.gamma()) {
        DimensionEstimate::Fractal {
            d_info,
            d_info_rate,
            d_kaplan_yorke,
        } => {
            let _ = writeln!(lyap, "dimension = {d_info}");
            let _ = writeln!(lyap, "dimension_rate = {d_info_rate}");
            let _ = writeln!(lyap, "dimension_kaplan_yorke = {d_kaplan_yorke}");
            m.record("dimension", d_info);
        }
        DimensionEstimate::NoStrangeAttractor => {
            let _ = writeln!(lyap, "dimension = none");
            m.record("dimension", "none");
        }
    }
    m.emit("lyapunov.txt", lyap.as_bytes())?;
    m.record("lambda1_per_kick", lr.lambda1_per_kick());
    Ok(())
}

fn diagnostics_csv(history: &[KickDiagnostics]) -> String {
    let mut out = String::from("t,trace,purity,energy,edge_population\n");
    for d in history {
        csv_line(&mut out, d.kick, &[d.trace, d.purity, d.mean_energy, d.edge_population]);
    }
    out
}

fn record_evolution(m: &mut Manifest, rec: &lindblad::EvolutionRecord) {
    m.warnings.extend(rec.warnings.iter().cloned());
    m.record("max_edge_population", rec.max_edge_population());
    if let Some(last) = rec.history.last() {
        m.record("final_energy", last.mean_energy);
        m.record("final_purity", last.purity);
        m.record("final_trace", last.trace);
    }
    let steady = lindblad::steady_state_detect(
        &rec.energies(),
        lindblad::DEFAULT_STEADY_WINDOW,
        lindblad::DEFAULT_STEADY_TOL,
    );
    m.record("steady_kick", steady.map_or("none".to_string(), |k| k.to_string()));
}

pub fn quantum(cfg: &RunConfig, opts: &RunOptions, m: &mut Manifest) -> Result<()> {
    check_basis(cfg, opts, m)?;
    let spec = grid_spec(cfg)?;
    let engine = LindbladEngine::new(&cfg.params)?;
    let rho0 = initial_state(cfg, m)?;
    let mut emitted: Vec<(String, Vec<u8>)> = Vec::new();
    let mut clip_min = 0.0f64;
    let mut sink = |rho: &DensityMatrix, _: &KickDiagnostics| -> kfx_core::Result<()> {
        let h = observables::husimi_density(rho, &spec);
        clip_min = clip_min.min(h.min_raw);
        emitted.push((format!("husimi_{:06}.csv", rho.kick()), h.grid.to_csv().into_bytes()));
        emitted.push((format!("rho_{:06}.kflx", rho.kick()), snapshot::encode(rho)));
        Ok(())
    };
    let rec = lindblad::evolve(
        &engine,
        &rho0,
        &EvolveOptions {
            n_kicks: cfg.n_kicks,
            force: opts.force,
        },
        |t| cfg.is_snapshot(t),
        &mut sink,
    )?;
    for (name, bytes) in &emitted {
        m.emit(name, bytes)?;
    }
    m.emit("diagnostics.csv", diagnostics_csv(&rec.history).as_bytes())?;
    m.record("snapshots", emitted.len() / 2);
    m.record("husimi_min_raw", clip_min);
    if clip_min < -1e-14 {
        m.warn(format!("husimi values clipped at zero, most negative {clip_min:.3e}"));
    }
    record_evolution(m, &rec);
    Ok(())
}

pub fn spectrum(cfg: &RunConfig, opts: &RunOptions, m: &mut Manifest) -> Result<()> {
    check_basis(cfg, opts, m)?;
    let spec = grid_spec(cfg)?;
    let engine = LindbladEngine::new(&cfg.params)?;
    let rho0 = initial_state(cfg, m)?;
    let n = cfg.params.basis_n();
    let cols = SPECTRUM_COLUMNS.min(n);
    let mut spectrum_csv = String::from("t");
    for k in 0..cols {
        let _ = write!(spectrum_csv, ",lambda{k}");
    }
    spectrum_csv.push('\n');
    let mut splittings_csv = String::from("t,d01,d23,d45\n");
    let mut entropy_csv = String::from("t,value\n");
    let mut parity_csv = String::from("t,parity0\n");
    let mut grids: Vec<(String, Vec<u8>)> = Vec::new();
    let mut sink = |rho: &DensityMatrix, _: &KickDiagnostics| -> kfx_core::Result<()> {
        let sr = observables::spectrum(rho, 1)?;
        let t = rho.kick();
        csv_line(&mut spectrum_csv, t, &sr.eigenvalues[..cols]);
        if let Ok(s) = observables::pair_splittings(&sr) {
            csv_line(&mut splittings_csv, t, &s);
        }
        csv_line(&mut entropy_csv, t, &[observables::entanglement_entropy(&sr)]);
        let top = &sr.eigenvectors[0];
        csv_line(&mut parity_csv, t, &[observables::parity_expectation(top)]);
        let h = observables::husimi_vector(&top.amps, &spec, rho.params().hbar());
        grids.push((format!("eigvec0_{t:06}.csv"), h.grid.to_csv().into_bytes()));
        Ok(())
    };
    let rec = lindblad::evolve(
        &engine,
        &rho0,
        &EvolveOptions {
            n_kicks: cfg.n_kicks,
            force: opts.force,
        },
        |t| cfg.is_snapshot(t),
        &mut sink,
    )?;
    m.emit("spectrum.csv", spectrum_csv.as_bytes())?;
    if n >= 6 {
        m.emit("splittings.csv", splittings_csv.as_bytes())?;
    } else {
        m.warn("basis too small for pair splittings");
    }
    m.emit("entropy.csv", entropy_csv.as_bytes())?;
    m.emit("parity.csv", parity_csv.as_bytes())?;
    for (name, bytes) in &grids {
        m.emit(name, bytes)?;
    }
    m.emit("diagnostics.csv", diagnostics_csv(&rec.history).as_bytes())?;
    record_evolution(m, &rec);
    Ok(())
}

pub fn negativity(cfg: &RunConfig, opts: &RunOptions, m: &mut Manifest) -> Result<()> {
    check_basis(cfg, opts, m)?;
    let alpha = (cfg.x0, cfg.p0);
    let beta = cfg.beta_or_default();
    let series = observables::evolve_negativity(
        alpha,
        beta,
        &cfg.params,
        cfg.n_kicks,
        |t| cfg.is_snapshot(t),
        opts.force,
    )?;
    let mut csv = String::from("t,value\n");
    for s in &series.samples {
        csv_line(&mut csv, s.kick, &[s.g_n]);
    }
    m.emit("negativity.csv", csv.as_bytes())?;
    m.warnings.extend(series.warnings.iter().cloned());
    m.record("alpha", format!("{} {}", alpha.0, alpha.1));
    m.record("beta", format!("{} {}", beta.0, beta.1));
    m.record("overlap", series.overlap);
    m.record("max_edge_population", series.max_edge_population);
    if let Some(last) = series.samples.last() {
        m.record("final_negativity", last.g_n);
    }
    let worst_trace = series.samples.iter().map(|s| (s.trace - 1.0).abs()).fold(0.0, f64::max);
    m.record("max_trace_deviation", worst_trace);
    Ok(())
}

/// Sizes used by the crosscheck command.
#[derive(Clone, Copy, Debug)]
pub struct CrosscheckSizes {
    pub cos_max_index: usize,
    pub channel_dim: usize,
    pub channel_samples: usize,
    pub flow_samples: usize,
    pub correlation_threshold: f64,
}

impl Default for CrosscheckSizes {
    fn default() -> Self {
        Self {
            cos_max_index: 40,
            channel_dim: 64,
            channel_samples: 4,
            flow_samples: 1000,
            correlation_threshold: 0.9,
        }
    }
}

/// Runs every oracle comparison for the configuration's parameters.
pub fn crosscheck_table(
    cfg: &RunConfig,
    opts: &RunOptions,
    sizes: &CrosscheckSizes,
) -> Result<(Vec<OracleCheck>, Vec<String>)> {
    let p = &cfg.params;
    let mut checks = Vec::new();
    let mut pairs = vec![(p.q(), p.hbar())];
    for pair in [(0.4, 1.0), (1.0, 1.0), (0.4, 0.16)] {
        if !pairs.contains(&pair) {
            pairs.push(pair);
        }
    }
    for (q, hbar) in pairs {
        let err = oracle::cos_matrix_error(sizes.cos_max_index, q, hbar, 0.0)?;
        checks.push(OracleCheck::new(
            format!("cos_matrix_vs_quadrature(q={q},hbar={hbar})"),
            err,
            1e-10,
        ));
    }
    let err = oracle::channel_error(
        sizes.channel_dim,
        p.gamma(),
        p.period_t(),
        sizes.channel_samples,
        cfg.seed,
    )?;
    checks.push(OracleCheck::new(
        format!("damping_channel_vs_rk4(gamma={})", p.gamma()),
        err,
        1e-6,
    ));
    let err = oracle::free_flow_error(p.gamma(), p.period_t(), sizes.flow_samples, cfg.seed);
    checks.push(OracleCheck::new("free_step_vs_ode", err, 1e-10));
    let det = classical::det2(&classical::jacobian(PhasePoint::new(cfg.x0, cfg.p0), p));
    let want = (-2.0 * p.gamma() * p.period_t()).exp();
    checks.push(OracleCheck::new(
        "jacobian_determinant",
        (det - want).abs() / want,
        1e-13,
    ));

    let spec = grid_spec(cfg)?;
    let corr = oracle::correspondence(
        p,
        (cfg.x0, cfg.p0),
        cfg.n_kicks,
        &spec,
        cfg.ensemble,
        cfg.seed,
        opts.force,
    )?;
    checks.push(OracleCheck::at_least(
        format!("husimi_vs_classical_correlation(t={})", cfg.n_kicks),
        corr.correlation,
        sizes.correlation_threshold,
    ));
    Ok((checks, corr.warnings))
}

pub fn render_table(checks: &[OracleCheck]) -> String {
    let mut out = String::from("check,value,tolerance,kind,status\n");
    for c in checks {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{},{}",
            c.name,
            c.error,
            c.tolerance,
            if c.lower_bound { "min" } else { "max" },
            if c.passed() { "PASS" } else { "FAIL" }
        );
    }
    out
}

pub fn crosscheck(cfg: &RunConfig, opts: &RunOptions, m: &mut Manifest) -> Result<()> {
    let (checks, warnings) =
        crosscheck_table(cfg, opts, &CrosscheckSizes::default()).context("running oracle suite")?;
    m.emit("crosscheck.csv", render_table(&checks).as_bytes())?;
    m.warnings.extend(warnings);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
    m.record("checks", checks.len());
    m.record("failed", failed.len());
    if !failed.is_empty() {
        return Err(OracleFailure(format!("oracle checks failed: {}", failed.join(", "))).into());
    }
    Ok(())
}
