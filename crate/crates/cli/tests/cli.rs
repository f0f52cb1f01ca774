use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use kfx_cli::manifest::{parse_manifest, verify_manifest, FileEntry, MANIFEST_NAME};
use kfx_cli::{run, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_ORACLE};
use kfx_core::PhaseGrid;
use tempfile::TempDir;

const SMALL: &str = "\
hbar = 1
q = 1
K = 2
gamma = 0.2
N = 48
n_kicks = 12
x0 = 3
p0 = 0
grid_L = 8
grid_M = 24
ensemble = 4000
seed = 7
";

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn kfx(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut argv = vec![
        "kfx".to_string(),
        cmd.to_string(),
        "--config".into(),
        config.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    argv.extend(extra.iter().map(|s| s.to_string()));
    run(argv)
}

fn listed_files(dir: &Path) -> Vec<FileEntry> {
    verify_manifest(dir).unwrap().files
}

#[test]
fn every_command_writes_a_verifiable_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    for cmd in ["classical", "quantum", "spectrum", "negativity"] {
        let out = tmp.path().join(cmd);
        assert_eq!(kfx(cmd, &cfg, &out, &[]), EXIT_OK, "{cmd}");
        let view = verify_manifest(&out).unwrap();
        assert!(!view.files.is_empty(), "{cmd}");
        assert_eq!(view.header_value("command"), Some(cmd));
        assert_eq!(kfx_core::params::parse_run_config(&view.config).unwrap().seed, 7);
        for entry in fs::read_dir(&out).unwrap() {
            let name = entry.unwrap().file_name().to_string_lossy().into_owned();
            assert!(
                name == MANIFEST_NAME || view.files.iter().any(|f| f.name == name),
                "{cmd}: stray {name}"
            );
        }
    }
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let missing = write_config(tmp.path(), "missing.cfg", "hbar = 1\nq = 1\nK = 1\nN = 8\n");
    assert_eq!(kfx("quantum", &missing, &out, &[]), EXIT_CONFIG);
    let unknown = write_config(tmp.path(), "unknown.cfg", &format!("{SMALL}colour = red\n"));
    assert_eq!(kfx("classical", &unknown, &out, &[]), EXIT_CONFIG);
    let negative = write_config(
        tmp.path(),
        "negative.cfg",
        &SMALL.replace("gamma = 0.2", "gamma = -0.2"),
    );
    assert_eq!(kfx("classical", &negative, &out, &[]), EXIT_CONFIG);
    assert_eq!(kfx("classical", &tmp.path().join("absent.cfg"), &out, &[]), EXIT_CONFIG);
    assert_eq!(run(["kfx", "quantum"]), EXIT_CONFIG);
    assert_eq!(run(["kfx", "teleport", "--config", "x"]), EXIT_CONFIG);
}

#[test]
fn insufficient_basis_needs_force() {
    let tmp = TempDir::new().unwrap();
    let text = SMALL
        .replace("K = 2", "K = 20")
        .replace("N = 48", "N = 16")
        .replace("x0 = 3", "x0 = 0");
    let cfg = write_config(tmp.path(), "tight.cfg", &text);
    assert_eq!(kfx("quantum", &cfg, &tmp.path().join("a"), &[]), EXIT_CONFIG);
}

#[test]
fn truncation_aborts_with_three_unless_forced() {
    let tmp = TempDir::new().unwrap();
    let text = SMALL
        .replace("K = 2", "K = 1")
        .replace("gamma = 0.2", "gamma = 0.5")
        .replace("N = 48", "N = 16")
        .replace("x0 = 3", "x0 = 5");
    let cfg = write_config(tmp.path(), "edge.cfg", &text);
    assert_eq!(kfx("quantum", &cfg, &tmp.path().join("a"), &[]), EXIT_NUMERICAL);
    let forced = tmp.path().join("b");
    assert_eq!(kfx("quantum", &cfg, &forced, &["--force"]), EXIT_OK);
    let view = verify_manifest(&forced).unwrap();
    assert!(
        view.warnings.iter().any(|w| w.contains("edge population")),
        "{:?}",
        view.warnings
    );
    assert_eq!(view.header_value("force"), Some("true"));
}

#[test]
fn failing_oracle_exits_with_four_and_still_writes_table() {
    let tmp = TempDir::new().unwrap();
    let text = "hbar = 1\nq = 1\nK = 6\ngamma = 0.1\nN = 256\nn_kicks = 20\nx0 = 5\np0 = 0\ngrid_L = 30\ngrid_M = 64\nensemble = 1\nseed = 1\n";
    let cfg = write_config(tmp.path(), "bad.cfg", text);
    let out = tmp.path().join("cc");
    assert_eq!(kfx("crosscheck", &cfg, &out, &[]), EXIT_ORACLE);
    let table = fs::read_to_string(out.join("crosscheck.csv")).unwrap();
    assert!(table
        .lines()
        .any(|l| l.starts_with("husimi_vs_classical") && l.ends_with("FAIL")));
    assert!(table
        .lines()
        .filter(|l| l.starts_with("cos_matrix"))
        .all(|l| l.ends_with("PASS")));
    verify_manifest(&out).unwrap();
}

#[test]
fn undamped_crosscheck_reduces_to_identity_checks() {
    let tmp = TempDir::new().unwrap();
    let text = "hbar = 1\nq = 1\nK = 0\ngamma = 0\nN = 64\nn_kicks = 8\nx0 = 3\np0 = 0\ngrid_L = 8\ngrid_M = 48\nensemble = 20000\nseed = 1\n";
    let cfg = write_config(tmp.path(), "free.cfg", text);
    let out = tmp.path().join("cc");
    assert_eq!(kfx("crosscheck", &cfg, &out, &[]), EXIT_OK);
    let table = fs::read_to_string(out.join("crosscheck.csv")).unwrap();
    let channel = table.lines().find(|l| l.starts_with("damping_channel")).unwrap();
    assert!(channel.contains(",0e0,"), "{channel}");
}

#[test]
fn zero_kicks_gives_the_initial_grid_only() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "zero.cfg", &SMALL.replace("n_kicks = 12", "n_kicks = 0"));
    let out = tmp.path().join("q");
    assert_eq!(kfx("quantum", &cfg, &out, &[]), EXIT_OK);
    let grids: Vec<_> = listed_files(&out)
        .into_iter()
        .filter(|f| f.name.starts_with("husimi_"))
        .collect();
    assert_eq!(grids.len(), 1);
    assert_eq!(grids[0].name, "husimi_000000.csv");
    let g = PhaseGrid::from_csv(&fs::read_to_string(out.join(&grids[0].name)).unwrap()).unwrap();
    let peak = g.values.iter().cloned().fold(f64::MIN, f64::max);
    let best = g.values.iter().position(|&v| v == peak).unwrap();
    let x = g.spec.x_center(best % g.spec.m_x);
    assert!((x - 3.0).abs() <= g.spec.dx(), "{x}");
}

#[test]
fn unkicked_classical_grid_is_a_point_at_the_origin() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "k0.cfg", &SMALL.replace("K = 2", "K = 0"));
    let out = tmp.path().join("c");
    assert_eq!(kfx("classical", &cfg, &out, &[]), EXIT_OK);
    let g = PhaseGrid::from_csv(&fs::read_to_string(out.join("grid.csv")).unwrap()).unwrap();
    let area = g.spec.cell_area();
    let (mx, mp) = (g.spec.m_x, g.spec.m_p);
    let mut centre = 0.0;
    for j in mp / 2 - 1..=mp / 2 {
        for i in mx / 2 - 1..=mx / 2 {
            centre += g.value(i, j) * area;
        }
    }
    assert!(centre > 0.999, "{centre}");
}

#[test]
fn unkicked_quantum_relaxes_to_vacuum() {
    let tmp = TempDir::new().unwrap();
    let text = SMALL
        .replace("K = 2", "K = 0")
        .replace("gamma = 0.2", "gamma = 0.1")
        .replace("n_kicks = 12", "n_kicks = 40");
    let cfg = write_config(tmp.path(), "vac.cfg", &text);
    let out = tmp.path().join("q");
    assert_eq!(kfx("quantum", &cfg, &out, &[]), EXIT_OK);
    let view = verify_manifest(&out).unwrap();
    let e: f64 = view.summary_value("final_energy").unwrap().parse().unwrap();
    assert!((e - 0.5).abs() < 0.01, "{e}");
}

fn run_in_pool(threads: usize, cmd: &str, cfg: &Path, out: &Path) -> Vec<FileEntry> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    assert_eq!(pool.install(|| kfx(cmd, cfg, out, &[])), EXIT_OK);
    listed_files(out)
}

#[test]
fn outputs_are_identical_across_runs_and_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "det.cfg", SMALL);
    for cmd in ["classical", "quantum", "spectrum", "negativity"] {
        let a = run_in_pool(1, cmd, &cfg, &tmp.path().join(format!("{cmd}-1")));
        let b = run_in_pool(1, cmd, &cfg, &tmp.path().join(format!("{cmd}-1b")));
        let c = run_in_pool(4, cmd, &cfg, &tmp.path().join(format!("{cmd}-4")));
        assert_eq!(a, b, "{cmd}: repeated run differs");
        assert_eq!(a, c, "{cmd}: thread count changes output");
    }
}

#[test]
fn seed_override_changes_classical_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "seed.cfg", SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(kfx("classical", &cfg, &a, &[]), EXIT_OK);
    assert_eq!(kfx("classical", &cfg, &b, &["--seed", "8"]), EXIT_OK);
    let grid = |d: &Path| listed_files(d).into_iter().find(|f| f.name == "grid.csv").unwrap();
    assert_ne!(grid(&a).sha256, grid(&b).sha256);
    let view = parse_manifest(&fs::read_to_string(b.join(MANIFEST_NAME)).unwrap()).unwrap();
    assert!(view.config.contains("seed = 8"));
}

#[test]
fn binary_reports_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(tmp.path(), "bad.cfg", "hbar = one\n");
    let status = Process::new(env!("CARGO_BIN_EXE_kfx"))
        .args(["classical", "--config"])
        .arg(&bad)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_CONFIG));
    let good = write_config(tmp.path(), "good.cfg", SMALL);
    let status = Process::new(env!("CARGO_BIN_EXE_kfx"))
        .args(["negativity", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(tmp.path().join("n"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
}
