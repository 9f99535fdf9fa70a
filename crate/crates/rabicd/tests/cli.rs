//! Integration tests for the `rabicd` binary: exit codes, output schemas,
//! reproducibility, and config plumbing.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rabicd"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join("rabicd-cli-tests")
        .join(format!("{}-{}", std::process::id(), name));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .env_remove("RABICD_WORKERS")
        .output()
        .expect("binary runs")
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

#[test]
fn landscape_succeeds_with_schema_and_reproducible_bytes() {
    let dir = scratch("landscape");
    let out = run(&["landscape", "-o", "map.csv"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = data_lines(&dir.join("map.csv"));
    assert_eq!(lines[0], "alpha_c,alpha_a,value,grad_c,grad_a");
    assert_eq!(lines.len(), 1 + 15 * 15);
    // Boundary rows carry empty gradient fields.
    assert!(lines[1].ends_with(",,"));
    // Interior rows carry both gradients.
    let interior = &lines[1 + 15 + 1];
    assert_eq!(interior.split(',').filter(|f| f.is_empty()).count(), 0);
    let first = std::fs::read(dir.join("map.csv")).unwrap();
    let out2 = run(&["landscape", "-o", "map.csv"], &dir);
    assert!(out2.status.success());
    let second = std::fs::read(dir.join("map.csv")).unwrap();
    assert_eq!(first, second, "repeated runs must be byte-identical");
    // Header carries version and config digest.
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("# rabicd v"));
    assert!(text.contains("# config sha256: "));
    assert!(text.contains("experiment = \"landscape\""));
}

#[test]
fn classify_default_preset_reports_known_regimes() {
    let dir = scratch("classify");
    let out = run(&["classify"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = data_lines(&dir.join("regime_boundaries.csv"));
    assert_eq!(
        lines[0],
        "gamma_ratio,eta,label,eta_c,fidelity_product_lowest4,n_expect,eigenstate_set"
    );
    let label_of = |eta: f64| -> String {
        lines[1..]
            .iter()
            .map(|l| l.split(',').collect::<Vec<_>>())
            .find(|f| (f[1].parse::<f64>().unwrap() - eta).abs() < 1e-9)
            .map(|f| f[2].to_string())
            .unwrap_or_else(|| panic!("no row for eta = {eta}"))
    };
    assert_eq!(label_of(0.1), "SC");
    assert_eq!(label_of(0.4), "USC");
    assert_eq!(label_of(1.6), "DSC");
    // Labels never step backwards along the coupling axis.
    let rank = |l: &str| match l {
        "SC" => 0,
        "USC" => 1,
        _ => 2,
    };
    let labels: Vec<i32> = lines[1..]
        .iter()
        .map(|l| rank(l.split(',').nth(2).unwrap()))
        .collect();
    assert!(labels.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn fidelity_sweep_slow_ramp_is_adiabatic() {
    let dir = scratch("adiabatic");
    let out = run(
        &[
            "fidelity-sweep",
            "--set",
            "model.cells=[[1.0, 0.25]]",
            "--set",
            "model.tau=100.0",
            "--set",
            "protocols.list=[\"free\"]",
            "-o",
            "slow.csv",
        ],
        &dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = data_lines(&dir.join("slow.csv"));
    assert_eq!(
        lines[0],
        "gamma_ratio,eta,protocol,fidelity,infidelity,alpha_c,alpha_a,parity_sector"
    );
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[2], "free");
    let fidelity: f64 = fields[3].parse().unwrap();
    assert!(fidelity >= 0.999, "slow-ramp fidelity {fidelity}");
    assert_eq!(fields[7], "-1");
    assert_eq!(lines[2].split(',').nth(7).unwrap(), "any");
}

#[test]
fn empty_grid_is_a_config_error() {
    let dir = scratch("emptygrid");
    let out = run(&["fidelity-sweep", "--set", "model.eta=[]"], &dir);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model grid is empty"), "stderr: {err}");
}

#[test]
fn config_diagnostics_name_the_offending_field() {
    let dir = scratch("diagnostics");
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "experiment = \"fidelity_sweep\"\n[model]\nbogus = 3\n").unwrap();
    let out = run(
        &["fidelity-sweep", "--config", cfg.to_str().unwrap()],
        &dir,
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus"), "stderr: {err}");

    let out = run(&["fidelity-sweep", "--preset", "nonexistent"], &dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));

    // A preset declared for another experiment is rejected.
    let out = run(&["manifold", "--preset", "action_correlation"], &dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment"));

    let out = run(
        &["landscape", "--set", "output.format=yaml"],
        &dir,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown output format"));
}

#[test]
fn forced_nonconvergence_exits_with_the_solver_code() {
    let dir = scratch("nonconvergence");
    let out = run(
        &[
            "fidelity-sweep",
            "--set",
            "model.cells=[[1.0, 0.25]]",
            "--set",
            "model.cutoff=16",
            "--set",
            "protocols.list=[\"free\"]",
            "--set",
            "dynamics.steps=2",
            "--set",
            "dynamics.max_doublings=1",
            "--set",
            "dynamics.tolerance=1e-12",
            "-o",
            "nc.csv",
        ],
        &dir,
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
}

#[test]
fn partial_sweep_failure_keeps_successful_rows_and_exits_4() {
    let dir = scratch("partial");
    let out = run(
        &[
            "fidelity-sweep",
            "--set",
            "model.cells=[[1.0, 2.0], [1.0, 0.2]]",
            "--set",
            "model.cutoff=2",
            "--set",
            "protocols.list=[\"coherent\"]",
            "--set",
            "dynamics.slices=11",
            "-o",
            "partial.csv",
        ],
        &dir,
    );
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("partial sweep failure"), "stderr: {err}");
    assert!(err.contains("eta=2"), "stderr: {err}");
    // The surviving cell's two sector rows are still written.
    let lines = data_lines(&dir.join("partial.csv"));
    assert_eq!(lines.len(), 3, "{lines:?}");
    assert!(lines[1].contains("cd_coherent"));
}

#[test]
fn json_output_is_wellformed() {
    let dir = scratch("json");
    let out = run(&["landscape", "--format", "json", "-o", "map.json"], &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.join("map.json")).unwrap();
    assert!(text.starts_with("{\n"));
    assert!(text.trim_end().ends_with('}'));
    assert!(text.contains("\"columns\": [\"alpha_c\", \"alpha_a\", \"value\", \"grad_c\", \"grad_a\"]"));
    assert!(text.contains("\"config_sha256\": \""));
    assert!(text.contains("null"));
    // Balanced braces/brackets as a cheap well-formedness proxy.
    let depth = text.chars().fold((0i64, 0i64), |(b, s), c| match c {
        '{' => (b + 1, s),
        '}' => (b - 1, s),
        '[' => (b, s + 1),
        ']' => (b, s - 1),
        _ => (b, s),
    });
    assert_eq!(depth, (0, 0));
}

#[test]
fn floquet_reduced_run_emits_all_series() {
    let dir = scratch("floquet");
    let out = run(
        &[
            "floquet",
            "--set",
            "floquet.nu=20.0",
            "--set",
            "model.cutoff=20",
            "--set",
            "dynamics.slices=21",
            "-o",
            "flo.csv",
        ],
        &dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = data_lines(&dir.join("flo.csv"));
    assert_eq!(lines[0], "series,time,value");
    for series in [
        "n_floquet",
        "n_exact",
        "sz_floquet",
        "sz_exact",
        "strobe_fidelity",
        "mean_stroboscopic_fidelity",
    ] {
        assert!(
            lines.iter().any(|l| l.starts_with(series)),
            "missing series {series}"
        );
    }
    let mean_row = lines
        .iter()
        .find(|l| l.starts_with("mean_stroboscopic_fidelity"))
        .unwrap();
    let fields: Vec<&str> = mean_row.split(',').collect();
    assert!(fields[1].is_empty());
    let mean: f64 = fields[2].parse().unwrap();
    assert!((0.0..=1.0).contains(&mean), "mean fidelity {mean}");
}

#[test]
fn correlate_reduced_run_reports_negative_rank_correlations() {
    let dir = scratch("correlate");
    let out = run(
        &[
            "correlate",
            "--set",
            "model.cells=[[1.0, 0.25]]",
            "--set",
            "model.cutoff=16",
            "--set",
            "correlation.points_per_axis=5",
            "--set",
            "dynamics.steps=300",
            "-o",
            "corr.csv",
        ],
        &dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = data_lines(&dir.join("corr.csv"));
    assert_eq!(
        lines[0],
        "record_type,gamma_ratio,eta,alpha_c,alpha_a,fidelity,action_full_trace,action_coherent,action_variance,action_filtered"
    );
    assert_eq!(lines.len(), 1 + 24 + 1);
    let spearman = lines.last().unwrap();
    let fields: Vec<&str> = spearman.split(',').collect();
    assert_eq!(fields[0], "spearman_r_s");
    assert!(fields[3].is_empty() && fields[4].is_empty() && fields[5].is_empty());
    for f in &fields[6..10] {
        let r: f64 = f.parse().unwrap();
        assert!(r < 0.0, "rank correlation {r} should be negative");
    }
}

#[test]
fn flags_override_config_file_values() {
    let dir = scratch("precedence");
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        "experiment = \"landscape\"\n\
         [landscape]\npoints_per_axis = 3\n\
         [output]\npath = \"from_file.csv\"\nformat = \"csv\"\n",
    )
    .unwrap();
    let out = run(
        &[
            "landscape",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "landscape.points_per_axis=4",
            "-o",
            "from_flag.csv",
        ],
        &dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.join("from_file.csv").exists());
    let lines = data_lines(&dir.join("from_flag.csv"));
    assert_eq!(lines.len(), 1 + 4 * 4);
    // The echoed config reflects the applied overrides.
    let text = std::fs::read_to_string(dir.join("from_flag.csv")).unwrap();
    assert!(text.contains("points_per_axis = 4"));
    assert!(text.contains("path = \"from_flag.csv\""));
}

#[test]
fn worker_count_env_is_validated_and_applied() {
    let dir = scratch("workers");
    let out = bin()
        .args(["landscape", "-o", "w.csv"])
        .current_dir(&dir)
        .env("RABICD_WORKERS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.join("w.csv")).unwrap();
    assert!(text.contains("workers = 2"), "echoed config lacks workers");

    let out = bin()
        .args(["landscape"])
        .current_dir(&dir)
        .env("RABICD_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("RABICD_WORKERS"));

    // The flag outranks the environment.
    let out = bin()
        .args(["landscape", "--workers", "1", "-o", "wf.csv"])
        .current_dir(&dir)
        .env("RABICD_WORKERS", "many")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.join("wf.csv")).unwrap();
    assert!(text.contains("workers = 1"));
}

#[test]
fn stdout_output_writes_only_data_to_stdout() {
    let dir = scratch("stdout");
    let out = run(&["classify", "--set", "model.eta=[0.1]", "-o", "-"], &dir);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# rabicd v"));
    assert!(text.contains("gamma_ratio,eta,label"));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("wall time"), "timing belongs on stderr");
}