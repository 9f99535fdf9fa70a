//! Command-line surface: subcommand dispatch, preset handling, and output
//! assembly.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical
//! non-convergence, 4 partial sweep failure. Worker-count precedence:
//! `--workers` flag, then the `RABICD_WORKERS` environment variable, then
//! `output.workers` in the config file, then the runtime default.

use crate::analysis::{
    correlation_study, landscape, regime_classify, sweep, SweepOutcome,
};
use crate::config::RunConfig;
use crate::error::{RabiError, Result};
use crate::floquet::stroboscopic_compare;
use crate::model::ModelParams;
use crate::optimize::coefficient_trajectory;
use crate::output::{Cell, Report};
use clap::{Args, Parser, Subcommand};

/// Embedded presets, one per published figure or table.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "fidelity_panels",
        include_str!("../presets/fidelity_panels.toml"),
    ),
    (
        "parameter_manifold",
        include_str!("../presets/parameter_manifold.toml"),
    ),
    (
        "optimized_vs_analytic",
        include_str!("../presets/optimized_vs_analytic.toml"),
    ),
    (
        "floquet_stroboscopic",
        include_str!("../presets/floquet_stroboscopic.toml"),
    ),
    (
        "action_correlation",
        include_str!("../presets/action_correlation.toml"),
    ),
    (
        "coefficient_landscape",
        include_str!("../presets/coefficient_landscape.toml"),
    ),
    (
        "regime_boundaries",
        include_str!("../presets/regime_boundaries.toml"),
    ),
];

#[derive(Parser)]
#[command(
    name = "rabicd",
    version,
    about = "Regularized variational counterdiabatic driving for the quantum Rabi model",
    after_help = "Each subcommand ships a default preset; see presets/ for the \
                  editable copies. Exit codes: 0 ok, 2 config error, 3 \
                  non-convergence, 4 partial sweep failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to a TOML run-configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<String>,
    /// Name of an embedded preset (e.g. fidelity_panels).
    #[arg(long)]
    preset: Option<String>,
    /// Dotted-path config override, repeatable (e.g. --set model.tau=2.0).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output file path ('-' for stdout); overrides output.path.
    #[arg(short, long)]
    output: Option<String>,
    /// Output format: csv or json; overrides output.format.
    #[arg(long)]
    format: Option<String>,
    /// Parallel worker count; overrides RABICD_WORKERS and output.workers.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Final-state fidelity for each (Γ, η) cell and protocol.
    FidelitySweep(CommonArgs),
    /// Fidelities plus relative correction norms across parameter space.
    Manifold(CommonArgs),
    /// Stroboscopic comparison of the engineered drive with exact
    /// counterdiabatic dynamics.
    Floquet(CommonArgs),
    /// Rank correlation between accumulated actions and protocol fidelity.
    Correlate(CommonArgs),
    /// Metric value and gradient over the coefficient plane at fixed λ.
    Landscape(CommonArgs),
    /// Coupling-regime labels over the (Γ, η) grid.
    Classify(CommonArgs),
}

impl Command {
    fn experiment(&self) -> &'static str {
        match self {
            Command::FidelitySweep(_) => "fidelity_sweep",
            Command::Manifold(_) => "manifold",
            Command::Floquet(_) => "floquet",
            Command::Correlate(_) => "correlate",
            Command::Landscape(_) => "landscape",
            Command::Classify(_) => "classify",
        }
    }

    fn default_preset(&self) -> &'static str {
        match self {
            Command::FidelitySweep(_) => "fidelity_panels",
            Command::Manifold(_) => "parameter_manifold",
            Command::Floquet(_) => "floquet_stroboscopic",
            Command::Correlate(_) => "action_correlation",
            Command::Landscape(_) => "coefficient_landscape",
            Command::Classify(_) => "regime_boundaries",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::FidelitySweep(a)
            | Command::Manifold(a)
            | Command::Floquet(a)
            | Command::Correlate(a)
            | Command::Landscape(a)
            | Command::Classify(a) => a,
        }
    }
}

/// Parse the process arguments, run the selected experiment, and return the
/// process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let started = std::time::Instant::now();
    let outcome = execute(&cli.command);
    eprintln!("wall time: {:.3} s", started.elapsed().as_secs_f64());
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: &Command) -> Result<()> {
    let cfg = load_config(command)?;
    let experiment = command.experiment();
    match command {
        Command::FidelitySweep(_) => cmd_sweep(&cfg, experiment, false),
        Command::Manifold(_) => cmd_sweep(&cfg, experiment, true),
        Command::Floquet(_) => cmd_floquet(&cfg, experiment),
        Command::Correlate(_) => cmd_correlate(&cfg, experiment),
        Command::Landscape(_) => cmd_landscape(&cfg, experiment),
        Command::Classify(_) => cmd_classify(&cfg, experiment),
    }
}

fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            RabiError::Config(format!(
                "unknown preset '{name}' (available: {})",
                known.join(", ")
            ))
        })
}

fn load_config(command: &Command) -> Result<RunConfig> {
    let args = command.args();
    let text: String = if let Some(path) = &args.config {
        std::fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("reading config {path}: {e}")))?
    } else {
        let name = args.preset.as_deref().unwrap_or(command.default_preset());
        preset_text(name)?.to_string()
    };
    let mut cfg = RunConfig::from_toml(&text, &args.set)?;
    if let Some(path) = &args.output {
        cfg.output.path = path.clone();
    }
    if let Some(format) = &args.format {
        cfg.output.format = format.clone();
    }
    let workers = match args.workers {
        Some(w) => w,
        None => match std::env::var("RABICD_WORKERS") {
            Ok(v) => v.parse::<usize>().map_err(|_| {
                RabiError::Config(format!(
                    "RABICD_WORKERS must be a nonnegative integer, got '{v}'"
                ))
            })?,
            Err(_) => cfg.output.workers,
        },
    };
    cfg.output.workers = workers;
    if workers > 0 {
        // A later call in the same process cannot resize the pool; the
        // first configuration wins.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    cfg.check_experiment(command.experiment())?;
    Ok(cfg)
}

fn new_report(cfg: &RunConfig, columns: Vec<&'static str>) -> Report {
    Report::new(columns, cfg.resolved_toml(), cfg.digest())
}

fn finish(
    report: &Report,
    cfg: &RunConfig,
    experiment: &str,
) -> Result<()> {
    let path = cfg.output_path(experiment);
    report.write(&path, &cfg.output.format)?;
    eprintln!("wrote {path} ({} rows)", report.rows.len());
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, experiment: &str, with_norms: bool) -> Result<()> {
    let cells = cfg.model.resolved_cells()?;
    let protocols = cfg.protocol_specs()?;
    let settings = cfg.sweep_settings();
    let SweepOutcome { rows, failures } = sweep(&cells, &protocols, &settings)?;
    let mut columns = vec![
        "gamma_ratio",
        "eta",
        "protocol",
        "fidelity",
        "infidelity",
        "alpha_c",
        "alpha_a",
        "parity_sector",
    ];
    if with_norms {
        columns.push("rel_norm_c");
        columns.push("rel_norm_a");
    }
    let mut report = new_report(cfg, columns);
    for r in &rows {
        let mut row = vec![
            Cell::Float(r.gamma),
            Cell::Float(r.eta),
            Cell::from(r.protocol),
            Cell::Float(r.fidelity),
            Cell::Float(r.infidelity),
            Cell::Float(r.alpha_c),
            Cell::Float(r.alpha_a),
            Cell::from(r.parity_sector),
        ];
        if with_norms {
            row.push(Cell::Float(r.rel_norm_c));
            row.push(Cell::Float(r.rel_norm_a));
        }
        report.push(row);
    }
    finish(&report, cfg, experiment)?;
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("failed: {f}");
        }
        let total = cells.len() * protocols.len();
        if rows.is_empty() {
            // Nothing succeeded: surface the underlying error (and its
            // exit code) instead of calling a total failure "partial".
            return Err(failures.into_iter().next().expect("nonempty").error);
        }
        return Err(RabiError::PartialFailure {
            failed: failures.len(),
            total,
            first: failures[0].to_string(),
        });
    }
    Ok(())
}

fn cmd_floquet(cfg: &RunConfig, experiment: &str) -> Result<()> {
    let cell = cfg.model.single_cell()?;
    let params = ModelParams::new(cell.gamma, cell.eta, cfg.model.tau, cfg.model.cutoff)?;
    let fcfg = cfg.floquet.build();
    fcfg.validate(&params)?;
    let spec = cfg.metric.spec_by_name(&cfg.floquet.metric)?;
    let (coeffs, _) =
        coefficient_trajectory(&spec, &params, cfg.dynamics.slices, &cfg.optimizer.build())?;
    let cmp = stroboscopic_compare(&params, &fcfg, &coeffs)?;
    let mut report = new_report(cfg, vec!["series", "time", "value"]);
    let trace_series: [(&str, &Vec<f64>); 4] = [
        ("n_floquet", &cmp.n_floquet),
        ("n_exact", &cmp.n_exact),
        ("sz_floquet", &cmp.sz_floquet),
        ("sz_exact", &cmp.sz_exact),
    ];
    for (name, values) in trace_series {
        for (&t, &v) in cmp.times.iter().zip(values) {
            report.push(vec![Cell::from(name), Cell::Float(t), Cell::Float(v)]);
        }
    }
    for (&t, &f) in cmp.strobe_times.iter().zip(&cmp.strobe_fidelity) {
        report.push(vec![
            Cell::from("strobe_fidelity"),
            Cell::Float(t),
            Cell::Float(f),
        ]);
    }
    report.push(vec![
        Cell::from("mean_stroboscopic_fidelity"),
        Cell::Empty,
        Cell::Float(cmp.mean_fidelity),
    ]);
    finish(&report, cfg, experiment)
}

fn cmd_correlate(cfg: &RunConfig, experiment: &str) -> Result<()> {
    let cells = cfg.model.resolved_cells()?;
    let grid = cfg.correlation.grid();
    let mut report = new_report(
        cfg,
        vec![
            "record_type",
            "gamma_ratio",
            "eta",
            "alpha_c",
            "alpha_a",
            "fidelity",
            "action_full_trace",
            "action_coherent",
            "action_variance",
            "action_filtered",
        ],
    );
    for cell in &cells {
        let params = ModelParams::new(cell.gamma, cell.eta, cfg.model.tau, cfg.model.cutoff)?;
        let study = correlation_study(
            &params,
            &grid,
            cfg.correlation.action_nodes,
            cfg.dynamics.steps,
        )?;
        for s in &study.samples {
            report.push(vec![
                Cell::from("sample"),
                Cell::Float(cell.gamma),
                Cell::Float(cell.eta),
                Cell::Float(s.alpha_c),
                Cell::Float(s.alpha_a),
                Cell::Float(s.fidelity),
                Cell::Float(s.actions[0]),
                Cell::Float(s.actions[1]),
                Cell::Float(s.actions[2]),
                Cell::Float(s.actions[3]),
            ]);
        }
        report.push(vec![
            Cell::from("spearman_r_s"),
            Cell::Float(cell.gamma),
            Cell::Float(cell.eta),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            Cell::Float(study.spearman[0]),
            Cell::Float(study.spearman[1]),
            Cell::Float(study.spearman[2]),
            Cell::Float(study.spearman[3]),
        ]);
    }
    finish(&report, cfg, experiment)
}

fn cmd_landscape(cfg: &RunConfig, experiment: &str) -> Result<()> {
    let cell = cfg.model.single_cell()?;
    let lam = cfg.landscape.lambda;
    if !(0.0..=1.0).contains(&lam) {
        return Err(RabiError::Config(format!(
            "landscape.lambda must lie in [0, 1], got {lam}"
        )));
    }
    let params = ModelParams::new(cell.gamma, cell.eta, cfg.model.tau, cfg.model.cutoff)?;
    let spec = cfg.metric.spec_by_name(&cfg.landscape.metric)?;
    let points = landscape(&spec, &params, lam, &cfg.landscape.grid())?;
    let mut report = new_report(
        cfg,
        vec!["alpha_c", "alpha_a", "value", "grad_c", "grad_a"],
    );
    for p in &points {
        report.push(vec![
            Cell::Float(p.alpha_c),
            Cell::Float(p.alpha_a),
            Cell::Float(p.value),
            Cell::from(p.grad_c),
            Cell::from(p.grad_a),
        ]);
    }
    finish(&report, cfg, experiment)
}

fn cmd_classify(cfg: &RunConfig, experiment: &str) -> Result<()> {
    let cells = cfg.model.resolved_cells()?;
    let mut report = new_report(
        cfg,
        vec![
            "gamma_ratio",
            "eta",
            "label",
            "eta_c",
            "fidelity_product_lowest4",
            "n_expect",
            "eigenstate_set",
        ],
    );
    for cell in &cells {
        let r = regime_classify(cell.gamma, cell.eta, cfg.model.cutoff)?;
        report.push(vec![
            Cell::Float(cell.gamma),
            Cell::Float(cell.eta),
            Cell::from(r.label.as_str()),
            Cell::Float(r.eta_c),
            Cell::Float(r.fidelity_product),
            Cell::Float(r.n_expect),
            Cell::from(r.eigenstate_set),
        ]);
    }
    finish(&report, cfg, experiment)
}
