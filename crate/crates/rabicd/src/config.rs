//! Run configuration: a single TOML document with per-section defaults,
//! dotted-path overrides, and a canonical serialization whose digest is
//! embedded in every output header.

use crate::analysis::{CoefficientGrid, ProtocolSpec, SweepCell, SweepSettings};
use crate::dynamics::EvolveOptions;
use crate::error::{RabiError, Result};
use crate::floquet::FloquetConfig;
use crate::metrics::{MetricKind, MetricSpec};
use crate::optimize::OptimizerConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Full configuration for one CLI run. Every field has a default, so a
/// config file only states what it changes.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Which subcommand this file is meant for; a mismatch with the invoked
    /// subcommand is a config error. Empty means "any".
    pub experiment: String,
    pub model: ModelSection,
    pub protocols: ProtocolsSection,
    pub metric: MetricSection,
    pub optimizer: OptimizerSection,
    pub dynamics: DynamicsSection,
    pub floquet: FloquetSection,
    pub correlation: CorrelationSection,
    pub landscape: LandscapeSection,
    pub output: OutputSection,
}

/// Physical problem: which `(Γ, η)` cells to run and the shared ramp.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Qubit/field frequency ratios Γ = Ω/ω.
    pub gamma_ratio: Vec<f64>,
    /// Coupling ratios η = g/ω.
    pub eta: Vec<f64>,
    /// Explicit `[Γ, η]` pairs; when present this wins over the
    /// `gamma_ratio × eta` product grid.
    pub cells: Option<Vec<[f64; 2]>>,
    /// Protocol duration in units of 1/ω.
    pub tau: f64,
    /// Highest retained photon number; omit for the automatic
    /// coupling-dependent choice.
    pub cutoff: Option<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            gamma_ratio: vec![1.0],
            eta: vec![0.25],
            cells: None,
            tau: 1.0,
            cutoff: None,
        }
    }
}

impl ModelSection {
    /// The cells to run: explicit pairs, else the product grid.
    pub fn resolved_cells(&self) -> Result<Vec<SweepCell>> {
        let cells: Vec<SweepCell> = match &self.cells {
            Some(pairs) => pairs
                .iter()
                .map(|p| SweepCell {
                    gamma: p[0],
                    eta: p[1],
                })
                .collect(),
            None => {
                let mut v = Vec::with_capacity(self.gamma_ratio.len() * self.eta.len());
                for &g in &self.gamma_ratio {
                    for &e in &self.eta {
                        v.push(SweepCell { gamma: g, eta: e });
                    }
                }
                v
            }
        };
        if cells.is_empty() {
            return Err(RabiError::Config(
                "model grid is empty: populate model.gamma_ratio and model.eta, \
                 or model.cells"
                    .into(),
            ));
        }
        Ok(cells)
    }

    /// The single cell, for commands that run exactly one.
    pub fn single_cell(&self) -> Result<SweepCell> {
        let cells = self.resolved_cells()?;
        if cells.len() != 1 {
            return Err(RabiError::Config(format!(
                "this command runs a single (gamma_ratio, eta) cell, but the \
                 config resolves to {} cells",
                cells.len()
            )));
        }
        Ok(cells[0])
    }
}

/// Which protocols `fidelity-sweep` and `manifold` score.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolsSection {
    /// Any of: `free`, `full`, `coherent`, `variance`, `filtered`,
    /// `dispersive`, `optimized`.
    pub list: Vec<String>,
}

impl Default for ProtocolsSection {
    fn default() -> Self {
        ProtocolsSection {
            list: vec!["free".into()],
        }
    }
}

/// Shared parameters of the weighted action metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSection {
    /// Entrywise magnitude threshold γ of the filtered trace.
    pub filter_threshold: f64,
    /// Inverse temperature of the displaced thermal reference; `inf` is the
    /// pure displaced vacuum.
    pub beta_inverse_temperature: f64,
    /// Filter on raw real parts instead of magnitudes.
    pub raw_entry_filter: bool,
    /// Build the superradiant reference on the σx basis instead of σz.
    pub x_basis_superradiant: bool,
}

impl Default for MetricSection {
    fn default() -> Self {
        let spec = MetricSpec::coherent();
        MetricSection {
            filter_threshold: 1e-3,
            beta_inverse_temperature: spec.beta_inverse_temperature,
            raw_entry_filter: false,
            x_basis_superradiant: false,
        }
    }
}

impl MetricSection {
    /// Build a [`MetricSpec`] of the given kind with this section's shared
    /// parameters.
    pub fn spec(&self, kind: MetricKind) -> MetricSpec {
        let mut spec = match kind {
            MetricKind::FullTrace => MetricSpec::full_trace(),
            MetricKind::CoherentWeighted => MetricSpec::coherent(),
            MetricKind::SuperradiantVariance => MetricSpec::variance(),
            MetricKind::FilteredTrace => MetricSpec::filtered(self.filter_threshold),
        };
        spec.filter_threshold = self.filter_threshold;
        spec.beta_inverse_temperature = self.beta_inverse_temperature;
        spec.raw_entry_filter = self.raw_entry_filter;
        spec.x_basis_superradiant = self.x_basis_superradiant;
        spec
    }

    /// Parse a metric name (`full`, `coherent`, `variance`, `filtered`).
    pub fn spec_by_name(&self, name: &str) -> Result<MetricSpec> {
        let kind = match name {
            "full" => MetricKind::FullTrace,
            "coherent" => MetricKind::CoherentWeighted,
            "variance" => MetricKind::SuperradiantVariance,
            "filtered" => MetricKind::FilteredTrace,
            other => {
                return Err(RabiError::Config(format!(
                    "unknown metric '{other}' (expected full, coherent, \
                     variance, or filtered)"
                )))
            }
        };
        let spec = self.spec(kind);
        spec.validate()?;
        Ok(spec)
    }

    /// Parse a protocol name into a [`ProtocolSpec`].
    pub fn protocol_by_name(&self, name: &str) -> Result<ProtocolSpec> {
        Ok(match name {
            "free" => ProtocolSpec::Free,
            "dispersive" => ProtocolSpec::Dispersive,
            "optimized" => ProtocolSpec::Optimized,
            metric => ProtocolSpec::Metric(self.spec_by_name(metric).map_err(|_| {
                RabiError::Config(format!(
                    "unknown protocol '{name}' (expected free, full, coherent, \
                     variance, filtered, dispersive, or optimized)"
                ))
            })?),
        })
    }
}

/// Mirrors [`OptimizerConfig`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub coarse_points: usize,
    pub fidelity_coarse_points: usize,
    pub box_bound: f64,
    pub simplex_tol: f64,
    pub max_iters: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let c = OptimizerConfig::default();
        OptimizerSection {
            coarse_points: c.coarse_points,
            fidelity_coarse_points: c.fidelity_coarse_points,
            box_bound: c.box_bound,
            simplex_tol: c.simplex_tol,
            max_iters: c.max_iters,
        }
    }
}

impl OptimizerSection {
    pub fn build(&self) -> OptimizerConfig {
        OptimizerConfig {
            coarse_points: self.coarse_points,
            fidelity_coarse_points: self.fidelity_coarse_points,
            box_bound: self.box_bound,
            simplex_tol: self.simplex_tol,
            max_iters: self.max_iters,
        }
    }
}

/// Mirrors [`EvolveOptions`] plus the coefficient-trajectory resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSection {
    pub steps: usize,
    pub converge: bool,
    pub tolerance: f64,
    pub max_doublings: usize,
    /// Time slices for per-slice coefficient trajectories.
    pub slices: usize,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        let o = EvolveOptions::default();
        DynamicsSection {
            steps: o.steps,
            converge: o.converge,
            tolerance: o.tol,
            max_doublings: o.max_doublings,
            slices: 101,
        }
    }
}

impl DynamicsSection {
    pub fn build(&self) -> EvolveOptions {
        EvolveOptions {
            steps: self.steps,
            converge: self.converge,
            tol: self.tolerance,
            max_doublings: self.max_doublings,
        }
    }
}

/// Mirrors [`FloquetConfig`] plus the metric whose coefficients feed the
/// engineered drive.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FloquetSection {
    pub nu: f64,
    pub nu0: f64,
    pub betas: Vec<f64>,
    pub samples_per_period: usize,
    /// Metric whose coefficient trajectory the drive realizes.
    pub metric: String,
}

impl Default for FloquetSection {
    fn default() -> Self {
        let f = FloquetConfig::default();
        FloquetSection {
            nu: f.nu,
            nu0: f.nu0,
            betas: f.betas,
            samples_per_period: f.samples_per_period,
            metric: "variance".into(),
        }
    }
}

impl FloquetSection {
    pub fn build(&self) -> FloquetConfig {
        FloquetConfig {
            nu: self.nu,
            nu0: self.nu0,
            betas: self.betas.clone(),
            samples_per_period: self.samples_per_period,
        }
    }
}

/// Coefficient grid and quadrature for `correlate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelationSection {
    pub points_per_axis: usize,
    pub bound: f64,
    /// Trapezoid nodes for each accumulated action (≥ 11).
    pub action_nodes: usize,
}

impl Default for CorrelationSection {
    fn default() -> Self {
        CorrelationSection {
            points_per_axis: 15,
            bound: 5.0,
            action_nodes: crate::analysis::CORRELATION_ACTION_NODES,
        }
    }
}

impl CorrelationSection {
    pub fn grid(&self) -> CoefficientGrid {
        CoefficientGrid {
            points_per_axis: self.points_per_axis,
            bound: self.bound,
        }
    }
}

/// Metric surface to map for `landscape`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeSection {
    /// Metric name (`full`, `coherent`, `variance`, `filtered`).
    pub metric: String,
    /// Ramp value λ at which the surface is evaluated.
    pub lambda: f64,
    pub points_per_axis: usize,
    pub bound: f64,
}

impl Default for LandscapeSection {
    fn default() -> Self {
        LandscapeSection {
            metric: "coherent".into(),
            lambda: 0.5,
            points_per_axis: 15,
            bound: 5.0,
        }
    }
}

impl LandscapeSection {
    pub fn grid(&self) -> CoefficientGrid {
        CoefficientGrid {
            points_per_axis: self.points_per_axis,
            bound: self.bound,
        }
    }
}

/// Where and how results are written.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Output file path; empty means `<experiment>.<format>` in the working
    /// directory, and `-` writes to stdout.
    pub path: String,
    /// `csv` or `json`.
    pub format: String,
    /// Parallel worker count; 0 lets the runtime pick.
    pub workers: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            path: String::new(),
            format: "csv".into(),
            workers: 0,
        }
    }
}

impl RunConfig {
    /// Parse a TOML document, then apply dotted-path `key=value` overrides
    /// (`model.tau=2.0`). Override values are parsed as TOML; values that do
    /// not parse are taken as strings.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<RunConfig> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| RabiError::Config(format!("config parse error: {e}")))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e| RabiError::Config(format!("config error: {e}")))
    }

    /// Canonical serialization of the fully resolved config (defaults
    /// included), echoed into every output header.
    pub fn resolved_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 digest of [`RunConfig::resolved_toml`].
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.resolved_toml().as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Check the file's declared experiment against the invoked subcommand.
    pub fn check_experiment(&self, invoked: &str) -> Result<()> {
        if !self.experiment.is_empty() && self.experiment != invoked {
            return Err(RabiError::Config(format!(
                "config declares experiment = \"{}\" but the {} command was \
                 invoked",
                self.experiment, invoked
            )));
        }
        Ok(())
    }

    /// Sweep settings shared by `fidelity-sweep` and `manifold`.
    pub fn sweep_settings(&self) -> SweepSettings {
        SweepSettings {
            tau: self.model.tau,
            cutoff: self.model.cutoff,
            slices: self.dynamics.slices,
            optimizer: self.optimizer.build(),
            evolve: self.dynamics.build(),
        }
    }

    /// The protocol list for sweep commands.
    pub fn protocol_specs(&self) -> Result<Vec<ProtocolSpec>> {
        if self.protocols.list.is_empty() {
            return Err(RabiError::Config(
                "protocols.list is empty: name at least one protocol".into(),
            ));
        }
        self.protocols
            .list
            .iter()
            .map(|name| self.metric.protocol_by_name(name))
            .collect()
    }

    /// Output path with the per-experiment default applied.
    pub fn output_path(&self, experiment: &str) -> String {
        if self.output.path.is_empty() {
            format!("{}.{}", experiment, self.output.format)
        } else {
            self.output.path.clone()
        }
    }
}

fn apply_override(table: &mut toml::Table, ov: &str) -> Result<()> {
    let (path, raw_value) = ov.split_once('=').ok_or_else(|| {
        RabiError::Config(format!(
            "override '{ov}' is not of the form section.key=value"
        ))
    })?;
    let value = parse_override_value(raw_value);
    let mut segments: Vec<&str> = path.split('.').collect();
    let last = segments.pop().ok_or_else(|| {
        RabiError::Config(format!("override '{ov}' has an empty key path"))
    })?;
    let mut node = table;
    for seg in segments {
        let entry = node
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| {
            RabiError::Config(format!(
                "override '{ov}': '{seg}' is not a table in the base config"
            ))
        })?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn parse_override_value(raw: &str) -> toml::Value {
    // Reuse the TOML value grammar so numbers, booleans, arrays, and quoted
    // strings all work; bare words fall back to strings.
    let doc = format!("v = {raw}");
    if let Ok(t) = doc.parse::<toml::Table>() {
        if let Some(v) = t.get("v") {
            return v.clone();
        }
    }
    toml::Value::String(raw.to_string())
}
