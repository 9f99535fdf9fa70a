//! Figure-level studies: accumulated actions along the ramp, rank
//! correlations between actions and fidelities, coefficient landscapes,
//! coupling-regime classification, and multi-cell protocol sweeps.

use crate::agp::{dispersive_trajectory, AgpCoefficients};
use crate::dynamics::{protocol_fidelity, EvolveOptions};
use crate::error::{RabiError, Result};
use crate::hilbert::{number_operator, qubit_identity};
use crate::linalg::linspace;
use crate::metrics::{MetricKind, MetricSpec, QuadForm};
use crate::model::{jc_hamiltonian, rabi_hamiltonian, ModelParams};
use crate::optimize::{
    coefficient_trajectory, optimize_fidelity, relative_norms, OptimizerConfig,
};
use rayon::prelude::*;

/// Default number of trapezoid nodes for [`accumulated_action`].
pub const DEFAULT_ACTION_NODES: usize = 101;
/// Trapezoid nodes used by [`correlation_study`]; rank correlations are
/// insensitive to the quadrature resolution, so a coarser rule keeps the
/// per-sample cost negligible next to the dynamics.
pub const CORRELATION_ACTION_NODES: usize = 26;

/// Ramp-integrated action `∫₀¹ S(λ; α_c, α_a) dλ` for a constant coefficient
/// pair, by the trapezoid rule on a uniform `λ` grid (`nodes ≥ 11`).
pub fn accumulated_action(
    spec: &MetricSpec,
    params: &ModelParams,
    alpha_c: f64,
    alpha_a: f64,
    nodes: usize,
) -> Result<f64> {
    if nodes < 11 {
        return Err(RabiError::Config(format!(
            "accumulated action needs at least 11 quadrature nodes, got {nodes}"
        )));
    }
    let lams = linspace(0.0, 1.0, nodes);
    let values = lams
        .iter()
        .map(|&lam| Ok(QuadForm::build(spec, params, lam)?.value(alpha_c, alpha_a)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(trapezoid(&lams, &values))
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Spearman rank correlation with average ranks for ties. Undefined (and an
/// error) when either input has no rank variance.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(RabiError::DimensionMismatch(format!(
            "rank correlation inputs have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(RabiError::UndefinedCorrelation(
            "need at least two samples".into(),
        ));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx <= 0.0 || vy <= 0.0 {
        return Err(RabiError::UndefinedCorrelation(
            "an input is constant, so ranks carry no information".into(),
        ));
    }
    Ok(cov / (vx * vy).sqrt())
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).expect("non-NaN inputs"));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Uniform square grid of coefficient pairs over `[−bound, bound]²`.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientGrid {
    pub points_per_axis: usize,
    pub bound: f64,
}

impl Default for CoefficientGrid {
    fn default() -> Self {
        CoefficientGrid {
            points_per_axis: 15,
            bound: 5.0,
        }
    }
}

impl CoefficientGrid {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_axis < 2 {
            return Err(RabiError::Config(
                "coefficient grid needs at least 2 points per axis".into(),
            ));
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(RabiError::Config(format!(
                "coefficient grid bound must be positive and finite, got {}",
                self.bound
            )));
        }
        Ok(())
    }

    pub fn axis(&self) -> Vec<f64> {
        linspace(-self.bound, self.bound, self.points_per_axis)
    }

    /// All grid pairs except the exact origin, where every protocol
    /// degenerates to free evolution (outer loop over `α_c`).
    pub fn samples_excluding_origin(&self) -> Vec<(f64, f64)> {
        let axis = self.axis();
        let mut out = Vec::with_capacity(axis.len() * axis.len());
        for &ac in &axis {
            for &aa in &axis {
                if ac == 0.0 && aa == 0.0 {
                    continue;
                }
                out.push((ac, aa));
            }
        }
        out
    }
}

/// The four metrics in their fixed reporting order.
pub fn metric_suite() -> [(&'static str, MetricSpec); 4] {
    [
        ("action_full_trace", MetricSpec::full_trace()),
        ("action_coherent", MetricSpec::coherent()),
        ("action_variance", MetricSpec::variance()),
        ("action_filtered", MetricSpec::filtered(1e-3)),
    ]
}

/// One coefficient pair scored by dynamics and by each accumulated action.
#[derive(Debug, Clone, Copy)]
pub struct CorrelationSample {
    pub alpha_c: f64,
    pub alpha_a: f64,
    pub fidelity: f64,
    /// Accumulated actions in [`metric_suite`] order.
    pub actions: [f64; 4],
}

/// Result of [`correlation_study`].
#[derive(Debug, Clone)]
pub struct CorrelationStudy {
    pub samples: Vec<CorrelationSample>,
    /// Spearman correlation of fidelity against each accumulated action, in
    /// [`metric_suite`] order. Good metrics anticorrelate with infidelity,
    /// so these are negative.
    pub spearman: [f64; 4],
}

/// Score every grid pair (origin excluded) by end-of-ramp fidelity and by
/// the four ramp-integrated actions, then rank-correlate. Fidelities use a
/// fixed-step integration: rank positions converge long before the absolute
/// values do.
pub fn correlation_study(
    params: &ModelParams,
    grid: &CoefficientGrid,
    action_nodes: usize,
    evolve_steps: usize,
) -> Result<CorrelationStudy> {
    grid.validate()?;
    if action_nodes < 11 {
        return Err(RabiError::Config(format!(
            "accumulated action needs at least 11 quadrature nodes, got {action_nodes}"
        )));
    }
    let suite = metric_suite();
    // Quadratic capture per (metric, λ-node): everything per-sample is O(1).
    let lams = linspace(0.0, 1.0, action_nodes);
    let mut quads: Vec<[QuadForm; 4]> = Vec::with_capacity(lams.len());
    for &lam in &lams {
        let q = [
            QuadForm::build(&suite[0].1, params, lam)?,
            QuadForm::build(&suite[1].1, params, lam)?,
            QuadForm::build(&suite[2].1, params, lam)?,
            QuadForm::build(&suite[3].1, params, lam)?,
        ];
        quads.push(q);
    }
    let opts = EvolveOptions {
        steps: evolve_steps,
        converge: false,
        ..Default::default()
    };
    let pairs = grid.samples_excluding_origin();
    let samples: Vec<CorrelationSample> = pairs
        .par_iter()
        .map(|&(ac, aa)| -> Result<CorrelationSample> {
            let coeffs = AgpCoefficients::constant(ac, aa);
            let fid = protocol_fidelity(params, Some(&coeffs), &opts)?.fidelity;
            let mut actions = [0.0f64; 4];
            for (m, action) in actions.iter_mut().enumerate() {
                let values: Vec<f64> = quads.iter().map(|q| q[m].value(ac, aa)).collect();
                *action = trapezoid(&lams, &values);
            }
            Ok(CorrelationSample {
                alpha_c: ac,
                alpha_a: aa,
                fidelity: fid,
                actions,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fids: Vec<f64> = samples.iter().map(|s| s.fidelity).collect();
    let mut rs = [0.0f64; 4];
    for (m, r) in rs.iter_mut().enumerate() {
        let acts: Vec<f64> = samples.iter().map(|s| s.actions[m]).collect();
        *r = spearman(&acts, &fids)?;
    }
    Ok(CorrelationStudy {
        samples,
        spearman: rs,
    })
}

/// One grid point of a metric landscape with central-difference gradients
/// (absent on the grid boundary).
#[derive(Debug, Clone, Copy)]
pub struct LandscapePoint {
    pub alpha_c: f64,
    pub alpha_a: f64,
    pub value: f64,
    pub grad_c: Option<f64>,
    pub grad_a: Option<f64>,
}

/// Metric values over the coefficient grid at one ramp value, with interior
/// central-difference gradients (exact for these quadratic surfaces).
pub fn landscape(
    spec: &MetricSpec,
    params: &ModelParams,
    lam: f64,
    grid: &CoefficientGrid,
) -> Result<Vec<LandscapePoint>> {
    grid.validate()?;
    let axis = grid.axis();
    let n = axis.len();
    let quad = QuadForm::build(spec, params, lam)?;
    let mut values = vec![0.0f64; n * n];
    for (i, &ac) in axis.iter().enumerate() {
        for (j, &aa) in axis.iter().enumerate() {
            values[i * n + j] = quad.value(ac, aa);
        }
    }
    let h = axis[1] - axis[0];
    let mut out = Vec::with_capacity(n * n);
    for (i, &ac) in axis.iter().enumerate() {
        for (j, &aa) in axis.iter().enumerate() {
            let grad_c = (i > 0 && i + 1 < n)
                .then(|| (values[(i + 1) * n + j] - values[(i - 1) * n + j]) / (2.0 * h));
            let grad_a = (j > 0 && j + 1 < n)
                .then(|| (values[i * n + j + 1] - values[i * n + j - 1]) / (2.0 * h));
            out.push(LandscapePoint {
                alpha_c: ac,
                alpha_a: aa,
                value: values[i * n + j],
                grad_c,
                grad_a,
            });
        }
    }
    Ok(out)
}

/// Coupling-regime label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeLabel {
    /// Rotating-wave (excitation-conserving) physics still describes the
    /// low-energy spectrum.
    Strong,
    /// Counter-rotating terms reshape the low-lying eigenstates.
    Ultrastrong,
    /// The ground state itself is macroscopically photon-displaced.
    DeepStrong,
}

impl RegimeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeLabel::Strong => "SC",
            RegimeLabel::Ultrastrong => "USC",
            RegimeLabel::DeepStrong => "DSC",
        }
    }
}

/// Classification of one `(Γ, η)` point with its diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct RegimeReport {
    pub label: RegimeLabel,
    /// Perturbative crossover scale `√Γ / 2`.
    pub eta_c: f64,
    /// Product of squared overlaps of the four lowest excitation-conserving
    /// eigenstates with the four lowest full-model eigenstates.
    pub fidelity_product: f64,
    /// Photon number of the full-model ground state.
    pub n_expect: f64,
    /// Which eigenstate comparison the thresholds refer to.
    pub eigenstate_set: &'static str,
}

const REGIME_OVERLAP_THRESHOLD: f64 = 0.9;
const REGIME_PHOTON_THRESHOLD: f64 = 1.0;

/// Classify the coupling regime at `λ = 1`: deep strong when the ground
/// state holds at least one photon; otherwise ultrastrong when the product
/// of the four lowest squared eigenstate overlaps between the
/// excitation-conserving and full models drops to 0.9 or below; otherwise
/// strong. A ground-state-only overlap misses the onset (excited pairs
/// decohere first), hence the four-state product.
pub fn regime_classify(gamma: f64, eta: f64, cutoff: Option<usize>) -> Result<RegimeReport> {
    let params = ModelParams::new(gamma, eta, 1.0, cutoff)?;
    let h_full = rabi_hamiltonian(&params, 1.0)?;
    let h_jc = jc_hamiltonian(&params)?;
    let (_, vec_full) = crate::linalg::eigh(h_full.entries());
    let (_, vec_jc) = crate::linalg::eigh(h_jc.entries());
    let mut product = 1.0f64;
    for k in 0..4 {
        let overlap = vec_jc.column(k).dotc(&vec_full.column(k)).norm_sqr();
        product *= overlap;
    }
    let nhat = crate::hilbert::embed(&qubit_identity(), &number_operator(params.space))?;
    let g = vec_full.column(0).into_owned();
    let n_expect = {
        let w = nhat.entries() * &g;
        g.dotc(&w).re
    };
    let label = if n_expect >= REGIME_PHOTON_THRESHOLD {
        RegimeLabel::DeepStrong
    } else if product <= REGIME_OVERLAP_THRESHOLD {
        RegimeLabel::Ultrastrong
    } else {
        RegimeLabel::Strong
    };
    Ok(RegimeReport {
        label,
        eta_c: gamma.sqrt() / 2.0,
        fidelity_product: product,
        n_expect,
        eigenstate_set: "lowest_four_product",
    })
}

/// A protocol to score in a sweep.
#[derive(Debug, Clone)]
pub enum ProtocolSpec {
    /// Bare ramp, no correction.
    Free,
    /// Correction from per-slice minimization of one metric.
    Metric(MetricSpec),
    /// Closed-form locked-coefficient trajectory.
    Dispersive,
    /// Constant pair from direct fidelity maximization.
    Optimized,
}

impl ProtocolSpec {
    /// Name used in output rows.
    pub fn output_name(&self) -> &'static str {
        match self {
            ProtocolSpec::Free => "free",
            ProtocolSpec::Metric(spec) => match spec.kind {
                MetricKind::FullTrace => "cd_full_trace",
                MetricKind::CoherentWeighted => "cd_coherent",
                MetricKind::SuperradiantVariance => "cd_variance",
                MetricKind::FilteredTrace => "cd_filtered",
            },
            ProtocolSpec::Dispersive => "cd_dispersive",
            ProtocolSpec::Optimized => "cd_optimized",
        }
    }
}

/// One `(Γ, η)` point of a sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepCell {
    pub gamma: f64,
    pub eta: f64,
}

/// Shared knobs for [`sweep`].
#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub tau: f64,
    /// `None` = per-cell automatic cutoff.
    pub cutoff: Option<usize>,
    /// Slices for metric/dispersive coefficient trajectories.
    pub slices: usize,
    pub optimizer: OptimizerConfig,
    pub evolve: EvolveOptions,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            tau: 1.0,
            cutoff: None,
            slices: 101,
            optimizer: OptimizerConfig::default(),
            evolve: EvolveOptions::default(),
        }
    }
}

/// One output row: a protocol scored at a cell against one target
/// (`parity_sector` is `"-1"` for the reachable sector, `"any"` for the
/// global ground state).
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub gamma: f64,
    pub eta: f64,
    pub protocol: &'static str,
    pub fidelity: f64,
    pub infidelity: f64,
    /// Reported coefficient pair: the constant pair, or the trajectory pair
    /// at mid-protocol.
    pub alpha_c: f64,
    pub alpha_a: f64,
    pub parity_sector: &'static str,
    pub rel_norm_c: f64,
    pub rel_norm_a: f64,
}

/// A failed cell × protocol task with its underlying error.
#[derive(Debug)]
pub struct SweepFailure {
    /// Which task failed, e.g. `gamma_ratio=1 eta=2 protocol=cd_coherent`.
    pub label: String,
    pub error: RabiError,
}

impl std::fmt::Display for SweepFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.label, self.error)
    }
}

/// Sweep outcome: rows in deterministic (cell-major, protocol, sector)
/// order, plus one record per failed cell × protocol.
#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

fn run_cell(
    cell: SweepCell,
    protocol: &ProtocolSpec,
    settings: &SweepSettings,
) -> Result<Vec<SweepRow>> {
    let params = ModelParams::new(cell.gamma, cell.eta, settings.tau, settings.cutoff)?;
    let (pair, fid, fid_global) = match protocol {
        ProtocolSpec::Free => {
            let out = protocol_fidelity(&params, None, &settings.evolve)?;
            ((0.0, 0.0), out.fidelity, out.fidelity_global)
        }
        ProtocolSpec::Metric(spec) => {
            let (coeffs, _) =
                coefficient_trajectory(spec, &params, settings.slices, &settings.optimizer)?;
            let out = protocol_fidelity(&params, Some(&coeffs), &settings.evolve)?;
            (coeffs.eval(settings.tau / 2.0)?, out.fidelity, out.fidelity_global)
        }
        ProtocolSpec::Dispersive => {
            let coeffs = dispersive_trajectory(&params, settings.slices)?;
            let out = protocol_fidelity(&params, Some(&coeffs), &settings.evolve)?;
            (coeffs.eval(settings.tau / 2.0)?, out.fidelity, out.fidelity_global)
        }
        ProtocolSpec::Optimized => {
            let opt = optimize_fidelity(&params, &settings.optimizer)?;
            ((opt.alpha_c, opt.alpha_a), opt.fidelity, opt.fidelity_global)
        }
    };
    let norms = relative_norms(&params, pair.0, pair.1)?;
    let name = protocol.output_name();
    let row = |sector: &'static str, f: f64| SweepRow {
        gamma: cell.gamma,
        eta: cell.eta,
        protocol: name,
        fidelity: f,
        infidelity: 1.0 - f,
        alpha_c: pair.0,
        alpha_a: pair.1,
        parity_sector: sector,
        rel_norm_c: norms.cavity,
        rel_norm_a: norms.atomic,
    };
    Ok(vec![row("-1", fid), row("any", fid_global)])
}

/// Score every protocol at every cell. Individual failures are recorded and
/// the sweep continues; rows keep a deterministic order regardless of the
/// worker count.
pub fn sweep(
    cells: &[SweepCell],
    protocols: &[ProtocolSpec],
    settings: &SweepSettings,
) -> Result<SweepOutcome> {
    if cells.is_empty() || protocols.is_empty() {
        return Err(RabiError::Config(
            "sweep needs at least one cell and one protocol".into(),
        ));
    }
    if settings.slices < 2 {
        return Err(RabiError::Config(format!(
            "coefficient trajectories need at least 2 slices, got {}",
            settings.slices
        )));
    }
    let tasks: Vec<(SweepCell, &ProtocolSpec)> = cells
        .iter()
        .flat_map(|&c| protocols.iter().map(move |p| (c, p)))
        .collect();
    let results: Vec<Result<Vec<SweepRow>>> = tasks
        .par_iter()
        .map(|(cell, protocol)| run_cell(*cell, protocol, settings))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for ((cell, protocol), res) in tasks.iter().zip(results) {
        match res {
            Ok(mut r) => rows.append(&mut r),
            Err(e) => failures.push(SweepFailure {
                label: format!(
                    "gamma_ratio={} eta={} protocol={}",
                    cell.gamma,
                    cell.eta,
                    protocol.output_name()
                ),
                error: e,
            }),
        }
    }
    Ok(SweepOutcome { rows, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(gamma: f64, eta: f64, n: usize) -> ModelParams {
        ModelParams::new(gamma, eta, 1.0, Some(n)).unwrap()
    }

    #[test]
    fn rank_correlation_handles_monotone_reversed_and_tied_data() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let up = [10.0, 20.0, 30.0, 40.0];
        let down = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&x, &up).unwrap() - 1.0).abs() < 1e-14);
        assert!((spearman(&x, &down).unwrap() + 1.0).abs() < 1e-14);
        let tied = [1.0, 2.0, 2.0, 3.0];
        let r = spearman(&tied, &x).unwrap();
        assert!((r - 0.9486832980505138).abs() < 1e-12, "r = {r}");
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(RabiError::UndefinedCorrelation(_))
        ));
        assert!(spearman(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn coefficient_grid_excludes_only_the_origin() {
        let grid = CoefficientGrid::default();
        let samples = grid.samples_excluding_origin();
        assert_eq!(samples.len(), 224);
        assert!(samples.iter().all(|&(a, b)| a != 0.0 || b != 0.0));
        assert!(samples.iter().all(|&(a, b)| a.abs() <= 5.0 && b.abs() <= 5.0));
    }

    #[test]
    fn accumulated_action_converges_under_node_doubling() {
        let p = params(1.0, 0.25, 20);
        let spec = MetricSpec::coherent();
        let coarse = accumulated_action(&spec, &p, -0.5, -0.3, 101).unwrap();
        let fine = accumulated_action(&spec, &p, -0.5, -0.3, 201).unwrap();
        let rel = (coarse - fine).abs() / fine.abs().max(1e-300);
        // Trapezoid error on this surface is ~4e-6 at 101 nodes and shrinks
        // 4x per doubling.
        assert!(rel < 1e-5, "relative node-doubling change {rel}");
        assert!(accumulated_action(&spec, &p, 0.0, 0.0, 5).is_err());
    }

    #[test]
    fn action_integral_is_reparameterization_invariant() {
        // Integrating the same metric over t with weight dλ/dt must match
        // the λ integral.
        let p = params(1.0, 0.25, 16);
        let spec = MetricSpec::full_trace();
        let (ac, aa) = (-0.4, 0.2);
        let in_lambda = accumulated_action(&spec, &p, ac, aa, 201).unwrap();
        let schedule = p.schedule();
        let times = linspace(0.0, p.tau, 801);
        let mut vals = Vec::with_capacity(times.len());
        for &t in &times {
            let lam = schedule.lambda(t).unwrap();
            let ld = schedule.lambda_dot(t).unwrap();
            let s = QuadForm::build(&spec, &p, lam).unwrap().value(ac, aa);
            vals.push(s * ld);
        }
        let in_time = trapezoid(&times, &vals);
        let rel = (in_time - in_lambda).abs() / in_lambda.abs().max(1e-300);
        assert!(rel < 1e-4, "parameterizations disagree by {rel}");
    }

    #[test]
    fn landscape_gradients_match_the_quadratic_surface() {
        let p = params(1.0, 0.8, 16);
        let spec = MetricSpec::coherent();
        let grid = CoefficientGrid {
            points_per_axis: 9,
            bound: 2.0,
        };
        let pts = landscape(&spec, &p, 0.5, &grid).unwrap();
        let quad = QuadForm::build(&spec, &p, 0.5).unwrap();
        for pt in &pts {
            let on_c_boundary = pt.alpha_c.abs() >= grid.bound - 1e-12;
            let on_a_boundary = pt.alpha_a.abs() >= grid.bound - 1e-12;
            assert_eq!(pt.grad_c.is_none(), on_c_boundary);
            assert_eq!(pt.grad_a.is_none(), on_a_boundary);
            // Central differences are exact on a quadratic.
            if let Some(gc) = pt.grad_c {
                let exact = quad.lc + 2.0 * quad.qcc * pt.alpha_c + quad.qca * pt.alpha_a;
                assert!((gc - exact).abs() < 1e-6 * exact.abs().max(1.0));
            }
            if let Some(ga) = pt.grad_a {
                let exact = quad.la + 2.0 * quad.qaa * pt.alpha_a + quad.qca * pt.alpha_c;
                assert!((ga - exact).abs() < 1e-6 * exact.abs().max(1.0));
            }
        }
    }

    #[test]
    fn regime_labels_cross_at_the_known_couplings() {
        let sc = regime_classify(1.0, 0.2, None).unwrap();
        assert_eq!(sc.label, RegimeLabel::Strong);
        assert!((sc.eta_c - 0.5).abs() < 1e-15);
        assert!(sc.fidelity_product > 0.9);
        let usc = regime_classify(1.0, 0.3, None).unwrap();
        assert_eq!(usc.label, RegimeLabel::Ultrastrong);
        assert!(usc.fidelity_product <= 0.9);
        assert!(usc.n_expect < 1.0);
        let dsc = regime_classify(1.0, 1.2, None).unwrap();
        assert_eq!(dsc.label, RegimeLabel::DeepStrong);
        assert!(dsc.n_expect >= 1.0);
        assert_eq!(dsc.eigenstate_set, "lowest_four_product");
    }

    #[test]
    fn small_sweep_produces_ordered_rows_and_no_failures() {
        let cells = [SweepCell {
            gamma: 1.0,
            eta: 0.25,
        }];
        let protocols = [
            ProtocolSpec::Free,
            ProtocolSpec::Metric(MetricSpec::coherent()),
        ];
        let settings = SweepSettings {
            tau: 0.5,
            cutoff: Some(12),
            slices: 21,
            ..Default::default()
        };
        let out = sweep(&cells, &protocols, &settings).unwrap();
        assert!(out.failures.is_empty(), "failures: {:?}", out.failures);
        assert_eq!(out.rows.len(), 4);
        assert_eq!(out.rows[0].protocol, "free");
        assert_eq!(out.rows[0].parity_sector, "-1");
        assert_eq!(out.rows[1].parity_sector, "any");
        assert_eq!(out.rows[2].protocol, "cd_coherent");
        let f_free = out.rows[0].fidelity;
        let f_cd = out.rows[2].fidelity;
        assert!(f_cd >= f_free - 1e-9, "cd {f_cd} vs free {f_free}");
        assert!((out.rows[2].infidelity - (1.0 - f_cd)).abs() < 1e-15);
        assert!(out.rows[2].rel_norm_c > 0.0);
    }

    #[test]
    fn sweep_records_failures_without_aborting() {
        let cells = [
            SweepCell {
                gamma: 1.0,
                eta: 2.0,
            },
            SweepCell {
                gamma: 1.0,
                eta: 0.2,
            },
        ];
        // Cutoff 2 cannot hold the η = 2 reference displacement, so that
        // cell fails while the other succeeds.
        let settings = SweepSettings {
            tau: 0.5,
            cutoff: Some(2),
            slices: 11,
            ..Default::default()
        };
        let protocols = [ProtocolSpec::Metric(MetricSpec::coherent())];
        let out = sweep(&cells, &protocols, &settings).unwrap();
        assert_eq!(out.failures.len(), 1, "failures: {:?}", out.failures);
        assert!(out.failures[0].label.contains("eta=2"));
        assert!(matches!(
            out.failures[0].error,
            RabiError::CutoffTooSmall { .. }
        ));
        assert_eq!(out.rows.len(), 2);
    }
}
