//! Weighted action metrics that score a gauge-potential ansatz.
//!
//! Every metric measures the residual operator `G = ∂H − i[H, A]` built by
//! [`crate::agp::g_operator`], but with different weights:
//!
//! * **full trace** — `Tr[G†G]`, the flat Hilbert-space average; dominated by
//!   the largest Fock states and cutoff-divergent;
//! * **coherent weighted** — `Tr[ρ G†G]` with `ρ = ½·I₂ ⊗ ρ_mix(α)` and
//!   `ρ_mix` an even mixture of `±α` displaced (optionally thermal) states;
//! * **superradiant variance** — `⟨G²⟩ − ⟨G⟩²` in the even cat state
//!   `(|↑, α⟩ + |↓, −α⟩)/√2`;
//! * **filtered trace** — the flat trace restricted to the field-level matrix
//!   entries where `ρ_mix` has support above a threshold.
//!
//! The reference displacement is tied to the ramp, `α = λη`, so each metric
//! concentrates weight on the physically visited corner of Hilbert space.
//! In the coefficients `(α_c, α_a)` every metric is an exact quadratic;
//! [`QuadForm`] captures it once per `(metric, λ)` so optimizers and scans
//! can evaluate it in O(1).

use crate::agp::{agp_basis, g_operator};
use crate::error::{RabiError, Result};
use crate::hilbert::{
    check_displacement, coherent_state, displacement, minus_x, plus_x, qubit_identity, FockSpace,
    OperatorMatrix, StateVector,
};
use crate::linalg::{commutator, cr, eigh, frob_re, kron, trace, CMat, CVec, IM};
use crate::model::{rabi_hamiltonian, rabi_hamiltonian_ramp_derivative, ModelParams};

/// Default support threshold for the filtered trace.
pub const DEFAULT_FILTER_THRESHOLD: f64 = 1e-3;

/// Which weighting a metric applies to the residual operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    FullTrace,
    CoherentWeighted,
    SuperradiantVariance,
    FilteredTrace,
}

/// A metric kind plus its tunable knobs.
#[derive(Debug, Clone, Copy)]
pub struct MetricSpec {
    pub kind: MetricKind,
    /// Entry-magnitude threshold for [`MetricKind::FilteredTrace`].
    pub filter_threshold: f64,
    /// Inverse temperature of the displaced reference mixture;
    /// `f64::INFINITY` (the default) means pure displaced vacuum.
    pub beta_inverse_temperature: f64,
    /// Filter on the raw real part of the entries instead of the magnitude.
    pub raw_entry_filter: bool,
    /// Build the variance reference from `|±x⟩` qubit states instead of
    /// `|↑⟩,|↓⟩`.
    pub x_basis_superradiant: bool,
}

impl MetricSpec {
    pub fn full_trace() -> Self {
        Self::with_kind(MetricKind::FullTrace)
    }
    pub fn coherent() -> Self {
        Self::with_kind(MetricKind::CoherentWeighted)
    }
    pub fn variance() -> Self {
        Self::with_kind(MetricKind::SuperradiantVariance)
    }
    pub fn filtered(threshold: f64) -> Self {
        let mut s = Self::with_kind(MetricKind::FilteredTrace);
        s.filter_threshold = threshold;
        s
    }

    fn with_kind(kind: MetricKind) -> Self {
        MetricSpec {
            kind,
            filter_threshold: DEFAULT_FILTER_THRESHOLD,
            beta_inverse_temperature: f64::INFINITY,
            raw_entry_filter: false,
            x_basis_superradiant: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == MetricKind::FilteredTrace
            && !(self.filter_threshold.is_finite() && self.filter_threshold >= 0.0)
        {
            return Err(RabiError::Config(format!(
                "filter threshold must be finite and >= 0, got {}",
                self.filter_threshold
            )));
        }
        let beta = self.beta_inverse_temperature;
        if !(beta > 0.0) {
            return Err(RabiError::Config(format!(
                "inverse temperature must be positive (or infinite for a pure reference), got {beta}"
            )));
        }
        Ok(())
    }
}

impl Default for MetricSpec {
    fn default() -> Self {
        Self::coherent()
    }
}

/// Thermal oscillator density with level populations `∝ exp(−β·m)`;
/// `β = ∞` gives the vacuum projector.
fn thermal_density(beta: f64, space: FockSpace) -> Result<CMat> {
    if !(beta > 0.0) {
        return Err(RabiError::Domain(format!(
            "inverse temperature must be positive, got {beta}"
        )));
    }
    let dim = space.field_dim();
    let mut rho = CMat::zeros(dim, dim);
    if beta.is_infinite() {
        rho[(0, 0)] = cr(1.0);
        return Ok(rho);
    }
    let weights: Vec<f64> = (0..dim).map(|m| (-beta * m as f64).exp()).collect();
    let z: f64 = weights.iter().sum();
    for (m, w) in weights.iter().enumerate() {
        rho[(m, m)] = cr(w / z);
    }
    Ok(rho)
}

/// Field-level displaced (optionally thermal) density `D(α) ρ_th D(α)†`.
pub fn displaced_thermal_density(alpha: f64, beta: f64, space: FockSpace) -> Result<CMat> {
    check_displacement(alpha, space)?;
    let d = displacement(alpha, space)?;
    let rho = thermal_density(beta, space)?;
    Ok(d.entries() * rho * d.entries().adjoint())
}

/// Field-level even mixture `ρ_mix(α) = (ρ(α) + ρ(−α))/2`.
fn mixed_displaced_density(alpha: f64, beta: f64, space: FockSpace) -> Result<CMat> {
    let plus = displaced_thermal_density(alpha, beta, space)?;
    let minus = displaced_thermal_density(-alpha, beta, space)?;
    Ok((plus + minus) * cr(0.5))
}

/// Composite reference weight `½·I₂ ⊗ ρ_mix(α)` for the coherent-weighted
/// trace: Hermitian, positive semidefinite, unit trace.
pub fn coherent_reference(alpha: f64, beta: f64, space: FockSpace) -> Result<OperatorMatrix> {
    let mix = mixed_displaced_density(alpha, beta, space)?;
    let w = kron(&(qubit_identity() * cr(0.5)), &mix);
    OperatorMatrix::hermitian_checked(w)
}

/// Entangled qubit–field cat state `(|↑, α⟩ + |↓, −α⟩)/√2`
/// (or the `|±x⟩` variant when `x_basis` is set).
pub fn superradiant_state(alpha: f64, space: FockSpace, x_basis: bool) -> Result<StateVector> {
    let ket_plus = coherent_state(alpha, space)?;
    let ket_minus = coherent_state(-alpha, space)?;
    let (q_up, q_down) = if x_basis {
        (plus_x(), minus_x())
    } else {
        (crate::hilbert::spin_up(), crate::hilbert::spin_down())
    };
    let up = kron_vec(&q_up, ket_plus.amplitudes());
    let down = kron_vec(&q_down, ket_minus.amplitudes());
    let psi = (up + down) * cr(1.0 / 2.0f64.sqrt());
    StateVector::from_unnormalized(psi)
}

fn kron_vec(q: &CVec, f: &CVec) -> CVec {
    let mut out = CVec::zeros(q.len() * f.len());
    for (i, qi) in q.iter().enumerate() {
        for (m, fm) in f.iter().enumerate() {
            out[i * f.len() + m] = qi * fm;
        }
    }
    out
}

/// Support mask of the filtered trace: field-level 0/1 matrix marking the
/// entries of `ρ_mix(α)` that pass the threshold, plus the count.
#[derive(Debug, Clone)]
pub struct FilteredWeight {
    /// Field-level 0/1 mask, `field_dim × field_dim`.
    pub mask: CMat,
    /// Number of passing entries; the filtered weight is `mask / count`.
    pub count: usize,
}

/// Build the filtered-trace support at displacement `alpha`. Entries pass
/// when `|ρ_mix entry| > threshold` (strict), or `Re(entry) > threshold`
/// in raw-entry mode. An empty support is an error that reports the largest
/// entry so callers can pick a feasible threshold.
pub fn filtered_reference(
    alpha: f64,
    beta: f64,
    threshold: f64,
    raw_entry: bool,
    space: FockSpace,
) -> Result<FilteredWeight> {
    let mix = mixed_displaced_density(alpha, beta, space)?;
    let dim = space.field_dim();
    let mut mask = CMat::zeros(dim, dim);
    let mut count = 0usize;
    let mut max_entry = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let z = mix[(i, j)];
            let measure = if raw_entry { z.re } else { z.norm() };
            max_entry = max_entry.max(measure);
            if measure > threshold {
                mask[(i, j)] = cr(1.0);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(RabiError::EmptyFilterSupport {
            threshold,
            max_entry,
        });
    }
    Ok(FilteredWeight { mask, count })
}

/// Flat action `Tr[G†G]`.
pub fn action_trace(g: &OperatorMatrix) -> f64 {
    frob_re(g.entries(), g.entries())
}

/// Weighted action `Tr[W G†G]` for a validated density-like weight:
/// Hermitian, positive semidefinite, unit trace.
pub fn action_weighted(g: &OperatorMatrix, weight: &OperatorMatrix) -> Result<f64> {
    if weight.dim() != g.dim() {
        return Err(RabiError::DimensionMismatch(format!(
            "weight dim {} vs operator dim {}",
            weight.dim(),
            g.dim()
        )));
    }
    if weight.hermiticity_defect() > 1e-10 {
        return Err(RabiError::Domain(
            "weight must be Hermitian to define a real action".into(),
        ));
    }
    let tr = trace(weight.entries()).re;
    if (tr - 1.0).abs() > 1e-8 {
        return Err(RabiError::Domain(format!(
            "weight must have unit trace, got {tr}"
        )));
    }
    let (evals, _) = eigh(weight.entries());
    if evals.iter().any(|&e| e < -1e-10) {
        return Err(RabiError::Domain(
            "weight must be positive semidefinite".into(),
        ));
    }
    Ok(weighted_trace_unchecked(weight.entries(), g.entries()))
}

/// `Re Tr[W G†G]` without density validation — used for the filtered mask,
/// which is intentionally not a density matrix.
fn weighted_trace_unchecked(weight: &CMat, g: &CMat) -> f64 {
    let gg = g.adjoint() * g;
    frob_re(weight, &gg)
}

/// Variance action `⟨ψ|G²|ψ⟩ − ⟨ψ|G|ψ⟩²` for Hermitian `G`.
pub fn action_variance(g: &OperatorMatrix, psi: &StateVector) -> Result<f64> {
    if g.dim() != psi.dim() {
        return Err(RabiError::DimensionMismatch(format!(
            "operator dim {} vs state dim {}",
            g.dim(),
            psi.dim()
        )));
    }
    let v = g.entries() * psi.amplitudes();
    let mean = psi.amplitudes().dotc(&v).re;
    Ok(v.dotc(&v).re - mean * mean)
}

/// The residual `G(α_c, α_a)` split into its affine parts:
/// `G = G₀ + α_c·K_c + α_a·K_a` with `G₀ = ∂H`, `K_c = −i[H, A_c]`,
/// `K_a = −i[H, A_a]`.
pub(crate) struct ResidualParts {
    pub g0: CMat,
    pub kc: CMat,
    pub ka: CMat,
}

pub(crate) fn residual_parts(params: &ModelParams, lam: f64) -> Result<ResidualParts> {
    let h = rabi_hamiltonian(params, lam)?;
    let dh = rabi_hamiltonian_ramp_derivative(params)?;
    let basis = agp_basis(params)?;
    let kc = commutator(h.entries(), basis.a_c.entries()) * (-IM);
    let ka = commutator(h.entries(), basis.a_a.entries()) * (-IM);
    Ok(ResidualParts {
        g0: dh.into_entries(),
        kc,
        ka,
    })
}

/// Exact quadratic form of a metric in the coefficients:
/// `value(α_c, α_a) = c0 + lc·α_c + la·α_a + qcc·α_c² + qca·α_c·α_a + qaa·α_a²`.
///
/// Built once per `(metric, λ)`, it reproduces the direct matrix evaluation
/// to rounding and makes coefficient scans O(1) per point.
#[derive(Debug, Clone, Copy)]
pub struct QuadForm {
    pub c0: f64,
    pub lc: f64,
    pub la: f64,
    pub qcc: f64,
    pub qca: f64,
    pub qaa: f64,
}

/// Outcome of the closed-form quadratic minimization.
#[derive(Debug, Clone, Copy)]
pub struct QuadMinimum {
    pub alpha_c: f64,
    pub alpha_a: f64,
    pub value: f64,
    /// Set when the Hessian was singular and the minimum-norm stationary
    /// point was returned (a whole line of minimizers exists).
    pub degenerate: bool,
}

impl QuadForm {
    /// Capture the metric as a quadratic in the coefficients at ramp value
    /// `lam`, with the reference displacement `α = λη`.
    pub fn build(spec: &MetricSpec, params: &ModelParams, lam: f64) -> Result<QuadForm> {
        spec.validate()?;
        if !(0.0..=1.0).contains(&lam) {
            return Err(RabiError::Domain(format!(
                "ramp value must lie in [0, 1], got {lam}"
            )));
        }
        let parts = residual_parts(params, lam)?;
        let alpha_ref = lam * params.eta;
        let space = params.space;
        match spec.kind {
            MetricKind::FullTrace => Ok(Self::from_weighted(&parts, None)),
            MetricKind::CoherentWeighted => {
                let w = coherent_reference(alpha_ref, spec.beta_inverse_temperature, space)?;
                Ok(Self::from_weighted(&parts, Some(w.entries())))
            }
            MetricKind::FilteredTrace => {
                let fw = filtered_reference(
                    alpha_ref,
                    spec.beta_inverse_temperature,
                    spec.filter_threshold,
                    spec.raw_entry_filter,
                    space,
                )?;
                let w = kron(&(qubit_identity() * cr(0.5)), &(fw.mask * cr(1.0 / fw.count as f64)));
                Ok(Self::from_weighted(&parts, Some(&w)))
            }
            MetricKind::SuperradiantVariance => {
                let psi = superradiant_state(alpha_ref, space, spec.x_basis_superradiant)?;
                Ok(Self::from_variance(&parts, &psi))
            }
        }
    }

    fn from_weighted(parts: &ResidualParts, weight: Option<&CMat>) -> QuadForm {
        // ip(X, Y) = Re Tr[W X† Y] = Re Tr[X† (Y W)] — with W = I it is the
        // Frobenius inner product.
        let (g0w, kcw, kaw);
        let (yg0, ykc, yka): (&CMat, &CMat, &CMat) = match weight {
            Some(w) => {
                g0w = &parts.g0 * w;
                kcw = &parts.kc * w;
                kaw = &parts.ka * w;
                (&g0w, &kcw, &kaw)
            }
            None => (&parts.g0, &parts.kc, &parts.ka),
        };
        QuadForm {
            c0: frob_re(&parts.g0, yg0),
            lc: 2.0 * frob_re(&parts.g0, ykc),
            la: 2.0 * frob_re(&parts.g0, yka),
            qcc: frob_re(&parts.kc, ykc),
            qca: 2.0 * frob_re(&parts.kc, yka),
            qaa: frob_re(&parts.ka, yka),
        }
    }

    fn from_variance(parts: &ResidualParts, psi: &StateVector) -> QuadForm {
        let amps = psi.amplitudes();
        let v0 = &parts.g0 * amps;
        let vc = &parts.kc * amps;
        let va = &parts.ka * amps;
        let m0 = amps.dotc(&v0).re;
        let mc = amps.dotc(&vc).re;
        let ma = amps.dotc(&va).re;
        let q = |x: &CVec, y: &CVec, mx: f64, my: f64| x.dotc(y).re - mx * my;
        QuadForm {
            c0: q(&v0, &v0, m0, m0),
            lc: 2.0 * q(&v0, &vc, m0, mc),
            la: 2.0 * q(&v0, &va, m0, ma),
            qcc: q(&vc, &vc, mc, mc),
            qca: 2.0 * q(&vc, &va, mc, ma),
            qaa: q(&va, &va, ma, ma),
        }
    }

    /// Metric value at a coefficient pair.
    pub fn value(&self, alpha_c: f64, alpha_a: f64) -> f64 {
        self.c0
            + self.lc * alpha_c
            + self.la * alpha_a
            + self.qcc * alpha_c * alpha_c
            + self.qca * alpha_c * alpha_a
            + self.qaa * alpha_a * alpha_a
    }

    /// Closed-form stationary minimizer. For a singular positive-semidefinite
    /// Hessian the minimum-norm point on the minimizing line is returned and
    /// `degenerate` is set; a Hessian with a significantly negative direction
    /// is rejected (grid optimizers handle those shapes instead).
    pub fn minimize(&self) -> Result<QuadMinimum> {
        let h11 = 2.0 * self.qcc;
        let h12 = self.qca;
        let h22 = 2.0 * self.qaa;
        // Symmetric 2x2 eigendecomposition.
        let tr = h11 + h22;
        let det = h11 * h22 - h12 * h12;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let mu1 = tr / 2.0 - disc;
        let mu2 = tr / 2.0 + disc;
        let scale = h11.abs().max(h12.abs()).max(h22.abs()).max(1e-300);
        if mu1 < -1e-9 * scale {
            return Err(RabiError::Domain(
                "quadratic form is not convex; use a grid-based minimizer".into(),
            ));
        }
        let b = [self.lc, self.la];
        // Eigenvector for mu: (h12, mu - h11) or (mu - h22, h12).
        let vec_for = |mu: f64| -> [f64; 2] {
            let c1 = [h12, mu - h11];
            let c2 = [mu - h22, h12];
            let n1 = (c1[0] * c1[0] + c1[1] * c1[1]).sqrt();
            let n2 = (c2[0] * c2[0] + c2[1] * c2[1]).sqrt();
            let (v, n) = if n1 >= n2 { (c1, n1) } else { (c2, n2) };
            if n < 1e-300 {
                [1.0, 0.0]
            } else {
                [v[0] / n, v[1] / n]
            }
        };
        let mut v1 = vec_for(mu1);
        let v2 = vec_for(mu2);
        let mut degenerate = false;
        // Orthogonalize in the near-isotropic case.
        if (mu2 - mu1).abs() <= 1e-12 * scale {
            v1 = [-v2[1], v2[0]];
        }
        let mut x = [0.0f64; 2];
        for (mu, v) in [(mu1, v1), (mu2, v2)] {
            let proj = v[0] * b[0] + v[1] * b[1];
            if mu.abs() <= 1e-9 * scale {
                degenerate = true;
                // Min-norm: drop the null direction; an out-of-range linear
                // component would make the metric unbounded below, which a
                // positive-semidefinite weight cannot produce.
                continue;
            }
            x[0] -= proj / mu * v[0];
            x[1] -= proj / mu * v[1];
        }
        Ok(QuadMinimum {
            alpha_c: x[0],
            alpha_a: x[1],
            value: self.value(x[0], x[1]),
            degenerate,
        })
    }
}

/// Evaluate a metric directly from the residual matrix at a coefficient pair.
/// [`QuadForm::build`] + [`QuadForm::value`] gives the same number; this path
/// exists as the semantic definition and for spot checks.
pub fn evaluate_metric(
    spec: &MetricSpec,
    params: &ModelParams,
    lam: f64,
    alpha_c: f64,
    alpha_a: f64,
) -> Result<f64> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&lam) {
        return Err(RabiError::Domain(format!(
            "ramp value must lie in [0, 1], got {lam}"
        )));
    }
    let h = rabi_hamiltonian(params, lam)?;
    let dh = rabi_hamiltonian_ramp_derivative(params)?;
    let basis = agp_basis(params)?;
    let a = OperatorMatrix::general(
        basis.a_c.entries() * cr(alpha_c) + basis.a_a.entries() * cr(alpha_a),
    );
    let g = g_operator(&h, &dh, &a)?;
    let alpha_ref = lam * params.eta;
    let space = params.space;
    match spec.kind {
        MetricKind::FullTrace => Ok(action_trace(&g)),
        MetricKind::CoherentWeighted => {
            let w = coherent_reference(alpha_ref, spec.beta_inverse_temperature, space)?;
            action_weighted(&g, &w)
        }
        MetricKind::FilteredTrace => {
            let fw = filtered_reference(
                alpha_ref,
                spec.beta_inverse_temperature,
                spec.filter_threshold,
                spec.raw_entry_filter,
                space,
            )?;
            let w = kron(
                &(qubit_identity() * cr(0.5)),
                &(fw.mask * cr(1.0 / fw.count as f64)),
            );
            Ok(weighted_trace_unchecked(&w, g.entries()))
        }
        MetricKind::SuperradiantVariance => {
            let psi = superradiant_state(alpha_ref, space, spec.x_basis_superradiant)?;
            action_variance(&g, &psi)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agp::locked_trace_action_truncated;
    use crate::hilbert::{embed, field_identity, number_operator};

    fn params(gamma: f64, eta: f64, n: usize) -> ModelParams {
        ModelParams::new(gamma, eta, 1.0, Some(n)).unwrap()
    }

    #[test]
    fn coherent_weight_is_a_density() {
        let p = params(1.0, 0.5, 12);
        let w = coherent_reference(0.5, f64::INFINITY, p.space).unwrap();
        assert!(w.hermiticity_defect() < 1e-12);
        assert!((trace(w.entries()).re - 1.0).abs() < 1e-12);
        let (evals, _) = eigh(w.entries());
        assert!(evals.iter().all(|&e| e > -1e-12));
    }

    #[test]
    fn cold_thermal_reference_approaches_pure_displacement() {
        let sp = FockSpace::new(12).unwrap();
        let cold = displaced_thermal_density(0.8, 60.0, sp).unwrap();
        let pure = displaced_thermal_density(0.8, f64::INFINITY, sp).unwrap();
        let diff = (&cold - &pure).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
        assert!(displaced_thermal_density(0.8, -1.0, sp).is_err());
    }

    #[test]
    fn cat_state_is_normalized_with_balanced_qubit() {
        let sp = FockSpace::new(20).unwrap();
        let psi = superradiant_state(1.0, sp, false).unwrap();
        let norm: f64 = psi.amplitudes().dotc(psi.amplitudes()).re;
        assert!((norm - 1.0).abs() < 1e-12);
        let sz = embed(&crate::hilbert::pauli_z(), &field_identity(sp)).unwrap();
        assert!(psi.expectation(sz.entries()).abs() < 1e-12);
        let nhat = embed(&qubit_identity(), &number_operator(sp)).unwrap();
        assert!((psi.expectation(nhat.entries()) - 1.0).abs() < 1e-10);
        // x-basis variant stays normalized too.
        let psix = superradiant_state(1.0, sp, true).unwrap();
        let normx: f64 = psix.amplitudes().dotc(psix.amplitudes()).re;
        assert!((normx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn filter_support_examples() {
        let sp = FockSpace::new(20).unwrap();
        let fw = filtered_reference(0.0, f64::INFINITY, 0.5, false, sp).unwrap();
        assert_eq!(fw.count, 1);
        assert!((fw.mask[(0, 0)].re - 1.0).abs() < 1e-15);
        let fw2 = filtered_reference(1.0, f64::INFINITY, 0.01, false, sp).unwrap();
        assert_eq!(fw2.count, 19);
        match filtered_reference(0.5, f64::INFINITY, 10.0, false, sp) {
            Err(RabiError::EmptyFilterSupport {
                threshold,
                max_entry,
            }) => {
                assert!((threshold - 10.0).abs() < 1e-15);
                assert!(max_entry > 0.0 && max_entry <= 1.0);
            }
            other => panic!("expected empty-support error, got {other:?}"),
        }
    }

    #[test]
    fn filter_support_grows_as_threshold_drops() {
        let sp = FockSpace::new(20).unwrap();
        let counts: Vec<usize> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&g| filtered_reference(1.0, f64::INFINITY, g, false, sp).unwrap().count)
            .collect();
        assert!(counts[0] <= counts[1] && counts[1] <= counts[2]);
        assert!(counts[2] > counts[0]);
    }

    #[test]
    fn flat_action_of_bare_ramp_derivative_matches_trace_identity() {
        let p = params(1.0, 0.5, 8);
        let v = evaluate_metric(&MetricSpec::full_trace(), &p, 0.5, 0.0, 0.0).unwrap();
        let nf = 8.0;
        let expect = p.eta * p.eta * 2.0 * nf * (nf + 1.0);
        assert!((v - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn flat_action_at_locked_pair_matches_closed_form() {
        // Component pair (−x, −x) realizes the locked ansatz with commutator
        // coefficient x.
        let (gamma, eta, lam, n) = (1.0, 0.5, 0.5, 6usize);
        let p = params(gamma, eta, n);
        for &x in &[-0.5, -0.2, 0.3] {
            let v = evaluate_metric(&MetricSpec::full_trace(), &p, lam, -x, -x).unwrap();
            let closed = locked_trace_action_truncated(gamma, eta, lam, n as u64, x);
            assert!((v - closed).abs() < 1e-9 * closed.max(1.0), "{v} vs {closed}");
        }
    }

    #[test]
    fn quadratic_capture_reproduces_direct_evaluation() {
        let p = params(1.0, 0.8, 16);
        let lam = 0.5;
        let pairs = [(0.0, 0.0), (1.0, -0.5), (-2.0, 0.75), (0.3, 0.3)];
        for spec in [
            MetricSpec::full_trace(),
            MetricSpec::coherent(),
            MetricSpec::variance(),
            MetricSpec::filtered(1e-3),
        ] {
            let q = QuadForm::build(&spec, &p, lam).unwrap();
            for &(ac, aa) in &pairs {
                let direct = evaluate_metric(&spec, &p, lam, ac, aa).unwrap();
                let fast = q.value(ac, aa);
                let tol = 1e-9 * direct.abs().max(1.0);
                assert!(
                    (direct - fast).abs() < tol,
                    "{:?} at ({ac},{aa}): {direct} vs {fast}",
                    spec.kind
                );
            }
        }
    }

    #[test]
    fn weighted_action_rejects_malformed_weights() {
        let p = params(1.0, 0.5, 6);
        let parts = residual_parts(&p, 0.5).unwrap();
        let g = OperatorMatrix::general(parts.g0.clone());
        let dim = g.dim();
        // Non-unit trace.
        let w = OperatorMatrix::general(CMat::identity(dim, dim));
        assert!(action_weighted(&g, &w).is_err());
        // Unit trace but indefinite.
        let mut m = CMat::zeros(dim, dim);
        m[(0, 0)] = cr(2.0);
        m[(1, 1)] = cr(-1.0);
        assert!(action_weighted(&g, &OperatorMatrix::general(m)).is_err());
    }

    #[test]
    fn variance_action_is_nonnegative_and_matches_quadratic() {
        let p = params(1.0, 0.25, 30);
        let spec = MetricSpec::variance();
        for &lam in &[0.0, 0.3, 1.0] {
            let q = QuadForm::build(&spec, &p, lam).unwrap();
            for &(ac, aa) in &[(0.0, 0.0), (0.7, 0.1), (-1.0, 2.0)] {
                assert!(q.value(ac, aa) >= -1e-10);
            }
        }
    }

    #[test]
    fn coherent_metric_at_ramp_start_has_a_degenerate_minimizing_line() {
        // At λ = 0 the reference is the vacuum and the two basis components
        // act identically on it, so only α_c + α_a is determined.
        let p = params(1.0, 0.25, 30);
        let q = QuadForm::build(&MetricSpec::coherent(), &p, 0.0).unwrap();
        let m = q.minimize().unwrap();
        assert!(m.degenerate, "expected singular Hessian at ramp start");
        assert!((m.alpha_c + m.alpha_a - 0.5).abs() < 1e-9);
        assert!((m.value - 1.0 / 32.0).abs() < 1e-12);
        // Any point on the line α_c + α_a = 1/2 gives the same value.
        assert!((q.value(0.0, 0.5) - 1.0 / 32.0).abs() < 1e-12);
        assert!((q.value(0.5, 0.0) - 1.0 / 32.0).abs() < 1e-12);
    }

    #[test]
    fn full_trace_minimum_agrees_with_locked_line_search() {
        // The unlocked 2-coefficient minimum can only improve on the locked
        // ansatz, and for the flat metric both stay close.
        let (gamma, eta, lam, n) = (1.0, 0.5, 0.5, 10usize);
        let p = params(gamma, eta, n);
        let q = QuadForm::build(&MetricSpec::full_trace(), &p, lam).unwrap();
        let m = q.minimize().unwrap();
        let locked = crate::agp::minimize_locked_coefficient(gamma, eta, lam, n as u64, 5.0);
        assert!(m.value <= locked.value + 1e-9);
    }
}
