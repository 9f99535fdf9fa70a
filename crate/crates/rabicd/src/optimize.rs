//! Coefficient optimization: per-slice metric minimization, warm-started
//! trajectories over the ramp, and direct fidelity maximization.
//!
//! Metrics are exact quadratics in the coefficients, so a slice minimization
//! is a coarse grid scan (deterministic tie-breaking) followed by a
//! Nelder–Mead polish of the captured [`QuadForm`] — no matrix work inside
//! the simplex loop. Fidelity maximization uses the same machinery with the
//! full dynamics as objective.

use crate::agp::{agp_basis, AgpCoefficients};
use crate::dynamics::{protocol_fidelity, EvolveOptions};
use crate::error::{RabiError, Result};
use crate::hilbert::spectral_norm;
use crate::linalg::linspace;
use crate::metrics::{MetricSpec, QuadForm};
use crate::model::{rabi_hamiltonian, ModelParams};

/// Search-space and termination controls shared by all optimizers.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerConfig {
    /// Coarse-grid points per axis for metric minimization.
    pub coarse_points: usize,
    /// Coarse-grid points per axis for fidelity maximization (each
    /// evaluation integrates the dynamics, so this grid is smaller).
    pub fidelity_coarse_points: usize,
    /// Coefficients are searched in `[−box_bound, box_bound]²`.
    pub box_bound: f64,
    /// Nelder–Mead convergence tolerance on the value spread.
    pub simplex_tol: f64,
    /// Nelder–Mead iteration cap.
    pub max_iters: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            coarse_points: 21,
            fidelity_coarse_points: 7,
            box_bound: 5.0,
            simplex_tol: 1e-8,
            max_iters: 500,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if self.coarse_points < 2 || self.fidelity_coarse_points < 2 {
            return Err(RabiError::Config(
                "coarse grids need at least 2 points per axis".into(),
            ));
        }
        if !(self.box_bound > 0.0 && self.box_bound.is_finite()) {
            return Err(RabiError::Config(format!(
                "coefficient box bound must be positive and finite, got {}",
                self.box_bound
            )));
        }
        if !(self.simplex_tol > 0.0) || self.max_iters == 0 {
            return Err(RabiError::Config(
                "simplex tolerance must be positive and iteration cap nonzero".into(),
            ));
        }
        Ok(())
    }

    fn grid_spacing(&self, points: usize) -> f64 {
        2.0 * self.box_bound / (points - 1) as f64
    }
}

/// Minimum of one metric at one ramp value.
#[derive(Debug, Clone, Copy)]
pub struct SliceMinimum {
    pub alpha_c: f64,
    pub alpha_a: f64,
    pub value: f64,
}

/// Standard two-dimensional Nelder–Mead with reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2. Points outside the box score `+∞`, which
/// keeps the simplex inside without projection. Returns the best vertex,
/// its value, and the iterations used.
pub(crate) fn nelder_mead<F: Fn(f64, f64) -> f64>(
    f: F,
    start: (f64, f64),
    h: f64,
    bound: f64,
    tol: f64,
    max_iters: usize,
) -> ((f64, f64), f64, usize) {
    let boxed = |x: f64, y: f64| -> f64 {
        if x.abs() > bound || y.abs() > bound {
            f64::INFINITY
        } else {
            f(x, y)
        }
    };
    // Keep the initial simplex inside the box.
    let nudge = |v: f64, d: f64| if (v + d).abs() <= bound { v + d } else { v - d };
    let mut pts = [
        start,
        (nudge(start.0, h), start.1),
        (start.0, nudge(start.1, h)),
    ];
    let mut vals = [
        boxed(pts[0].0, pts[0].1),
        boxed(pts[1].0, pts[1].1),
        boxed(pts[2].0, pts[2].1),
    ];
    let mut iters = 0usize;
    while iters < max_iters {
        // Order best → worst.
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        let (b, m, w) = (order[0], order[1], order[2]);
        let spread = vals[w] - vals[b];
        let diam = {
            let d = |p: (f64, f64), q: (f64, f64)| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
            d(pts[b], pts[m]).max(d(pts[b], pts[w]))
        };
        if (spread.is_finite() && spread <= tol * (1.0 + vals[b].abs())) || diam <= 1e-12 {
            break;
        }
        iters += 1;
        let centroid = (
            (pts[b].0 + pts[m].0) / 2.0,
            (pts[b].1 + pts[m].1) / 2.0,
        );
        let dir = (centroid.0 - pts[w].0, centroid.1 - pts[w].1);
        let at = |c: f64| (centroid.0 + c * dir.0, centroid.1 + c * dir.1);
        let refl = at(1.0);
        let f_refl = boxed(refl.0, refl.1);
        if f_refl < vals[b] {
            let exp = at(2.0);
            let f_exp = boxed(exp.0, exp.1);
            if f_exp < f_refl {
                pts[w] = exp;
                vals[w] = f_exp;
            } else {
                pts[w] = refl;
                vals[w] = f_refl;
            }
        } else if f_refl < vals[m] {
            pts[w] = refl;
            vals[w] = f_refl;
        } else {
            let contr = if f_refl < vals[w] { at(0.5) } else { at(-0.5) };
            let f_contr = boxed(contr.0, contr.1);
            if f_contr < vals[w].min(f_refl) {
                pts[w] = contr;
                vals[w] = f_contr;
            } else {
                // Shrink toward the best vertex.
                for i in [m, w] {
                    pts[i] = (
                        pts[b].0 + 0.5 * (pts[i].0 - pts[b].0),
                        pts[b].1 + 0.5 * (pts[i].1 - pts[b].1),
                    );
                    vals[i] = boxed(pts[i].0, pts[i].1);
                }
            }
        }
    }
    let mut best = 0usize;
    for i in 1..3 {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    (pts[best], vals[best], iters)
}

/// Deterministic coarse scan: strictly smaller value wins; values equal
/// within `1e-12` prefer the smaller-norm pair; remaining ties keep the
/// earlier point (outer loop over `α_c`, inner over `α_a`).
fn coarse_scan<F: Fn(f64, f64) -> f64>(f: F, bound: f64, points: usize) -> (f64, f64, f64) {
    let grid = linspace(-bound, bound, points);
    let mut best = (grid[0], grid[0]);
    let mut best_v = f64::INFINITY;
    let mut best_n2 = f64::INFINITY;
    for &ac in &grid {
        for &aa in &grid {
            let v = f(ac, aa);
            let n2 = ac * ac + aa * aa;
            let replace = if v < best_v - 1e-12 {
                true
            } else {
                (v - best_v).abs() <= 1e-12 && n2 < best_n2 - 1e-12
            };
            if replace {
                best = (ac, aa);
                best_v = v;
                best_n2 = n2;
            }
        }
    }
    (best.0, best.1, best_v)
}

/// Minimize one metric at one ramp value: coarse scan plus simplex polish
/// of the exact quadratic. With zero coupling every coefficient acts
/// trivially and `(0, 0)` is returned directly.
pub fn minimize_action_slice(
    spec: &MetricSpec,
    params: &ModelParams,
    lam: f64,
    cfg: &OptimizerConfig,
) -> Result<SliceMinimum> {
    minimize_action_slice_warm(spec, params, lam, cfg, None)
}

/// [`minimize_action_slice`] with an optional warm start that skips the
/// coarse scan — used by trajectory builders where neighboring slices have
/// nearby minimizers. Metrics are convex quadratics, so the polish alone
/// cannot be trapped away from the minimizing set.
pub fn minimize_action_slice_warm(
    spec: &MetricSpec,
    params: &ModelParams,
    lam: f64,
    cfg: &OptimizerConfig,
    warm: Option<(f64, f64)>,
) -> Result<SliceMinimum> {
    cfg.validate()?;
    let quad = QuadForm::build(spec, params, lam)?;
    if params.eta == 0.0 {
        return Ok(SliceMinimum {
            alpha_c: 0.0,
            alpha_a: 0.0,
            value: quad.value(0.0, 0.0),
        });
    }
    let f = |ac: f64, aa: f64| quad.value(ac, aa);
    let (start, h) = match warm {
        Some(w) => (w, cfg.grid_spacing(cfg.coarse_points) / 2.0),
        None => {
            let (ac, aa, _) = coarse_scan(f, cfg.box_bound, cfg.coarse_points);
            ((ac, aa), cfg.grid_spacing(cfg.coarse_points) / 2.0)
        }
    };
    let ((ac, aa), value, _) = nelder_mead(
        f,
        start,
        h,
        cfg.box_bound,
        cfg.simplex_tol,
        cfg.max_iters,
    );
    Ok(SliceMinimum {
        alpha_c: ac,
        alpha_a: aa,
        value,
    })
}

/// Per-slice minimizers across the whole ramp, returned both as the list of
/// slice solutions and as an interpolating [`AgpCoefficients::Trajectory`].
/// Slice 0 is solved cold; later slices warm-start from their predecessor,
/// which keeps the trajectory on one continuous branch when the minimizing
/// set is degenerate.
pub fn coefficient_trajectory(
    spec: &MetricSpec,
    params: &ModelParams,
    slices: usize,
    cfg: &OptimizerConfig,
) -> Result<(AgpCoefficients, Vec<SliceMinimum>)> {
    if slices < 2 {
        return Err(RabiError::Config(format!(
            "coefficient trajectory needs at least 2 slices, got {slices}"
        )));
    }
    let schedule = params.schedule();
    let times = linspace(0.0, params.tau, slices);
    let mut minima = Vec::with_capacity(slices);
    let mut warm: Option<(f64, f64)> = None;
    for &t in &times {
        let lam = schedule.lambda(t)?;
        let m = minimize_action_slice_warm(spec, params, lam, cfg, warm)?;
        warm = Some((m.alpha_c, m.alpha_a));
        minima.push(m);
    }
    let values: Vec<(f64, f64)> = minima.iter().map(|m| (m.alpha_c, m.alpha_a)).collect();
    let coeffs = AgpCoefficients::trajectory(times, values)?;
    Ok((coeffs, minima))
}

/// Size of each correction component relative to the final Hamiltonian,
/// `‖α·A‖ / ‖H(λ=1)‖` in spectral norm — a hardware-realism diagnostic
/// reported with every optimum.
#[derive(Debug, Clone, Copy)]
pub struct RelativeNorms {
    pub cavity: f64,
    pub atomic: f64,
}

pub fn relative_norms(params: &ModelParams, alpha_c: f64, alpha_a: f64) -> Result<RelativeNorms> {
    let h1 = rabi_hamiltonian(params, 1.0)?;
    let basis = agp_basis(params)?;
    let h_norm = spectral_norm(&h1);
    if h_norm == 0.0 {
        return Err(RabiError::Domain(
            "final Hamiltonian has zero norm; relative sizes are undefined".into(),
        ));
    }
    Ok(RelativeNorms {
        cavity: alpha_c.abs() * spectral_norm(&basis.a_c) / h_norm,
        atomic: alpha_a.abs() * spectral_norm(&basis.a_a) / h_norm,
    })
}

/// A constant coefficient pair chosen by direct fidelity maximization.
#[derive(Debug, Clone)]
pub struct FidelityOptimum {
    pub alpha_c: f64,
    pub alpha_a: f64,
    /// Discretization-converged fidelity at the optimum (reachable parity
    /// sector).
    pub fidelity: f64,
    /// Converged fidelity against the global ground state.
    pub fidelity_global: f64,
    /// Set when the optimum sits on the search box; enlarging the box may
    /// improve it further.
    pub on_boundary: bool,
    pub rel_norms: RelativeNorms,
}

/// Maximize the end-of-ramp fidelity over a constant coefficient pair:
/// coarse scan plus simplex polish with fixed-step dynamics as objective,
/// then one converged re-evaluation at the winner.
pub fn optimize_fidelity(
    params: &ModelParams,
    cfg: &OptimizerConfig,
) -> Result<FidelityOptimum> {
    cfg.validate()?;
    let scan_opts = EvolveOptions {
        steps: 1000,
        converge: false,
        ..Default::default()
    };
    // Infidelity as minimization objective; integration failures rank last.
    let objective = |ac: f64, aa: f64| -> f64 {
        let coeffs = AgpCoefficients::constant(ac, aa);
        match protocol_fidelity(params, Some(&coeffs), &scan_opts) {
            Ok(out) => 1.0 - out.fidelity,
            Err(_) => f64::INFINITY,
        }
    };
    let (ac0, aa0, _) = coarse_scan(objective, cfg.box_bound, cfg.fidelity_coarse_points);
    let h = cfg.grid_spacing(cfg.fidelity_coarse_points) / 2.0;
    let ((ac, aa), _, _) = nelder_mead(
        objective,
        (ac0, aa0),
        h,
        cfg.box_bound,
        cfg.simplex_tol,
        cfg.max_iters,
    );
    let final_opts = EvolveOptions::default();
    let coeffs = AgpCoefficients::constant(ac, aa);
    let out = protocol_fidelity(params, Some(&coeffs), &final_opts)?;
    let on_boundary =
        ac.abs() >= cfg.box_bound - 1e-6 || aa.abs() >= cfg.box_bound - 1e-6;
    Ok(FidelityOptimum {
        alpha_c: ac,
        alpha_a: aa,
        fidelity: out.fidelity,
        fidelity_global: out.fidelity_global,
        on_boundary,
        rel_norms: relative_norms(params, ac, aa)?,
    })
}
