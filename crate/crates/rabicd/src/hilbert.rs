//! Truncated qubit⊗field Hilbert space: operators, states, and norms.
//!
//! Conventions fixed here and relied on everywhere else:
//! * tensor ordering is **qubit ⊗ field** (qubit factor leftmost);
//! * qubit basis index `0` is `|↑⟩` (σ_z eigenvalue `+1`), index `1` is `|↓⟩`;
//! * `|±x⟩ = (|↑⟩ ± |↓⟩)/√2`;
//! * the field keeps Fock states `0..=n`, so the field dimension is `N = n + 1`
//!   and the composite dimension is `2(n + 1)`.

use crate::error::{RabiError, Result};
use crate::linalg::{c, cr, eigh, hermiticity_defect, spectral_norm_mat, CMat, CVec, C64};

/// Truncated single-mode Fock space with highest retained state `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockSpace {
    n: usize,
}

impl FockSpace {
    /// Create a space keeping Fock states `0..=n`. Requires `n >= 1`.
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(RabiError::Config(format!(
                "Fock cutoff must be at least 1, got {n}"
            )));
        }
        Ok(FockSpace { n })
    }

    /// Highest retained Fock state.
    pub fn cutoff(&self) -> usize {
        self.n
    }

    /// Field dimension `N = n + 1`.
    pub fn field_dim(&self) -> usize {
        self.n + 1
    }

    /// Composite qubit⊗field dimension `2(n + 1)`.
    pub fn composite_dim(&self) -> usize {
        2 * (self.n + 1)
    }
}

/// Default Fock cutoff for a given normalized coupling `eta`:
/// `max(20, ceil(4·eta² + 10·eta) + 10)`.
///
/// The interaction displaces the field by at most `|alpha| = eta`, so the mean
/// occupation stays at or below `eta²`; this rule keeps the neglected Poisson
/// tail below `1e-10` with generous headroom.
pub fn default_cutoff(eta: f64) -> usize {
    let grown = (4.0 * eta * eta + 10.0 * eta).ceil() as usize + 10;
    grown.max(20)
}

/// Square complex matrix on a (composite or field) space with a validated
/// Hermiticity flag.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    entries: CMat,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Wrap a matrix, measuring Hermiticity instead of assuming it.
    /// The flag is set when `max|A - A†| <= 1e-12`.
    pub fn general(entries: CMat) -> Self {
        let hermitian =
            entries.nrows() == entries.ncols() && hermiticity_defect(&entries) <= 1e-12;
        OperatorMatrix { entries, hermitian }
    }

    /// Wrap a matrix that must be Hermitian; errors when `max|A - A†| > 1e-12`.
    pub fn hermitian_checked(entries: CMat) -> Result<Self> {
        let defect = hermiticity_defect(&entries);
        if defect > 1e-12 {
            return Err(RabiError::Domain(format!(
                "matrix is not Hermitian: defect {defect:.3e} exceeds 1e-12"
            )));
        }
        Ok(OperatorMatrix {
            entries,
            hermitian: true,
        })
    }

    /// Matrix dimension (matrices here are square).
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Borrow the raw entries.
    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    /// Consume into the raw entries.
    pub fn into_entries(self) -> CMat {
        self.entries
    }

    /// Whether the validated Hermiticity flag is set.
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Measured Hermiticity defect `max|A - A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.entries)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix {
            entries: self.entries.adjoint(),
            hermitian: self.hermitian,
        }
    }

    /// Largest singular value; for Hermitian inputs the largest |eigenvalue|.
    pub fn spectral_norm(&self) -> f64 {
        spectral_norm_mat(&self.entries)
    }
}

/// Largest singular value of an operator (`max |eigenvalue|` when Hermitian).
pub fn spectral_norm(a: &OperatorMatrix) -> f64 {
    a.spectral_norm()
}

/// Normalized complex state vector.
#[derive(Debug, Clone)]
pub struct StateVector {
    amplitudes: CVec,
}

impl StateVector {
    /// Wrap an already normalized vector; errors when the Euclidean norm
    /// deviates from 1 by more than `1e-10`.
    pub fn new(amplitudes: CVec) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(RabiError::Domain(format!(
                "state vector norm {norm:.12} deviates from 1 by more than 1e-10"
            )));
        }
        Ok(StateVector { amplitudes })
    }

    /// Normalize and wrap; errors on (near-)zero input.
    pub fn from_unnormalized(amplitudes: CVec) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm < 1e-12 {
            return Err(RabiError::Domain(
                "cannot normalize a zero state vector".into(),
            ));
        }
        Ok(StateVector {
            amplitudes: amplitudes / cr(norm),
        })
    }

    /// Vector dimension.
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Borrow the amplitudes.
    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    /// Consume into the raw amplitudes.
    pub fn into_amplitudes(self) -> CVec {
        self.amplitudes
    }

    /// Inner product `⟨self|other⟩` (self conjugated).
    pub fn overlap(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(RabiError::DimensionMismatch(format!(
                "state dims {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Real expectation value `⟨ψ|A|ψ⟩` (meaningful for Hermitian `A`).
    pub fn expectation(&self, a: &CMat) -> f64 {
        let av = a * &self.amplitudes;
        self.amplitudes.dotc(&av).re
    }
}

// ---------------------------------------------------------------------------
// Qubit building blocks
// ---------------------------------------------------------------------------

/// 2×2 identity.
pub fn qubit_identity() -> CMat {
    CMat::identity(2, 2)
}

/// Pauli x.
pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
}

/// Pauli y.
pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)])
}

/// Pauli z (index 0 = `|↑⟩` carries eigenvalue `+1`).
pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)])
}

/// Qubit raising operator `|↑⟩⟨↓|`.
pub fn sigma_plus() -> CMat {
    CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(0.0), cr(0.0)])
}

/// Qubit lowering operator `|↓⟩⟨↑|`.
pub fn sigma_minus() -> CMat {
    CMat::from_row_slice(2, 2, &[cr(0.0), cr(0.0), cr(1.0), cr(0.0)])
}

/// `|↑⟩` as a 2-vector.
pub fn spin_up() -> CVec {
    CVec::from_vec(vec![cr(1.0), cr(0.0)])
}

/// `|↓⟩` as a 2-vector.
pub fn spin_down() -> CVec {
    CVec::from_vec(vec![cr(0.0), cr(1.0)])
}

/// `|+x⟩ = (|↑⟩ + |↓⟩)/√2`.
pub fn plus_x() -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_vec(vec![cr(s), cr(s)])
}

/// `|−x⟩ = (|↑⟩ − |↓⟩)/√2`.
pub fn minus_x() -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_vec(vec![cr(s), cr(-s)])
}

// ---------------------------------------------------------------------------
// Field building blocks
// ---------------------------------------------------------------------------

/// Annihilation operator on the truncated field space:
/// entries `a[m, m+1] = sqrt(m+1)` for `m = 0..n-1`.
pub fn annihilation(space: FockSpace) -> OperatorMatrix {
    let nn = space.field_dim();
    let mut a = CMat::zeros(nn, nn);
    for m in 0..space.cutoff() {
        a[(m, m + 1)] = cr(((m + 1) as f64).sqrt());
    }
    OperatorMatrix::general(a)
}

/// Creation operator, the adjoint of [`annihilation`].
pub fn creation(space: FockSpace) -> OperatorMatrix {
    annihilation(space).adjoint()
}

/// Number operator `a†a` (diagonal `0..=n`).
pub fn number_operator(space: FockSpace) -> CMat {
    let nn = space.field_dim();
    CMat::from_fn(nn, nn, |i, j| if i == j { cr(i as f64) } else { cr(0.0) })
}

/// Identity on the field space.
pub fn field_identity(space: FockSpace) -> CMat {
    let nn = space.field_dim();
    CMat::identity(nn, nn)
}

/// Kronecker embedding with the qubit factor leftmost. Errors unless the
/// left operand is 2×2 and the right operand is square.
pub fn embed(qubit_op: &CMat, field_op: &CMat) -> Result<OperatorMatrix> {
    if qubit_op.nrows() != 2 || qubit_op.ncols() != 2 {
        return Err(RabiError::DimensionMismatch(format!(
            "qubit factor must be 2x2, got {}x{}",
            qubit_op.nrows(),
            qubit_op.ncols()
        )));
    }
    if field_op.nrows() != field_op.ncols() {
        return Err(RabiError::DimensionMismatch(format!(
            "field factor must be square, got {}x{}",
            field_op.nrows(),
            field_op.ncols()
        )));
    }
    Ok(OperatorMatrix::general(qubit_op.kronecker(field_op)))
}

/// Tensor product state `qubit ⊗ field`, normalized.
pub fn embed_state(qubit: &CVec, field: &CVec) -> Result<StateVector> {
    if qubit.len() != 2 {
        return Err(RabiError::DimensionMismatch(format!(
            "qubit state must have dimension 2, got {}",
            qubit.len()
        )));
    }
    let nn = field.len();
    let mut v = CVec::zeros(2 * nn);
    for s in 0..2 {
        for m in 0..nn {
            v[s * nn + m] = qubit[s] * field[m];
        }
    }
    StateVector::from_unnormalized(v)
}

/// Composite basis state `|qubit_index⟩ ⊗ |m⟩` (`qubit_index`: 0 = `|↑⟩`).
pub fn basis_state(space: FockSpace, qubit_index: usize, m: usize) -> Result<StateVector> {
    if qubit_index > 1 {
        return Err(RabiError::Domain(format!(
            "qubit index must be 0 or 1, got {qubit_index}"
        )));
    }
    if m > space.cutoff() {
        return Err(RabiError::Domain(format!(
            "Fock index {m} exceeds cutoff {}",
            space.cutoff()
        )));
    }
    let mut v = CVec::zeros(space.composite_dim());
    v[qubit_index * space.field_dim() + m] = cr(1.0);
    StateVector::new(v)
}

/// Required cutoff for a displacement of size `alpha` under the
/// representability rule `alpha² <= n/4`.
fn required_cutoff(alpha: f64) -> usize {
    (4.0 * alpha * alpha).ceil() as usize
}

/// Validate that `alpha` is representable on `space` (`alpha² <= n/4`).
pub(crate) fn check_displacement(alpha: f64, space: FockSpace) -> Result<()> {
    if alpha * alpha > space.cutoff() as f64 / 4.0 {
        return Err(RabiError::CutoffTooSmall {
            alpha,
            required_n: required_cutoff(alpha),
            got_n: space.cutoff(),
        });
    }
    Ok(())
}

/// Displacement operator `exp(alpha·(a† − a))` for real `alpha`, built by
/// Hermitian eigendecomposition of the generator so the result is unitary up
/// to rounding. Requires `alpha² <= n/4` so the displaced vacuum stays far
/// from the truncation edge (unitarity defect `<= 1e-8` under that rule).
pub fn displacement(alpha: f64, space: FockSpace) -> Result<OperatorMatrix> {
    check_displacement(alpha, space)?;
    let a = annihilation(space);
    // Generator K = alpha (a† − a) is anti-Hermitian; write K = −iH with
    // H = i·alpha(a† − a) Hermitian and exponentiate through H's spectrum.
    let h = (a.entries().adjoint() - a.entries()) * c(0.0, alpha);
    let (vals, vecs) = eigh(&h);
    let nn = space.field_dim();
    let phases = CMat::from_diagonal(&CVec::from_iterator(
        nn,
        vals.iter().map(|&w| c(0.0, -w).exp()),
    ));
    let d = &vecs * phases * vecs.adjoint();
    Ok(OperatorMatrix::general(d))
}

/// Coherent state `D(alpha)|0⟩` on the field space.
pub fn coherent_state(alpha: f64, space: FockSpace) -> Result<StateVector> {
    let d = displacement(alpha, space)?;
    StateVector::from_unnormalized(d.entries().column(0).into_owned())
}

/// Parity operator `σ_z ⊗ (−1)^{a†a}`: diagonal ±1, squares to the identity,
/// and commutes with every Hamiltonian piece used in this crate.
pub fn parity(space: FockSpace) -> OperatorMatrix {
    let nn = space.field_dim();
    let mut p = CMat::zeros(2 * nn, 2 * nn);
    for s in 0..2usize {
        let sz = if s == 0 { 1.0 } else { -1.0 };
        for m in 0..nn {
            let idx = s * nn + m;
            p[(idx, idx)] = cr(sz * if m % 2 == 0 { 1.0 } else { -1.0 });
        }
    }
    OperatorMatrix::general(p)
}

/// Diagonal of [`parity`] as real numbers, indexed by the composite basis.
pub fn parity_diagonal(dim: usize) -> Vec<f64> {
    assert!(dim.is_multiple_of(2), "composite dimension must be even");
    let nn = dim / 2;
    (0..dim)
        .map(|idx| {
            let sz = if idx < nn { 1.0 } else { -1.0 };
            let m = idx % nn;
            sz * if m.is_multiple_of(2) { 1.0 } else { -1.0 }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, trace};

    fn space(n: usize) -> FockSpace {
        FockSpace::new(n).unwrap()
    }

    #[test]
    fn cutoff_below_one_is_rejected() {
        assert!(FockSpace::new(0).is_err());
        assert_eq!(space(3).composite_dim(), 8);
    }

    #[test]
    fn annihilation_at_smallest_cutoff_has_single_entry() {
        let a = annihilation(space(1));
        assert_eq!(a.dim(), 2);
        assert!((a.entries()[(0, 1)] - cr(1.0)).norm() < 1e-15);
        let total: f64 = a.entries().iter().map(|z| z.norm()).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quadrature_trace_identities_at_small_cutoff() {
        let sp = space(3);
        let a = annihilation(sp);
        let x = a.entries().adjoint() + a.entries();
        let x2 = &x * &x;
        let x4 = &x2 * &x2;
        assert!((trace(&x2).re - 12.0).abs() < 1e-10);
        assert!((trace(&x4).re - 60.0).abs() < 1e-10);
    }

    #[test]
    fn quadrature_trace_identities_hold_for_all_small_cutoffs() {
        for n in 1..=50usize {
            let sp = space(n);
            let a = annihilation(sp);
            let x = a.entries().adjoint() + a.entries();
            let p = a.entries().adjoint() - a.entries();
            let nf = n as f64;
            assert!((trace(&(&x * &x)).re - nf * (nf + 1.0)).abs() < 1e-10);
            assert!((trace(&(&p * &p)).re + nf * (nf + 1.0)).abs() < 1e-10);
            assert!((trace(&field_identity(sp)).re - (nf + 1.0)).abs() < 1e-12);
            let x2 = &x * &x;
            let expect4 = nf * (2.0 * nf * nf + nf - 1.0);
            assert!((trace(&(&x2 * &x2)).re - expect4).abs() < 1e-8 * expect4.max(1.0));
        }
    }

    #[test]
    fn embedding_of_identities_is_identity() {
        let sp = space(4);
        let e = embed(&qubit_identity(), &field_identity(sp)).unwrap();
        assert!((e.entries() - CMat::identity(10, 10)).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn embedding_multiplies_traces() {
        let q = CMat::from_row_slice(2, 2, &[cr(0.7), c(0.1, 0.2), c(0.1, -0.2), cr(-0.4)]);
        let sp = space(2);
        let f = CMat::from_row_slice(
            3,
            3,
            &[
                cr(1.0),
                c(0.0, 0.5),
                cr(0.0),
                c(0.0, -0.5),
                cr(2.0),
                cr(0.3),
                cr(0.0),
                cr(0.3),
                cr(-1.0),
            ],
        );
        let _ = sp;
        let e = embed(&q, &f).unwrap();
        let expect = trace(&q) * trace(&f);
        assert!((trace(e.entries()) - expect).norm() < 1e-12);
    }

    #[test]
    fn sigma_z_embedding_diagonal_ordering() {
        let sp = space(1);
        let e = embed(&pauli_z(), &field_identity(sp)).unwrap();
        let diag: Vec<f64> = e.entries().diagonal().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn zero_displacement_is_identity() {
        let d = displacement(0.0, space(5)).unwrap();
        assert!((d.entries() - CMat::identity(6, 6)).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn coherent_state_mean_occupation() {
        let sp = space(30);
        let psi = coherent_state(1.0, sp).unwrap();
        let mut mean = 0.0;
        for m in 0..sp.field_dim() {
            mean += m as f64 * psi.amplitudes()[m].norm_sqr();
        }
        assert!((mean - 1.0).abs() < 1e-6);
    }

    #[test]
    fn displacement_inverse_is_adjoint_displacement() {
        let sp = space(40);
        let d = displacement(1.2, sp).unwrap();
        let dinv = displacement(-1.2, sp).unwrap();
        let prod = d.entries() * dinv.entries();
        let defect = (&prod - CMat::identity(41, 41))
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        assert!(defect < 1e-8, "defect {defect:.3e}");
    }

    #[test]
    fn displacement_unitarity_defect_small() {
        let sp = space(30);
        let d = displacement(1.5, sp).unwrap();
        let prod = d.entries().adjoint() * d.entries();
        let defect = (&prod - CMat::identity(31, 31))
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        assert!(defect < 1e-8);
    }

    #[test]
    fn oversized_displacement_names_required_cutoff() {
        let err = displacement(2.0, space(10)).unwrap_err();
        match err {
            RabiError::CutoffTooSmall {
                required_n, got_n, ..
            } => {
                assert_eq!(required_n, 16);
                assert_eq!(got_n, 10);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parity_diagonal_at_smallest_cutoff() {
        let p = parity(space(1));
        let diag: Vec<f64> = p.entries().diagonal().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
        let sq = p.entries() * p.entries();
        assert!((&sq - CMat::identity(4, 4)).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn parity_flips_sign_of_spin_down_vacuum() {
        let sp = space(1);
        let psi = basis_state(sp, 1, 0).unwrap();
        let applied = parity(sp).entries() * psi.amplitudes();
        let diff = (&applied + psi.amplitudes())
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        assert!(diff < 1e-15);
    }

    #[test]
    fn pauli_algebra_holds_entrywise() {
        let comm = commutator(&pauli_x(), &pauli_y());
        let expect = pauli_z() * c(0.0, 2.0);
        assert!((&comm - &expect).iter().all(|z| z.norm() < 1e-14));
        for p in [pauli_x(), pauli_y(), pauli_z()] {
            let sq = &p * &p;
            assert!((&sq - CMat::identity(2, 2)).iter().all(|z| z.norm() < 1e-14));
        }
    }

    #[test]
    fn spectral_norm_examples() {
        let sp = space(5);
        let e = embed(&pauli_x(), &field_identity(sp)).unwrap();
        assert!((e.spectral_norm() - 1.0).abs() < 1e-12);
        let a = annihilation(sp);
        let x = OperatorMatrix::general(a.entries().adjoint() + a.entries());
        let (vals, _) = eigh(x.entries());
        let brute = vals.iter().fold(0.0f64, |m, &w| m.max(w.abs()));
        assert!((x.spectral_norm() - brute).abs() < 1e-10);
    }

    #[test]
    fn default_cutoff_rule_values() {
        assert_eq!(default_cutoff(0.25), 20);
        assert_eq!(default_cutoff(0.5), 20);
        assert_eq!(default_cutoff(0.75), 20);
        assert_eq!(default_cutoff(1.0), 24);
        assert_eq!(default_cutoff(0.8), 21);
    }

    #[test]
    fn state_vector_norm_is_validated() {
        let bad = CVec::from_vec(vec![cr(1.0), cr(0.5)]);
        assert!(StateVector::new(bad.clone()).is_err());
        let fixed = StateVector::from_unnormalized(bad).unwrap();
        assert!((fixed.amplitudes().norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn x_basis_states_are_pauli_x_eigenstates() {
        let px = pauli_x();
        let vp = &px * plus_x();
        assert!((&vp - plus_x()).iter().all(|z| z.norm() < 1e-14));
        let vm = &px * minus_x();
        assert!((&vm + minus_x()).iter().all(|z| z.norm() < 1e-14));
    }
}
