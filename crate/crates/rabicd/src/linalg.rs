//! Dense complex linear algebra shared across the crate.
//!
//! Everything is built on pure-Rust [`nalgebra`] dense types; no system BLAS or
//! LAPACK is linked, which keeps builds reproducible across machines.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;
/// Dense complex matrix.
pub type CMat = DMatrix<Complex64>;
/// Dense complex vector.
pub type CVec = DVector<Complex64>;

/// The imaginary unit.
pub(crate) const IM: C64 = C64::new(0.0, 1.0);

/// Shorthand complex constructor.
#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Real number promoted to a complex scalar.
#[inline]
pub(crate) fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest entrywise deviation from Hermiticity, `max_ij |A_ij - conj(A_ji)|`.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Commutator `AB - BA`.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Kronecker product with the left factor outermost.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as matching columns.
/// The input is assumed Hermitian; callers validate where that matters.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    let se = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        se.eigenvalues[i]
            .partial_cmp(&se.eigenvalues[j])
            .expect("eigenvalues are finite")
    });
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Largest singular value. For (numerically) Hermitian inputs this equals the
/// largest eigenvalue magnitude and is computed directly from the spectrum.
pub fn spectral_norm_mat(a: &CMat) -> f64 {
    if a.nrows() == a.ncols() && hermiticity_defect(a) <= 1e-12 {
        let se = a.clone().symmetric_eigen();
        se.eigenvalues.iter().fold(0.0f64, |m, &w| m.max(w.abs()))
    } else {
        let ata = a.adjoint() * a;
        let se = ata.symmetric_eigen();
        se.eigenvalues
            .iter()
            .fold(0.0f64, |m, &w| m.max(w.max(0.0)))
            .sqrt()
    }
}

/// Frobenius inner product `Re Tr[A† B]`.
pub fn frob_re(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Matrix trace.
pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().sum()
}

/// Row-sum (max absolute row sum) norm; a cheap upper bound on the spectral
/// norm used to scale matrix-exponential Taylor series.
pub fn rowsum_norm(a: &CMat) -> f64 {
    let mut best = 0.0f64;
    for i in 0..a.nrows() {
        let mut s = 0.0;
        for j in 0..a.ncols() {
            s += a[(i, j)].norm();
        }
        best = best.max(s);
    }
    best
}

/// `n` evenly spaced points covering `[a, b]` inclusive (`n >= 2`).
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    (0..n)
        .map(|k| a + (b - a) * (k as f64) / ((n - 1) as f64))
        .collect()
}
