//! Small dense linear-algebra helpers shared by the physics modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn sigma_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn sigma_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

/// `σ_z|0⟩ = +|0⟩`, `σ_z|1⟩ = −|1⟩`.
pub fn sigma_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Kronecker product with `a` as the most significant factor.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `max |A − A†|` over all elements.
pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).norm()))
}

fn is_real(a: &CMatrix) -> bool {
    a.iter().all(|z| z.im == 0.0)
}

fn no_convergence(e: faer::linalg::evd::EvdError) -> Error {
    Error::Numeric(format!("Hermitian eigensolver did not converge: {e:?}"))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending and
/// eigenvectors as the matching columns. Real symmetric input takes the
/// real solver, which is several times faster.
pub fn try_hermitian_eigen(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = a.nrows();
    if is_real(a) {
        let m = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)].re);
        let eig = m.self_adjoint_eigen(faer::Side::Lower).map_err(no_convergence)?;
        let values = (0..n).map(|k| eig.S()[k]).collect();
        let u = eig.U();
        Ok((values, CMatrix::from_fn(n, n, |i, j| Complex64::new(u[(i, j)], 0.0))))
    } else {
        let m = faer::Mat::<Complex64>::from_fn(n, n, |i, j| a[(i, j)]);
        let eig = m.self_adjoint_eigen(faer::Side::Lower).map_err(no_convergence)?;
        let values = (0..n).map(|k| eig.S()[k].re).collect();
        let u = eig.U();
        Ok((values, CMatrix::from_fn(n, n, |i, j| u[(i, j)])))
    }
}

/// Eigenvalues only, ascending.
pub fn try_hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>> {
    let n = a.nrows();
    let mut values = if is_real(a) {
        faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)].re)
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(no_convergence)?
    } else {
        faer::Mat::<Complex64>::from_fn(n, n, |i, j| a[(i, j)])
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(no_convergence)?
    };
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// [`try_hermitian_eigen`] for small matrices, where non-convergence of
/// the solver is treated as a bug.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    try_hermitian_eigen(a).expect("Hermitian eigensolver failed")
}

pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    try_hermitian_eigenvalues(a).expect("Hermitian eigensolver failed")
}

/// `exp(−i H t)` for Hermitian `H` through its spectral decomposition.
pub fn unitary_from_spectrum(values: &[f64], vectors: &CMatrix, t: f64) -> CMatrix {
    let phases = DVector::from_iterator(
        values.len(),
        values.iter().map(|&e| Complex64::from_polar(1.0, -e * t)),
    );
    let mut scaled = vectors.clone();
    for (mut col, ph) in scaled.column_iter_mut().zip(phases.iter()) {
        col *= *ph;
    }
    scaled * vectors.adjoint()
}

/// `exp(−i H t)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(h);
    unitary_from_spectrum(&values, &vectors, t)
}

/// Trace of `a·b` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
