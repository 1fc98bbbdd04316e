//! Bath eigen-decomposition, thermal weights and coupling-operator matrix
//! elements in the bath eigenbasis.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::OperatorMatrix;

/// Retained bath states used by default in the thermal sums.
pub const DEFAULT_RETAINED: usize = 20;
/// Tail weight above which the truncation is reported as unconverged.
pub const TAIL_WEIGHT_WARN: f64 = 1e-3;
/// Residual bound relative to the operator norm.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Lowest eigenpairs of a Hermitian bath Hamiltonian.
#[derive(Clone, Debug)]
pub struct BathEigen {
    /// Every eigenvalue, ascending.
    pub values: Vec<f64>,
    /// Columns are the eigenvectors of the lowest `retained` values.
    pub vectors: CMatrix,
    /// `‖H v − E v‖` per retained pair.
    pub residuals: Vec<f64>,
    /// Largest `|E|`, the spectral norm of `H`.
    pub norm: f64,
}

impl BathEigen {
    pub fn retained(&self) -> usize {
        self.vectors.ncols()
    }

    /// Retained eigenvalues.
    pub fn energies(&self) -> &[f64] {
        &self.values[..self.retained()]
    }

    /// Consecutive retained pairs closer than `1e-10·‖H‖`; the eigenbasis
    /// inside such pairs is whatever the solver returned.
    pub fn degenerate_pairs(&self) -> usize {
        let tol = 1e-10 * self.norm.max(1.0);
        self.energies().windows(2).filter(|w| w[1] - w[0] < tol).count()
    }
}

/// Dense diagonalization keeping the lowest `m` eigenvectors.
pub fn diagonalize_bath(h_b: &OperatorMatrix, m: usize) -> Result<BathEigen> {
    diagonalize_bath_full(h_b, m).map(|(eigen, _)| eigen)
}

/// As [`diagonalize_bath`], also returning every eigenvector (columns in
/// ascending eigenvalue order).
pub fn diagonalize_bath_full(h_b: &OperatorMatrix, m: usize) -> Result<(BathEigen, CMatrix)> {
    if !h_b.is_hermitian() {
        return Err(Error::Validation(
            "bath Hamiltonian must be Hermitian".into(),
        ));
    }
    let dim = h_b.dim();
    if m == 0 || m > dim {
        return Err(Error::Domain(format!(
            "retained state count {m} must lie in 1..={dim}"
        )));
    }
    let (values, all_vectors) = linalg::try_hermitian_eigen(h_b.matrix())?;
    let vectors = all_vectors.columns(0, m).into_owned();
    let norm = values.iter().fold(0.0_f64, |a, e| a.max(e.abs()));
    let hv = h_b.matrix() * &vectors;
    let residuals: Vec<f64> = (0..m)
        .map(|n| (hv.column(n) - vectors.column(n) * Complex64::new(values[n], 0.0)).norm())
        .collect();
    let worst = residuals.iter().copied().fold(0.0_f64, f64::max);
    if worst > RESIDUAL_TOL * norm.max(1.0) {
        return Err(Error::Numeric(format!(
            "eigensolver residual {worst:.3e} exceeds {:.3e}",
            RESIDUAL_TOL * norm.max(1.0)
        )));
    }
    Ok((
        BathEigen {
            values,
            vectors,
            residuals,
            norm,
        },
        all_vectors,
    ))
}

/// All eigenvalues, ascending, without eigenvectors.
pub fn bath_eigenvalues(h_b: &OperatorMatrix) -> Result<Vec<f64>> {
    if !h_b.is_hermitian() {
        return Err(Error::Validation(
            "bath Hamiltonian must be Hermitian".into(),
        ));
    }
    linalg::try_hermitian_eigenvalues(h_b.matrix())
}

/// Boltzmann weights of the lowest `m` levels, renormalized over those
/// levels. `kt = 0` puts uniform weight on the exactly degenerate ground
/// states.
pub fn boltzmann_weights(energies: &[f64], kt: f64, m: usize) -> Result<Vec<f64>> {
    if kt.is_nan() || kt < 0.0 {
        return Err(Error::Domain(format!("temperature must be non-negative, got {kt}")));
    }
    if m == 0 || m > energies.len() {
        return Err(Error::Domain(format!(
            "retained count {m} must lie in 1..={}",
            energies.len()
        )));
    }
    let levels = &energies[..m];
    let e_min = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = if kt == 0.0 {
        levels
            .iter()
            .map(|&e| if e == e_min { 1.0 } else { 0.0 })
            .collect()
    } else {
        levels.iter().map(|&e| (-(e - e_min) / kt).exp()).collect()
    };
    let z: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / z).collect())
}

/// `B_{jk} = ⟨j|B|k⟩` over the retained bath eigenstates.
#[derive(Clone, Debug)]
pub struct CouplingMatrix {
    pub entries: CMatrix,
    pub energies: Vec<f64>,
}

#[derive(Serialize)]
struct CouplingMatrixJson<'a> {
    dim: usize,
    energies: &'a [f64],
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl CouplingMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Diagonal elements `B_{nn}` (real parts).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|n| self.entries[(n, n)].re).collect()
    }

    pub fn hermiticity_error(&self) -> f64 {
        linalg::hermitian_deviation(&self.entries)
    }

    pub fn to_json(&self) -> Result<String> {
        let m = self.dim();
        let row = |f: fn(&Complex64) -> f64, i: usize| (0..m).map(|j| f(&self.entries[(i, j)])).collect();
        let doc = CouplingMatrixJson {
            dim: m,
            energies: &self.energies,
            re: (0..m).map(|i| row(|z| z.re, i)).collect(),
            im: (0..m).map(|i| row(|z| z.im, i)).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Matrix elements of `B` between the retained eigenvectors.
pub fn coupling_matrix_elements(b: &OperatorMatrix, eigen: &BathEigen) -> Result<CouplingMatrix> {
    if b.dim() != eigen.vectors.nrows() {
        return Err(Error::shape("coupling matrix elements", eigen.vectors.nrows(), b.dim()));
    }
    let entries = eigen.vectors.adjoint() * (b.matrix() * &eigen.vectors);
    let worst_im = (0..entries.nrows())
        .map(|n| entries[(n, n)].im.abs())
        .fold(0.0_f64, f64::max);
    if worst_im > 1e-10 {
        return Err(Error::Validation(format!(
            "diagonal coupling elements are not real (max |Im| = {worst_im:.3e})"
        )));
    }
    Ok(CouplingMatrix {
        entries,
        energies: eigen.energies().to_vec(),
    })
}

/// Everything the thermal sums need about the bath.
#[derive(Clone, Debug)]
pub struct BathSpectrum {
    pub energies: Vec<f64>,
    pub vectors: CMatrix,
    pub weights: Vec<f64>,
    pub bdiag: Vec<f64>,
    pub kt: f64,
    pub degenerate_pairs: usize,
}

impl BathSpectrum {
    pub fn new(eigen: &BathEigen, coupling: &CouplingMatrix, kt: f64) -> Result<Self> {
        let m = eigen.retained();
        if coupling.dim() != m {
            return Err(Error::shape("bath spectrum", m, coupling.dim()));
        }
        let weights = boltzmann_weights(&eigen.values, kt, m)?;
        let spectrum = BathSpectrum {
            energies: eigen.energies().to_vec(),
            vectors: eigen.vectors.clone(),
            weights,
            bdiag: coupling.diagonal(),
            kt,
            degenerate_pairs: eigen.degenerate_pairs(),
        };
        let tail = spectrum.tail_weight();
        if tail > TAIL_WEIGHT_WARN {
            log::warn!(
                "thermal truncation not converged: weight of the highest retained state is {tail:.3e} (> {TAIL_WEIGHT_WARN:e})"
            );
        }
        Ok(spectrum)
    }

    /// Diagonalize `h_b`, keep `m` states and project `b` onto them.
    pub fn compute(
        h_b: &OperatorMatrix,
        b: &OperatorMatrix,
        kt: f64,
        m: usize,
    ) -> Result<(BathSpectrum, CouplingMatrix, BathEigen)> {
        let eigen = diagonalize_bath(h_b, m)?;
        let coupling = coupling_matrix_elements(b, &eigen)?;
        let spectrum = BathSpectrum::new(&eigen, &coupling, kt)?;
        Ok((spectrum, coupling, eigen))
    }

    pub fn retained(&self) -> usize {
        self.energies.len()
    }

    pub fn bath_dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// Weight of the highest retained state.
    pub fn tail_weight(&self) -> f64 {
        *self.weights.last().unwrap_or(&0.0)
    }

    /// CSV with columns `n,E_n,p_n,B_nn`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,E_n,p_n,B_nn")?;
        for n in 0..self.retained() {
            writeln!(
                w,
                "{n},{:e},{:e},{:e}",
                self.energies[n], self.weights[n], self.bdiag[n]
            )?;
        }
        Ok(())
    }
}

/// Size of the off-diagonal coupling elements relative to the spread of the
/// diagonal ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Suppression {
    /// `rms_offdiag / rms_diag_spread`; infinite when the spread vanishes.
    pub ratio: f64,
    pub rms_offdiag: f64,
    pub rms_diag_spread: f64,
    /// Off-diagonal pairs inside the energy window.
    pub pairs: usize,
    /// True when the ratio is the infinite-denominator sentinel.
    pub degenerate_denominator: bool,
}

/// RMS of `|B_jk|` over `j ≠ k` with `|E_j − E_k| < window`, divided by the
/// RMS deviation of `B_nn` from its mean.
pub fn offdiag_suppression(coupling: &CouplingMatrix, window: f64) -> Result<Suppression> {
    let m = coupling.dim();
    if m < 2 {
        return Err(Error::Domain("off-diagonal suppression needs at least two states".into()));
    }
    let mut sum_sq = 0.0;
    let mut pairs = 0usize;
    for j in 0..m {
        for k in 0..m {
            if j != k && (coupling.energies[j] - coupling.energies[k]).abs() < window {
                sum_sq += coupling.entries[(j, k)].norm_sqr();
                pairs += 1;
            }
        }
    }
    let rms_offdiag = if pairs > 0 { (sum_sq / pairs as f64).sqrt() } else { 0.0 };
    let diag = coupling.diagonal();
    let mean = diag.iter().sum::<f64>() / m as f64;
    let rms_diag_spread = (diag.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / m as f64).sqrt();
    let degenerate = rms_diag_spread <= 1e-14 * diag.iter().fold(1.0_f64, |a, d| a.max(d.abs()));
    Ok(Suppression {
        ratio: if degenerate {
            f64::INFINITY
        } else {
            rms_offdiag / rms_diag_spread
        },
        rms_offdiag,
        rms_diag_spread,
        pairs,
        degenerate_denominator: degenerate,
    })
}
