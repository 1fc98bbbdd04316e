//! Chaotic Kraus decomposition: the reduced state is a Boltzmann-weighted
//! mixture of system states, each evolved unitarily under
//! `H_S + S·B_nn`.

use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::{DensityMatrix, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ZERO};
use crate::model::OperatorMatrix;
use crate::parallel::ordered_map;
use crate::spectral::BathSpectrum;

/// Threshold for the Choi-matrix positivity check.
pub const CHOI_EIGEN_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct KrausBranch {
    pub weight: f64,
    /// Bath coupling expectation `B_nn` of this branch.
    pub shift: f64,
    pub generator: OperatorMatrix,
}

#[derive(Clone, Debug)]
enum BranchUnitary {
    /// `H = h0·I + h·σ`.
    Qubit { h0: f64, h: [f64; 3] },
    Spectral { values: Vec<f64>, vectors: CMatrix },
}

impl BranchUnitary {
    fn new(generator: &OperatorMatrix) -> Self {
        let m = generator.matrix();
        if m.nrows() == 2 {
            let h0 = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
            let hz = 0.5 * (m[(0, 0)].re - m[(1, 1)].re);
            // H01 = hx − i·hy
            let h = [m[(0, 1)].re, -m[(0, 1)].im, hz];
            BranchUnitary::Qubit { h0, h }
        } else {
            let (values, vectors) = linalg::hermitian_eigen(m);
            BranchUnitary::Spectral { values, vectors }
        }
    }

    fn at(&self, t: f64) -> CMatrix {
        match self {
            BranchUnitary::Qubit { h0, h } => {
                let norm = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
                let (s, c) = (norm * t).sin_cos();
                // sin(|h|t)/|h| with the |h| → 0 limit.
                let sinc = if norm > 0.0 { s / norm } else { t };
                let phase = Complex64::from_polar(1.0, -h0 * t);
                let [hx, hy, hz] = *h;
                let u00 = Complex64::new(c, -sinc * hz);
                let u11 = Complex64::new(c, sinc * hz);
                let u01 = Complex64::new(-sinc * hy, -sinc * hx);
                let u10 = Complex64::new(sinc * hy, -sinc * hx);
                CMatrix::from_row_slice(2, 2, &[u00, u01, u10, u11]) * phase
            }
            BranchUnitary::Spectral { values, vectors } => {
                linalg::unitary_from_spectrum(values, vectors, t)
            }
        }
    }
}

/// Weighted effective-Hamiltonian branches.
#[derive(Clone, Debug)]
pub struct KrausEnsemble {
    h_s: OperatorMatrix,
    s: OperatorMatrix,
    branches: Vec<KrausBranch>,
    unitaries: Vec<BranchUnitary>,
}

/// One branch per retained bath state: weight `p_n`, generator `H_S + S·B_nn`.
pub fn build_ensemble(
    h_s: &OperatorMatrix,
    s: &OperatorMatrix,
    spectrum: &BathSpectrum,
) -> Result<KrausEnsemble> {
    let ensemble = KrausEnsemble::from_parts(h_s, s, &spectrum.weights, &spectrum.bdiag)?;
    let sum = ensemble.weight_sum();
    if (sum - 1.0).abs() > 1e-14 {
        return Err(Error::Validation(format!("bath weights sum to {sum}")));
    }
    Ok(ensemble)
}

impl KrausEnsemble {
    /// Arbitrary weights and shifts; weights need not be normalized.
    pub fn from_parts(
        h_s: &OperatorMatrix,
        s: &OperatorMatrix,
        weights: &[f64],
        shifts: &[f64],
    ) -> Result<Self> {
        if h_s.dim() != s.dim() {
            return Err(Error::shape("Kraus system operators", h_s.dim(), s.dim()));
        }
        if weights.len() != shifts.len() {
            return Err(Error::shape("Kraus weights and shifts", weights.len(), shifts.len()));
        }
        if weights.is_empty() {
            return Err(Error::Domain("Kraus ensemble needs at least one branch".into()));
        }
        if !h_s.is_hermitian() || !s.is_hermitian() {
            return Err(Error::Validation("H_S and S must be Hermitian".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::Validation(format!("invalid branch weight {w}")));
        }
        if let Some(b) = shifts.iter().find(|b| !b.is_finite()) {
            return Err(Error::Numeric(format!("non-finite branch shift {b}")));
        }
        let branches: Vec<KrausBranch> = weights
            .iter()
            .zip(shifts)
            .map(|(&weight, &shift)| {
                let matrix = h_s.matrix() + s.matrix() * Complex64::new(shift, 0.0);
                Ok(KrausBranch {
                    weight,
                    shift,
                    generator: OperatorMatrix::hermitian(matrix)?,
                })
            })
            .collect::<Result<_>>()?;
        let unitaries = branches.iter().map(|b| BranchUnitary::new(&b.generator)).collect();
        Ok(KrausEnsemble {
            h_s: h_s.clone(),
            s: s.clone(),
            branches,
            unitaries,
        })
    }

    pub fn branches(&self) -> &[KrausBranch] {
        &self.branches
    }

    pub fn dim(&self) -> usize {
        self.h_s.dim()
    }

    pub fn system_hamiltonian(&self) -> &OperatorMatrix {
        &self.h_s
    }

    pub fn weight_sum(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum()
    }

    /// Weighted mean of the branch shifts.
    pub fn mean_shift(&self) -> f64 {
        self.branches.iter().map(|b| b.weight * b.shift).sum::<f64>() / self.weight_sum()
    }

    /// Same weights, every shift replaced by `shift`.
    pub fn with_common_shift(&self, shift: f64) -> Result<Self> {
        let weights: Vec<f64> = self.branches.iter().map(|b| b.weight).collect();
        KrausEnsemble::from_parts(&self.h_s, &self.s, &weights, &vec![shift; weights.len()])
    }

    /// `exp(−i H_eff_n t)`.
    pub fn branch_unitary(&self, n: usize, t: f64) -> CMatrix {
        self.unitaries[n].at(t)
    }

    /// `Σ_n p_n U_n(t) ρ U_n(t)†`, summed in branch order.
    pub fn apply(&self, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        if rho.dim() != self.dim() {
            return Err(Error::shape("Kraus channel input", self.dim(), rho.dim()));
        }
        let d = self.dim();
        let mut acc = CMatrix::zeros(d, d);
        for (branch, unitary) in self.branches.iter().zip(&self.unitaries) {
            let u = unitary.at(t);
            acc += (&u * rho.matrix() * u.adjoint()) * Complex64::new(branch.weight, 0.0);
        }
        Ok(DensityMatrix::from_matrix(acc))
    }

    /// Choi matrix `Σ_{ij} |i⟩⟨j| ⊗ E_t(|i⟩⟨j|)` of the channel at time `t`.
    pub fn choi_matrix(&self, t: f64) -> CMatrix {
        let d = self.dim();
        let mut choi = CMatrix::zeros(d * d, d * d);
        let us: Vec<CMatrix> = self.unitaries.iter().map(|u| u.at(t)).collect();
        for i in 0..d {
            for j in 0..d {
                let mut block = CMatrix::zeros(d, d);
                for (branch, u) in self.branches.iter().zip(&us) {
                    // U |i⟩⟨j| U† = column i of U times row j of U†.
                    let col_i = u.column(i);
                    let col_j = u.column(j);
                    block += (col_i * col_j.adjoint()) * Complex64::new(branch.weight, 0.0);
                }
                choi.view_mut((i * d, j * d), (d, d)).copy_from(&block);
            }
        }
        choi
    }

    pub fn choi_min_eigenvalue(&self, t: f64) -> f64 {
        linalg::hermitian_eigenvalues(&self.choi_matrix(t))
            .first()
            .copied()
            .unwrap_or(0.0)
    }
}

/// Largest element of `|Σ p_n U_n U_n† − I|` and `|Σ p_n U_n† U_n − I|`.
pub fn completeness_residual(ensemble: &KrausEnsemble, t: f64) -> f64 {
    let d = ensemble.dim();
    let mut left = CMatrix::zeros(d, d);
    let mut right = CMatrix::zeros(d, d);
    for (n, branch) in ensemble.branches.iter().enumerate() {
        let u = ensemble.branch_unitary(n, t);
        let w = Complex64::new(branch.weight, 0.0);
        left += (&u * u.adjoint()) * w;
        right += (u.adjoint() * &u) * w;
    }
    let id = CMatrix::identity(d, d);
    linalg::max_abs_diff(&left, &id).max(linalg::max_abs_diff(&right, &id))
}

/// Reduced trajectory of the ensemble on `times`.
pub fn propagate_kraus(
    ensemble: &KrausEnsemble,
    rho0: &DensityMatrix,
    times: &[f64],
) -> Result<Trajectory> {
    rho0.validate()?;
    if rho0.dim() != ensemble.dim() {
        return Err(Error::shape("Kraus initial state", ensemble.dim(), rho0.dim()));
    }
    let rho = ordered_map(times, |&t| ensemble.apply(rho0, t))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(times.to_vec(), rho, &ensemble.h_s, rho0)
}

/// Closed-form branch amplitudes for the qubit model started in
/// `(|0⟩+|1⟩)/√2`, with generator `−½B_z σ_z + B_nn σ_x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QubitBranchCoefficients {
    /// Angular frequency `b/2`.
    pub a: f64,
    /// `sqrt(B_z² + 4 B_nn²)`.
    pub b: f64,
    /// Amplitude on `|0⟩` (σ_z = +1).
    pub c1: Complex64,
    /// Amplitude on `|1⟩`.
    pub c0: Complex64,
}

pub fn qubit_closed_form(bz: f64, bnn: f64, t: f64) -> QubitBranchCoefficients {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let b = (bz * bz + 4.0 * bnn * bnn).sqrt();
    let a = 0.5 * b;
    if b == 0.0 {
        return QubitBranchCoefficients {
            a,
            b,
            c1: Complex64::new(r, 0.0),
            c0: Complex64::new(r, 0.0),
        };
    }
    let (s, c) = (a * t).sin_cos();
    QubitBranchCoefficients {
        a,
        b,
        c1: Complex64::new(r * c, r * (bz - 2.0 * bnn) / b * s),
        c0: Complex64::new(r * c, -r * (bz + 2.0 * bnn) / b * s),
    }
}

impl QubitBranchCoefficients {
    /// `[[|c1|², c1 c0*], [c0 c1*, |c0|²]]`.
    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::pure(&[self.c1, self.c0])
    }
}

/// Qubit-model reduced state from the closed-form amplitudes:
/// `Σ_n p_n ρ_n(t)`.
pub fn closed_form_density(bz: f64, weights: &[f64], shifts: &[f64], t: f64) -> DensityMatrix {
    let mut acc = CMatrix::from_element(2, 2, ZERO);
    for (&w, &bnn) in weights.iter().zip(shifts) {
        acc += qubit_closed_form(bz, bnn, t).density().matrix() * Complex64::new(w, 0.0);
    }
    DensityMatrix::from_matrix(acc)
}

/// Closed-form trajectory of the qubit model with the default initial state.
pub fn closed_form_trajectory(
    b0z: f64,
    weights: &[f64],
    shifts: &[f64],
    times: &[f64],
) -> Result<Trajectory> {
    if weights.len() != shifts.len() {
        return Err(Error::shape("closed-form weights and shifts", weights.len(), shifts.len()));
    }
    let rho = times
        .iter()
        .map(|&t| closed_form_density(b0z, weights, shifts, t))
        .collect();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let rho0 = DensityMatrix::pure(&[Complex64::new(r, 0.0), Complex64::new(r, 0.0)]);
    Trajectory::new(times.to_vec(), rho, &crate::model::system_hamiltonian(b0z), &rho0)
}
