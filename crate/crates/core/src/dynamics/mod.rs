//! Exact reference propagation: Schrödinger evolution of every thermally
//! occupied product state `ψ(0) ⊗ |n⟩`, partial trace over the bath and
//! Boltzmann-weighted sum.

pub mod rk8;

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::Serialize;

use crate::diagnostics::{fidelity, purity};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ZERO};
use crate::model::{OperatorMatrix, PauliOperator};
use crate::parallel::ordered_map;
use crate::spectral::BathSpectrum;

pub use rk8::{Dop853Options, IntegrationStats};

/// Default integrator tolerance (absolute and relative).
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default propagation window `[0, 300]` ħ/ε.
pub const DEFAULT_T_MAX: f64 = 300.0;
pub const DEFAULT_SAMPLES: usize = 600;

/// Something that can act as `H` in `dv/dt = −i H v`.
pub trait Generator: Sync {
    fn dim(&self) -> usize;

    /// `out = (H − shift) v`.
    fn apply_shifted_into(&self, shift: f64, v: &[Complex64], out: &mut [Complex64]);

    fn expectation(&self, v: &[Complex64]) -> f64 {
        let mut hv = vec![ZERO; v.len()];
        self.apply_shifted_into(0.0, v, &mut hv);
        v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

impl Generator for PauliOperator {
    fn dim(&self) -> usize {
        PauliOperator::dim(self)
    }

    fn apply_shifted_into(&self, shift: f64, v: &[Complex64], out: &mut [Complex64]) {
        PauliOperator::apply_shifted_into(self, shift, v, out)
    }
}

impl Generator for OperatorMatrix {
    fn dim(&self) -> usize {
        OperatorMatrix::dim(self)
    }

    fn apply_shifted_into(&self, shift: f64, v: &[Complex64], out: &mut [Complex64]) {
        self.apply_into(v, out);
        for (o, x) in out.iter_mut().zip(v) {
            *o -= x * shift;
        }
    }
}

/// Pure state of the full register.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        StateVector { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `system ⊗ bath`, system on the most significant qubits.
    pub fn product(system: &[Complex64], bath: &[Complex64]) -> Self {
        let mut amplitudes = Vec::with_capacity(system.len() * bath.len());
        for s in system {
            amplitudes.extend(bath.iter().map(|b| s * b));
        }
        StateVector { amplitudes }
    }
}

/// `(|0⟩ + |1⟩)/√2`.
pub fn default_initial_state() -> [Complex64; 2] {
    let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [a, a]
}

/// Reduced state of the system.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-12;
    pub const TRACE_TOL: f64 = 1e-10;
    pub const EIGEN_TOL: f64 = 1e-10;

    /// Wraps a matrix without checks.
    pub fn from_matrix(matrix: CMatrix) -> Self {
        DensityMatrix { matrix }
    }

    pub fn pure(psi: &[Complex64]) -> Self {
        let n = psi.len();
        DensityMatrix {
            matrix: CMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj()),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            matrix: CMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::hermitian_eigenvalues(&self.hermitian_part())
            .first()
            .copied()
            .unwrap_or(0.0)
    }

    fn hermitian_part(&self) -> CMatrix {
        (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0)
    }

    /// Checks Hermiticity (< 1e-12), unit trace (< 1e-10) and
    /// positivity (eigenvalues > −1e-10).
    pub fn validate(&self) -> Result<()> {
        let herm = linalg::hermitian_deviation(&self.matrix);
        if herm > Self::HERMITIAN_TOL {
            return Err(Error::Validation(format!("density matrix not Hermitian ({herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > Self::TRACE_TOL {
            return Err(Error::Validation(format!("density matrix trace {tr} != 1")));
        }
        let min = self.min_eigenvalue();
        if min < -Self::EIGEN_TOL {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &CMatrix) -> DensityMatrix {
        DensityMatrix {
            matrix: u * &self.matrix * u.adjoint(),
        }
    }
}

/// Partial trace over every factor after the first `system_dim` block
/// index: `ρ_{ss'} = Σ_b v[s, b] v*[s', b]`.
pub fn partial_trace(v: &StateVector, system_dim: usize) -> Result<DensityMatrix> {
    if system_dim == 0 || v.dim() % system_dim != 0 || v.dim() < system_dim {
        return Err(Error::shape("partial trace", system_dim, v.dim()));
    }
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::Validation(format!("state is not normalized (‖v‖ = {norm})")));
    }
    let bath_dim = v.dim() / system_dim;
    let a = &v.amplitudes;
    let matrix = CMatrix::from_fn(system_dim, system_dim, |s, t| {
        let (rs, rt) = (&a[s * bath_dim..(s + 1) * bath_dim], &a[t * bath_dim..(t + 1) * bath_dim]);
        rs.iter().zip(rt).map(|(x, y)| x * y.conj()).sum()
    });
    Ok(DensityMatrix { matrix })
}

/// Reduced state of the detector qubit.
pub fn partial_trace_bath(v: &StateVector) -> Result<DensityMatrix> {
    partial_trace(v, 2)
}

/// `n` uniform samples on `[0, t_max]`, both ends included.
pub fn uniform_grid(t_max: f64, n_samples: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::Config(format!("t_max must be positive, got {t_max}")));
    }
    if n_samples < 2 {
        return Err(Error::Config(format!("need at least 2 samples, got {n_samples}")));
    }
    let dt = t_max / (n_samples - 1) as f64;
    Ok((0..n_samples)
        .map(|i| if i + 1 == n_samples { t_max } else { i as f64 * dt })
        .collect())
}

/// How the integrator removes the dominant phase of the state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum PhaseShift {
    /// Propagate with `H − ⟨v0|H|v0⟩`; restored exactly on output.
    Expectation,
    None,
}

#[derive(Clone, Debug)]
pub struct PropagationOptions {
    pub integrator: Dop853Options,
    pub shift: PhaseShift,
}

impl PropagationOptions {
    pub fn with_tol(tol: f64) -> Self {
        PropagationOptions {
            integrator: Dop853Options::with_tol(tol),
            shift: PhaseShift::Expectation,
        }
    }
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self::with_tol(DEFAULT_TOL)
    }
}

/// Solves `dv/dt = −i H v` from `t = 0` and hands each sampled state to
/// `observe`.
pub fn propagate_with<G, O>(
    h: &G,
    v0: &StateVector,
    times: &[f64],
    opts: &PropagationOptions,
    mut observe: O,
) -> Result<IntegrationStats>
where
    G: Generator + ?Sized,
    O: FnMut(usize, f64, &StateVector) -> Result<()>,
{
    if v0.dim() != h.dim() {
        return Err(Error::shape("propagate", h.dim(), v0.dim()));
    }
    let norm = v0.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!("initial state is not normalized (‖v‖ = {norm})")));
    }
    let shift = match opts.shift {
        PhaseShift::Expectation => h.expectation(&v0.amplitudes),
        PhaseShift::None => 0.0,
    };
    let rhs = |v: &[Complex64], out: &mut [Complex64]| {
        h.apply_shifted_into(shift, v, out);
        for o in out.iter_mut() {
            *o = Complex64::new(o.im, -o.re);
        }
    };
    let mut buffer = StateVector::new(vec![ZERO; v0.dim()]);
    rk8::integrate(rhs, &v0.amplitudes, times, &opts.integrator, |i, t, y| {
        let phase = Complex64::from_polar(1.0, -shift * t);
        for (b, x) in buffer.amplitudes.iter_mut().zip(y) {
            *b = x * phase;
        }
        observe(i, t, &buffer)
    })
}

/// Propagated states at every time in `times`.
pub fn propagate<G: Generator + ?Sized>(
    h: &G,
    v0: &StateVector,
    times: &[f64],
    tol: f64,
) -> Result<Vec<StateVector>> {
    let mut out = Vec::with_capacity(times.len());
    propagate_with(h, v0, times, &PropagationOptions::with_tol(tol), |_, _, v| {
        out.push(v.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Time series of reduced states with purity and fidelity against the
/// interaction-free evolution.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub rho: Vec<DensityMatrix>,
    pub purity: Vec<f64>,
    pub fidelity: Vec<f64>,
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,re_rho00,re_rho01,im_rho01,re_rho11,purity,fidelity";

impl Trajectory {
    /// Builds the series; fidelity is taken against `e^{−iH_S t} ρ0 e^{iH_S t}`.
    pub fn new(
        times: Vec<f64>,
        rho: Vec<DensityMatrix>,
        h_s: &OperatorMatrix,
        rho0: &DensityMatrix,
    ) -> Result<Self> {
        if times.len() != rho.len() {
            return Err(Error::shape("trajectory", times.len(), rho.len()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("trajectory times must be strictly increasing".into()));
        }
        if h_s.dim() != rho0.dim() {
            return Err(Error::shape("trajectory ideal evolution", rho0.dim(), h_s.dim()));
        }
        let (values, vectors) = linalg::hermitian_eigen(h_s.matrix());
        let mut purities = Vec::with_capacity(rho.len());
        let mut fidelities = Vec::with_capacity(rho.len());
        for (t, r) in times.iter().zip(&rho) {
            let u = linalg::unitary_from_spectrum(&values, &vectors, *t);
            let ideal = rho0.conjugate_by(&u);
            purities.push(purity(r));
            fidelities.push(fidelity(r, &ideal)?);
        }
        Ok(Trajectory {
            times,
            rho,
            purity: purities,
            fidelity: fidelities,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Density-matrix invariants at every sample.
    pub fn validate(&self) -> Result<()> {
        for (t, r) in self.times.iter().zip(&self.rho) {
            r.validate()
                .map_err(|e| Error::Validation(format!("at t = {t}: {e}")))?;
        }
        Ok(())
    }

    /// CSV with header [`TRAJECTORY_CSV_HEADER`]; qubit trajectories only.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        if self.rho.first().map(|r| r.dim()) != Some(2) && !self.is_empty() {
            return Err(Error::shape("trajectory CSV", 2, self.rho[0].dim()));
        }
        writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
        for i in 0..self.len() {
            let m = self.rho[i].matrix();
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                self.times[i],
                m[(0, 0)].re,
                m[(0, 1)].re,
                m[(0, 1)].im,
                m[(1, 1)].re,
                self.purity[i],
                self.fidelity[i]
            )?;
        }
        Ok(())
    }
}

/// One row of a trajectory CSV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub rho: [[Complex64; 2]; 2],
    pub purity: f64,
    pub fidelity: f64,
}

/// Parses a trajectory CSV back into rows, rebuilding the qubit density
/// matrix from its independent entries.
pub fn read_trajectory_csv<R: BufRead>(r: R) -> Result<Vec<TrajectoryRow>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != TRAJECTORY_CSV_HEADER {
        return Err(Error::Validation(format!("unexpected trajectory header {header:?}")));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Validation(format!("row {}: {e}", k + 2)))?;
        if f.len() != 7 {
            return Err(Error::Validation(format!("row {} has {} fields", k + 2, f.len())));
        }
        let off = Complex64::new(f[2], f[3]);
        rows.push(TrajectoryRow {
            t: f[0],
            rho: [
                [Complex64::new(f[1], 0.0), off],
                [off.conj(), Complex64::new(f[4], 0.0)],
            ],
            purity: f[5],
            fidelity: f[6],
        });
    }
    Ok(rows)
}

/// Options for the exact reduced trajectory.
#[derive(Clone, Debug)]
pub struct ExactOptions {
    pub propagation: PropagationOptions,
}

impl ExactOptions {
    pub fn with_tol(tol: f64) -> Self {
        ExactOptions {
            propagation: PropagationOptions::with_tol(tol),
        }
    }
}

/// Exact trajectory plus per-branch integrator diagnostics.
#[derive(Clone, Debug)]
pub struct ExactOutcome {
    pub trajectory: Trajectory,
    pub branch_stats: Vec<IntegrationStats>,
    /// Largest `|‖Ψ_n(t)‖ − 1|` over all branches and samples.
    pub max_norm_drift: f64,
}

/// `ρ_S(t) = Σ_n p_n Tr_B |Ψ_n(t)⟩⟨Ψ_n(t)|` with `Ψ_n(0) = ψ0 ⊗ |n⟩`.
pub fn exact_reduced_trajectory(
    h_total: &PauliOperator,
    h_s: &OperatorMatrix,
    spectrum: &BathSpectrum,
    psi0: &[Complex64],
    times: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    exact_reduced_trajectory_with(h_total, h_s, spectrum, psi0, times, &ExactOptions::with_tol(tol))
        .map(|o| o.trajectory)
}

pub fn exact_reduced_trajectory_with<G: Generator + ?Sized>(
    h_total: &G,
    h_s: &OperatorMatrix,
    spectrum: &BathSpectrum,
    psi0: &[Complex64],
    times: &[f64],
    opts: &ExactOptions,
) -> Result<ExactOutcome> {
    let d = psi0.len();
    if d * spectrum.bath_dim() != h_total.dim() {
        return Err(Error::shape("exact trajectory", h_total.dim(), d * spectrum.bath_dim()));
    }
    let psi_norm = psi0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (psi_norm - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!("initial system state not normalized ({psi_norm})")));
    }
    let branches: Vec<usize> = (0..spectrum.retained()).collect();
    let results = ordered_map(&branches, |&n| {
        let bath: Vec<Complex64> = spectrum.vectors.column(n).iter().copied().collect();
        let v0 = StateVector::product(psi0, &bath);
        let mut rhos = Vec::with_capacity(times.len());
        let mut drift = 0.0_f64;
        let stats = propagate_with(h_total, &v0, times, &opts.propagation, |_, _, v| {
            drift = drift.max((v.norm() - 1.0).abs());
            rhos.push(partial_trace(v, d)?);
            Ok(())
        })
        .map_err(|e| Error::BathState {
            index: n,
            source: Box::new(e),
        })?;
        Ok::<_, Error>((rhos, stats, drift))
    });

    let mut sum: Vec<CMatrix> = vec![CMatrix::zeros(d, d); times.len()];
    let mut branch_stats = Vec::with_capacity(branches.len());
    let mut max_norm_drift = 0.0_f64;
    for (n, result) in results.into_iter().enumerate() {
        let (rhos, stats, drift) = result?;
        let p = Complex64::new(spectrum.weights[n], 0.0);
        for (acc, r) in sum.iter_mut().zip(&rhos) {
            *acc += r.matrix() * p;
        }
        branch_stats.push(stats);
        max_norm_drift = max_norm_drift.max(drift);
    }
    let rho: Vec<DensityMatrix> = sum.into_iter().map(DensityMatrix::from_matrix).collect();
    let rho0 = DensityMatrix::pure(psi0);
    let trajectory = Trajectory::new(times.to_vec(), rho, h_s, &rho0)?;
    Ok(ExactOutcome {
        trajectory,
        branch_stats,
        max_norm_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sigma_z, ONE};
    use crate::model::{sample_parameters, ModelConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> StateVector {
        let mut v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= n);
        StateVector::new(v)
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> OperatorMatrix {
        let a = CMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        OperatorMatrix::hermitian((&a + a.adjoint()) * Complex64::new(0.5, 0.0)).unwrap()
    }

    #[test]
    fn single_qubit_precession_matches_analytic_phases() {
        let omega = 1.3;
        let h = OperatorMatrix::hermitian(sigma_z() * Complex64::new(omega / 2.0, 0.0)).unwrap();
        let psi = default_initial_state();
        let v0 = StateVector::new(psi.to_vec());
        let times = uniform_grid(50.0, 101).unwrap();
        let tol = 1e-10;
        let states = propagate(&h, &v0, &times, tol).unwrap();
        for (t, v) in times.iter().zip(&states) {
            let a0 = psi[0] * Complex64::from_polar(1.0, -omega * t / 2.0);
            let a1 = psi[1] * Complex64::from_polar(1.0, omega * t / 2.0);
            assert!((v.amplitudes[0] - a0).norm() < 10.0 * tol, "t={t}");
            assert!((v.amplitudes[1] - a1).norm() < 10.0 * tol, "t={t}");
        }
    }

    #[test]
    fn random_two_qubit_matches_spectral_propagator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(&mut rng, 4);
        let v0 = random_state(&mut rng, 4);
        let times = uniform_grid(20.0, 41).unwrap();
        let states = propagate(&h, &v0, &times, 1e-10).unwrap();
        for (t, v) in times.iter().zip(&states) {
            let u = linalg::expm_hermitian(h.matrix(), *t);
            let want = &u * nalgebra::DVector::from_column_slice(&v0.amplitudes);
            for (a, b) in v.amplitudes.iter().zip(want.iter()) {
                assert!((a - b).norm() < 1e-8, "t={t}");
            }
            assert!((v.norm() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn phase_shift_is_exact_global_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_hermitian(&mut rng, 8);
        let v0 = random_state(&mut rng, 8);
        let times = [0.5, 3.0, 7.5];
        let collect = |shift| {
            let opts = PropagationOptions {
                integrator: Dop853Options::with_tol(1e-12),
                shift,
            };
            let mut out = Vec::new();
            propagate_with(&h, &v0, &times, &opts, |_, _, v| {
                out.push(v.clone());
                Ok(())
            })
            .unwrap();
            out
        };
        for (a, b) in collect(PhaseShift::Expectation).iter().zip(collect(PhaseShift::None)) {
            for (x, y) in a.amplitudes.iter().zip(&b.amplitudes) {
                assert!((x - y).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn propagate_rejects_unnormalized_and_mismatched() {
        let h = OperatorMatrix::hermitian(sigma_z()).unwrap();
        let bad = StateVector::new(vec![ONE, ONE]);
        assert!(matches!(propagate(&h, &bad, &[1.0], 1e-8), Err(Error::Validation(_))));
        let wrong = StateVector::new(vec![ONE, ZERO, ZERO]);
        assert!(matches!(propagate(&h, &wrong, &[1.0], 1e-8), Err(Error::Shape { .. })));
    }

    #[test]
    fn partial_trace_of_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_state(&mut rng, 2);
        let chi = random_state(&mut rng, 8);
        let v = StateVector::product(&psi.amplitudes, &chi.amplitudes);
        let rho = partial_trace_bath(&v).unwrap();
        assert!(linalg::max_abs_diff(rho.matrix(), DensityMatrix::pure(&psi.amplitudes).matrix()) < 1e-15);
    }

    #[test]
    fn partial_trace_of_maximally_entangled_state() {
        // χ0 = |00⟩, χ1 = |11⟩ on two bath qubits.
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut v = vec![ZERO; 8];
        v[0] = a;
        v[4 + 3] = a;
        let rho = partial_trace_bath(&StateVector::new(v)).unwrap();
        assert!(linalg::max_abs_diff(rho.matrix(), DensityMatrix::maximally_mixed(2).matrix()) < 1e-15);
    }

    #[test]
    fn partial_trace_matches_outer_product_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let v = random_state(&mut rng, 16);
        let rho = partial_trace_bath(&v).unwrap();
        let outer = CMatrix::from_fn(16, 16, |i, j| v.amplitudes[i] * v.amplitudes[j].conj());
        for s in 0..2 {
            for t in 0..2 {
                let mut acc = ZERO;
                for b in 0..8 {
                    acc += outer[(s * 8 + b, t * 8 + b)];
                }
                assert!((acc - rho.matrix()[(s, t)]).norm() < 1e-15);
            }
        }
        rho.validate().unwrap();
    }

    #[test]
    fn partial_trace_rejects_unnormalized() {
        let v = StateVector::new(vec![ONE; 4]);
        assert!(matches!(partial_trace_bath(&v), Err(Error::Validation(_))));
    }

    #[test]
    fn basis_convention_round_trips_through_partial_trace() {
        // (|ψ⟩⟨ψ|) ⊗ ρ_B with ρ_B thermal: tracing the bath returns |ψ⟩⟨ψ|.
        let p = sample_parameters(&ModelConfig { n_bath: 3, ..Default::default() }, 3).unwrap();
        let h_b = OperatorMatrix::hermitian(p.bath_operator().unwrap().to_dense(12).unwrap()).unwrap();
        let b = OperatorMatrix::hermitian(p.coupling_operator().unwrap().to_dense(12).unwrap()).unwrap();
        let (spec, _, _) = BathSpectrum::compute(&h_b, &b, 0.25, 8).unwrap();
        let psi = default_initial_state();
        let mut acc = CMatrix::zeros(2, 2);
        for n in 0..8 {
            let bath: Vec<Complex64> = spec.vectors.column(n).iter().copied().collect();
            let r = partial_trace_bath(&StateVector::product(&psi, &bath)).unwrap();
            acc += r.matrix() * Complex64::new(spec.weights[n], 0.0);
        }
        assert!(linalg::max_abs_diff(&acc, DensityMatrix::pure(&psi).matrix()) < 1e-14);
    }

    fn small_setup(lambda: f64, seed: u64) -> (PauliOperator, OperatorMatrix, BathSpectrum) {
        let cfg = ModelConfig {
            n_bath: 3,
            lambda,
            ..Default::default()
        };
        let p = sample_parameters(&cfg, seed).unwrap();
        let h_b = OperatorMatrix::hermitian(p.bath_operator().unwrap().to_dense(12).unwrap()).unwrap();
        let b = OperatorMatrix::hermitian(p.coupling_operator().unwrap().to_dense(12).unwrap()).unwrap();
        let (spec, _, _) = BathSpectrum::compute(&h_b, &b, 0.25, 4).unwrap();
        (p.total_operator().unwrap(), p.system_hamiltonian(), spec)
    }

    #[test]
    fn decoupled_bath_gives_ideal_evolution() {
        let (h, h_s, spec) = small_setup(0.0, 4);
        let times = uniform_grid(30.0, 61).unwrap();
        let traj = exact_reduced_trajectory(&h, &h_s, &spec, &default_initial_state(), &times, 1e-10).unwrap();
        for (p, f) in traj.purity.iter().zip(&traj.fidelity) {
            assert!((p - 1.0).abs() < 1e-8);
            assert!((f - 1.0).abs() < 1e-8);
        }
        let rho0 = DensityMatrix::pure(&default_initial_state());
        assert!(linalg::max_abs_diff(traj.rho[0].matrix(), rho0.matrix()) < 1e-14);
    }

    #[test]
    fn trajectory_invariants_and_weight_rescaling() {
        let (h, h_s, spec) = small_setup(0.3, 6);
        let times = uniform_grid(20.0, 21).unwrap();
        let psi = default_initial_state();
        let a = exact_reduced_trajectory_with(&h, &h_s, &spec, &psi, &times, &ExactOptions::with_tol(1e-10)).unwrap();
        a.trajectory.validate().unwrap();
        assert!(a.max_norm_drift < 1e-8);
        // Doubling then renormalizing the weights is a no-op.
        let mut doubled = spec.clone();
        let z: f64 = doubled.weights.iter().map(|w| 2.0 * w).sum();
        doubled.weights.iter_mut().for_each(|w| *w = 2.0 * *w / z);
        let b = exact_reduced_trajectory(&h, &h_s, &doubled, &psi, &times, 1e-10).unwrap();
        for (x, y) in a.trajectory.rho.iter().zip(&b.rho) {
            assert!(linalg::max_abs_diff(x.matrix(), y.matrix()) < 1e-14);
        }
    }

    #[test]
    fn grid_refinement_keeps_sampled_values() {
        let (h, h_s, spec) = small_setup(0.3, 2);
        let psi = default_initial_state();
        let coarse = uniform_grid(40.0, 21).unwrap();
        let fine = uniform_grid(40.0, 41).unwrap();
        let a = exact_reduced_trajectory(&h, &h_s, &spec, &psi, &coarse, 1e-10).unwrap();
        let b = exact_reduced_trajectory(&h, &h_s, &spec, &psi, &fine, 1e-10).unwrap();
        for (i, r) in a.rho.iter().enumerate() {
            assert_eq!(fine[2 * i], coarse[i]);
            assert!(linalg::max_abs_diff(r.matrix(), b.rho[2 * i].matrix()) < 1e-8);
        }
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let (h, h_s, spec) = small_setup(0.2, 1);
        let times = uniform_grid(5.0, 6).unwrap();
        let traj = exact_reduced_trajectory(&h, &h_s, &spec, &default_initial_state(), &times, 1e-10).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let rows = read_trajectory_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(rows.len(), 6);
        for (row, r) in rows.iter().zip(&traj.rho) {
            assert_eq!(row.rho[0][1], r.matrix()[(0, 1)]);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(uniform_grid(0.0, 10).is_err());
        assert!(uniform_grid(1.0, 1).is_err());
        let g = uniform_grid(300.0, 600).unwrap();
        assert_eq!(g.len(), 600);
        assert_eq!(*g.last().unwrap(), 300.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn partial_traces_are_valid_densities(seed in any::<u64>(), bath_qubits in 0u32..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_state(&mut rng, 2 << bath_qubits);
            let rho = partial_trace_bath(&v).unwrap();
            prop_assert!(rho.validate().is_ok());
        }
    }
}
