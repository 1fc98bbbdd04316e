//! Chaos indicators (unfolded nearest-neighbour spacing statistics and the
//! Loschmidt echo) and the purity / fidelity measures of the reduced state.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::OperatorMatrix;

pub const DEFAULT_UNFOLD_DEGREE: usize = 7;
pub const MIN_UNFOLD_DEGREE: usize = 3;
pub const MAX_UNFOLD_DEGREE: usize = 15;
pub const MIN_UNFOLD_LEVELS: usize = 50;
/// Levels used for spacing statistics.
pub const DEFAULT_LEVELS: usize = 200;
pub const HISTOGRAM_BINS: usize = 24;
pub const HISTOGRAM_MAX: f64 = 4.0;

/// `Tr ρ²`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    linalg::trace_of_product(rho.matrix(), rho.matrix()).re
}

/// `Tr(ρ ρ_ideal)`; the imaginary part must vanish to 1e-10.
pub fn fidelity(rho: &DensityMatrix, ideal: &DensityMatrix) -> Result<f64> {
    if rho.dim() != ideal.dim() {
        return Err(Error::shape("fidelity", rho.dim(), ideal.dim()));
    }
    let f = linalg::trace_of_product(rho.matrix(), ideal.matrix());
    if f.im.abs() > 1e-10 {
        return Err(Error::Validation(format!(
            "fidelity has imaginary part {:.3e}",
            f.im
        )));
    }
    Ok(f.re)
}

/// Poisson spacing CDF `1 − e^{−s}`.
pub fn poisson_cdf(s: f64) -> f64 {
    1.0 - (-s).exp()
}

/// Wigner surmise CDF `1 − e^{−πs²/4}`.
pub fn wigner_dyson_cdf(s: f64) -> f64 {
    1.0 - (-PI * s * s / 4.0).exp()
}

pub fn poisson_pdf(s: f64) -> f64 {
    (-s).exp()
}

pub fn wigner_dyson_pdf(s: f64) -> f64 {
    PI / 2.0 * s * (-PI * s * s / 4.0).exp()
}

/// Least-squares Chebyshev fit of the staircase `N(E_i) = i − ½`.
struct StaircaseFit {
    center: f64,
    half_width: f64,
    coefficients: DVector<f64>,
}

fn chebyshev_row(x: f64, degree: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(degree + 1);
    row.push(1.0);
    if degree >= 1 {
        row.push(x);
    }
    for k in 2..=degree {
        let next = 2.0 * x * row[k - 1] - row[k - 2];
        row.push(next);
    }
    row
}

impl StaircaseFit {
    fn new(energies: &[f64], degree: usize) -> Result<Self> {
        let (lo, hi) = (energies[0], energies[energies.len() - 1]);
        if !(hi > lo) {
            return Err(Error::Unfolding("spectrum has zero width".into()));
        }
        let center = 0.5 * (lo + hi);
        let half_width = 0.5 * (hi - lo);
        let n = energies.len();
        let design = DMatrix::from_fn(n, degree + 1, |i, k| {
            chebyshev_row((energies[i] - center) / half_width, degree)[k]
        });
        let staircase = DVector::from_iterator(n, (0..n).map(|i| i as f64 + 0.5));
        let coefficients = design
            .svd(true, true)
            .solve(&staircase, 1e-14)
            .map_err(|e| Error::Unfolding(format!("least-squares fit failed: {e}")))?;
        Ok(StaircaseFit {
            center,
            half_width,
            coefficients,
        })
    }

    fn eval(&self, e: f64) -> f64 {
        let x = (e - self.center) / self.half_width;
        chebyshev_row(x, self.coefficients.len() - 1)
            .iter()
            .zip(self.coefficients.iter())
            .map(|(t, c)| t * c)
            .sum()
    }
}

/// Maps ascending eigenvalues through a smooth polynomial fit of their
/// cumulative count, so the unfolded levels have unit mean spacing.
pub fn unfold_spectrum(energies: &[f64], degree: usize) -> Result<Vec<f64>> {
    if energies.len() < MIN_UNFOLD_LEVELS {
        return Err(Error::Domain(format!(
            "unfolding needs at least {MIN_UNFOLD_LEVELS} levels, got {}",
            energies.len()
        )));
    }
    if !(MIN_UNFOLD_DEGREE..=MAX_UNFOLD_DEGREE).contains(&degree) {
        return Err(Error::Domain(format!(
            "unfolding degree must lie in {MIN_UNFOLD_DEGREE}..={MAX_UNFOLD_DEGREE}, got {degree}"
        )));
    }
    if energies.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("eigenvalues must be ascending".into()));
    }
    let fit = StaircaseFit::new(energies, degree)?;
    let (lo, hi) = (energies[0], energies[energies.len() - 1]);
    let probes = 20 * energies.len();
    let mut previous = fit.eval(lo);
    for k in 1..=probes {
        let value = fit.eval(lo + (hi - lo) * k as f64 / probes as f64);
        if value < previous - 1e-9 {
            return Err(Error::Unfolding(format!(
                "degree-{degree} staircase fit is not monotone on the data range; try a lower degree"
            )));
        }
        previous = value;
    }
    Ok(energies.iter().map(|&e| fit.eval(e)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
    /// Spacings beyond the last edge (excluded from the normalization).
    pub overflow: usize,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn integral(&self) -> f64 {
        self.edges
            .windows(2)
            .zip(&self.densities)
            .map(|(w, d)| (w[1] - w[0]) * d)
            .sum()
    }
}

/// Nearest-neighbour spacing statistics of an unfolded spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingStatistics {
    pub raw_energies: Vec<f64>,
    pub unfolded: Vec<f64>,
    pub spacings: Vec<f64>,
    pub histogram: Histogram,
    /// Sup-distance between the empirical spacing CDF and `1 − e^{−s}`.
    pub d_poisson: f64,
    /// Sup-distance between the empirical spacing CDF and `1 − e^{−πs²/4}`.
    pub d_wd: f64,
    pub mean_spacing: f64,
    pub degree: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingSummary {
    #[serde(rename = "D_poisson")]
    pub d_poisson: f64,
    #[serde(rename = "D_wd")]
    pub d_wd: f64,
    pub mean_spacing: f64,
    pub n_levels: usize,
    pub degree: Option<usize>,
    /// Fraction of spacings below 0.1.
    pub small_spacing_fraction: f64,
}

/// Kolmogorov sup-distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let f = cdf(s);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Spacings, display histogram and CDF distances to the Poisson and
/// Wigner–Dyson laws. Spacings are used as unfolded, not rescaled.
pub fn spacing_distribution(unfolded: &[f64]) -> Result<SpacingStatistics> {
    if unfolded.len() < 2 {
        return Err(Error::Domain("need at least two levels for spacings".into()));
    }
    let spacings: Vec<f64> = unfolded.windows(2).map(|w| w[1] - w[0]).collect();
    if spacings.iter().any(|&s| s < 0.0 || !s.is_finite()) {
        return Err(Error::Domain("unfolded levels must be ascending".into()));
    }
    let width = HISTOGRAM_MAX / HISTOGRAM_BINS as f64;
    let edges: Vec<f64> = (0..=HISTOGRAM_BINS).map(|k| k as f64 * width).collect();
    let mut counts = vec![0usize; HISTOGRAM_BINS];
    let mut overflow = 0usize;
    for &s in &spacings {
        let k = (s / width) as usize;
        if k < HISTOGRAM_BINS {
            counts[k] += 1;
        } else if s == HISTOGRAM_MAX {
            counts[HISTOGRAM_BINS - 1] += 1;
        } else {
            overflow += 1;
        }
    }
    let inside = (spacings.len() - overflow).max(1) as f64;
    let densities = counts.iter().map(|&c| c as f64 / (inside * width)).collect();
    let mean_spacing = spacings.iter().sum::<f64>() / spacings.len() as f64;
    Ok(SpacingStatistics {
        raw_energies: unfolded.to_vec(),
        unfolded: unfolded.to_vec(),
        d_poisson: ks_distance(&spacings, poisson_cdf),
        d_wd: ks_distance(&spacings, wigner_dyson_cdf),
        spacings,
        histogram: Histogram {
            edges,
            densities,
            overflow,
        },
        mean_spacing,
        degree: None,
    })
}

/// Unfold the lowest `n_levels` eigenvalues and compute their statistics.
pub fn level_statistics(energies: &[f64], n_levels: usize, degree: usize) -> Result<SpacingStatistics> {
    if energies.len() < n_levels {
        return Err(Error::Domain(format!(
            "requested {n_levels} levels but only {} available",
            energies.len()
        )));
    }
    let raw = &energies[..n_levels];
    let unfolded = unfold_spectrum(raw, degree)?;
    let mut stats = spacing_distribution(&unfolded)?;
    stats.raw_energies = raw.to_vec();
    stats.degree = Some(degree);
    Ok(stats)
}

impl SpacingStatistics {
    pub fn summary(&self) -> SpacingSummary {
        let small = self.spacings.iter().filter(|&&s| s < 0.1).count();
        SpacingSummary {
            d_poisson: self.d_poisson,
            d_wd: self.d_wd,
            mean_spacing: self.mean_spacing,
            n_levels: self.unfolded.len(),
            degree: self.degree,
            small_spacing_fraction: small as f64 / self.spacings.len() as f64,
        }
    }

    /// CSV of `bin_center,density`.
    pub fn write_histogram_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_center,density")?;
        for (c, d) in self.histogram.centers().iter().zip(&self.histogram.densities) {
            writeln!(w, "{c:e},{d:e}")?;
        }
        Ok(())
    }
}

/// Loschmidt echo samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EchoSeries {
    pub times: Vec<f64>,
    pub echo: Vec<f64>,
}

impl EchoSeries {
    /// Early-time exponential rate: least-squares fit of `ln M = −Γ t`
    /// through the origin over the samples up to and including the first
    /// one with `M ≤ 1/e`. `None` if no sample with `t > 0` qualifies.
    pub fn decay_rate(&self) -> Option<f64> {
        let threshold = (-1.0_f64).exp();
        let mut num = 0.0;
        let mut den = 0.0;
        for (&t, &m) in self.times.iter().zip(&self.echo) {
            if t > 0.0 && m > 0.0 {
                num += t * m.ln();
                den += t * t;
            }
            if m <= threshold {
                break;
            }
        }
        (den > 0.0).then(|| -num / den)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,M")?;
        for (t, m) in self.times.iter().zip(&self.echo) {
            writeln!(w, "{t:e},{m:e}")?;
        }
        Ok(())
    }
}

/// `M(t) = |⟨ψ0| e^{iH0 t} e^{−i(H0+V)t} |ψ0⟩|²` with `ψ0` the ground state
/// of `H0`, both propagators taken from dense spectral decompositions.
pub fn loschmidt_echo(h0: &OperatorMatrix, v: &OperatorMatrix, times: &[f64]) -> Result<EchoSeries> {
    if h0.dim() != v.dim() {
        return Err(Error::shape("Loschmidt echo", h0.dim(), v.dim()));
    }
    if !h0.is_hermitian() || !v.is_hermitian() {
        return Err(Error::Validation("echo operators must be Hermitian".into()));
    }
    let total = h0.matrix() + v.matrix();
    let (energies, vectors) = linalg::try_hermitian_eigen(&total)?;
    loschmidt_echo_in_basis(h0, &energies, &vectors, times)
}

/// Echo with the perturbed Hamiltonian given by its full eigen-decomposition
/// (`energies` ascending, `vectors` as columns).
pub fn loschmidt_echo_in_basis(
    h0: &OperatorMatrix,
    energies: &[f64],
    vectors: &CMatrix,
    times: &[f64],
) -> Result<EchoSeries> {
    if vectors.nrows() != h0.dim() || vectors.ncols() != energies.len() {
        return Err(Error::shape("Loschmidt echo basis", h0.dim(), vectors.nrows()));
    }
    let psi0 = ground_state(h0)?;
    let overlaps = vectors.adjoint() * psi0;
    Ok(echo_from_overlaps(energies, overlaps.as_slice(), times))
}

/// Lowest eigenvector; a degenerate ground level is reported and the
/// solver's first vector kept.
pub fn ground_state(h0: &OperatorMatrix) -> Result<DVector<Complex64>> {
    if !h0.is_hermitian() {
        return Err(Error::Validation("H0 must be Hermitian".into()));
    }
    let (e0, vecs0) = linalg::try_hermitian_eigen(h0.matrix())?;
    let scale = e0.iter().fold(1.0_f64, |a, e| a.max(e.abs()));
    if e0.len() > 1 && e0[1] - e0[0] < 1e-10 * scale {
        log::warn!("H0 ground state is degenerate; using the solver's lowest eigenvector");
    }
    Ok(vecs0.column(0).into_owned())
}

/// Echo for a state with amplitudes `overlaps` in the eigenbasis
/// `energies` of the perturbed Hamiltonian.
pub fn echo_from_overlaps(energies: &[f64], overlaps: &[Complex64], times: &[f64]) -> EchoSeries {
    let weights: Vec<f64> = overlaps.iter().map(|c| c.norm_sqr()).collect();
    let e_ref = energies.first().copied().unwrap_or(0.0);
    let echo = times
        .iter()
        .map(|&t| {
            let amp: Complex64 = weights
                .iter()
                .zip(energies)
                .map(|(w, e)| Complex64::from_polar(*w, -(e - e_ref) * t))
                .sum();
            amp.norm_sqr()
        })
        .collect();
    EchoSeries {
        times: times.to_vec(),
        echo,
    }
}
