//! Experiment orchestration: sweeps over `J_x` and seeds, exact vs Kraus
//! comparison, chaos diagnostics and artifact emission.

mod report;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, EchoSeries, SpacingStatistics};
use crate::dynamics::{
    default_initial_state, exact_reduced_trajectory_with, uniform_grid, DensityMatrix, ExactOptions,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::kraus::{build_ensemble, propagate_kraus};
use crate::model::{sample_parameters, ModelConfig, ModelParameters, OperatorMatrix};
use crate::parallel::ordered_map;
use crate::spectral::{
    coupling_matrix_elements, diagonalize_bath_full, offdiag_suppression, BathSpectrum, CouplingMatrix,
    Suppression,
};

pub use report::{
    emit_report, render_table, seed_majority, validate_outputs, write_metadata, ComparisonReport,
    JxPanel, PointFailure, PointMetrics, ReportFormat, TrendCount,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeWindow {
    pub t_max: f64,
    pub n_samples: usize,
}

impl TimeWindow {
    pub fn grid(&self) -> Result<Vec<f64>> {
        uniform_grid(self.t_max, self.n_samples)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub jx: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep {
            jx: vec![0.5, 1.0, 2.0],
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

/// Settings of the level-statistics and echo diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaosOptions {
    pub levels: usize,
    pub degree: usize,
    pub echo_short: TimeWindow,
    pub echo_long: TimeWindow,
    /// Energy window (ε) for the off-diagonal coupling diagnostic.
    pub offdiag_window: f64,
}

impl Default for ChaosOptions {
    fn default() -> Self {
        ChaosOptions {
            levels: diagnostics::DEFAULT_LEVELS,
            degree: diagnostics::DEFAULT_UNFOLD_DEGREE,
            echo_short: TimeWindow {
                t_max: 5.0,
                n_samples: 501,
            },
            echo_long: TimeWindow {
                t_max: 100.0,
                n_samples: 1001,
            },
            offdiag_window: 1.0,
        }
    }
}

/// A full experiment, read from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub output_dir: PathBuf,
    /// Retained bath states `m`.
    pub retained: usize,
    /// Integrator tolerance (absolute and relative).
    pub tol: f64,
    pub dense_cap_qubits: usize,
    pub model: ModelConfig,
    pub times: TimeWindow,
    pub sweep: Sweep,
    pub chaos: ChaosOptions,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            output_dir: PathBuf::from("out"),
            retained: crate::spectral::DEFAULT_RETAINED,
            tol: crate::dynamics::DEFAULT_TOL,
            dense_cap_qubits: crate::model::DEFAULT_DENSE_CAP_QUBITS,
            model: ModelConfig::default(),
            times: TimeWindow {
                t_max: crate::dynamics::DEFAULT_T_MAX,
                n_samples: crate::dynamics::DEFAULT_SAMPLES,
            },
            sweep: Sweep::default(),
            chaos: ChaosOptions::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        uniform_grid(self.times.t_max, self.times.n_samples)?;
        uniform_grid(self.chaos.echo_short.t_max, self.chaos.echo_short.n_samples)?;
        uniform_grid(self.chaos.echo_long.t_max, self.chaos.echo_long.n_samples)?;
        if self.sweep.jx.is_empty() || self.sweep.seeds.is_empty() {
            return Err(Error::Config("sweep lists must be nonempty".into()));
        }
        if let Some(jx) = self.sweep.jx.iter().find(|j| !(**j >= 0.0 && j.is_finite())) {
            return Err(Error::Config(format!("sweep jx values must be finite and non-negative, got {jx}")));
        }
        if self.retained == 0 {
            return Err(Error::Config("retained must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        if !(diagnostics::MIN_UNFOLD_DEGREE..=diagnostics::MAX_UNFOLD_DEGREE).contains(&self.chaos.degree) {
            return Err(Error::Config(format!(
                "unfolding degree must lie in {}..={}",
                diagnostics::MIN_UNFOLD_DEGREE,
                diagnostics::MAX_UNFOLD_DEGREE
            )));
        }
        if !(self.chaos.offdiag_window > 0.0) {
            return Err(Error::Config("offdiag_window must be positive".into()));
        }
        Ok(())
    }

    /// Model configuration of one sweep point.
    pub fn point_config(&self, jx: f64, seed: u64) -> ModelConfig {
        ModelConfig {
            jx,
            seed,
            ..self.model.clone()
        }
    }

    pub fn points(&self) -> Vec<(f64, u64)> {
        self.sweep
            .jx
            .iter()
            .flat_map(|&jx| self.sweep.seeds.iter().map(move |&s| (jx, s)))
            .collect()
    }

    pub fn check_capacity(&self) -> Result<()> {
        let qubits = self.model.n_bath + 1;
        if qubits > self.dense_cap_qubits {
            return Err(Error::Capacity {
                qubits,
                cap: self.dense_cap_qubits,
            });
        }
        Ok(())
    }
}

/// Bath-side results of one parameter draw: one dense diagonalization of
/// `H_B` feeds the thermal spectrum, the level statistics and the echo.
#[derive(Clone, Debug)]
pub struct BathAnalysis {
    pub spectrum: BathSpectrum,
    pub coupling: CouplingMatrix,
    pub suppression: Suppression,
    pub spacing: std::result::Result<SpacingStatistics, String>,
    pub echo_short: EchoSeries,
    pub echo_long: EchoSeries,
}

/// Level statistics at the configured unfolding degree, stepping down to
/// the minimum degree while the staircase fit is not monotone. The degree
/// actually used is stored in the result.
pub fn spacing_with_fallback(
    energies: &[f64],
    levels: usize,
    degree: usize,
) -> std::result::Result<SpacingStatistics, String> {
    let mut last = String::new();
    for d in (diagnostics::MIN_UNFOLD_DEGREE..=degree).rev() {
        match diagnostics::level_statistics(energies, levels, d) {
            Ok(stats) => {
                if d != degree {
                    log::info!("unfolding fell back from degree {degree} to {d}");
                }
                return Ok(stats);
            }
            Err(e @ Error::Unfolding(_)) => last = e.to_string(),
            Err(e) => return Err(e.to_string()),
        }
    }
    log::warn!("no monotone staircase fit at degrees {}..={degree}", diagnostics::MIN_UNFOLD_DEGREE);
    Err(last)
}

pub fn analyze_bath(p: &ModelParameters, spec: &ExperimentSpec) -> Result<BathAnalysis> {
    let cap = spec.dense_cap_qubits;
    let h_b = OperatorMatrix::hermitian(p.bath_operator()?.to_dense(cap)?)?;
    let b = OperatorMatrix::hermitian(p.coupling_operator()?.to_dense(cap)?)?;
    let m = spec.retained.min(h_b.dim());
    let (eigen, all_vectors) = diagonalize_bath_full(&h_b, m)?;
    let coupling = coupling_matrix_elements(&b, &eigen)?;
    let spectrum = BathSpectrum::new(&eigen, &coupling, p.kt)?;
    let suppression = if m >= 2 {
        offdiag_suppression(&coupling, spec.chaos.offdiag_window)?
    } else {
        Suppression {
            ratio: f64::INFINITY,
            rms_offdiag: 0.0,
            rms_diag_spread: 0.0,
            pairs: 0,
            degenerate_denominator: true,
        }
    };
    let spacing = spacing_with_fallback(&eigen.values, spec.chaos.levels.min(eigen.values.len()), spec.chaos.degree);
    let h0 = OperatorMatrix::hermitian(p.bath_field_operator()?.to_dense(cap)?)?;
    let short = spec.chaos.echo_short.grid()?;
    let long = spec.chaos.echo_long.grid()?;
    let echo_short = diagnostics::loschmidt_echo_in_basis(&h0, &eigen.values, &all_vectors, &short)?;
    let echo_long = diagnostics::loschmidt_echo_in_basis(&h0, &eigen.values, &all_vectors, &long)?;
    Ok(BathAnalysis {
        spectrum,
        coupling,
        suppression,
        spacing,
        echo_short,
        echo_long,
    })
}

/// Everything computed at one `(J_x, seed)` point.
#[derive(Clone, Debug)]
pub struct PointOutcome {
    pub jx: f64,
    pub seed: u64,
    pub parameters: ModelParameters,
    pub bath: BathAnalysis,
    pub exact: Trajectory,
    pub kraus: Trajectory,
    pub max_norm_drift: f64,
    pub rhs_evaluations: usize,
    pub metrics: PointMetrics,
}

/// Sample, assemble, diagonalize, propagate exactly and through the Kraus
/// ensemble, and compare.
pub fn run_point(spec: &ExperimentSpec, jx: f64, seed: u64) -> Result<PointOutcome> {
    spec.check_capacity()?;
    let config = spec.point_config(jx, seed);
    let parameters = sample_parameters(&config, seed)?;
    let bath = analyze_bath(&parameters, spec)?;
    let times = spec.times.grid()?;
    let psi0 = default_initial_state();
    let h_s = parameters.system_hamiltonian();
    let h_total = parameters.total_operator()?;
    let exact = exact_reduced_trajectory_with(
        &h_total,
        &h_s,
        &bath.spectrum,
        &psi0,
        &times,
        &ExactOptions::with_tol(spec.tol),
    )?;
    let ensemble = build_ensemble(&h_s, &crate::model::system_coupling(), &bath.spectrum)?;
    let kraus = propagate_kraus(&ensemble, &DensityMatrix::pure(&psi0), &times)?;
    let rhs_evaluations = exact.branch_stats.iter().map(|s| s.evaluations).sum();
    let metrics = PointMetrics::compute(jx, seed, &exact.trajectory, &kraus, &bath)?;
    Ok(PointOutcome {
        jx,
        seed,
        parameters,
        bath,
        exact: exact.trajectory,
        kraus,
        max_norm_drift: exact.max_norm_drift,
        rhs_evaluations,
        metrics,
    })
}

/// Directory name of a sweep point.
pub fn point_dir_name(jx: f64, seed: u64) -> String {
    format!("jx{jx}_seed{seed}")
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    Ok(std::io::BufWriter::new(fs::File::create(path)?))
}

/// Writes `parameters.json`, `spectrum.csv`, `coupling.json`, the spacing
/// files (when unfolding succeeded) and both echo series into `dir`.
pub fn write_bath_artifacts(dir: &Path, p: &ModelParameters, bath: &BathAnalysis) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("parameters.json"), serde_json::to_string_pretty(p)? + "\n")?;
    bath.spectrum.write_csv(create(&dir.join("spectrum.csv"))?)?;
    fs::write(dir.join("coupling.json"), bath.coupling.to_json()? + "\n")?;
    if let Ok(stats) = &bath.spacing {
        stats.write_histogram_csv(create(&dir.join("spacing_histogram.csv"))?)?;
        fs::write(
            dir.join("spacing.json"),
            serde_json::to_string_pretty(&stats.summary())? + "\n",
        )?;
    }
    bath.echo_short.write_csv(create(&dir.join("echo_short.csv"))?)?;
    bath.echo_long.write_csv(create(&dir.join("echo_long.csv"))?)?;
    Ok(())
}

/// Writes the per-point artifacts under `<output_dir>/points/<jx…_seed…>/`.
pub fn write_point_artifacts(spec: &ExperimentSpec, outcome: &PointOutcome) -> Result<PathBuf> {
    let dir = spec
        .output_dir
        .join("points")
        .join(point_dir_name(outcome.jx, outcome.seed));
    write_bath_artifacts(&dir, &outcome.parameters, &outcome.bath)?;
    outcome.exact.write_csv(create(&dir.join("exact.csv"))?)?;
    outcome.kraus.write_csv(create(&dir.join("kraus.csv"))?)?;
    Ok(dir)
}

/// Runs every sweep point (in parallel, results in sweep order). A failing
/// point is reported with its coordinates and does not stop the others.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<(f64, u64, Result<PointOutcome>)>> {
    spec.validate()?;
    let points = spec.points();
    let results = ordered_map(&points, |&(jx, seed)| {
        let r = run_point(spec, jx, seed).map_err(|e| Error::SweepPoint {
            jx,
            seed,
            source: Box::new(e),
        });
        if let Err(e) = &r {
            log::error!("{e}");
        } else {
            log::info!("finished Jx = {jx}, seed = {seed}");
        }
        (jx, seed, r)
    });
    Ok(results)
}

/// Full pipeline: sweep, per-point artifacts, report files.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ComparisonReport> {
    let results = run_sweep(spec)?;
    let mut metrics = Vec::new();
    let mut failures = Vec::new();
    for (jx, seed, r) in results {
        match r.and_then(|o| write_point_artifacts(spec, &o).map(|_| o)) {
            Ok(o) => metrics.push(o.metrics),
            Err(e) => failures.push(PointFailure::new(jx, seed, &e)),
        }
    }
    let report = ComparisonReport::new(spec, metrics, failures);
    emit_report(&report, &spec.output_dir, ReportFormat::All)?;
    write_metadata(&spec.output_dir, spec, &report)?;
    Ok(report)
}

/// Level statistics and echo of one `(J_x, seed)` draw.
#[derive(Clone, Debug)]
pub struct ChaosPoint {
    pub jx: f64,
    pub seed: u64,
    pub spacing: std::result::Result<SpacingStatistics, String>,
    pub echo_short: EchoSeries,
    pub echo_long: EchoSeries,
    pub echo_rate: Option<f64>,
}

/// Spacing statistics and echo series for every sweep point, written under
/// `<output_dir>/chaos/`. No propagation is performed.
pub fn run_chaos_suite(spec: &ExperimentSpec) -> Result<Vec<ChaosPoint>> {
    spec.validate()?;
    spec.check_capacity()?;
    let points = spec.points();
    let results = ordered_map(&points, |&(jx, seed)| -> Result<(ChaosPoint, ModelParameters, BathAnalysis)> {
        let wrap = |e: Error| Error::SweepPoint {
            jx,
            seed,
            source: Box::new(e),
        };
        let p = sample_parameters(&spec.point_config(jx, seed), seed).map_err(wrap)?;
        let bath = analyze_bath(&p, spec).map_err(wrap)?;
        let point = ChaosPoint {
            jx,
            seed,
            spacing: bath.spacing.clone(),
            echo_rate: bath.echo_short.decay_rate(),
            echo_short: bath.echo_short.clone(),
            echo_long: bath.echo_long.clone(),
        };
        Ok((point, p, bath))
    });
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        let (point, p, bath) = r?;
        let dir = spec
            .output_dir
            .join("chaos")
            .join(point_dir_name(point.jx, point.seed));
        write_bath_artifacts(&dir, &p, &bath)?;
        out.push(point);
    }
    write_chaos_summary(&spec.output_dir.join("chaos"), &out)?;
    Ok(out)
}

fn write_chaos_summary(dir: &Path, points: &[ChaosPoint]) -> Result<()> {
    use std::io::Write;
    fs::create_dir_all(dir)?;
    let mut w = create(&dir.join("summary.csv"))?;
    writeln!(w, "jx,seed,D_poisson,D_wd,mean_spacing,small_spacing_fraction,echo_rate")?;
    for p in points {
        let rate = p.echo_rate.map(|r| format!("{r:e}")).unwrap_or_default();
        match &p.spacing {
            Ok(s) => {
                let s = s.summary();
                writeln!(
                    w,
                    "{},{},{:e},{:e},{:e},{:e},{rate}",
                    p.jx, p.seed, s.d_poisson, s.d_wd, s.mean_spacing, s.small_spacing_fraction
                )?;
            }
            Err(_) => writeln!(w, "{},{},,,,,{rate}", p.jx, p.seed)?,
        }
    }
    Ok(())
}
