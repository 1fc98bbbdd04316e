use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{point_dir_name, BathAnalysis, ExperimentSpec};
use crate::diagnostics::SpacingSummary;
use crate::dynamics::{read_trajectory_csv, DensityMatrix, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Exact vs Kraus comparison at one `(J_x, seed)` point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub jx: f64,
    pub seed: u64,
    /// `mean_t |P_exact − P_kraus|`.
    pub mean_abs_dp: f64,
    pub mean_abs_df: f64,
    pub max_abs_dp: f64,
    pub max_abs_df: f64,
    /// Largest density-element deviation over the grid.
    pub max_rho_deviation: f64,
    pub min_purity_exact: f64,
    pub min_purity_kraus: f64,
    pub min_fidelity_exact: f64,
    pub min_fidelity_kraus: f64,
    /// `max_t (1 − P_exact)`.
    pub exact_purity_range: f64,
    /// `max_t (1 − F_exact)`.
    pub exact_fidelity_range: f64,
    /// `(1 − min F) / (1 − min P)` of the exact signal; `None` if `P ≡ 1`.
    pub fidelity_purity_ratio_exact: Option<f64>,
    pub fidelity_purity_ratio_kraus: Option<f64>,
    /// Off-diagonal coupling suppression ratio; `None` when the diagonal
    /// spread vanishes.
    pub offdiag_ratio: Option<f64>,
    /// Off-diagonal pairs inside the energy window.
    pub offdiag_pairs: usize,
    /// Smallest retained Boltzmann weight `p[m−1]`.
    pub tail_weight: f64,
    pub degenerate_pairs: usize,
    /// Early-time exponential decay rate of the echo.
    pub echo_rate: Option<f64>,
    pub spacing: Option<SpacingSummary>,
    pub spacing_error: Option<String>,
}

fn ratio(min_f: f64, min_p: f64) -> Option<f64> {
    let den = 1.0 - min_p;
    (den > 0.0).then(|| (1.0 - min_f) / den)
}

fn min(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

impl PointMetrics {
    pub fn compute(
        jx: f64,
        seed: u64,
        exact: &Trajectory,
        kraus: &Trajectory,
        bath: &BathAnalysis,
    ) -> Result<Self> {
        if exact.len() != kraus.len() || exact.is_empty() {
            return Err(Error::shape("comparison", exact.len(), kraus.len()));
        }
        let n = exact.len() as f64;
        let dp: Vec<f64> = exact.purity.iter().zip(&kraus.purity).map(|(a, b)| (a - b).abs()).collect();
        let df: Vec<f64> = exact.fidelity.iter().zip(&kraus.fidelity).map(|(a, b)| (a - b).abs()).collect();
        let max_rho_deviation = exact
            .rho
            .iter()
            .zip(&kraus.rho)
            .map(|(a, b)| linalg::max_abs_diff(a.matrix(), b.matrix()))
            .fold(0.0, f64::max);
        let (min_pe, min_pk) = (min(&exact.purity), min(&kraus.purity));
        let (min_fe, min_fk) = (min(&exact.fidelity), min(&kraus.fidelity));
        let (spacing, spacing_error) = match &bath.spacing {
            Ok(s) => (Some(s.summary()), None),
            Err(e) => (None, Some(e.clone())),
        };
        Ok(PointMetrics {
            jx,
            seed,
            mean_abs_dp: dp.iter().sum::<f64>() / n,
            mean_abs_df: df.iter().sum::<f64>() / n,
            max_abs_dp: dp.iter().copied().fold(0.0, f64::max),
            max_abs_df: df.iter().copied().fold(0.0, f64::max),
            max_rho_deviation,
            min_purity_exact: min_pe,
            min_purity_kraus: min_pk,
            min_fidelity_exact: min_fe,
            min_fidelity_kraus: min_fk,
            exact_purity_range: 1.0 - min_pe,
            exact_fidelity_range: 1.0 - min_fe,
            fidelity_purity_ratio_exact: ratio(min_fe, min_pe),
            fidelity_purity_ratio_kraus: ratio(min_fk, min_pk),
            offdiag_ratio: (!bath.suppression.degenerate_denominator).then_some(bath.suppression.ratio),
            offdiag_pairs: bath.suppression.pairs,
            tail_weight: bath.spectrum.tail_weight(),
            degenerate_pairs: bath.spectrum.degenerate_pairs,
            echo_rate: bath.echo_short.decay_rate(),
            spacing,
            spacing_error,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub jx: f64,
    pub seed: u64,
    pub error: String,
    pub exit_code: i32,
}

impl PointFailure {
    pub fn new(jx: f64, seed: u64, error: &Error) -> Self {
        PointFailure {
            jx,
            seed,
            error: error.to_string(),
            exit_code: error.exit_code(),
        }
    }
}

/// Seed averages at one `J_x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JxPanel {
    pub jx: f64,
    pub seeds: usize,
    pub mean_abs_dp: f64,
    pub mean_abs_df: f64,
    pub exact_purity_range: f64,
    pub exact_fidelity_range: f64,
    pub min_purity_exact: f64,
    pub min_purity_kraus: f64,
    pub min_fidelity_exact: f64,
    pub min_fidelity_kraus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub n_bath: usize,
    pub retained: usize,
    pub kt: f64,
    pub lambda: f64,
    pub tol: f64,
    pub t_max: f64,
    pub n_samples: usize,
    pub points: Vec<PointMetrics>,
    pub panels: Vec<JxPanel>,
    pub failures: Vec<PointFailure>,
}

impl ComparisonReport {
    pub fn new(spec: &ExperimentSpec, points: Vec<PointMetrics>, failures: Vec<PointFailure>) -> Self {
        let mut panels = Vec::new();
        for &jx in &spec.sweep.jx {
            let at: Vec<&PointMetrics> = points.iter().filter(|p| p.jx == jx).collect();
            if at.is_empty() || panels.iter().any(|p: &JxPanel| p.jx == jx) {
                continue;
            }
            let k = at.len() as f64;
            let mean = |f: fn(&PointMetrics) -> f64| at.iter().map(|p| f(p)).sum::<f64>() / k;
            panels.push(JxPanel {
                jx,
                seeds: at.len(),
                mean_abs_dp: mean(|p| p.mean_abs_dp),
                mean_abs_df: mean(|p| p.mean_abs_df),
                exact_purity_range: mean(|p| p.exact_purity_range),
                exact_fidelity_range: mean(|p| p.exact_fidelity_range),
                min_purity_exact: mean(|p| p.min_purity_exact),
                min_purity_kraus: mean(|p| p.min_purity_kraus),
                min_fidelity_exact: mean(|p| p.min_fidelity_exact),
                min_fidelity_kraus: mean(|p| p.min_fidelity_kraus),
            });
        }
        ComparisonReport {
            n_bath: spec.model.n_bath,
            retained: spec.retained,
            kt: spec.model.kt,
            lambda: spec.model.lambda,
            tol: spec.tol,
            t_max: spec.times.t_max,
            n_samples: spec.times.n_samples,
            points,
            panels,
            failures,
        }
    }

    pub fn point(&self, jx: f64, seed: u64) -> Option<&PointMetrics> {
        self.points.iter().find(|p| p.jx == jx && p.seed == seed)
    }
}

/// Seeds for which a per-point quantity follows the requested ordering
/// across an ordered list of `J_x` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendCount {
    pub satisfied: usize,
    pub seeds: usize,
}

impl TrendCount {
    pub fn majority(&self) -> bool {
        2 * self.satisfied > self.seeds
    }
}

/// Counts seeds whose `metric` is strictly increasing (`increasing = true`)
/// or strictly decreasing along `jx_values`. Seeds missing a value count as
/// unsatisfied.
pub fn seed_majority<T>(
    items: &[T],
    jx_values: &[f64],
    seeds: &[u64],
    key: impl Fn(&T) -> (f64, u64),
    metric: impl Fn(&T) -> Option<f64>,
    increasing: bool,
) -> TrendCount {
    let mut satisfied = 0;
    for &seed in seeds {
        let series: Option<Vec<f64>> = jx_values
            .iter()
            .map(|&jx| items.iter().find(|i| key(i) == (jx, seed)).and_then(&metric))
            .collect();
        let ok = series.is_some_and(|s| {
            s.windows(2)
                .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
        });
        satisfied += usize::from(ok);
    }
    TrendCount {
        satisfied,
        seeds: seeds.len(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
    Csv,
    All,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
}

/// Plain-text table: one panel per `J_x`, exact and Kraus columns side by side.
pub fn render_table(report: &ComparisonReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "N = {}, m = {}, kT = {}, lambda = {}, t in [0, {}] ({} samples), tol = {:e}",
        report.n_bath, report.retained, report.kt, report.lambda, report.t_max, report.n_samples, report.tol
    );
    for panel in &report.panels {
        let _ = writeln!(s, "\nJx = {}", panel.jx);
        let _ = writeln!(
            s,
            "{:>6} {:>11} {:>11} {:>10} {:>10} {:>10} {:>10} {:>8} {:>9}",
            "seed", "mean|dP|", "mean|dF|", "minP ex", "minP kr", "minF ex", "minF kr", "F/P", "echo"
        );
        for p in report.points.iter().filter(|p| p.jx == panel.jx) {
            let _ = writeln!(
                s,
                "{:>6} {:>11.3e} {:>11.3e} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>8} {:>9}",
                p.seed,
                p.mean_abs_dp,
                p.mean_abs_df,
                p.min_purity_exact,
                p.min_purity_kraus,
                p.min_fidelity_exact,
                p.min_fidelity_kraus,
                fmt_opt(p.fidelity_purity_ratio_exact),
                fmt_opt(p.echo_rate),
            );
        }
        let _ = writeln!(
            s,
            "{:>6} {:>11.3e} {:>11.3e} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            "mean",
            panel.mean_abs_dp,
            panel.mean_abs_df,
            panel.min_purity_exact,
            panel.min_purity_kraus,
            panel.min_fidelity_exact,
            panel.min_fidelity_kraus
        );
    }
    for f in &report.failures {
        let _ = writeln!(s, "\nFAILED Jx = {}, seed = {}: {}", f.jx, f.seed, f.error);
    }
    s
}

fn write_summary_csv(report: &ComparisonReport, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(
        w,
        "jx,seed,mean_abs_dp,mean_abs_df,max_abs_dp,max_abs_df,max_rho_deviation,min_purity_exact,min_purity_kraus,min_fidelity_exact,min_fidelity_kraus,exact_purity_range,exact_fidelity_range,offdiag_ratio,tail_weight,echo_rate,D_poisson,D_wd"
    )?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
    for p in &report.points {
        writeln!(
            w,
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{},{},{}",
            p.jx,
            p.seed,
            p.mean_abs_dp,
            p.mean_abs_df,
            p.max_abs_dp,
            p.max_abs_df,
            p.max_rho_deviation,
            p.min_purity_exact,
            p.min_purity_kraus,
            p.min_fidelity_exact,
            p.min_fidelity_kraus,
            p.exact_purity_range,
            p.exact_fidelity_range,
            opt(p.offdiag_ratio),
            p.tail_weight,
            opt(p.echo_rate),
            opt(p.spacing.as_ref().map(|s| s.d_poisson)),
            opt(p.spacing.as_ref().map(|s| s.d_wd)),
        )?;
    }
    Ok(())
}

/// Writes `report.json`, `report.txt` and/or `summary.csv` into `dir`.
/// A report without any sweep point is refused.
pub fn emit_report(report: &ComparisonReport, dir: &Path, format: ReportFormat) -> Result<()> {
    if report.points.is_empty() && report.failures.is_empty() {
        return Err(Error::Config("empty sweep: nothing to report".into()));
    }
    fs::create_dir_all(dir)?;
    if matches!(format, ReportFormat::Json | ReportFormat::All) {
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;
    }
    if matches!(format, ReportFormat::Text | ReportFormat::All) {
        fs::write(dir.join("report.txt"), render_table(report))?;
    }
    if matches!(format, ReportFormat::Csv | ReportFormat::All) {
        write_summary_csv(report, &dir.join("summary.csv"))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Metadata<'a> {
    created_unix_seconds: u64,
    crate_version: &'static str,
    spec: &'a ExperimentSpec,
    points: usize,
    failures: usize,
    /// Near-degenerate retained bath pairs per point; `B_nn` inside such a
    /// pair depends on the eigensolver's choice of basis.
    degenerate_pairs: Vec<(String, usize)>,
}

/// `metadata.json`: the only output that carries a timestamp.
pub fn write_metadata(dir: &Path, spec: &ExperimentSpec, report: &ComparisonReport) -> Result<()> {
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = Metadata {
        created_unix_seconds: created,
        crate_version: env!("CARGO_PKG_VERSION"),
        spec,
        points: report.points.len(),
        failures: report.failures.len(),
        degenerate_pairs: report
            .points
            .iter()
            .map(|p| (point_dir_name(p.jx, p.seed), p.degenerate_pairs))
            .collect(),
    };
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

fn visit_csvs(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            visit_csvs(&path, out)?;
        } else if matches!(path.file_name().and_then(|n| n.to_str()), Some("exact.csv" | "kraus.csv")) {
            out.push(path);
        }
    }
    Ok(())
}

/// Re-reads every trajectory CSV under `dir` and checks the density-matrix
/// invariants and the stored purity at every row. Returns the number of
/// files checked.
pub fn validate_outputs(dir: &Path) -> Result<usize> {
    let mut files = Vec::new();
    visit_csvs(dir, &mut files)?;
    for path in &files {
        let rows = read_trajectory_csv(std::io::BufReader::new(fs::File::open(path)?))?;
        for row in rows {
            let m = CMatrix::from_row_slice(2, 2, &[row.rho[0][0], row.rho[0][1], row.rho[1][0], row.rho[1][1]]);
            let rho = DensityMatrix::from_matrix(m);
            rho.validate().map_err(|e| {
                Error::Validation(format!("{} at t = {}: {e}", path.display(), row.t))
            })?;
            let p = crate::diagnostics::purity(&rho);
            if (p - row.purity).abs() > 1e-10 {
                return Err(Error::Validation(format!(
                    "{} at t = {}: stored purity {} differs from recomputed {p}",
                    path.display(),
                    row.t,
                    row.purity
                )));
            }
        }
    }
    Ok(files.len())
}
