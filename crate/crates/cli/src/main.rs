//! `ckraus`: sample, diagonalize, propagate and compare spin-bath models.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chaotic_kraus::diagnostics::EchoSeries;
use chaotic_kraus::dynamics::{default_initial_state, exact_reduced_trajectory_with, DensityMatrix, ExactOptions};
use chaotic_kraus::harness::{
    self, analyze_bath, point_dir_name, render_table, run_chaos_suite, run_experiment, run_point,
    validate_outputs, write_point_artifacts, ComparisonReport, ExperimentSpec,
};
use chaotic_kraus::kraus::{build_ensemble, propagate_kraus};
use chaotic_kraus::model::{sample_parameters, system_coupling, ModelParameters, OperatorMatrix};
use chaotic_kraus::spectral::BathSpectrum;
use chaotic_kraus::{parallel, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "ckraus", version, about = "Chaotic-bath Kraus decomposition experiments")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct SpecArgs {
    /// Experiment spec (TOML). Defaults reproduce the reference regime.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of bath spins N.
    #[arg(long)]
    n_bath: Option<usize>,
    /// System-bath coupling scale lambda.
    #[arg(long)]
    lambda: Option<f64>,
    /// Bath temperature kT.
    #[arg(long)]
    kt: Option<f64>,
    /// Retained bath eigenstates m.
    #[arg(long)]
    retained: Option<usize>,
    /// Integrator tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Final time of the propagation grid.
    #[arg(long)]
    t_max: Option<f64>,
    /// Samples on the propagation grid (including t = 0).
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct PointArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Intra-bath coupling scale Jx (defaults to model.jx of the spec file).
    #[arg(long)]
    jx: Option<f64>,
    /// Random seed (defaults to model.seed of the spec file).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
struct SweepArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Comma-separated Jx values.
    #[arg(long, value_delimiter = ',')]
    jx: Option<Vec<f64>>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw the random couplings of one point and print them as JSON.
    Sample(PointArgs),
    /// Diagonalize H_B: thermal spectrum, B_nn, coupling matrix, level spacings.
    Spectrum(PointArgs),
    /// Exact reduced trajectory by state-vector propagation.
    EvolveExact(PointArgs),
    /// Reduced trajectory from the chaotic Kraus ensemble.
    EvolveKraus(PointArgs),
    /// Exact vs Kraus at one point, with all artifacts and metrics.
    Compare(PointArgs),
    /// Level-spacing statistics and echo decay rates over a sweep.
    ChaosStats(SweepArgs),
    /// Loschmidt echo of one point (short and long windows).
    Echo(PointArgs),
    /// Print a finished report and re-validate its trajectory files.
    Report {
        /// Directory holding report.json.
        #[arg(default_value = "out")]
        dir: PathBuf,
    },
    /// Full pipeline over the sweep: artifacts, report.json/txt, summary.csv.
    Run {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Print the effective spec as TOML and exit.
        #[arg(long)]
        print_spec: bool,
    },
}

impl SpecArgs {
    fn load(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.spec {
            Some(path) => ExperimentSpec::from_file(path)?,
            None => ExperimentSpec::default(),
        };
        if let Some(out) = &self.out {
            spec.output_dir = out.clone();
        }
        if let Some(n) = self.n_bath {
            spec.model.n_bath = n;
        }
        if let Some(l) = self.lambda {
            spec.model.lambda = l;
        }
        if let Some(kt) = self.kt {
            spec.model.kt = kt;
        }
        if let Some(m) = self.retained {
            spec.retained = m;
        }
        if let Some(tol) = self.tol {
            spec.tol = tol;
        }
        if let Some(t) = self.t_max {
            spec.times.t_max = t;
        }
        if let Some(n) = self.samples {
            spec.times.n_samples = n;
        }
        Ok(spec)
    }
}

impl PointArgs {
    fn resolve(&self) -> Result<(ExperimentSpec, f64, u64)> {
        let mut spec = self.spec.load()?;
        let jx = self.jx.unwrap_or(spec.model.jx);
        let seed = self.seed.unwrap_or(spec.model.seed);
        spec.sweep.jx = vec![jx];
        spec.sweep.seeds = vec![seed];
        spec.validate()?;
        spec.check_capacity()?;
        Ok((spec, jx, seed))
    }
}

impl SweepArgs {
    fn resolve(&self) -> Result<ExperimentSpec> {
        let mut spec = self.spec.load()?;
        if let Some(jx) = &self.jx {
            spec.sweep.jx = jx.clone();
        }
        if let Some(seeds) = &self.seeds {
            spec.sweep.seeds = seeds.clone();
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn point_dir(spec: &ExperimentSpec, jx: f64, seed: u64) -> Result<PathBuf> {
    let dir = spec.output_dir.join("points").join(point_dir_name(jx, seed));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn sample(spec: &ExperimentSpec, jx: f64, seed: u64) -> Result<ModelParameters> {
    sample_parameters(&spec.point_config(jx, seed), seed)
}

/// Thermal spectrum only: the cheap path used by the evolve commands.
fn thermal_spectrum(spec: &ExperimentSpec, p: &ModelParameters) -> Result<BathSpectrum> {
    let cap = spec.dense_cap_qubits;
    let h_b = OperatorMatrix::hermitian(p.bath_operator()?.to_dense(cap)?)?;
    let b = OperatorMatrix::hermitian(p.coupling_operator()?.to_dense(cap)?)?;
    let m = spec.retained.min(h_b.dim());
    Ok(BathSpectrum::compute(&h_b, &b, p.kt, m)?.0)
}

fn print_echo(label: &str, e: &EchoSeries) {
    let min = e.echo.iter().copied().fold(f64::INFINITY, f64::min);
    let rate = e.decay_rate().map(|r| format!("{r:.6}")).unwrap_or_else(|| "-".into());
    println!("{label}: {} samples up to t = {}, min M = {min:.6}, decay rate = {rate}", e.times.len(), e.times.last().unwrap_or(&0.0));
}

fn chaos_table(points: &[harness::ChaosPoint]) -> String {
    let mut s = format!("{:>6} {:>6} {:>10} {:>10} {:>8} {:>10}\n", "Jx", "seed", "D_poisson", "D_wd", "closer", "echo rate");
    for p in points {
        let (dp, dw, closer) = match &p.spacing {
            Ok(st) => (
                format!("{:.4}", st.d_poisson),
                format!("{:.4}", st.d_wd),
                if st.d_wd < st.d_poisson { "WD" } else { "Poisson" },
            ),
            Err(_) => ("-".into(), "-".into(), "-"),
        };
        let rate = p.echo_rate.map(|r| format!("{r:.5}")).unwrap_or_else(|| "-".into());
        s += &format!("{:>6} {:>6} {dp:>10} {dw:>10} {closer:>8} {rate:>10}\n", p.jx, p.seed);
    }
    s
}

/// Returns the exit code; a sweep with failed points exits with the code of
/// the first failure after all other outputs are written.
fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Sample(args) => {
            let (spec, jx, seed) = args.resolve()?;
            println!("{}", serde_json::to_string_pretty(&sample(&spec, jx, seed)?)?);
        }
        Command::Spectrum(args) => {
            let (spec, jx, seed) = args.resolve()?;
            let p = sample(&spec, jx, seed)?;
            let bath = analyze_bath(&p, &spec)?;
            let dir = point_dir(&spec, jx, seed)?;
            harness::write_bath_artifacts(&dir, &p, &bath)?;
            let s = &bath.spectrum;
            println!("retained m = {} of {} levels, tail weight p[m-1] = {:.3e}", s.retained(), s.bath_dim(), s.tail_weight());
            println!("{:>4} {:>14} {:>12} {:>12}", "n", "E_n", "p_n", "B_nn");
            for n in 0..s.retained() {
                println!("{n:>4} {:>14.8} {:>12.4e} {:>12.6}", s.energies[n], s.weights[n], s.bdiag[n]);
            }
            match &bath.spacing {
                Ok(st) => println!("spacings: D_poisson = {:.4}, D_wd = {:.4}", st.d_poisson, st.d_wd),
                Err(e) => println!("spacings unavailable: {e}"),
            }
            println!("off-diagonal suppression ratio = {:.4} ({} pairs)", bath.suppression.ratio, bath.suppression.pairs);
            println!("wrote {}", dir.display());
        }
        Command::EvolveExact(args) => {
            let (spec, jx, seed) = args.resolve()?;
            let p = sample(&spec, jx, seed)?;
            let spectrum = thermal_spectrum(&spec, &p)?;
            let out = exact_reduced_trajectory_with(
                &p.total_operator()?,
                &p.system_hamiltonian(),
                &spectrum,
                &default_initial_state(),
                &spec.times.grid()?,
                &ExactOptions::with_tol(spec.tol),
            )?;
            out.trajectory.validate()?;
            let path = point_dir(&spec, jx, seed)?.join("exact.csv");
            out.trajectory.write_csv(create(&path)?)?;
            let evals: usize = out.branch_stats.iter().map(|s| s.evaluations).sum();
            println!("wrote {} ({evals} generator applications, max norm drift {:.2e})", path.display(), out.max_norm_drift);
        }
        Command::EvolveKraus(args) => {
            let (spec, jx, seed) = args.resolve()?;
            let p = sample(&spec, jx, seed)?;
            let spectrum = thermal_spectrum(&spec, &p)?;
            let ensemble = build_ensemble(&p.system_hamiltonian(), &system_coupling(), &spectrum)?;
            let traj = propagate_kraus(&ensemble, &DensityMatrix::pure(&default_initial_state()), &spec.times.grid()?)?;
            traj.validate()?;
            let path = point_dir(&spec, jx, seed)?.join("kraus.csv");
            traj.write_csv(create(&path)?)?;
            println!("wrote {}", path.display());
        }
        Command::Compare(args) => {
            let (spec, jx, seed) = args.resolve()?;
            let outcome = run_point(&spec, jx, seed)?;
            let dir = write_point_artifacts(&spec, &outcome)?;
            fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&outcome.metrics)? + "\n")?;
            println!("{}", serde_json::to_string_pretty(&outcome.metrics)?);
        }
        Command::ChaosStats(args) => {
            let spec = args.resolve()?;
            let points = run_chaos_suite(&spec)?;
            print!("{}", chaos_table(&points));
            println!("wrote {}", spec.output_dir.join("chaos").display());
        }
        Command::Echo(args) => {
            let (spec, jx, seed) = args.resolve()?;
            let p = sample(&spec, jx, seed)?;
            let bath = analyze_bath(&p, &spec)?;
            let dir = point_dir(&spec, jx, seed)?;
            bath.echo_short.write_csv(create(&dir.join("echo_short.csv"))?)?;
            bath.echo_long.write_csv(create(&dir.join("echo_long.csv"))?)?;
            print_echo("short window", &bath.echo_short);
            print_echo("long window", &bath.echo_long);
            println!("wrote {}", dir.display());
        }
        Command::Report { dir } => {
            let text = fs::read_to_string(dir.join("report.json"))?;
            let report: ComparisonReport = serde_json::from_str(&text)?;
            print!("{}", render_table(&report));
            let checked = validate_outputs(&dir)?;
            println!("\nvalidated {checked} trajectory files");
            if let Some(f) = report.failures.first() {
                eprintln!("{} sweep point(s) failed", report.failures.len());
                return Ok(f.exit_code);
            }
        }
        Command::Run { sweep, print_spec } => {
            let spec = sweep.resolve()?;
            if print_spec {
                print!("{}", spec.to_toml_string()?);
                return Ok(0);
            }
            spec.check_capacity()?;
            let report = run_experiment(&spec)?;
            print!("{}", render_table(&report));
            println!("\nwrote {}", spec.output_dir.display());
            if let Some(f) = report.failures.first() {
                eprintln!(
                    "error: {} of {} sweep points failed; first: {}",
                    report.failures.len(),
                    report.failures.len() + report.points.len(),
                    f.error
                );
                return Ok(f.exit_code);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = parallel::init_workers_from_env() {
        log::info!("using {n} worker threads");
    }
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let _ = std::io::stderr().flush();
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
