//! Acceptance suite: one test per criterion, each printing a single
//! `[PASS]`/`[FAIL]` line to stderr (bypassing the test harness capture so
//! the lines appear in every run).

use std::io::Write;

use chaotic_kraus::dynamics::{
    default_initial_state, exact_reduced_trajectory_with, uniform_grid, DensityMatrix, ExactOptions,
};
use chaotic_kraus::harness::{
    analyze_bath, run_point, run_sweep, seed_majority, spacing_with_fallback, ExperimentSpec,
    PointMetrics,
};
use chaotic_kraus::kraus::{build_ensemble, completeness_residual, propagate_kraus, qubit_closed_form, KrausEnsemble};
use chaotic_kraus::linalg::{self, CMatrix};
use chaotic_kraus::model::{sample_parameters, system_coupling, ModelConfig, ModelParameters, OperatorMatrix};
use chaotic_kraus::spectral::{bath_eigenvalues, BathSpectrum};
use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const TREND_JX: [f64; 3] = [0.5, 1.0, 2.0];

fn report(criterion: u32, title: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "[{tag}] criterion {criterion}: {title} | {detail}");
    let _ = err.flush();
}

fn params(n_bath: usize, jx: f64, seed: u64) -> ModelParameters {
    let cfg = ModelConfig {
        n_bath,
        jx,
        seed,
        ..ModelConfig::default()
    };
    sample_parameters(&cfg, seed).unwrap()
}

fn dense(op: chaotic_kraus::model::PauliOperator) -> OperatorMatrix {
    OperatorMatrix::hermitian(op.to_dense(12).unwrap()).unwrap()
}

fn thermal_spectrum(p: &ModelParameters, m: usize) -> BathSpectrum {
    let h_b = dense(p.bath_operator().unwrap());
    let b = dense(p.coupling_operator().unwrap());
    BathSpectrum::compute(&h_b, &b, p.kt, m).unwrap().0
}

fn paper_ensemble(jx: f64, seed: u64) -> KrausEnsemble {
    let p = params(10, jx, seed);
    build_ensemble(&p.system_hamiltonian(), &system_coupling(), &thermal_spectrum(&p, 20)).unwrap()
}

fn random_density(rng: &mut ChaCha8Rng) -> DensityMatrix {
    let a = CMatrix::from_fn(2, 2, |_, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let m = &a * a.adjoint();
    let tr = m.trace();
    DensityMatrix::from_matrix(m / tr)
}

#[test]
fn criterion_1_channel_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut completeness, mut trace_err, mut min_eig, mut min_choi) = (0.0_f64, 0.0_f64, f64::INFINITY, f64::INFINITY);
    for jx in TREND_JX {
        let e = paper_ensemble(jx, 1);
        let inputs = [DensityMatrix::pure(&default_initial_state()), random_density(&mut rng)];
        for _ in 0..50 {
            let t = rng.gen_range(0.0..300.0);
            completeness = completeness.max(completeness_residual(&e, t));
            for rho in &inputs {
                let out = e.apply(rho, t).unwrap();
                trace_err = trace_err.max((out.trace() - Complex64::new(1.0, 0.0)).norm());
                min_eig = min_eig.min(out.min_eigenvalue());
            }
            min_choi = min_choi.min(e.choi_min_eigenvalue(t));
        }
    }
    let pass = completeness < 1e-12 && trace_err < 1e-10 && min_eig > -1e-10 && min_choi > -1e-10;
    report(
        1,
        "channel laws",
        pass,
        &format!(
            "completeness {completeness:.2e}, trace error {trace_err:.2e}, min output eig {min_eig:.3e}, min Choi eig {min_choi:.3e}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_exactness_oracle() {
    let p = params(6, 2.0, 3);
    let h_b = dense(p.bath_operator().unwrap());
    let (c1, c2) = (0.03, 0.004);
    let hb = h_b.matrix();
    let b = OperatorMatrix::hermitian(hb * Complex64::new(c1, 0.0) + hb * hb * Complex64::new(c2, 0.0)).unwrap();
    let (spectrum, coupling, _) = BathSpectrum::compute(&h_b, &b, p.kt, 20).unwrap();
    let mut offdiag = 0.0_f64;
    for j in 0..coupling.dim() {
        for k in 0..coupling.dim() {
            if j != k {
                offdiag = offdiag.max(coupling.entries[(j, k)].norm());
            }
        }
    }
    let h_s = p.system_hamiltonian();
    let id_b = OperatorMatrix::hermitian(linalg::identity(h_b.dim())).unwrap();
    let id_s = OperatorMatrix::hermitian(linalg::identity(2)).unwrap();
    let h_total = &(&h_s.kron(&id_b) + &system_coupling().kron(&b)) + &id_s.kron(&h_b);
    let times = uniform_grid(300.0, 600).unwrap();
    let psi0 = default_initial_state();
    let exact = exact_reduced_trajectory_with(&h_total, &h_s, &spectrum, &psi0, &times, &ExactOptions::with_tol(1e-10))
        .unwrap()
        .trajectory;
    let ensemble = build_ensemble(&h_s, &system_coupling(), &spectrum).unwrap();
    let kraus = propagate_kraus(&ensemble, &DensityMatrix::pure(&psi0), &times).unwrap();
    let deviation = exact
        .rho
        .iter()
        .zip(&kraus.rho)
        .map(|(a, b)| linalg::max_abs_diff(a.matrix(), b.matrix()))
        .fold(0.0, f64::max);
    let spread = spectrum.bdiag.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - spectrum.bdiag.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = deviation < 1e-6 && offdiag < 1e-10;
    report(
        2,
        "exactness oracle (B = c1 H_B + c2 H_B^2, N = 6)",
        pass,
        &format!("max |rho_exact - rho_kraus| {deviation:.2e}, max off-diagonal B_jk {offdiag:.1e}, B_nn spread {spread:.3}"),
    );
    assert!(pass);
}

/// `exp(−iGt)(|0⟩+|1⟩)/√2` with `G = −½B_z σ_z + B_nn σ_x`, from the
/// library's general complex matrix exponential.
fn expm_oracle(bz: f64, bnn: f64, t: f64) -> (Complex64, Complex64) {
    let g = Matrix2::new(
        Complex64::new(-0.5 * bz, 0.0),
        Complex64::new(bnn, 0.0),
        Complex64::new(bnn, 0.0),
        Complex64::new(0.5 * bz, 0.0),
    );
    let u = (g * Complex64::new(0.0, -t)).exp();
    let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    ((u[(0, 0)] + u[(0, 1)]) * r, (u[(1, 0)] + u[(1, 1)]) * r)
}

#[test]
fn criterion_3_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0_f64;
    let mut worst_small_b = 0.0_f64;
    for k in 0..1000 {
        let (bz, bnn) = match k % 10 {
            0 => (0.0, 0.0),
            1 => (rng.gen_range(-1e-9..1e-9), rng.gen_range(-1e-9..1e-9)),
            2 => (rng.gen_range(-1e-5..1e-5), rng.gen_range(-1e-5..1e-5)),
            _ => (rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0)),
        };
        let t = rng.gen_range(0.0..300.0);
        let c = qubit_closed_form(bz, bnn, t);
        let (o1, o0) = expm_oracle(bz, bnn, t);
        let err = (c.c1 - o1).norm().max((c.c0 - o0).norm());
        worst = worst.max(err);
        if k % 10 < 3 {
            worst_small_b = worst_small_b.max(err);
        }
    }
    let pass = worst < 1e-12;
    report(
        3,
        "closed-form amplitudes vs 2x2 matrix exponential",
        pass,
        &format!("1000 triples, max error {worst:.2e} (b -> 0 subset {worst_small_b:.2e})"),
    );
    assert!(pass);
}

#[test]
fn criterion_4_level_statistics() {
    let spec = ExperimentSpec::default();
    let mut lines = Vec::new();
    let mut chaotic_ok = 0;
    let mut integrable_ok = 0;
    for (jx, counter) in [(2.0, &mut chaotic_ok), (0.05, &mut integrable_ok)] {
        for seed in SEEDS {
            let h = dense(params(10, jx, seed).bath_operator().unwrap());
            let energies = bath_eigenvalues(&h).unwrap();
            match spacing_with_fallback(&energies, 200, spec.chaos.degree) {
                Ok(s) => {
                    let ok = if jx == 2.0 { s.d_wd < s.d_poisson } else { s.d_poisson < s.d_wd };
                    *counter += usize::from(ok);
                    lines.push(format!(
                        "Jx={jx} seed {seed}: D_p {:.3} D_wd {:.3} (deg {})",
                        s.d_poisson,
                        s.d_wd,
                        s.degree.unwrap_or(0)
                    ));
                }
                Err(e) => lines.push(format!("Jx={jx} seed {seed}: {e}")),
            }
        }
    }
    let pass = chaotic_ok == SEEDS.len() && 2 * integrable_ok > SEEDS.len();
    report(
        4,
        "level statistics",
        pass,
        &format!(
            "Jx=2: D_wd < D_p in {chaotic_ok}/5 (need 5/5); Jx=0.05: D_p < D_wd in {integrable_ok}/5 (need 3/5); {}",
            lines.join("; ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_echo_ordering() {
    let mut spec = ExperimentSpec::default();
    spec.retained = 1;
    let mut rates = Vec::new();
    let mut worst_m0 = 0.0_f64;
    for jx in TREND_JX {
        for seed in SEEDS {
            let p = params(10, jx, seed);
            let bath = analyze_bath(&p, &spec).unwrap();
            for series in [&bath.echo_short, &bath.echo_long] {
                worst_m0 = worst_m0.max((series.echo[0] - 1.0).abs());
            }
            rates.push((jx, seed, bath.echo_short.decay_rate()));
        }
    }
    let trend = seed_majority(&rates, &TREND_JX, &SEEDS, |r| (r.0, r.1), |r| r.2, true);
    let pass = trend.majority() && worst_m0 < 1e-10;
    let listing: Vec<String> = rates
        .iter()
        .map(|(jx, s, r)| format!("{jx}/{s}:{}", r.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into())))
        .collect();
    report(
        5,
        "Loschmidt echo ordering",
        pass,
        &format!(
            "rate increasing in {}/{} seeds, max |M(0) - 1| {worst_m0:.1e}; rates {}",
            trend.satisfied,
            trend.seeds,
            listing.join(" ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_kraus_accuracy_trend() {
    let spec = ExperimentSpec::default();
    let results = run_sweep(&spec).unwrap();
    let mut metrics: Vec<PointMetrics> = Vec::new();
    let mut failures = Vec::new();
    for (jx, seed, r) in results {
        match r {
            Ok(o) => metrics.push(o.metrics),
            Err(e) => failures.push(format!("Jx={jx} seed {seed}: {e}")),
        }
    }
    let trend = seed_majority(&metrics, &TREND_JX, &SEEDS, |m| (m.jx, m.seed), |m| Some(m.mean_abs_dp), false);
    // Per seed at Jx = 2: each time-averaged deviation below a quarter of
    // the exact signal's own range, required in a seed majority. The seed
    // means are printed alongside.
    let at2: Vec<&PointMetrics> = metrics.iter().filter(|m| m.jx == 2.0).collect();
    let within = |m: &PointMetrics| m.mean_abs_dp < 0.25 * m.exact_purity_range && m.mean_abs_df < 0.25 * m.exact_fidelity_range;
    let bounded = at2.iter().filter(|m| within(m)).count();
    let mean = |f: fn(&PointMetrics) -> f64| at2.iter().map(|m| f(m)).sum::<f64>() / at2.len().max(1) as f64;
    let (dp, df) = (mean(|m| m.mean_abs_dp), mean(|m| m.mean_abs_df));
    let (range_p, range_f) = (mean(|m| m.exact_purity_range), mean(|m| m.exact_fidelity_range));
    let pass = failures.is_empty() && trend.majority() && 2 * bounded > SEEDS.len();
    let listing: Vec<String> = metrics
        .iter()
        .map(|m| format!("{}/{}:{:.2e}", m.jx, m.seed, m.mean_abs_dp))
        .collect();
    let per_seed: Vec<String> = at2
        .iter()
        .map(|m| {
            format!(
                "seed {} dP {:.2e}/{:.2e} dF {:.2e}/{:.2e}",
                m.seed,
                m.mean_abs_dp,
                0.25 * m.exact_purity_range,
                m.mean_abs_df,
                0.25 * m.exact_fidelity_range
            )
        })
        .collect();
    report(
        6,
        "Kraus accuracy trend",
        pass,
        &format!(
            "mean|dP| decreasing in {}/{} seeds; Jx=2 bound met in {bounded}/{} seeds ({}); seed means: mean|dP| {dp:.2e} vs 0.25*range {:.2e}, mean|dF| {df:.2e} vs 0.25*range {:.2e}; failures {}; mean|dP| {}",
            trend.satisfied,
            trend.seeds,
            at2.len(),
            per_seed.join(", "),
            0.25 * range_p,
            0.25 * range_f,
            failures.len(),
            listing.join(" ")
        ),
    );
    for f in &failures {
        eprintln!("{f}");
    }
    assert!(pass);
}

#[test]
fn criterion_7_coherent_shift_limit() {
    let times = uniform_grid(300.0, 600).unwrap();
    let rho0 = DensityMatrix::pure(&default_initial_state());
    let e = paper_ensemble(2.0, 1);
    let common = e.with_common_shift(e.mean_shift()).unwrap();
    let shifted = propagate_kraus(&common, &rho0, &times).unwrap();
    let purity_dev = shifted.purity.iter().map(|p| (p - 1.0).abs()).fold(0.0, f64::max);
    let min_f = shifted.fidelity.iter().copied().fold(f64::INFINITY, f64::min);

    let p = params(10, 2.0, 1);
    let ground = build_ensemble(&p.system_hamiltonian(), &system_coupling(), &thermal_spectrum(&p, 1)).unwrap();
    let zero_t = propagate_kraus(&ground, &rho0, &times).unwrap();
    let zero_t_dev = zero_t.purity.iter().map(|p| (p - 1.0).abs()).fold(0.0, f64::max);
    let zero_t_min_f = zero_t.fidelity.iter().copied().fold(f64::INFINITY, f64::min);

    let pass = purity_dev < 1e-12 && min_f < 1.0 - 1e-3 && zero_t_dev < 1e-12;
    report(
        7,
        "coherent-shift limit",
        pass,
        &format!(
            "common shift {:.4}: max |P - 1| {purity_dev:.1e}, min F {min_f:.4}; m = 1: max |P - 1| {zero_t_dev:.1e}, min F {zero_t_min_f:.4}",
            e.mean_shift()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_decoupled_limit() {
    let mut spec = ExperimentSpec::default();
    spec.model.lambda = 0.0;
    let o = run_point(&spec, 1.0, 1).unwrap();
    let dev = |xs: &[f64]| xs.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    let worst = dev(&o.exact.purity)
        .max(dev(&o.exact.fidelity))
        .max(dev(&o.kraus.purity))
        .max(dev(&o.kraus.fidelity));
    let pass = worst < 1e-8;
    report(
        8,
        "decoupled limit (lambda = 0, N = 10)",
        pass,
        &format!("max |P - 1|, |F - 1| over both methods {worst:.2e}"),
    );
    assert!(pass);
}
