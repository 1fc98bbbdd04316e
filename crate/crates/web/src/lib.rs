//! WebAssembly bindings for a small-bath interactive demo.
//!
//! Each export returns flat `Float64Array`s; `www/main.js` draws them on a
//! canvas. Bath sizes are capped at [`MAX_DEMO_BATH`] so a call stays well
//! under a second in the browser.

use chaotic_kraus::diagnostics::EchoSeries;
use chaotic_kraus::harness::{analyze_bath, run_point, spacing_with_fallback, ExperimentSpec};
use chaotic_kraus::model::{sample_parameters, OperatorMatrix};
use chaotic_kraus::spectral::bath_eigenvalues;
use wasm_bindgen::prelude::*;

pub const MAX_DEMO_BATH: usize = 8;

fn demo_spec(n_bath: usize, jx: f64, seed: u64, t_max: f64, samples: usize) -> Result<ExperimentSpec, String> {
    if !(1..=MAX_DEMO_BATH).contains(&n_bath) {
        return Err(format!("bath size must lie in 1..={MAX_DEMO_BATH}"));
    }
    let mut spec = ExperimentSpec::default();
    spec.model.n_bath = n_bath;
    spec.model.jx = jx;
    spec.model.seed = seed;
    spec.sweep.jx = vec![jx];
    spec.sweep.seeds = vec![seed];
    spec.times.t_max = t_max;
    spec.times.n_samples = samples;
    spec.chaos.echo_short.n_samples = 101;
    spec.chaos.echo_long.n_samples = 101;
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

/// Purity and fidelity of the exact and Kraus trajectories at one point.
#[wasm_bindgen]
pub struct Comparison {
    times: Vec<f64>,
    purity_exact: Vec<f64>,
    purity_kraus: Vec<f64>,
    fidelity_exact: Vec<f64>,
    fidelity_kraus: Vec<f64>,
    mean_abs_dp: f64,
}

#[wasm_bindgen]
impl Comparison {
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn purity_exact(&self) -> Vec<f64> {
        self.purity_exact.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn purity_kraus(&self) -> Vec<f64> {
        self.purity_kraus.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn fidelity_exact(&self) -> Vec<f64> {
        self.fidelity_exact.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn fidelity_kraus(&self) -> Vec<f64> {
        self.fidelity_kraus.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn mean_abs_dp(&self) -> f64 {
        self.mean_abs_dp
    }
}

pub fn compare_point(n_bath: usize, jx: f64, seed: u64, t_max: f64, samples: usize) -> Result<Comparison, String> {
    let spec = demo_spec(n_bath, jx, seed, t_max, samples)?;
    let o = run_point(&spec, jx, seed).map_err(|e| e.to_string())?;
    Ok(Comparison {
        times: o.exact.times.clone(),
        purity_exact: o.exact.purity.clone(),
        purity_kraus: o.kraus.purity.clone(),
        fidelity_exact: o.exact.fidelity.clone(),
        fidelity_kraus: o.kraus.fidelity.clone(),
        mean_abs_dp: o.metrics.mean_abs_dp,
    })
}

/// Exact vs Kraus purity and fidelity curves.
#[wasm_bindgen]
pub fn compare(n_bath: usize, jx: f64, seed: u32, t_max: f64, samples: usize) -> Result<Comparison, JsError> {
    compare_point(n_bath, jx, u64::from(seed), t_max, samples).map_err(|e| JsError::new(&e))
}

/// `[centers..., densities..., D_poisson, D_wd]` for the unfolded spacings of
/// all bath levels.
pub fn spacing_point(n_bath: usize, jx: f64, seed: u64) -> Result<Vec<f64>, String> {
    let spec = demo_spec(n_bath, jx, seed, 1.0, 2)?;
    let p = sample_parameters(&spec.point_config(jx, seed), seed).map_err(|e| e.to_string())?;
    let dense = p.bath_operator().and_then(|op| op.to_dense(spec.dense_cap_qubits)).map_err(|e| e.to_string())?;
    let h = OperatorMatrix::hermitian(dense).map_err(|e| e.to_string())?;
    let e = bath_eigenvalues(&h).map_err(|e| e.to_string())?;
    let stats = spacing_with_fallback(&e, e.len().min(spec.chaos.levels), spec.chaos.degree)?;
    let mut out = stats.histogram.centers();
    out.extend_from_slice(&stats.histogram.densities);
    out.push(stats.d_poisson);
    out.push(stats.d_wd);
    Ok(out)
}

#[wasm_bindgen]
pub fn spacing_histogram(n_bath: usize, jx: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    spacing_point(n_bath, jx, u64::from(seed)).map_err(|e| JsError::new(&e))
}

/// `[times..., M...]` on `[0, t_max]`.
pub fn echo_point(n_bath: usize, jx: f64, seed: u64, t_max: f64, samples: usize) -> Result<Vec<f64>, String> {
    let mut spec = demo_spec(n_bath, jx, seed, 1.0, 2)?;
    spec.chaos.echo_short.t_max = t_max;
    spec.chaos.echo_short.n_samples = samples;
    spec.validate().map_err(|e| e.to_string())?;
    let p = sample_parameters(&spec.point_config(jx, seed), seed).map_err(|e| e.to_string())?;
    let bath = analyze_bath(&p, &spec).map_err(|e| e.to_string())?;
    let EchoSeries { mut times, echo } = bath.echo_short;
    times.extend(echo);
    Ok(times)
}

#[wasm_bindgen]
pub fn echo_curve(n_bath: usize, jx: f64, seed: u32, t_max: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    echo_point(n_bath, jx, u64::from(seed), t_max, samples).map_err(|e| JsError::new(&e))
}
