//! Wall-clock cost of one exact bath-state propagation at the default size.
//!
//! `cargo run --release -p chaotic-kraus --example propagation_cost -- [jx] [tol]`

use std::time::Instant;

use chaotic_kraus::dynamics::{
    default_initial_state, propagate_with, uniform_grid, PhaseShift, PropagationOptions, StateVector,
};
use chaotic_kraus::model::{sample_parameters, ModelConfig};
use chaotic_kraus::spectral::BathSpectrum;
use chaotic_kraus::model::OperatorMatrix;

fn main() -> chaotic_kraus::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let jx: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let tol: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-10);
    let config = ModelConfig { jx, ..ModelConfig::default() };
    let p = sample_parameters(&config, 1)?;
    let h = p.total_operator()?;
    let start = Instant::now();
    let h_b = OperatorMatrix::hermitian(p.bath_operator()?.to_dense(12)?)?;
    let b = OperatorMatrix::hermitian(p.coupling_operator()?.to_dense(12)?)?;
    let (spectrum, _, _) = BathSpectrum::compute(&h_b, &b, config.kt, 20)?;
    println!("bath diagonalization: {:.2?}", start.elapsed());
    let times = uniform_grid(300.0, 600)?;
    let bath: Vec<_> = spectrum.vectors.column(0).iter().copied().collect();
    let v0 = StateVector::product(&default_initial_state(), &bath);
    for shift in [PhaseShift::Expectation, PhaseShift::None] {
        let mut opts = PropagationOptions::with_tol(tol);
        opts.shift = shift;
        let start = Instant::now();
        let stats = propagate_with(&h, &v0, &times, &opts, |_, _, _| Ok(()))?;
        println!("{shift:?}: {:.2?}, {stats:?}", start.elapsed());
    }
    Ok(())
}
