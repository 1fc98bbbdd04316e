//! The flawed-register test model: a detector qubit (site 0) coupled through
//! `σ_x` to a bath of `N` qubits with random one-body fields and all-to-all
//! `σ_x σ_x` couplings.
//!
//! ```text
//! H = −½ B0z σz⁽⁰⁾ + σx⁽⁰⁾ Σᵢ λᵢ σx⁽ⁱ⁾ − ½ Σᵢ (Bxᵢ σx⁽ⁱ⁾ + Bzᵢ σz⁽ⁱ⁾) + Σ_{i<j} Jᵢⱼ σx⁽ⁱ⁾ σx⁽ʲ⁾
//! ```
//!
//! Energies are in units of ε, time in ħ/ε, ħ = 1.

mod operator;
mod pauli;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

pub use operator::{OperatorMatrix, HERMITIAN_TOL};
pub use pauli::{apply_hamiltonian, PauliAxis, PauliOperator, PauliTerm};

/// Largest register (in qubits) for which dense matrices are built.
pub const DEFAULT_DENSE_CAP_QUBITS: usize = 12;

/// Model configuration as read from the key-value config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_bath: usize,
    pub b0z: f64,
    pub delta: f64,
    pub lambda: f64,
    pub jx: f64,
    pub kt: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_bath: 10,
            b0z: 1.0,
            delta: 0.4,
            lambda: 0.05,
            jx: 2.0,
            kt: 0.25,
            seed: 1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bath == 0 {
            return Err(Error::Config("n_bath must be at least 1".into()));
        }
        for (name, value) in [
            ("delta", self.delta),
            ("lambda", self.lambda),
            ("jx", self.jx),
            ("kt", self.kt),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {value}"
                )));
            }
        }
        if !self.b0z.is_finite() {
            return Err(Error::Config("b0z must be finite".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ModelConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Sampled couplings. Arrays are stored in draw order; `jxx` is the upper
/// triangle `(i, j), i < j` flattened row-major over 0-based bath indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub n_bath: usize,
    pub b0z: f64,
    pub delta: f64,
    pub lambda_max: f64,
    pub jx_max: f64,
    pub kt: f64,
    pub seed: u64,
    pub bz: Vec<f64>,
    pub bx: Vec<f64>,
    pub lambda: Vec<f64>,
    pub jxx: Vec<f64>,
}

/// Uniform draws on `(0, 1)` from a ChaCha8 stream.
///
/// The top 53 bits `k` of each `u64` map to `(k + ½)·2⁻⁵³`, which never
/// returns either endpoint.
struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    fn new(seed: u64) -> Self {
        UniformStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn open_unit(&mut self) -> f64 {
        let k = self.rng.next_u64() >> 11;
        (k as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `center ± width/2`; returns `center` exactly when width is 0.
    fn centered(&mut self, center: f64, width: f64) -> f64 {
        center + width * (self.open_unit() - 0.5)
    }
}

/// Draws all random couplings for `config` with the given seed.
///
/// Draw order: `Bz[1..N]`, `Bx[1..N]`, `λ[1..N]`, then `J` row-major over the
/// upper triangle. `Bx` is centered on `B0z` like `Bz`.
pub fn sample_parameters(config: &ModelConfig, seed: u64) -> Result<ModelParameters> {
    config.validate()?;
    let n = config.n_bath;
    let mut stream = UniformStream::new(seed);
    let bz = (0..n)
        .map(|_| stream.centered(config.b0z, config.delta))
        .collect();
    let bx = (0..n)
        .map(|_| stream.centered(config.b0z, config.delta))
        .collect();
    let lambda = (0..n)
        .map(|_| stream.centered(0.0, 2.0 * config.lambda))
        .collect();
    let jxx = (0..n * (n - 1) / 2)
        .map(|_| stream.centered(0.0, 2.0 * config.jx))
        .collect();
    Ok(ModelParameters {
        n_bath: n,
        b0z: config.b0z,
        delta: config.delta,
        lambda_max: config.lambda,
        jx_max: config.jx,
        kt: config.kt,
        seed,
        bz,
        bx,
        lambda,
        jxx,
    })
}

/// Position of the pair `(i, j)`, `i < j`, inside the flattened upper triangle.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

impl ModelParameters {
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.jxx[pair_index(self.n_bath, a, b)]
    }

    pub fn total_qubits(&self) -> usize {
        self.n_bath + 1
    }

    /// Copy with every `σ_x σ_x` bath coupling scaled by `factor`.
    pub fn with_coupling_scale(&self, factor: f64) -> ModelParameters {
        let mut p = self.clone();
        p.jxx.iter_mut().for_each(|j| *j *= factor);
        p.jx_max *= factor.abs();
        p
    }

    fn field_terms(&self, offset: usize) -> Vec<PauliTerm> {
        let mut terms = Vec::with_capacity(2 * self.n_bath);
        for i in 0..self.n_bath {
            terms.push(PauliTerm::single(-0.5 * self.bx[i], offset + i, PauliAxis::X));
            terms.push(PauliTerm::single(-0.5 * self.bz[i], offset + i, PauliAxis::Z));
        }
        terms
    }

    fn intra_terms(&self, offset: usize) -> Vec<PauliTerm> {
        let n = self.n_bath;
        let mut terms = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                terms.push(PauliTerm {
                    coefficient: self.jxx[pair_index(n, i, j)],
                    factors: vec![(offset + i, PauliAxis::X), (offset + j, PauliAxis::X)],
                });
            }
        }
        terms
    }

    /// Bath Hamiltonian `H_B` on the `N` bath qubits.
    pub fn bath_operator(&self) -> Result<PauliOperator> {
        let mut terms = self.field_terms(0);
        terms.extend(self.intra_terms(0));
        PauliOperator::new(self.n_bath, terms)
    }

    /// One-body part of `H_B` (the `J = 0` bath).
    pub fn bath_field_operator(&self) -> Result<PauliOperator> {
        PauliOperator::new(self.n_bath, self.field_terms(0))
    }

    /// Two-body part of `H_B`.
    pub fn bath_intra_operator(&self) -> Result<PauliOperator> {
        PauliOperator::new(self.n_bath, self.intra_terms(0))
    }

    /// Bath coupling operator `B = Σᵢ λᵢ σx⁽ⁱ⁾`.
    pub fn coupling_operator(&self) -> Result<PauliOperator> {
        let terms = (0..self.n_bath)
            .map(|i| PauliTerm::single(self.lambda[i], i, PauliAxis::X))
            .collect();
        PauliOperator::new(self.n_bath, terms)
    }

    /// Full Hamiltonian on `N + 1` qubits, system qubit at site 0.
    pub fn total_operator(&self) -> Result<PauliOperator> {
        let mut terms = vec![PauliTerm::single(-0.5 * self.b0z, 0, PauliAxis::Z)];
        for i in 0..self.n_bath {
            terms.push(PauliTerm {
                coefficient: self.lambda[i],
                factors: vec![(0, PauliAxis::X), (i + 1, PauliAxis::X)],
            });
        }
        terms.extend(self.field_terms(1));
        terms.extend(self.intra_terms(1));
        PauliOperator::new(self.n_bath + 1, terms)
    }

    /// `H_S = −½ B0z σ_z`.
    pub fn system_hamiltonian(&self) -> OperatorMatrix {
        system_hamiltonian(self.b0z)
    }
}

pub fn system_hamiltonian(b0z: f64) -> OperatorMatrix {
    OperatorMatrix::hermitian(linalg::sigma_z() * num_complex::Complex64::new(-0.5 * b0z, 0.0))
        .expect("σ_z is Hermitian")
}

/// System coupling operator `S = σ_x`.
pub fn system_coupling() -> OperatorMatrix {
    OperatorMatrix::hermitian(linalg::sigma_x()).expect("σ_x is Hermitian")
}

/// Dense operators of the model.
#[derive(Clone, Debug)]
pub struct Hamiltonians {
    pub h_s: OperatorMatrix,
    pub s: OperatorMatrix,
    pub b: OperatorMatrix,
    pub h_b: OperatorMatrix,
    pub h_total: OperatorMatrix,
}

/// Dense assembly of `H_S`, `S`, `B`, `H_B` and `H = H_S⊗I + S⊗B + I⊗H_B`.
pub fn assemble_hamiltonians(p: &ModelParameters, cap_qubits: usize) -> Result<Hamiltonians> {
    if p.total_qubits() > cap_qubits {
        return Err(Error::Capacity {
            qubits: p.total_qubits(),
            cap: cap_qubits,
        });
    }
    let h_s = p.system_hamiltonian();
    let s = system_coupling();
    let b = OperatorMatrix::hermitian(p.coupling_operator()?.to_dense(cap_qubits)?)?;
    let h_b = OperatorMatrix::hermitian(p.bath_operator()?.to_dense(cap_qubits)?)?;
    let id_s = OperatorMatrix::hermitian(linalg::identity(2))?;
    let id_b = OperatorMatrix::hermitian(CMatrix::identity(h_b.dim(), h_b.dim()))?;
    let h_total = &(&h_s.kron(&id_b) + &s.kron(&b)) + &id_s.kron(&h_b);
    let h_total = OperatorMatrix::hermitian(h_total.into_matrix())?;
    Ok(Hamiltonians {
        h_s,
        s,
        b,
        h_b,
        h_total,
    })
}
