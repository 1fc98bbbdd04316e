//! Weighted Pauli strings and matrix-free application.
//!
//! Site `s` of an `n`-site register maps to bit `n − 1 − s` of the basis
//! index, so site 0 is the most significant qubit.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            PauliAxis::X => 'X',
            PauliAxis::Y => 'Y',
            PauliAxis::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

/// A real coefficient times a tensor product of single-site Pauli matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub factors: Vec<(usize, PauliAxis)>,
}

impl PauliTerm {
    pub fn new(coefficient: f64, factors: Vec<(usize, PauliAxis)>) -> Result<Self> {
        let mut sites: Vec<usize> = factors.iter().map(|&(s, _)| s).collect();
        sites.sort_unstable();
        if sites.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!(
                "Pauli term has more than one factor on a site: {factors:?}"
            )));
        }
        Ok(PauliTerm {
            coefficient,
            factors,
        })
    }

    pub fn single(coefficient: f64, site: usize, axis: PauliAxis) -> Self {
        PauliTerm {
            coefficient,
            factors: vec![(site, axis)],
        }
    }

    pub fn pair(coefficient: f64, a: (usize, PauliAxis), b: (usize, PauliAxis)) -> Result<Self> {
        Self::new(coefficient, vec![a, b])
    }

    fn max_site(&self) -> Option<usize> {
        self.factors.iter().map(|&(s, _)| s).max()
    }

    /// (flip mask, phase mask, number of Y factors) on an `n_sites` register.
    fn masks(&self, n_sites: usize) -> (usize, usize, u32) {
        let mut flip = 0usize;
        let mut phase = 0usize;
        let mut n_y = 0u32;
        for &(site, axis) in &self.factors {
            let bit = 1usize << (n_sites - 1 - site);
            match axis {
                PauliAxis::X => flip |= bit,
                PauliAxis::Z => phase |= bit,
                PauliAxis::Y => {
                    flip |= bit;
                    phase |= bit;
                    n_y += 1;
                }
            }
        }
        (flip, phase, n_y)
    }
}

#[derive(Clone, Debug)]
enum FlipWeights {
    /// Pure-X group: the same real weight on every row.
    Uniform(f64),
    /// Per-row complex weights (groups involving Y or Z factors).
    Table(Vec<Complex64>),
}

#[derive(Clone, Debug)]
struct FlipGroup {
    mask: usize,
    weights: FlipWeights,
}

/// A Hermitian operator stored as a sum of Pauli strings, compiled into a
/// diagonal plus one bit-flip group per distinct X/Y mask so that `H·v`
/// never materializes the dense matrix.
#[derive(Clone, Debug)]
pub struct PauliOperator {
    n_sites: usize,
    terms: Vec<PauliTerm>,
    diagonal: Vec<f64>,
    flips: Vec<FlipGroup>,
    /// When every off-diagonal term is an X string: their sum in the
    /// Walsh-Hadamard basis, divided by the dimension.
    hadamard_diagonal: Option<Vec<f64>>,
}

fn parity(x: usize) -> f64 {
    if x.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

impl PauliOperator {
    pub fn new(n_sites: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        if n_sites == 0 || n_sites >= usize::BITS as usize - 1 {
            return Err(Error::Config(format!("unsupported register size {n_sites}")));
        }
        for t in &terms {
            if let Some(s) = t.max_site() {
                if s >= n_sites {
                    return Err(Error::Validation(format!(
                        "Pauli factor on site {s} outside a {n_sites}-site register"
                    )));
                }
            }
        }
        let dim = 1usize << n_sites;
        let mut diagonal = vec![0.0; dim];
        let mut groups: BTreeMap<usize, Vec<(f64, usize, u32)>> = BTreeMap::new();
        for t in &terms {
            let (flip, phase, n_y) = t.masks(n_sites);
            if flip == 0 {
                for (j, d) in diagonal.iter_mut().enumerate() {
                    *d += t.coefficient * parity(j & phase);
                }
            } else {
                groups
                    .entry(flip)
                    .or_default()
                    .push((t.coefficient, phase, n_y));
            }
        }
        let flips = groups
            .into_iter()
            .map(|(mask, members)| {
                let weights = if members.iter().all(|&(_, phase, _)| phase == 0) {
                    FlipWeights::Uniform(members.iter().map(|m| m.0).sum())
                } else {
                    let mut table = vec![ZERO; dim];
                    for &(c, phase, n_y) in &members {
                        let base = i_pow(n_y) * c;
                        for (j, w) in table.iter_mut().enumerate() {
                            *w += base * parity((j ^ mask) & phase);
                        }
                    }
                    FlipWeights::Table(table)
                };
                FlipGroup { mask, weights }
            })
            .collect::<Vec<FlipGroup>>();
        let all_uniform = flips
            .iter()
            .all(|g| matches!(g.weights, FlipWeights::Uniform(_)));
        let hadamard_diagonal = (all_uniform && flips.len() > n_sites).then(|| {
            let scale = 1.0 / dim as f64;
            (0..dim)
                .map(|k| {
                    flips
                        .iter()
                        .map(|g| match g.weights {
                            FlipWeights::Uniform(w) => w * parity(k & g.mask),
                            FlipWeights::Table(_) => 0.0,
                        })
                        .sum::<f64>()
                        * scale
                })
                .collect()
        });
        Ok(PauliOperator {
            n_sites,
            terms,
            diagonal,
            flips,
            hadamard_diagonal,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    /// `out = (H − shift·I) v`.
    pub fn apply_shifted_into(&self, shift: f64, v: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(v.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        if let Some(dx) = &self.hadamard_diagonal {
            // X strings are diagonal after a Walsh-Hadamard transform.
            out.copy_from_slice(v);
            walsh_hadamard(out);
            for (o, &w) in out.iter_mut().zip(dx) {
                *o *= w;
            }
            walsh_hadamard(out);
            for ((o, &x), &d) in out.iter_mut().zip(v).zip(&self.diagonal) {
                *o += x * (d - shift);
            }
            return;
        }
        for ((o, &x), &d) in out.iter_mut().zip(v).zip(&self.diagonal) {
            *o = x * (d - shift);
        }
        for group in &self.flips {
            let m = group.mask;
            match &group.weights {
                FlipWeights::Uniform(w) => {
                    let w = *w;
                    for (j, o) in out.iter_mut().enumerate() {
                        let x = v[j ^ m];
                        o.re += w * x.re;
                        o.im += w * x.im;
                    }
                }
                FlipWeights::Table(table) => {
                    for (j, o) in out.iter_mut().enumerate() {
                        *o += table[j] * v[j ^ m];
                    }
                }
            }
        }
    }

    pub fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        self.apply_shifted_into(0.0, v, out);
    }

    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim() {
            return Err(Error::shape("Pauli operator application", self.dim(), v.len()));
        }
        let mut out = vec![ZERO; v.len()];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// `⟨v|H|v⟩` (real for Hermitian operators).
    pub fn expectation(&self, v: &[Complex64]) -> f64 {
        let mut hv = vec![ZERO; v.len()];
        self.apply_into(v, &mut hv);
        v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Upper bound on the spectral radius: sum of |coefficients|.
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.coefficient.abs()).sum()
    }

    /// Dense matrix, refused above `cap_qubits`.
    pub fn to_dense(&self, cap_qubits: usize) -> Result<CMatrix> {
        if self.n_sites > cap_qubits {
            return Err(Error::Capacity {
                qubits: self.n_sites,
                cap: cap_qubits,
            });
        }
        let dim = self.dim();
        let mut m = CMatrix::zeros(dim, dim);
        for (j, &d) in self.diagonal.iter().enumerate() {
            m[(j, j)] = Complex64::new(d, 0.0);
        }
        for group in &self.flips {
            for j in 0..dim {
                let w = match &group.weights {
                    FlipWeights::Uniform(w) => Complex64::new(*w, 0.0),
                    FlipWeights::Table(t) => t[j],
                };
                m[(j, j ^ group.mask)] += w;
            }
        }
        Ok(m)
    }
}

/// In-place unnormalized Walsh-Hadamard transform (length a power of two).
fn walsh_hadamard(v: &mut [Complex64]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_exact_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let (s, d) = (*x + *y, *x - *y);
                *x = s;
                *y = d;
            }
        }
        h *= 2;
    }
}

/// Matrix-free `H·v` for a list of Pauli terms on an `n_sites` register.
pub fn apply_hamiltonian(
    terms: &[PauliTerm],
    n_sites: usize,
    v: &[Complex64],
) -> Result<Vec<Complex64>> {
    PauliOperator::new(n_sites, terms.to_vec())?.apply(v)
}
