use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Relative tolerance under which a matrix counts as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-13;

/// A dense operator on a `2^n`-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    matrix: CMatrix,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Wraps a square matrix and records whether it is Hermitian.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::shape("operator matrix", matrix.nrows(), matrix.ncols()));
        }
        let scale = linalg::max_abs(&matrix).max(1.0);
        let hermitian = linalg::hermitian_deviation(&matrix) <= HERMITIAN_TOL * scale;
        Ok(OperatorMatrix { matrix, hermitian })
    }

    /// Like [`OperatorMatrix::new`] but rejects non-Hermitian input.
    pub fn hermitian(matrix: CMatrix) -> Result<Self> {
        let op = Self::new(matrix)?;
        if !op.hermitian {
            return Err(Error::Validation(format!(
                "operator is not Hermitian (max |A - A†| = {:.3e})",
                linalg::hermitian_deviation(&op.matrix)
            )));
        }
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// `self ⊗ other`, `self` on the more significant qubits.
    pub fn kron(&self, other: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix {
            matrix: linalg::kron(&self.matrix, &other.matrix),
            hermitian: self.hermitian && other.hermitian,
        }
    }

    pub fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        let n = self.dim();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = linalg::ZERO;
            for (k, x) in v.iter().enumerate() {
                acc += self.matrix[(i, k)] * x;
            }
            *o = acc;
        }
    }

    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim() {
            return Err(Error::shape("dense operator application", self.dim(), v.len()));
        }
        let mut out = vec![linalg::ZERO; v.len()];
        self.apply_into(v, &mut out);
        Ok(out)
    }
}

impl std::ops::Add for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix {
            matrix: &self.matrix + &rhs.matrix,
            hermitian: self.hermitian && rhs.hermitian,
        }
    }
}
