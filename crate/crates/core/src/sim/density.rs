use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{SimError, MAX_QUBITS};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Density operator of an `n`-qubit register, stored row-major.
///
/// Basis index `j` encodes qubit `q` in bit `q`, so qubit 0 is the least
/// significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    /// The ground state `|0…0⟩⟨0…0|`.
    pub fn ground(n_qubits: usize) -> Result<Self, SimError> {
        check_width(n_qubits)?;
        let dim = 1usize << n_qubits;
        let mut data = vec![ZERO; dim * dim];
        data[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, data })
    }

    /// Wraps raw row-major data. Only the shape is checked; call
    /// [`DensityMatrix::check_invariants`] to validate the physics.
    pub fn from_row_major(n_qubits: usize, data: Vec<Complex64>) -> Result<Self, SimError> {
        check_width(n_qubits)?;
        let dim = 1usize << n_qubits;
        if data.len() != dim * dim {
            return Err(SimError::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { n_qubits, data })
    }

    /// Pure state `|ψ⟩⟨ψ|` from an amplitude vector of length `2^n`.
    pub fn from_pure(n_qubits: usize, amplitudes: &[Complex64]) -> Result<Self, SimError> {
        check_width(n_qubits)?;
        let dim = 1usize << n_qubits;
        if amplitudes.len() != dim {
            return Err(SimError::DimensionMismatch {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        let mut data = vec![ZERO; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = amplitudes[i] * amplitudes[j].conj();
            }
        }
        Ok(Self { n_qubits, data })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim() + col]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn trace(&self) -> Complex64 {
        let dim = self.dim();
        (0..dim).map(|i| self.data[i * dim + i]).sum()
    }

    /// Largest `|ρ_ij − conj(ρ_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in i..dim {
                let d = (self.data[i * dim + j] - self.data[j * dim + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let dim = self.dim();
        let m = DMatrix::from_fn(dim, dim, |i, j| {
            (self.data[i * dim + j] + self.data[j * dim + i].conj()) * 0.5
        });
        m.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Trace one (±1e-10), Hermitian (±1e-10), eigenvalues ≥ −1e-9.
    pub fn check_invariants(&self) -> Result<(), SimError> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(SimError::InvalidState(format!("trace {tr}")));
        }
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(SimError::InvalidState(format!("hermiticity error {herm:e}")));
        }
        let min = self.min_eigenvalue();
        if min < -1e-9 {
            return Err(SimError::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// Born-rule probabilities from the diagonal.
    ///
    /// Negative round-off is clamped to zero and the vector renormalised, as
    /// long as the raw sum is within 1e-8 of one.
    pub fn probabilities(&self) -> Result<ProbVector, SimError> {
        let dim = self.dim();
        let mut probs: Vec<f64> = (0..dim).map(|i| self.data[i * dim + i].re.max(0.0)).collect();
        let sum: f64 = probs.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > 1e-8 {
            return Err(SimError::StateCorruption { sum });
        }
        probs.iter_mut().for_each(|p| *p /= sum);
        Ok(ProbVector { probs })
    }
}

pub(crate) fn check_width(n_qubits: usize) -> Result<(), SimError> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(SimError::Capacity { n_qubits });
    }
    Ok(())
}

/// Outcome distribution over the `2^n` computational basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    probs: Vec<f64>,
}

impl ProbVector {
    /// Validates non-negativity and unit sum (±1e-10).
    pub fn new(probs: Vec<f64>) -> Result<Self, SimError> {
        if probs.is_empty() || !probs.len().is_power_of_two() {
            return Err(SimError::InvalidDistribution(format!(
                "length {} is not a power of two",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(SimError::InvalidDistribution(format!("entry {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(SimError::InvalidDistribution(format!("sum {sum}")));
        }
        Ok(Self { probs })
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    /// The basis vector `e_index` of length `2^n_qubits`.
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut probs = vec![0.0; 1 << n_qubits];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn n_qubits(&self) -> usize {
        self.probs.len().trailing_zeros() as usize
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}
