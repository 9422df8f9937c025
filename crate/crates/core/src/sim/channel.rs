use num_complex::Complex64;

use super::{DensityMatrix, SimError};

/// 2×2 complex matrix, `m[row][col]`.
pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub(crate) const IDENTITY: Mat2 = [[ONE, ZERO], [ZERO, ONE]];
pub(crate) const PAULI_X: Mat2 = [[ZERO, ONE], [ONE, ZERO]];
pub(crate) const PAULI_Z: Mat2 = [[ONE, ZERO], [ZERO, Complex64::new(-1.0, 0.0)]];

/// Completeness tolerance for `Σ K†K = I`.
pub const COMPLETENESS_TOL: f64 = 1e-12;

pub(crate) fn real(m: [[f64; 2]; 2]) -> Mat2 {
    [
        [Complex64::new(m[0][0], 0.0), Complex64::new(m[0][1], 0.0)],
        [Complex64::new(m[1][0], 0.0), Complex64::new(m[1][1], 0.0)],
    ]
}

pub(crate) fn scale(m: &Mat2, s: f64) -> Mat2 {
    [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
}

pub(crate) fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn dagger(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

fn is_zero(a: &Mat2) -> bool {
    a.iter().flatten().all(|c| *c == ZERO)
}

/// Single-qubit CPTP map in Kraus form.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    operators: Vec<Mat2>,
    target: usize,
}

impl KrausChannel {
    /// Builds a channel on qubit 0; use [`KrausChannel::on`] to retarget.
    /// Exactly-zero operators are dropped.
    pub fn new(operators: Vec<Mat2>) -> Result<Self, SimError> {
        let operators: Vec<Mat2> = operators.into_iter().filter(|k| !is_zero(k)).collect();
        let ch = Self { operators, target: 0 };
        let dev = ch.completeness_error();
        if !(dev <= COMPLETENESS_TOL) {
            return Err(SimError::IncompleteChannel { deviation: dev });
        }
        Ok(ch)
    }

    pub fn identity() -> Self {
        Self {
            operators: vec![IDENTITY],
            target: 0,
        }
    }

    /// `{√(1−p)·I, √p·X}`.
    pub fn bit_flip(p: f64) -> Result<Self, SimError> {
        check_probability("bit-flip probability", p)?;
        Self::new(vec![scale(&IDENTITY, (1.0 - p).sqrt()), scale(&PAULI_X, p.sqrt())])
    }

    /// Amplitude damping with `γ = 1 − exp(−t/T1)` followed by pure dephasing
    /// sized so that coherences decay by exactly `exp(−t/T2)` overall.
    ///
    /// `t1_us`/`t2_us` are in microseconds, `duration_ns` in nanoseconds.
    pub fn thermal_relaxation(t1_us: f64, t2_us: f64, duration_ns: f64) -> Result<Self, SimError> {
        if !(t1_us > 0.0 && t2_us > 0.0) {
            return Err(SimError::InvalidProfile(format!(
                "T1 and T2 must be positive (T1={t1_us}, T2={t2_us})"
            )));
        }
        if t2_us > 2.0 * t1_us {
            return Err(SimError::InvalidProfile(format!(
                "T2={t2_us} exceeds 2·T1={}",
                2.0 * t1_us
            )));
        }
        if !(duration_ns >= 0.0 && duration_ns.is_finite()) {
            return Err(SimError::InvalidProfile(format!("duration {duration_ns} ns")));
        }
        let t_us = duration_ns * 1e-3;
        let gamma = 1.0 - (-t_us / t1_us).exp();
        // Amplitude damping alone scales coherences by exp(−t/2T1).
        let dephase = (-t_us / t2_us + t_us / (2.0 * t1_us)).exp().min(1.0);
        let damping = [
            real([[1.0, 0.0], [0.0, (1.0 - gamma).sqrt()]]),
            real([[0.0, gamma.sqrt()], [0.0, 0.0]]),
        ];
        let phase = [
            scale(&IDENTITY, ((1.0 + dephase) / 2.0).sqrt()),
            scale(&PAULI_Z, ((1.0 - dephase) / 2.0).sqrt()),
        ];
        let mut ops = Vec::with_capacity(4);
        for d in &phase {
            for a in &damping {
                ops.push(matmul(d, a));
            }
        }
        Self::new(ops)
    }

    /// Moves the channel to `qubit`.
    pub fn on(mut self, qubit: usize) -> Self {
        self.target = qubit;
        self
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn operators(&self) -> &[Mat2] {
        &self.operators
    }

    /// Channel that applies `self` and then `after`.
    pub fn then(&self, after: &KrausChannel) -> Result<Self, SimError> {
        let mut ops = Vec::with_capacity(self.operators.len() * after.operators.len());
        for a in &after.operators {
            for b in &self.operators {
                ops.push(matmul(a, b));
            }
        }
        Ok(Self::new(ops)?.on(self.target))
    }

    /// `max |(Σ K†K − I)_ij|`.
    pub fn completeness_error(&self) -> f64 {
        let mut acc = [[ZERO; 2]; 2];
        for k in &self.operators {
            let kk = matmul(&dagger(k), k);
            for i in 0..2 {
                for j in 0..2 {
                    acc[i][j] += kk[i][j];
                }
            }
        }
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((acc[i][j] - IDENTITY[i][j]).norm());
            }
        }
        worst
    }

    pub(crate) fn superop(&self) -> Superop {
        Superop::from_kraus(&self.operators)
    }

    /// `ρ ↦ Σ K ρ K†` on the target qubit, in place.
    pub fn apply(&self, rho: &mut DensityMatrix) -> Result<(), SimError> {
        let dev = self.completeness_error();
        if !(dev <= COMPLETENESS_TOL) {
            return Err(SimError::IncompleteChannel { deviation: dev });
        }
        if self.target >= rho.n_qubits() {
            return Err(SimError::QubitOutOfRange {
                qubit: self.target,
                n_qubits: rho.n_qubits(),
            });
        }
        self.superop().apply(rho, self.target);
        Ok(())
    }
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<(), SimError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SimError::InvalidProbability {
            name: name.to_string(),
            value: p,
        });
    }
    Ok(())
}

/// Linear map on the 2×2 blocks of a density matrix that share all bits but
/// one: `vec(ρ_block)` is ordered `(00, 01, 10, 11)` with (row bit, col bit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Superop(pub [[Complex64; 4]; 4]);

impl Superop {
    #[cfg(test)]
    pub fn identity() -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = ONE;
        }
        Superop(m)
    }

    /// `S[(a,b),(c,d)] = Σ_K K[a][c]·conj(K[b][d])`.
    pub fn from_kraus(ops: &[Mat2]) -> Self {
        let mut m = [[ZERO; 4]; 4];
        for k in ops {
            for a in 0..2 {
                for b in 0..2 {
                    for c in 0..2 {
                        for d in 0..2 {
                            m[2 * a + b][2 * c + d] += k[a][c] * k[b][d].conj();
                        }
                    }
                }
            }
        }
        Superop(m)
    }

    pub fn from_unitary(u: &Mat2) -> Self {
        Self::from_kraus(std::slice::from_ref(u))
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &Superop) -> Superop {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|k| self.0[i][k] * first.0[k][j]).sum();
            }
        }
        Superop(m)
    }

    /// Heisenberg-picture dual under the Hilbert–Schmidt inner product.
    pub fn adjoint(&self) -> Superop {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[j][i].conj();
            }
        }
        Superop(m)
    }

    pub fn apply(&self, rho: &mut DensityMatrix, qubit: usize) {
        let dim = rho.dim();
        apply_blocks(&self.0, rho.as_mut_slice(), dim, qubit);
    }

    /// `Tr(O · S(ρ))` restricted to the blocks touched by `qubit`, without
    /// materialising `S(ρ)`. Both operands must be Hermitian.
    pub fn expectation(&self, observable: &[Complex64], rho: &[Complex64], dim: usize, qubit: usize) -> f64 {
        let m = 1usize << qubit;
        let s = &self.0;
        let mut acc = 0.0;
        for i in (0..dim).filter(|i| i & m == 0) {
            for j in (0..dim).filter(|j| j & m == 0) {
                let idx = [i * dim + j, i * dim + (j | m), (i | m) * dim + j, (i | m) * dim + (j | m)];
                let v = [rho[idx[0]], rho[idx[1]], rho[idx[2]], rho[idx[3]]];
                for r in 0..4 {
                    let out = s[r][0] * v[0] + s[r][1] * v[1] + s[r][2] * v[2] + s[r][3] * v[3];
                    // Tr(O ρ') = Σ O_ij ρ'_ji = Σ conj(O_ij) ρ'_ij for Hermitian O.
                    acc += (observable[idx[r]].conj() * out).re;
                }
            }
        }
        acc
    }
}

pub(crate) fn apply_blocks(s: &[[Complex64; 4]; 4], data: &mut [Complex64], dim: usize, qubit: usize) {
    let m = 1usize << qubit;
    for i in (0..dim).filter(|i| i & m == 0) {
        let r0 = i * dim;
        let r1 = (i | m) * dim;
        for j in (0..dim).filter(|j| j & m == 0) {
            let idx = [r0 + j, r0 + (j | m), r1 + j, r1 + (j | m)];
            let v = [data[idx[0]], data[idx[1]], data[idx[2]], data[idx[3]]];
            for r in 0..4 {
                data[idx[r]] = s[r][0] * v[0] + s[r][1] * v[1] + s[r][2] * v[2] + s[r][3] * v[3];
            }
        }
    }
}
