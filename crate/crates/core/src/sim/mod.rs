//! Deterministic density-matrix simulation of few-qubit circuits.
//!
//! Noise comes from a [`HardwareProfile`]: after every gate, each touched
//! qubit goes through a bit flip at the Pauli-X error rate and a thermal
//! relaxation channel over the gate duration; measured distributions then
//! pass through a symmetric readout confusion. There is no sampling anywhere
//! in this module, so identical inputs give bit-identical outputs.

mod channel;
mod circuit;
mod density;
mod profile;

use thiserror::Error;

pub use channel::{KrausChannel, Mat2, COMPLETENESS_TOL};
pub use circuit::{
    apply_gate, apply_readout_error, confuse_in_place, parameter_shift_jacobian, run_circuit, run_with_noise,
    ry_matrix, CircuitSpec, ForwardCache, Gate, NoiseModel, Program,
};
pub use density::{DensityMatrix, ProbVector};
pub use profile::{
    bundled_profile, bundled_profiles, load_profiles_dir, HardwareProfile, DEFAULT_GATE_DUR_1Q_NS,
    DEFAULT_GATE_DUR_2Q_NS, DEFAULT_READOUT_DUR_NS, IBM_SUITE,
};

/// Widest register the simulator accepts.
pub const MAX_QUBITS: usize = 12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("register of {n_qubits} qubits is outside 1..={MAX_QUBITS}", MAX_QUBITS = MAX_QUBITS)]
    Capacity { n_qubits: usize },
    #[error("qubit {qubit} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("{name} = {value} is not a probability")]
    InvalidProbability { name: String, value: f64 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("cannot read profile {source_name}: {message}")]
    ProfileFormat { source_name: String, message: String },
    #[error("Kraus operators violate completeness by {deviation:e}")]
    IncompleteChannel { deviation: f64 },
    #[error("state corrupted: diagonal sums to {sum}")]
    StateCorruption { sum: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("expected {expected} entries, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("circuit uses {circuit} qubits but profile {name} has only {profile}")]
    WidthExceedsProfile { circuit: usize, profile: usize, name: String },
}

/// `|0…0⟩⟨0…0|` on `n_qubits` qubits.
pub fn build_density(n_qubits: usize) -> Result<DensityMatrix, SimError> {
    DensityMatrix::ground(n_qubits)
}

/// `UρU†` as a new matrix.
pub fn apply_unitary(rho: &DensityMatrix, gate: &Gate) -> Result<DensityMatrix, SimError> {
    let mut out = rho.clone();
    apply_gate(&mut out, gate)?;
    Ok(out)
}

/// `Σ KρK†` as a new matrix.
pub fn apply_kraus(rho: &DensityMatrix, channel: &KrausChannel) -> Result<DensityMatrix, SimError> {
    let mut out = rho.clone();
    channel.apply(&mut out)?;
    Ok(out)
}

pub fn bit_flip_channel(p: f64) -> Result<KrausChannel, SimError> {
    KrausChannel::bit_flip(p)
}

pub fn thermal_relaxation_channel(t1_us: f64, t2_us: f64, duration_ns: f64) -> Result<KrausChannel, SimError> {
    KrausChannel::thermal_relaxation(t1_us, t2_us, duration_ns)
}

pub fn measure_probabilities(rho: &DensityMatrix) -> Result<ProbVector, SimError> {
    rho.probabilities()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn ry_zero_is_identity() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let rho = DensityMatrix::from_pure(2, &[
            Complex64::new(h, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, h),
            Complex64::new(0.0, 0.0),
        ])
        .unwrap();
        for q in 0..2 {
            assert_eq!(apply_unitary(&rho, &Gate::ry(q, 0.0)).unwrap(), rho);
        }
    }

    #[test]
    fn ry_pi_flips_ground_state() {
        let rho = apply_unitary(&build_density(1).unwrap(), &Gate::ry(0, PI)).unwrap();
        let p = rho.probabilities().unwrap();
        assert!(p[0].abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cz_phases() {
        // |11⟩⟨11| is left alone.
        let mut amps = vec![Complex64::new(0.0, 0.0); 4];
        amps[3] = Complex64::new(1.0, 0.0);
        let rho = DensityMatrix::from_pure(2, &amps).unwrap();
        assert_eq!(apply_unitary(&rho, &Gate::cz(0, 1)).unwrap(), rho);
        // |++⟩⟨++|: every coherence with |11⟩ flips sign, nothing else changes.
        let plus = DensityMatrix::from_pure(2, &[Complex64::new(0.5, 0.0); 4]).unwrap();
        let out = apply_unitary(&plus, &Gate::cz(0, 1)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let sign = if (i == 3) != (j == 3) { -1.0 } else { 1.0 };
                assert_eq!(out.get(i, j), Complex64::new(0.25 * sign, 0.0));
            }
        }
    }

    #[test]
    fn gate_index_errors() {
        let rho = build_density(2).unwrap();
        assert!(matches!(
            apply_unitary(&rho, &Gate::ry(2, 0.1)),
            Err(SimError::QubitOutOfRange { qubit: 2, .. })
        ));
        assert!(apply_unitary(&rho, &Gate::cz(1, 1)).is_err());
        assert!(CircuitSpec::new(3, vec![Gate::X { qubit: 3 }]).is_err());
        assert!(CircuitSpec::new(13, vec![]).is_err());
    }

    #[test]
    fn readout_confusion() {
        let prof = |r| HardwareProfile::new("t", 2, 50.0, 50.0, r, 0.0);
        let p = ProbVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(apply_readout_error(&p, &prof(0.0)).unwrap(), p);

        let one = ProbVector::basis(1, 0);
        let out = apply_readout_error(&one, &HardwareProfile::new("t", 1, 50.0, 50.0, 0.1, 0.0)).unwrap();
        assert!((out[0] - 0.9).abs() < 1e-15 && (out[1] - 0.1).abs() < 1e-15);

        let r = 0.017;
        let out = apply_readout_error(&ProbVector::basis(2, 0), &prof(r)).unwrap();
        let expect = [(1.0 - r) * (1.0 - r), (1.0 - r) * r, r * (1.0 - r), r * r];
        for (a, b) in out.as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn noiseless_runs() {
        let c = CircuitSpec::new(3, (0..3).map(|q| Gate::ry(q, 0.0)).collect()).unwrap();
        assert_eq!(run_circuit(&c, None).unwrap(), ProbVector::basis(3, 0));
        for theta in [0.0, 0.3, 1.0, PI / 2.0, 2.5, PI] {
            let p = run_circuit(&CircuitSpec::new(1, vec![Gate::ry(0, theta)]).unwrap(), None).unwrap();
            assert!((p[0] - (theta / 2.0).cos().powi(2)).abs() < 1e-15);
            assert!((p[1] - (theta / 2.0).sin().powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn width_must_fit_profile() {
        let narrow = HardwareProfile::new("narrow", 2, 50.0, 50.0, 0.01, 1e-3);
        let c = CircuitSpec::new(3, vec![Gate::ry(2, 0.4)]).unwrap();
        assert!(matches!(run_circuit(&c, Some(&narrow)), Err(SimError::WidthExceedsProfile { .. })));
    }

    #[test]
    fn single_ry_shift_rule_is_exact() {
        // P(0) = cos²(θ/2) so dP(0)/dθ = −sin(θ)/2; at θ = π/2 this is −1/2.
        for theta in [PI / 2.0, 0.3, 2.0, -1.1] {
            let c = CircuitSpec::new(1, vec![Gate::ry(0, theta)]).unwrap();
            let jac = parameter_shift_jacobian(&c, None, &[0]).unwrap();
            assert!((jac[0][0] + theta.sin() / 2.0).abs() < 1e-12);
            let prog = Program::compile(&c, None).unwrap();
            let cache = prog.run_cached().unwrap();
            let g = prog.ry_gradients(&cache, &[1.0, 0.0]).unwrap();
            assert!((g[0] + theta.sin() / 2.0).abs() < 1e-12);
        }
        let c = CircuitSpec::new(1, vec![Gate::ry(0, PI / 2.0)]).unwrap();
        assert!((parameter_shift_jacobian(&c, None, &[0]).unwrap()[0][0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn determinism() {
        let prof = bundled_profile("ibm_athens").unwrap();
        let c = CircuitSpec::new(
            4,
            vec![Gate::ry(0, 0.3), Gate::cz(0, 1), Gate::ry(3, 1.2), Gate::X { qubit: 2 }, Gate::cz(2, 3)],
        )
        .unwrap();
        let a = run_circuit(&c, Some(&prof)).unwrap();
        let b = run_circuit(&c, Some(&prof)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }
}
