use num_complex::Complex64;

use super::channel::{check_probability, real, KrausChannel, Mat2, Superop, PAULI_X};
use super::density::check_width;
use super::{DensityMatrix, HardwareProfile, ProbVector, SimError};

/// Gates available to the generator circuits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Ry { qubit: usize, angle: f64 },
    Cz { a: usize, b: usize },
    X { qubit: usize },
}

impl Gate {
    pub fn ry(qubit: usize, angle: f64) -> Self {
        Gate::Ry { qubit, angle }
    }

    pub fn cz(a: usize, b: usize) -> Self {
        Gate::Cz { a, b }
    }

    fn check(&self, n_qubits: usize) -> Result<(), SimError> {
        let out = |qubit| SimError::QubitOutOfRange { qubit, n_qubits };
        match *self {
            Gate::Ry { qubit, angle } => {
                if qubit >= n_qubits {
                    return Err(out(qubit));
                }
                if !angle.is_finite() {
                    return Err(SimError::InvalidGate(format!("RY angle {angle}")));
                }
            }
            Gate::X { qubit } if qubit >= n_qubits => return Err(out(qubit)),
            Gate::Cz { a, b } => {
                if a >= n_qubits {
                    return Err(out(a));
                }
                if b >= n_qubits {
                    return Err(out(b));
                }
                if a == b {
                    return Err(SimError::InvalidGate(format!("CZ on a single qubit {a}")));
                }
            }
            Gate::X { .. } => {}
        }
        Ok(())
    }
}

/// `RY(θ) = [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]]`.
pub fn ry_matrix(angle: f64) -> Mat2 {
    let (s, c) = (angle / 2.0).sin_cos();
    real([[c, -s], [s, c]])
}

/// Ordered gate list on a fixed register width.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CircuitSpec {
    pub n_qubits: usize,
    pub ops: Vec<Gate>,
}

impl CircuitSpec {
    pub fn new(n_qubits: usize, ops: Vec<Gate>) -> Result<Self, SimError> {
        let c = Self { n_qubits, ops };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        check_width(self.n_qubits)?;
        self.ops.iter().try_for_each(|g| g.check(self.n_qubits))
    }
}

/// Channels derived from a [`HardwareProfile`], ready for repeated use.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    profile: HardwareProfile,
    after_1q: KrausChannel,
    after_2q: KrausChannel,
    sop_1q: Superop,
    sop_2q: Superop,
}

impl NoiseModel {
    /// Bit flip at the Pauli-X rate followed by thermal relaxation over the
    /// gate duration, for one- and two-qubit gate timings.
    pub fn from_profile(profile: &HardwareProfile) -> Result<Self, SimError> {
        profile.validate()?;
        let flip = KrausChannel::bit_flip(profile.paulix_err)?;
        let after = |dur| -> Result<KrausChannel, SimError> {
            flip.then(&KrausChannel::thermal_relaxation(profile.t1_us, profile.t2_us, dur)?)
        };
        let after_1q = after(profile.gate_dur_1q_ns)?;
        let after_2q = after(profile.gate_dur_2q_ns)?;
        Ok(Self {
            profile: profile.clone(),
            sop_1q: after_1q.superop(),
            sop_2q: after_2q.superop(),
            after_1q,
            after_2q,
        })
    }

    pub fn profile(&self) -> &HardwareProfile {
        &self.profile
    }

    pub fn name(&self) -> &str {
        &self.profile.name
    }

    /// Channel applied to the qubit of every single-qubit gate.
    pub fn one_qubit_channel(&self) -> &KrausChannel {
        &self.after_1q
    }

    /// Channel applied to each qubit touched by a two-qubit gate.
    pub fn two_qubit_channel(&self) -> &KrausChannel {
        &self.after_2q
    }
}

/// Applies `ρ ↦ UρU†` for one gate, in place.
pub fn apply_gate(rho: &mut DensityMatrix, gate: &Gate) -> Result<(), SimError> {
    gate.check(rho.n_qubits())?;
    match *gate {
        Gate::Ry { qubit, angle } => Superop::from_unitary(&ry_matrix(angle)).apply(rho, qubit),
        Gate::X { qubit } => Superop::from_unitary(&PAULI_X).apply(rho, qubit),
        Gate::Cz { a, b } => {
            let dim = rho.dim();
            apply_cz(rho.as_mut_slice(), dim, a, b)
        }
    }
    Ok(())
}

pub(crate) fn apply_cz(data: &mut [Complex64], dim: usize, a: usize, b: usize) {
    let mask = (1usize << a) | (1usize << b);
    for i in 0..dim {
        let si = (i & mask) == mask;
        for j in 0..dim {
            if si != ((j & mask) == mask) {
                data[i * dim + j] = -data[i * dim + j];
            }
        }
    }
}

/// Symmetric per-qubit confusion `[[1−r, r], [r, 1−r]]` applied as a tensor
/// product over all qubits of a distribution (or of any weight vector, since
/// the map is its own transpose).
pub fn confuse_in_place(values: &mut [f64], r: f64) {
    if r == 0.0 {
        return;
    }
    let n = values.len().trailing_zeros();
    for q in 0..n {
        let m = 1usize << q;
        for j0 in (0..values.len()).filter(|j| j & m == 0) {
            let (a, b) = (values[j0], values[j0 | m]);
            values[j0] = (1.0 - r) * a + r * b;
            values[j0 | m] = r * a + (1.0 - r) * b;
        }
    }
}

/// Readout confusion at the profile's mean readout error.
pub fn apply_readout_error(p: &ProbVector, profile: &HardwareProfile) -> Result<ProbVector, SimError> {
    check_probability("readout error", profile.readout_err)?;
    let mut v = p.as_slice().to_vec();
    confuse_in_place(&mut v, profile.readout_err);
    Ok(ProbVector::from_raw(v))
}

enum Step {
    Single {
        qubit: usize,
        /// Gate followed by its noise, as one block map.
        fused: Superop,
        unitary: Superop,
        noise: Option<Superop>,
        angle: Option<f64>,
    },
    Cz {
        a: usize,
        b: usize,
        noise: Option<Superop>,
    },
}

/// A circuit lowered to block maps for one noise setting.
pub struct Program {
    n_qubits: usize,
    steps: Vec<Step>,
    readout: f64,
}

/// States recorded in front of every RY step during a forward pass.
pub struct ForwardCache {
    before_ry: Vec<Option<DensityMatrix>>,
    probs: ProbVector,
}

impl ForwardCache {
    pub fn probabilities(&self) -> &ProbVector {
        &self.probs
    }
}

impl Program {
    pub fn compile(circuit: &CircuitSpec, noise: Option<&NoiseModel>) -> Result<Self, SimError> {
        circuit.validate()?;
        if let Some(nm) = noise {
            if circuit.n_qubits > nm.profile.n_qubits {
                return Err(SimError::WidthExceedsProfile {
                    circuit: circuit.n_qubits,
                    profile: nm.profile.n_qubits,
                    name: nm.profile.name.clone(),
                });
            }
        }
        let steps = circuit
            .ops
            .iter()
            .map(|g| match *g {
                Gate::Ry { qubit, angle } => single(qubit, &ry_matrix(angle), noise, Some(angle)),
                Gate::X { qubit } => single(qubit, &PAULI_X, noise, None),
                Gate::Cz { a, b } => Step::Cz {
                    a,
                    b,
                    noise: noise.map(|n| n.sop_2q),
                },
            })
            .collect();
        Ok(Self {
            n_qubits: circuit.n_qubits,
            steps,
            readout: noise.map_or(0.0, |n| n.profile.readout_err),
        })
    }

    fn step(&self, step: &Step, rho: &mut DensityMatrix) {
        match step {
            Step::Single { qubit, fused, .. } => fused.apply(rho, *qubit),
            Step::Cz { a, b, noise } => {
                let dim = rho.dim();
                apply_cz(rho.as_mut_slice(), dim, *a, *b);
                if let Some(n) = noise {
                    n.apply(rho, *a);
                    n.apply(rho, *b);
                }
            }
        }
    }

    fn finish(&self, rho: &DensityMatrix) -> Result<ProbVector, SimError> {
        let mut p = rho.probabilities()?.into_vec();
        confuse_in_place(&mut p, self.readout);
        Ok(ProbVector::from_raw(p))
    }

    /// Final state before measurement.
    pub fn evolve(&self) -> Result<DensityMatrix, SimError> {
        let mut rho = DensityMatrix::ground(self.n_qubits)?;
        for s in &self.steps {
            self.step(s, &mut rho);
        }
        Ok(rho)
    }

    pub fn run(&self) -> Result<ProbVector, SimError> {
        self.finish(&self.evolve()?)
    }

    pub fn run_cached(&self) -> Result<ForwardCache, SimError> {
        let mut rho = DensityMatrix::ground(self.n_qubits)?;
        let mut before_ry = Vec::with_capacity(self.steps.len());
        for s in &self.steps {
            let keep = matches!(s, Step::Single { angle: Some(_), .. });
            before_ry.push(keep.then(|| rho.clone()));
            self.step(s, &mut rho);
        }
        Ok(ForwardCache {
            before_ry,
            probs: self.finish(&rho)?,
        })
    }

    /// Derivative of `Σ_j w_j·p_j` with respect to every RY angle (zero for
    /// other gates), where `p` is the measured distribution.
    ///
    /// Each entry is the parameter-shift difference
    /// `(f(θ+π/2) − f(θ−π/2))/2`, evaluated by pairing the cached state in
    /// front of the gate with the observable pulled back from the end of the
    /// circuit. This gives the same numbers as re-running the two shifted
    /// circuits, at the cost of one backward sweep.
    pub fn ry_gradients(&self, cache: &ForwardCache, weights: &[f64]) -> Result<Vec<f64>, SimError> {
        let dim = 1usize << self.n_qubits;
        if weights.len() != dim {
            return Err(SimError::DimensionMismatch {
                expected: dim,
                found: weights.len(),
            });
        }
        let mut w = weights.to_vec();
        confuse_in_place(&mut w, self.readout);
        let mut obs = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (i, wi) in w.iter().enumerate() {
            obs[i * dim + i] = Complex64::new(*wi, 0.0);
        }
        let mut grads = vec![0.0; self.steps.len()];
        for (k, s) in self.steps.iter().enumerate().rev() {
            match s {
                Step::Single {
                    qubit,
                    unitary,
                    noise,
                    angle,
                    ..
                } => {
                    if let Some(n) = noise {
                        super::channel::apply_blocks(&n.adjoint().0, &mut obs, dim, *qubit);
                    }
                    if let (Some(theta), Some(rho)) = (angle, &cache.before_ry[k]) {
                        let shift = std::f64::consts::FRAC_PI_2;
                        let plus = Superop::from_unitary(&ry_matrix(theta + shift));
                        let minus = Superop::from_unitary(&ry_matrix(theta - shift));
                        let fp = plus.expectation(&obs, rho.as_slice(), dim, *qubit);
                        let fm = minus.expectation(&obs, rho.as_slice(), dim, *qubit);
                        grads[k] = 0.5 * (fp - fm);
                    }
                    super::channel::apply_blocks(&unitary.adjoint().0, &mut obs, dim, *qubit);
                }
                Step::Cz { a, b, noise } => {
                    if let Some(n) = noise {
                        let adj = n.adjoint();
                        super::channel::apply_blocks(&adj.0, &mut obs, dim, *b);
                        super::channel::apply_blocks(&adj.0, &mut obs, dim, *a);
                    }
                    apply_cz(&mut obs, dim, *a, *b);
                }
            }
        }
        Ok(grads)
    }
}

fn single(qubit: usize, u: &Mat2, noise: Option<&NoiseModel>, angle: Option<f64>) -> Step {
    let unitary = Superop::from_unitary(u);
    let noise = noise.map(|n| n.sop_1q);
    Step::Single {
        qubit,
        fused: noise.map_or(unitary, |n| n.after(&unitary)),
        unitary,
        noise,
        angle,
    }
}

/// Runs `circuit` from the ground state and returns measured probabilities.
///
/// With a profile, every gate is followed by bit flip and thermal relaxation
/// on each touched qubit and readout confusion is applied to the result.
pub fn run_circuit(circuit: &CircuitSpec, profile: Option<&HardwareProfile>) -> Result<ProbVector, SimError> {
    let noise = profile.map(NoiseModel::from_profile).transpose()?;
    Program::compile(circuit, noise.as_ref())?.run()
}

/// Same as [`run_circuit`] with a pre-built noise model.
pub fn run_with_noise(circuit: &CircuitSpec, noise: Option<&NoiseModel>) -> Result<ProbVector, SimError> {
    Program::compile(circuit, noise)?.run()
}

/// Jacobian of the measured distribution with respect to the RY angles at
/// `op_indices`, by running both shifted circuits for every parameter:
/// column `k` is `(p(θ_k+π/2) − p(θ_k−π/2))/2`.
///
/// Returned as one vector per parameter.
pub fn parameter_shift_jacobian(
    circuit: &CircuitSpec,
    noise: Option<&NoiseModel>,
    op_indices: &[usize],
) -> Result<Vec<Vec<f64>>, SimError> {
    circuit.validate()?;
    for &k in op_indices {
        if !matches!(circuit.ops.get(k), Some(Gate::Ry { .. })) {
            return Err(SimError::InvalidGate(format!("op {k} is not an RY gate")));
        }
    }
    crate::par::try_map_range(op_indices.len(), |i| {
        let k = op_indices[i];
        let shifted = |delta: f64| {
            let mut c = circuit.clone();
            if let Gate::Ry { angle, .. } = &mut c.ops[k] {
                *angle += delta;
            }
            run_with_noise(&c, noise)
        };
        let plus = shifted(std::f64::consts::FRAC_PI_2)?;
        let minus = shifted(-std::f64::consts::FRAC_PI_2)?;
        Ok(plus
            .as_slice()
            .iter()
            .zip(minus.as_slice())
            .map(|(a, b)| 0.5 * (a - b))
            .collect())
    })
}
