//! Simulator checked against independent full-matrix and statevector
//! evaluations.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qgan_mark::sim::*;

type CMat = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn mat2(m: [[f64; 2]; 2]) -> CMat {
    CMat::from_fn(2, 2, |i, j| c(m[i][j]))
}

/// `op` on qubit `q` of an `n`-qubit register, qubit 0 least significant.
fn lift(op: &CMat, q: usize, n: usize) -> CMat {
    let hi = CMat::identity(1 << (n - 1 - q), 1 << (n - 1 - q));
    let lo = CMat::identity(1 << q, 1 << q);
    hi.kronecker(op).kronecker(&lo)
}

fn cz_full(a: usize, b: usize, n: usize) -> CMat {
    let d = 1 << n;
    CMat::from_fn(d, d, |i, j| {
        if i != j {
            c(0.0)
        } else if (i >> a) & 1 == 1 && (i >> b) & 1 == 1 {
            c(-1.0)
        } else {
            c(1.0)
        }
    })
}

fn ry(theta: f64) -> CMat {
    let (s, co) = (theta / 2.0).sin_cos();
    mat2([[co, -s], [s, co]])
}

/// Kraus operators written out by hand: bit flip, then amplitude damping,
/// then the dephasing that brings coherence decay to `exp(−t/T2)`.
fn noise_kraus(p: &HardwareProfile, dur_ns: f64) -> Vec<Vec<CMat>> {
    let t = dur_ns * 1e-3;
    let flip = vec![
        mat2([[1.0, 0.0], [0.0, 1.0]]) * c((1.0 - p.paulix_err).sqrt()),
        mat2([[0.0, 1.0], [1.0, 0.0]]) * c(p.paulix_err.sqrt()),
    ];
    let gamma = 1.0 - (-t / p.t1_us).exp();
    let damp = vec![mat2([[1.0, 0.0], [0.0, (1.0 - gamma).sqrt()]]), mat2([[0.0, gamma.sqrt()], [0.0, 0.0]])];
    let f = (-t / p.t2_us).exp() / (1.0 - gamma).sqrt();
    let deph = vec![
        mat2([[1.0, 0.0], [0.0, 1.0]]) * c(((1.0 + f) / 2.0).sqrt()),
        mat2([[1.0, 0.0], [0.0, -1.0]]) * c(((1.0 - f) / 2.0).sqrt()),
    ];
    vec![flip, damp, deph]
}

fn apply_channel(rho: &CMat, ops: &[CMat], q: usize, n: usize) -> CMat {
    let mut out = CMat::zeros(rho.nrows(), rho.ncols());
    for k in ops {
        let big = lift(k, q, n);
        out += &big * rho * big.adjoint();
    }
    out
}

fn oracle_run(circ: &CircuitSpec, prof: Option<&HardwareProfile>) -> Vec<f64> {
    let n = circ.n_qubits;
    let d = 1 << n;
    let mut rho = CMat::zeros(d, d);
    rho[(0, 0)] = c(1.0);
    for g in &circ.ops {
        let (u, touched, dur) = match *g {
            Gate::Ry { qubit, angle } => (lift(&ry(angle), qubit, n), vec![qubit], prof.map(|p| p.gate_dur_1q_ns)),
            Gate::X { qubit } => (lift(&mat2([[0.0, 1.0], [1.0, 0.0]]), qubit, n), vec![qubit], prof.map(|p| p.gate_dur_1q_ns)),
            Gate::Cz { a, b } => (cz_full(a, b, n), vec![a, b], prof.map(|p| p.gate_dur_2q_ns)),
        };
        rho = &u * &rho * u.adjoint();
        if let (Some(p), Some(dur)) = (prof, dur) {
            for &q in &touched {
                for ch in noise_kraus(p, dur) {
                    rho = apply_channel(&rho, &ch, q, n);
                }
            }
        }
    }
    let probs = DMatrix::from_fn(d, 1, |i, _| rho[(i, i)].re);
    let r = prof.map_or(0.0, |p| p.readout_err);
    let conf = DMatrix::from_row_slice(2, 2, &[1.0 - r, r, r, 1.0 - r]);
    let mut full = DMatrix::identity(1, 1);
    for _ in 0..n {
        full = full.kronecker(&conf);
    }
    (full * probs).iter().cloned().collect()
}

fn statevector_run(circ: &CircuitSpec) -> Vec<f64> {
    let n = circ.n_qubits;
    let mut psi = vec![c(0.0); 1 << n];
    psi[0] = c(1.0);
    for g in &circ.ops {
        match *g {
            Gate::Ry { qubit, angle } => {
                let (s, co) = (angle / 2.0).sin_cos();
                for i in 0..psi.len() {
                    if (i >> qubit) & 1 == 0 {
                        let j = i | (1 << qubit);
                        let (a, b) = (psi[i], psi[j]);
                        psi[i] = a * co - b * s;
                        psi[j] = a * s + b * co;
                    }
                }
            }
            Gate::X { qubit } => {
                for i in 0..psi.len() {
                    if (i >> qubit) & 1 == 0 {
                        psi.swap(i, i | (1 << qubit));
                    }
                }
            }
            Gate::Cz { a, b } => {
                for (i, amp) in psi.iter_mut().enumerate() {
                    if (i >> a) & 1 == 1 && (i >> b) & 1 == 1 {
                        *amp = -*amp;
                    }
                }
            }
        }
    }
    psi.iter().map(|a| a.norm_sqr()).collect()
}

fn random_circuit(rng: &mut ChaCha8Rng, n: usize, len: usize) -> CircuitSpec {
    let ops = (0..len)
        .map(|_| match rng.random_range(0..3) {
            0 if n > 1 => {
                let a = rng.random_range(0..n);
                let mut b = rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                Gate::cz(a, b)
            }
            1 => Gate::X { qubit: rng.random_range(0..n) },
            _ => Gate::ry(rng.random_range(0..n), rng.random_range(-4.0..4.0)),
        })
        .collect();
    CircuitSpec::new(n, ops).unwrap()
}

/// The generator's layout: RY embedding, then RY layers with a CZ ladder.
fn pqc(rng: &mut ChaCha8Rng, n: usize, depth: usize) -> CircuitSpec {
    let mut ops: Vec<Gate> = (0..n).map(|q| Gate::ry(q, rng.random_range(0.0..1.5))).collect();
    for _ in 0..depth {
        ops.extend((0..n).map(|q| Gate::ry(q, rng.random_range(0.0..3.14))));
        ops.extend((0..n - 1).map(|q| Gate::cz(q, q + 1)));
    }
    CircuitSpec::new(n, ops).unwrap()
}

#[test]
fn five_qubit_pqc_matches_kraus_oracle_under_athens() {
    let athens = bundled_profile("ibm_athens").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..3 {
        let circ = pqc(&mut rng, 5, 5);
        let got = run_circuit(&circ, Some(&athens)).unwrap();
        let want = oracle_run(&circ, Some(&athens));
        for (a, b) in got.as_slice().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn random_circuits_match_kraus_oracle_on_every_profile() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (name, prof) in bundled_profiles() {
        let n = rng.random_range(1..=3);
        let circ = random_circuit(&mut rng, n, 12);
        let got = run_circuit(&circ, Some(&prof)).unwrap();
        let want = oracle_run(&circ, Some(&prof));
        for (a, b) in got.as_slice().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{name}: {a} vs {b}");
        }
    }
}

#[test]
fn noiseless_runs_match_statevector() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..100 {
        let n = 1 + case % 5;
        let circ = random_circuit(&mut rng, n, 20);
        let got = run_circuit(&circ, None).unwrap();
        for (a, b) in got.as_slice().iter().zip(statevector_run(&circ)) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn measured_probabilities_are_the_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let prof = bundled_profile("ibm_lagos").unwrap();
    let noise = NoiseModel::from_profile(&prof).unwrap();
    for _ in 0..10 {
        let circ = random_circuit(&mut rng, 3, 15);
        let rho = Program::compile(&circ, Some(&noise)).unwrap().evolve().unwrap();
        let p = measure_probabilities(&rho).unwrap();
        for i in 0..8 {
            assert!((p[i] - rho.get(i, i).re).abs() < 1e-13);
        }
    }
}

#[test]
fn cz_matches_explicit_matrix_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // Random pure 2-qubit state.
    let amps: Vec<Complex64> = (0..4).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let amps: Vec<Complex64> = amps.iter().map(|a| a / norm).collect();
    let rho = DensityMatrix::from_pure(2, &amps).unwrap();
    let got = apply_unitary(&rho, &Gate::cz(0, 1)).unwrap();
    let u = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(1.0), c(1.0), c(-1.0)]));
    let r = CMat::from_fn(4, 4, |i, j| rho.get(i, j));
    let want = &u * r * u.adjoint();
    for i in 0..4 {
        for j in 0..4 {
            assert!((got.get(i, j) - want[(i, j)]).norm() < 1e-15);
        }
    }
}

#[test]
fn thermal_relaxation_decays_coherence_by_t2() {
    let plus = DensityMatrix::from_pure(1, &[c(0.5f64.sqrt()), c(0.5f64.sqrt())]).unwrap();
    for (t1, t2, dur) in [(50.0, 30.0, 300.0), (20.0, 40.0, 700.0), (100.0, 100.0, 35.0)] {
        let ch = thermal_relaxation_channel(t1, t2, dur).unwrap();
        let out = apply_kraus(&plus, &ch).unwrap();
        let want = 0.5 * (-(dur * 1e-3) / t2).exp();
        assert!((out.get(0, 1).re - want).abs() < 1e-14);
        assert!(ch.completeness_error() < 1e-12);
    }
}

#[test]
fn bit_flip_composition() {
    // Two flips at p give an effective flip 2p(1 − p).
    let ground = build_density(1).unwrap();
    for p in [0.0, 0.1, 0.3, 0.5, 1.0] {
        let ch = bit_flip_channel(p).unwrap();
        let once = apply_kraus(&ground, &ch).unwrap();
        let twice = apply_kraus(&once, &ch).unwrap();
        let eff = 2.0 * p * (1.0 - p);
        assert!((twice.get(1, 1).re - eff).abs() < 1e-15);
        assert!((twice.get(0, 0).re - (1.0 - eff)).abs() < 1e-15);
    }
    let ath = bundled_profile("ibm_athens").unwrap();
    let out = apply_kraus(&ground, &bit_flip_channel(ath.paulix_err).unwrap()).unwrap();
    assert!((out.get(1, 1).re - 4.82e-4).abs() < 1e-18);
}

#[test]
fn random_states_keep_trace_under_channels() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let n = rng.random_range(1..=4);
        let circ = random_circuit(&mut rng, n, 10);
        let prof = HardwareProfile::new("r", 5, rng.random_range(10.0..200.0), rng.random_range(5.0..20.0), 0.02, 1e-3);
        let rho = Program::compile(&circ, Some(&NoiseModel::from_profile(&prof).unwrap())).unwrap().evolve().unwrap();
        let ch = thermal_relaxation_channel(prof.t1_us, prof.t2_us, 500.0).unwrap().on(rng.random_range(0..n));
        let out = apply_kraus(&rho, &ch).unwrap();
        assert!((out.trace().re - 1.0).abs() < 1e-12);
        out.check_invariants().unwrap();
    }
}
