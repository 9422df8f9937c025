use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use super::{Image8, QganError, IMAGE_PIXELS};
use crate::sim::{parameter_shift_jacobian, CircuitSpec, ForwardCache, Gate, NoiseModel, ProbVector, Program};

/// Profile name recorded for noiseless training or inference.
pub const NOISELESS: &str = "noiseless";

/// One stage of a training schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub profile: String,
    pub epochs: usize,
}

/// Patch generator: `n_sub` identical circuits, each producing one patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorModel {
    pub n_sub: usize,
    pub n_qubits: usize,
    pub n_ancilla: usize,
    pub depth: usize,
    /// Rotation angles laid out as `[sub][layer][qubit]`.
    pub theta: Vec<f64>,
    pub schedule: Vec<ScheduleEntry>,
}

impl GeneratorModel {
    pub fn new(n_sub: usize, n_qubits: usize, n_ancilla: usize, depth: usize, theta: Vec<f64>) -> Result<Self, QganError> {
        let m = Self {
            n_sub,
            n_qubits,
            n_ancilla,
            depth,
            theta,
            schedule: Vec::new(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Angles drawn uniformly from `[0, π)`.
    pub fn random<R: Rng>(n_sub: usize, n_qubits: usize, n_ancilla: usize, depth: usize, rng: &mut R) -> Result<Self, QganError> {
        let theta = (0..n_sub * depth * n_qubits).map(|_| rng.random_range(0.0..PI)).collect();
        Self::new(n_sub, n_qubits, n_ancilla, depth, theta)
    }

    pub fn validate(&self) -> Result<(), QganError> {
        if self.n_qubits == 0 || self.n_ancilla >= self.n_qubits {
            return Err(QganError::Shape(format!(
                "{} ancilla qubits leave no data qubits out of {}",
                self.n_ancilla, self.n_qubits
            )));
        }
        if self.n_sub * self.patch_len() != IMAGE_PIXELS {
            return Err(QganError::Shape(format!(
                "{} patches of {} pixels do not tile a {IMAGE_PIXELS}-pixel image",
                self.n_sub,
                self.patch_len()
            )));
        }
        if self.theta.len() != self.params_per_sub() * self.n_sub {
            return Err(QganError::Shape(format!(
                "theta has {} entries, expected {}",
                self.theta.len(),
                self.params_per_sub() * self.n_sub
            )));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(QganError::Shape("theta contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn patch_len(&self) -> usize {
        1 << (self.n_qubits - self.n_ancilla)
    }

    pub fn params_per_sub(&self) -> usize {
        self.depth * self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    pub fn sub_theta(&self, sub: usize) -> &[f64] {
        let k = self.params_per_sub();
        &self.theta[sub * k..(sub + 1) * k]
    }

    /// Schedule as a single label, e.g. `ibm_athens>ibm_jakarta`.
    pub fn schedule_label(&self) -> String {
        schedule_label(self.schedule.iter().map(|e| e.profile.as_str()))
    }

    pub fn total_epochs(&self) -> usize {
        self.schedule.iter().map(|e| e.epochs).sum()
    }
}

/// Joins profile names with `>`; an empty schedule is labelled `untrained`.
pub fn schedule_label<'a>(names: impl IntoIterator<Item = &'a str>) -> String {
    let v: Vec<&str> = names.into_iter().collect();
    if v.is_empty() {
        "untrained".to_string()
    } else {
        v.join(">")
    }
}

/// Latent input, one angle per qubit, each in `[0, π/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector(Vec<f64>);

impl LatentVector {
    pub fn new(z: Vec<f64>) -> Result<Self, QganError> {
        if let Some(v) = z.iter().find(|v| !(0.0..FRAC_PI_2).contains(*v)) {
            return Err(QganError::Latent(format!("component {v} outside [0, π/2)")));
        }
        Ok(Self(z))
    }

    pub fn sample<R: Rng>(n: usize, rng: &mut R) -> Self {
        Self((0..n).map(|_| rng.random_range(0.0..FRAC_PI_2)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `RY(z_i)` on qubit `i`.
pub fn embed_latent(z: &LatentVector, n_qubits: usize) -> Result<Vec<Gate>, QganError> {
    if z.len() != n_qubits {
        return Err(QganError::Latent(format!("latent has {} components for {n_qubits} qubits", z.len())));
    }
    Ok(z.0.iter().enumerate().map(|(q, a)| Gate::ry(q, *a)).collect())
}

/// Embedding followed by `depth` layers of RY rotations and a CZ ladder over
/// neighbouring qubits.
pub fn subgenerator_circuit(theta: &[f64], z: &LatentVector, n_qubits: usize) -> Result<CircuitSpec, QganError> {
    if theta.len() % n_qubits != 0 {
        return Err(QganError::Shape(format!(
            "{} layer parameters do not divide into {n_qubits} qubits",
            theta.len()
        )));
    }
    let mut ops = embed_latent(z, n_qubits)?;
    for layer in theta.chunks(n_qubits) {
        ops.extend(layer.iter().enumerate().map(|(q, a)| Gate::ry(q, *a)));
        ops.extend((0..n_qubits - 1).map(|q| Gate::cz(q, q + 1)));
    }
    Ok(CircuitSpec::new(n_qubits, ops)?)
}

/// Positions of the trainable RY gates inside [`subgenerator_circuit`].
pub fn trainable_op_indices(n_qubits: usize, depth: usize) -> Vec<usize> {
    let per_layer = 2 * n_qubits - 1;
    (0..depth)
        .flat_map(|l| (0..n_qubits).map(move |q| n_qubits + l * per_layer + q))
        .collect()
}

pub fn subgenerator_forward(theta: &[f64], z: &LatentVector, n_qubits: usize, noise: Option<&NoiseModel>) -> Result<ProbVector, QganError> {
    let c = subgenerator_circuit(theta, z, n_qubits)?;
    Ok(crate::sim::run_with_noise(&c, noise)?)
}

/// Conditions on every ancilla (the top `n_ancilla` qubits) reading 0.
pub fn postselect_ancilla(p: &ProbVector, n_ancilla: usize) -> Result<ProbVector, QganError> {
    let n = p.n_qubits();
    if n_ancilla >= n {
        return Err(QganError::Shape(format!("{n_ancilla} ancillas on a {n}-qubit distribution")));
    }
    let keep = &p.as_slice()[..1 << (n - n_ancilla)];
    let mass: f64 = keep.iter().sum();
    if !(mass > 1e-9) {
        return Err(QganError::DegenerateState(format!("post-selection probability {mass:e}")));
    }
    Ok(ProbVector::new(keep.iter().map(|v| v / mass).collect())?)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// `x̃ = g / max_k g_k`.
pub fn normalize_patch(g: &ProbVector) -> Result<Vec<f64>, QganError> {
    let v = g.as_slice();
    let max = v[argmax(v)];
    if !(max > 0.0) {
        return Err(QganError::DegenerateState("all-zero patch distribution".into()));
    }
    Ok(v.iter().map(|x| x / max).collect())
}

/// Concatenates patches row-major into an 8×8 image.
pub fn assemble_image(patches: &[Vec<f64>]) -> Result<Image8, QganError> {
    let total: usize = patches.iter().map(Vec::len).sum();
    if total != IMAGE_PIXELS {
        return Err(QganError::Shape(format!("patches hold {total} pixels, expected {IMAGE_PIXELS}")));
    }
    Image8::new(patches.concat())
}

/// Splits an image back into `n_sub` equal patches.
pub fn disassemble_image(image: &Image8, n_sub: usize) -> Result<Vec<Vec<f64>>, QganError> {
    if n_sub == 0 || IMAGE_PIXELS % n_sub != 0 {
        return Err(QganError::Shape(format!("cannot split {IMAGE_PIXELS} pixels into {n_sub} patches")));
    }
    Ok(image.pixels().chunks(IMAGE_PIXELS / n_sub).map(<[f64]>::to_vec).collect())
}

pub fn generator_forward(model: &GeneratorModel, z: &LatentVector, noise: Option<&NoiseModel>) -> Result<Image8, QganError> {
    model.validate()?;
    let patches = (0..model.n_sub)
        .map(|i| {
            let p = subgenerator_forward(model.sub_theta(i), z, model.n_qubits, noise)?;
            normalize_patch(&postselect_ancilla(&p, model.n_ancilla)?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    assemble_image(&patches)
}

struct SubPass {
    program: Program,
    cache: ForwardCache,
}

/// Forward evaluation that keeps what the backward sweep needs.
pub struct ForwardPass {
    image: Image8,
    subs: Vec<SubPass>,
}

impl ForwardPass {
    pub fn image(&self) -> &Image8 {
        &self.image
    }
}

pub fn forward_pass(model: &GeneratorModel, z: &LatentVector, noise: Option<&NoiseModel>) -> Result<ForwardPass, QganError> {
    let mut subs = Vec::with_capacity(model.n_sub);
    let mut patches = Vec::with_capacity(model.n_sub);
    for i in 0..model.n_sub {
        let c = subgenerator_circuit(model.sub_theta(i), z, model.n_qubits)?;
        let program = Program::compile(&c, noise)?;
        let cache = program.run_cached()?;
        patches.push(normalize_patch(&postselect_ancilla(cache.probabilities(), model.n_ancilla)?)?);
        subs.push(SubPass { program, cache });
    }
    Ok(ForwardPass {
        image: assemble_image(&patches)?,
        subs,
    })
}

/// Pulls `∂L/∂x̃` for one patch back to `∂L/∂p` over the full `2^N`
/// distribution, through normalisation (max index held fixed) and
/// post-selection.
pub fn patch_vjp(p: &[f64], n_ancilla: usize, n_qubits: usize, d_patch: &[f64]) -> Result<Vec<f64>, QganError> {
    let keep = 1usize << (n_qubits - n_ancilla);
    let data = &p[..keep];
    let mass: f64 = data.iter().sum();
    if !(mass > 1e-9) {
        return Err(QganError::DegenerateState(format!("post-selection probability {mass:e}")));
    }
    let g: Vec<f64> = data.iter().map(|v| v / mass).collect();
    let m = argmax(&g);
    let gm = g[m];
    if !(gm > 0.0) {
        return Err(QganError::DegenerateState("all-zero patch distribution".into()));
    }
    // x_j = g_j / g_m
    let cross: f64 = d_patch.iter().zip(&g).map(|(d, gj)| d * gj).sum::<f64>() / (gm * gm);
    let mut dg: Vec<f64> = d_patch.iter().map(|d| d / gm).collect();
    dg[m] -= cross;
    // g_j = p_j / S
    let inner: f64 = dg.iter().zip(data).map(|(d, pj)| d * pj).sum::<f64>() / (mass * mass);
    let mut dp = vec![0.0; p.len()];
    for k in 0..keep {
        dp[k] = dg[k] / mass - inner;
    }
    Ok(dp)
}

/// `∂L/∂θ` given `∂L/∂image` for a recorded forward pass.
pub fn backward_pass(model: &GeneratorModel, pass: &ForwardPass, d_image: &[f64]) -> Result<Vec<f64>, QganError> {
    let patch = model.patch_len();
    let trainable = trainable_op_indices(model.n_qubits, model.depth);
    let mut grad = Vec::with_capacity(model.n_params());
    for (i, sub) in pass.subs.iter().enumerate() {
        let dp = patch_vjp(
            sub.cache.probabilities().as_slice(),
            model.n_ancilla,
            model.n_qubits,
            &d_image[i * patch..(i + 1) * patch],
        )?;
        let all = sub.program.ry_gradients(&sub.cache, &dp)?;
        grad.extend(trainable.iter().map(|&k| all[k]));
    }
    Ok(grad)
}

/// Same gradient as [`backward_pass`], but every column of the circuit
/// Jacobian comes from running the two `±π/2`-shifted circuits.
pub fn backward_shifted(model: &GeneratorModel, z: &LatentVector, noise: Option<&NoiseModel>, d_image: &[f64]) -> Result<Vec<f64>, QganError> {
    let patch = model.patch_len();
    let trainable = trainable_op_indices(model.n_qubits, model.depth);
    let mut grad = Vec::with_capacity(model.n_params());
    for i in 0..model.n_sub {
        let c = subgenerator_circuit(model.sub_theta(i), z, model.n_qubits)?;
        let p = crate::sim::run_with_noise(&c, noise)?;
        let dp = patch_vjp(p.as_slice(), model.n_ancilla, model.n_qubits, &d_image[i * patch..(i + 1) * patch])?;
        let jac = parameter_shift_jacobian(&c, noise, &trainable)?;
        grad.extend(jac.iter().map(|col| col.iter().zip(&dp).map(|(a, b)| a * b).sum::<f64>()));
    }
    Ok(grad)
}
