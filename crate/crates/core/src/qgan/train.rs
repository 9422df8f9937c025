use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::discriminator::{DiscGrads, DiscriminatorModel};
use super::generator::{backward_pass, backward_shifted, forward_pass, GeneratorModel, LatentVector, ScheduleEntry, NOISELESS};
use super::loss::{bce_grad_logit, bce_loss};
use super::{Image8, QganError};
use crate::par;
use crate::seed;
use crate::sim::{HardwareProfile, NoiseModel};

/// How generator gradients are evaluated. Both give the same numbers; the
/// adjoint route reuses one forward pass per circuit instead of running two
/// shifted circuits per parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    #[default]
    Adjoint,
    ShiftedCircuits,
}

/// Optimiser and architecture settings for adversarial training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanTrainConfig {
    /// Epoch budget for a whole schedule; callers split it across stages.
    pub epochs: usize,
    pub lr_gen: f64,
    pub lr_disc: f64,
    pub batch_size: usize,
    /// Mini-batches drawn per epoch; unset means one pass over the data.
    pub batches_per_epoch: Option<usize>,
    pub seed: u64,
    pub gradient: GradientMethod,
    pub n_sub: usize,
    pub n_qubits: usize,
    pub n_ancilla: usize,
    pub depth: usize,
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            lr_gen: 0.2,
            lr_disc: 0.01,
            batch_size: 8,
            batches_per_epoch: None,
            seed: 0,
            gradient: GradientMethod::Adjoint,
            n_sub: 4,
            n_qubits: 5,
            n_ancilla: 1,
            depth: 5,
        }
    }
}

impl GanTrainConfig {
    pub fn validate(&self) -> Result<(), QganError> {
        let bad = |m: &str| Err(QganError::InvalidConfig(m.to_string()));
        if !(self.lr_gen > 0.0 && self.lr_gen.is_finite()) || !(self.lr_disc > 0.0 && self.lr_disc.is_finite()) {
            return bad("learning rates must be positive");
        }
        if self.batch_size == 0 || self.batches_per_epoch == Some(0) {
            return bad("batch size and batches per epoch must be positive");
        }
        if self.n_qubits == 0 || self.n_ancilla >= self.n_qubits || self.n_qubits > crate::sim::MAX_QUBITS {
            return bad("need at least one data qubit and at most 12 qubits");
        }
        if self.n_sub << (self.n_qubits - self.n_ancilla) != super::IMAGE_PIXELS {
            return bad("patches must tile the 64-pixel image");
        }
        Ok(())
    }

    /// Fresh generator and discriminator drawn from `seed`.
    pub fn initial_models(&self) -> Result<(GeneratorModel, DiscriminatorModel), QganError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(self.seed, &[0x1417]));
        let g = GeneratorModel::random(self.n_sub, self.n_qubits, self.n_ancilla, self.depth, &mut rng)?;
        let d = DiscriminatorModel::random(&mut rng);
        Ok((g, d))
    }
}

/// One entry of a training schedule with its noise channels prepared.
#[derive(Debug, Clone)]
pub struct Stage {
    pub label: String,
    pub noise: Option<NoiseModel>,
    pub epochs: usize,
}

impl Stage {
    pub fn new(profile: Option<&HardwareProfile>, epochs: usize) -> Result<Self, QganError> {
        Ok(Self {
            label: profile.map_or(NOISELESS.to_string(), |p| p.name.clone()),
            noise: profile.map(NoiseModel::from_profile).transpose()?,
            epochs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub profile: String,
    /// Epoch index counted over the model's whole history.
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub skipped_batches: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub generator: GeneratorModel,
    pub discriminator: DiscriminatorModel,
    pub history: Vec<EpochRecord>,
}

/// Initialises both models from `cfg.seed` and trains them through `stages`.
pub fn train_qgan(data: &[Image8], stages: &[Stage], cfg: &GanTrainConfig) -> Result<TrainOutcome, QganError> {
    let (g, d) = cfg.initial_models()?;
    continue_training(g, d, data, stages, cfg)
}

/// Gradient of the non-saturating generator loss `BCE(D(G(z)), 1)` for one
/// latent.
pub fn generator_gradient(
    model: &GeneratorModel,
    z: &LatentVector,
    noise: Option<&NoiseModel>,
    disc: &DiscriminatorModel,
    method: GradientMethod,
) -> Result<Vec<f64>, QganError> {
    let pass = forward_pass(model, z, noise)?;
    let trace = disc.trace(pass.image().pixels());
    let (_, dx) = disc.backward(&trace, bce_grad_logit(trace.output, 1.0));
    match method {
        GradientMethod::Adjoint => backward_pass(model, &pass, &dx),
        GradientMethod::ShiftedCircuits => backward_shifted(model, z, noise, &dx),
    }
}

/// Resumes training of existing models. Each epoch draws from its own
/// random stream keyed by the model's global epoch count, so training in
/// several calls matches training in one.
pub fn continue_training(
    mut generator: GeneratorModel,
    mut discriminator: DiscriminatorModel,
    data: &[Image8],
    stages: &[Stage],
    cfg: &GanTrainConfig,
) -> Result<TrainOutcome, QganError> {
    cfg.validate()?;
    generator.validate()?;
    if data.is_empty() {
        return Err(QganError::EmptyData("no real images to train on".into()));
    }
    if stages.is_empty() {
        return Err(QganError::InvalidConfig("empty training schedule".into()));
    }
    let batches = cfg.batches_per_epoch.unwrap_or(data.len().div_ceil(cfg.batch_size));
    let mut history = Vec::new();
    for stage in stages {
        for _ in 0..stage.epochs {
            let epoch = generator.total_epochs();
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &[0xe90c, epoch as u64]));
            let mut rec = EpochRecord {
                profile: stage.label.clone(),
                epoch,
                d_loss: 0.0,
                g_loss: 0.0,
                skipped_batches: 0,
            };
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut rng);
            let mut done = 0;
            for b in 0..batches {
                let real: Vec<&Image8> = (0..cfg.batch_size).map(|j| &data[order[(b * cfg.batch_size + j) % order.len()]]).collect();
                match train_batch(&mut generator, &mut discriminator, &real, stage.noise.as_ref(), cfg, &mut rng) {
                    Ok((dl, gl)) => {
                        rec.d_loss += dl;
                        rec.g_loss += gl;
                        done += 1;
                    }
                    Err(QganError::DegenerateState(msg)) => {
                        warn!("skipping batch in epoch {epoch}: {msg}");
                        rec.skipped_batches += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
            if done > 0 {
                rec.d_loss /= done as f64;
                rec.g_loss /= done as f64;
            } else {
                rec.d_loss = f64::NAN;
                rec.g_loss = f64::NAN;
            }
            history.push(rec);
            record_epoch(&mut generator, &stage.label, 1);
        }
        if stage.epochs == 0 {
            record_epoch(&mut generator, &stage.label, 0);
        }
    }
    Ok(TrainOutcome {
        generator,
        discriminator,
        history,
    })
}

/// Extends the last schedule entry when the profile repeats.
fn record_epoch(g: &mut GeneratorModel, label: &str, n: usize) {
    match g.schedule.last_mut() {
        Some(last) if last.profile == label => last.epochs += n,
        _ => g.schedule.push(ScheduleEntry {
            profile: label.to_string(),
            epochs: n,
        }),
    }
}

/// One discriminator step on real and an equal number of fake samples followed by one
/// generator step against the updated discriminator. Returns both losses.
fn train_batch(
    gen: &mut GeneratorModel,
    disc: &mut DiscriminatorModel,
    real: &[&Image8],
    noise: Option<&NoiseModel>,
    cfg: &GanTrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64), QganError> {
    let bs = real.len();
    let latents: Vec<LatentVector> = (0..bs).map(|_| LatentVector::sample(gen.n_qubits, rng)).collect();
    let g_ref = &*gen;
    let passes = par::try_map_range(bs, |i| forward_pass(g_ref, &latents[i], noise))?;

    let scale = 1.0 / bs as f64;
    let mut d_grads = DiscGrads::zeros_like(disc);
    let mut d_loss = 0.0;
    for (x, label) in real
        .iter()
        .map(|r| (r.pixels(), 1.0))
        .chain(passes.iter().map(|p| (p.image().pixels(), 0.0)))
    {
        let tr = disc.trace(x);
        d_loss += bce_loss(tr.output, label) * scale;
        let (g, _) = disc.backward(&tr, bce_grad_logit(tr.output, label) * scale);
        d_grads.add(&g);
    }
    disc.sgd_step(&d_grads, cfg.lr_disc);

    let d_ref = &*disc;
    let per_sample = par::try_map_range(bs, |i| {
        let tr = d_ref.trace(passes[i].image().pixels());
        let (_, dx) = d_ref.backward(&tr, bce_grad_logit(tr.output, 1.0) * scale);
        let grad = match cfg.gradient {
            GradientMethod::Adjoint => backward_pass(g_ref, &passes[i], &dx)?,
            GradientMethod::ShiftedCircuits => backward_shifted(g_ref, &latents[i], noise, &dx)?,
        };
        Ok::<_, QganError>((bce_loss(tr.output, 1.0) * scale, grad))
    })?;
    let mut g_loss = 0.0;
    let mut grad = vec![0.0; gen.n_params()];
    for (l, g) in per_sample {
        g_loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    gen.theta.iter_mut().zip(&grad).for_each(|(t, g)| *t -= cfg.lr_gen * g);
    Ok((d_loss, g_loss))
}
