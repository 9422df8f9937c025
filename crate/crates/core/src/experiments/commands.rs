use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::extractor::{compute_threshold, mean_probabilities, train_classifier, verify_ownership, Decision, Verdict, WatermarkClassifier};
use crate::imaging::fid_images;
use crate::qgan::{continue_training, generate_images, train_qgan, GanCheckpoint, GanTrainConfig, Image8, LabeledImageSet, Stage};
use crate::seed::{derive, label_hash};
use crate::sim::{HardwareProfile, NoiseModel};
use crate::{par, Error, Result};

/// Seed purposes, kept apart so no two streams coincide.
const TRAIN_IMAGES: u64 = 1;
const TEST_IMAGES: u64 = 2;
const VERIFY_IMAGES: u64 = 3;
const TAMPER: u64 = 4;
const FID_IMAGES: u64 = 5;
const CLASSIFIER: u64 = 6;

pub const DATASET_FILE: &str = "dataset.csv";
pub const TEST_FILE: &str = "test.csv";
pub const CLASSIFIER_FILE: &str = "classifier.json";

/// Base seed for images of one (schedule, inference profile) cell.
pub fn cell_seed(global: u64, purpose: u64, train_label: &str, infer_label: &str) -> u64 {
    derive(global, &[purpose, label_hash(train_label), label_hash(infer_label)])
}

/// File-name form of a schedule label.
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| match c {
            '>' => '+',
            c if c.is_ascii_alphanumeric() || c == '_' || c == '-' => c,
            _ => '_',
        })
        .collect()
}

pub fn checkpoint_path(out: &Path, label: &str) -> PathBuf {
    out.join("models").join(format!("{}.json", slug(label)))
}

fn ensure_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(format!("creating {}", p.display()), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        ensure_dir(dir)?;
    }
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serialises");
    text.push('\n');
    write_text(path, &text)
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    write_text(path, &String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Validated configuration with its profiles loaded.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub profiles: BTreeMap<String, HardwareProfile>,
}

impl Context {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        let profiles = cfg.profiles()?;
        cfg.validate(&profiles)?;
        ensure_dir(&cfg.out_dir)?;
        Ok(Self { cfg, profiles })
    }

    pub fn profile(&self, name: &str) -> Result<&HardwareProfile> {
        self.profiles
            .get(name)
            .ok_or_else(|| Error::Config(format!("profile {name:?} is not available")))
    }

    pub fn noise(&self, name: &str) -> Result<NoiseModel> {
        Ok(NoiseModel::from_profile(self.profile(name)?)?)
    }

    pub fn stages(&self, schedule: &[(String, usize)]) -> Result<Vec<Stage>> {
        schedule
            .iter()
            .map(|(n, e)| Ok(Stage::new(Some(self.profile(n)?), *e)?))
            .collect()
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    /// Labels of the configured schedules, as recorded in trained models.
    pub fn schedule_labels(&self) -> Result<Vec<String>> {
        Ok(self
            .cfg
            .resolved_schedules()?
            .iter()
            .map(|s| crate::qgan::schedule_label(s.iter().map(|(n, _)| n.as_str())))
            .collect())
    }

    pub fn load_models(&self) -> Result<Vec<GanCheckpoint>> {
        self.schedule_labels()?
            .iter()
            .map(|l| {
                let p = checkpoint_path(&self.cfg.out_dir, l);
                GanCheckpoint::load(&p).map_err(|e| Error::Data(format!("{e} (run train-qgan first)")))
            })
            .collect()
    }

    pub fn load_classifier(&self) -> Result<WatermarkClassifier> {
        let p = self.out(CLASSIFIER_FILE);
        WatermarkClassifier::load(&p).map_err(|e| Error::Data(format!("{e} (run train-classifier first)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub schedule: String,
    pub checkpoint: PathBuf,
    pub epochs: usize,
    pub final_d_loss: Option<f64>,
    pub final_g_loss: Option<f64>,
    pub skipped_batches: usize,
}

/// Trains one generator per schedule and writes checkpoints plus loss
/// histories under `models/`.
pub fn cmd_train_qgan(ctx: &Context) -> Result<Vec<TrainedModel>> {
    let data = ctx.cfg.real_images()?;
    let gan = ctx.cfg.gan_config();
    let schedules = ctx.cfg.resolved_schedules()?;
    let outcomes = par::try_map_range(schedules.len(), |i| {
        let stages = ctx.stages(&schedules[i])?;
        info!("training generator on {}", schedules[i].iter().map(|(n, e)| format!("{n}:{e}")).collect::<Vec<_>>().join(">"));
        Ok::<_, Error>(train_qgan(&data, &stages, &gan)?)
    })?;
    let mut report = Vec::new();
    for out in outcomes {
        let label = out.generator.schedule_label();
        let path = checkpoint_path(&ctx.cfg.out_dir, &label);
        let rows: Vec<Vec<String>> = out
            .history
            .iter()
            .map(|h| vec![h.profile.clone(), h.epoch.to_string(), h.d_loss.to_string(), h.g_loss.to_string(), h.skipped_batches.to_string()])
            .collect();
        write_csv(&path.with_extension("history.csv"), &["profile", "epoch", "d_loss", "g_loss", "skipped_batches"], &rows)?;
        report.push(TrainedModel {
            schedule: label,
            checkpoint: path.clone(),
            epochs: out.generator.total_epochs(),
            final_d_loss: out.history.last().map(|h| h.d_loss),
            final_g_loss: out.history.last().map(|h| h.g_loss),
            skipped_batches: out.history.iter().map(|h| h.skipped_batches).sum(),
        });
        let ck = GanCheckpoint {
            generator: out.generator,
            discriminator: out.discriminator,
            config: gan.clone(),
            history: out.history,
        };
        if let Some(dir) = path.parent() {
            ensure_dir(dir)?;
        }
        ck.save(&path)?;
    }
    write_json(&ctx.out("train_report.json"), &report)?;
    Ok(report)
}

/// Images for every (model, inference profile) pair.
pub fn build_grid(
    models: &[&crate::qgan::GeneratorModel],
    infer: &[NoiseModel],
    count: usize,
    global_seed: u64,
    purpose: u64,
) -> Result<LabeledImageSet> {
    let mut set = LabeledImageSet::default();
    for m in models {
        for n in infer {
            let seed = cell_seed(global_seed, purpose, &m.schedule_label(), n.name());
            set.extend(generate_images(m, Some(n), count, seed)?);
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_labels: Vec<String>,
    pub infer_labels: Vec<String>,
}

/// Writes the classifier's training set and an independently seeded test set.
pub fn cmd_build_dataset(ctx: &Context) -> Result<DatasetReport> {
    let models = ctx.load_models()?;
    let gens: Vec<_> = models.iter().map(|m| &m.generator).collect();
    let infer = ctx.cfg.infer_profiles.iter().map(|n| ctx.noise(n)).collect::<Result<Vec<_>>>()?;
    let train = build_grid(&gens, &infer, ctx.cfg.images_per_pair, ctx.cfg.seed, TRAIN_IMAGES)?;
    let test = build_grid(&gens, &infer, ctx.cfg.test_images_per_pair, ctx.cfg.seed, TEST_IMAGES)?;
    train.save(&ctx.out(DATASET_FILE))?;
    test.save(&ctx.out(TEST_FILE))?;
    let report = DatasetReport {
        train_rows: train.len(),
        test_rows: test.len(),
        train_labels: gens.iter().map(|g| g.schedule_label()).collect(),
        infer_labels: ctx.cfg.infer_profiles.clone(),
    };
    write_json(&ctx.out("dataset_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub labels: Vec<String>,
    pub train_images: usize,
    pub test_images: usize,
    pub final_val_accuracy: Option<f64>,
    pub test_accuracy: f64,
    pub threshold: f64,
    pub layer_params: Vec<(String, usize)>,
}

/// Trains the extractor on `dataset.csv` and sets its threshold from `test.csv`.
pub fn cmd_train_classifier(ctx: &Context) -> Result<ClassifierReport> {
    let train = LabeledImageSet::load(&ctx.out(DATASET_FILE)).map_err(|e| Error::Data(e.to_string()))?;
    let test = LabeledImageSet::load(&ctx.out(TEST_FILE)).map_err(|e| Error::Data(e.to_string()))?;
    let mut clf = train_classifier(&train, &ctx.cfg.classifier, derive(ctx.cfg.seed, &[CLASSIFIER]))?;
    let known: Vec<Image8> = test
        .images
        .iter()
        .filter(|i| clf.label_index(&i.train_label).is_some())
        .map(|i| i.image.clone())
        .collect();
    let m = compute_threshold(&clf, &known)?;
    clf.threshold = Some(m);
    clf.save(&ctx.out(CLASSIFIER_FILE))?;
    let report = ClassifierReport {
        labels: clf.labels.clone(),
        train_images: train.len(),
        test_images: test.len(),
        final_val_accuracy: clf.history.last().map(|h| h.val_accuracy),
        test_accuracy: clf.accuracy(&test),
        threshold: m,
        layer_params: crate::extractor::layer_param_counts(&clf.network),
    };
    write_json(&ctx.out("classifier_report.json"), &report)?;
    Ok(report)
}

/// Where the suspect images of an ownership check come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Suspect {
    /// Rows of a dataset file, optionally only those with this training label.
    Images { path: PathBuf, train_label: Option<String> },
    /// A generator checkpoint run on an inference profile.
    Model { checkpoint: PathBuf, infer: String },
}

fn suspect_images(ctx: &Context, suspect: &Suspect) -> Result<(Vec<Image8>, Option<String>)> {
    match suspect {
        Suspect::Images { path, train_label } => {
            let set = LabeledImageSet::load(path).map_err(|e| Error::Data(e.to_string()))?;
            let imgs: Vec<Image8> = set
                .images
                .into_iter()
                .filter(|i| train_label.as_ref().is_none_or(|l| *l == i.train_label))
                .map(|i| i.image)
                .collect();
            Ok((imgs, train_label.clone()))
        }
        Suspect::Model { checkpoint, infer } => {
            let ck = GanCheckpoint::load(checkpoint).map_err(|e| Error::Data(e.to_string()))?;
            let noise = ctx.noise(infer)?;
            let label = ck.generator.schedule_label();
            let seed = cell_seed(ctx.cfg.seed, VERIFY_IMAGES, &label, infer);
            let set = generate_images(&ck.generator, Some(&noise), ctx.cfg.verify_batch, seed)?;
            Ok((set.images.into_iter().map(|i| i.image).collect(), Some(label)))
        }
    }
}

/// Checks whether `suspect` carries the watermark of `claim`. Without an
/// explicit claim, the suspect's own recorded schedule is claimed.
pub fn cmd_verify(ctx: &Context, suspect: &Suspect, claim: Option<&str>) -> Result<Verdict> {
    let clf = ctx.load_classifier()?;
    let m = clf
        .threshold
        .ok_or_else(|| Error::Data("classifier has no threshold; retrain it".into()))?;
    let (imgs, own) = suspect_images(ctx, suspect)?;
    let claim = claim
        .map(str::to_string)
        .or(own)
        .ok_or_else(|| Error::Config("no ownership claim given".into()))?;
    if imgs.is_empty() {
        return Err(Error::Data("suspect batch is empty".into()));
    }
    let v = verify_ownership(&clf, &imgs, &claim, m)?;
    write_json(&ctx.out("verify_report.json"), &v)?;
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TamperPoint {
    pub epoch: usize,
    pub infer: String,
    pub original_probability: f64,
    pub predicted: String,
    pub predicted_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TamperReport {
    pub original: String,
    pub tamper_profile: String,
    pub epochs: usize,
    pub curve: Vec<TamperPoint>,
    pub verdict: Verdict,
}

/// Evaluation of one (possibly tampered) generator against the classifier.
fn tamper_eval(
    ctx: &Context,
    clf: &WatermarkClassifier,
    g: &crate::qgan::GeneratorModel,
    original: &str,
    epoch: usize,
    infer: &[NoiseModel],
) -> Result<(Vec<TamperPoint>, Vec<Image8>)> {
    let oi = clf.label_index(original);
    let mut pts = Vec::new();
    let mut pooled = Vec::new();
    for n in infer {
        let seed = cell_seed(ctx.cfg.seed, VERIFY_IMAGES, original, n.name());
        let imgs: Vec<Image8> = generate_images(g, Some(n), ctx.cfg.verify_batch, seed)?
            .images
            .into_iter()
            .map(|i| i.image)
            .collect();
        let mean = mean_probabilities(clf, &imgs)?;
        let best = crate::extractor::argmax_index(&mean);
        pts.push(TamperPoint {
            epoch,
            infer: n.name().to_string(),
            original_probability: oi.map_or(0.0, |i| mean[i]),
            predicted: clf.labels[best].clone(),
            predicted_probability: mean[best],
        });
        pooled.extend(imgs);
    }
    Ok((pts, pooled))
}

/// Fine-tunes a stolen generator on another profile one epoch at a time and
/// tracks how the classifier's attribution holds up.
pub fn cmd_tamper(ctx: &Context, checkpoint: Option<&Path>, profile: Option<&str>, epochs: Option<usize>) -> Result<TamperReport> {
    let clf = ctx.load_classifier()?;
    let m = clf
        .threshold
        .ok_or_else(|| Error::Data("classifier has no threshold; retrain it".into()))?;
    let ck = match checkpoint {
        Some(p) => GanCheckpoint::load(p).map_err(|e| Error::Data(e.to_string()))?,
        None => ctx
            .load_models()?
            .into_iter()
            .next()
            .ok_or_else(|| Error::Config("no schedules configured".into()))?,
    };
    let profile = profile.unwrap_or(&ctx.cfg.tamper_profile).to_string();
    let epochs = epochs.unwrap_or(ctx.cfg.tamper_epochs);
    let stage = Stage::new(Some(ctx.profile(&profile)?), 1)?;
    let infer = ctx.cfg.infer_profiles.iter().map(|n| ctx.noise(n)).collect::<Result<Vec<_>>>()?;
    let data = ctx.cfg.real_images()?;
    let original = ck.generator.schedule_label();
    let tamper_cfg = GanTrainConfig {
        seed: derive(ctx.cfg.seed, &[TAMPER]),
        ..ck.config.clone()
    };
    let mut g = ck.generator;
    let mut d = ck.discriminator;
    let (mut curve, mut pooled) = tamper_eval(ctx, &clf, &g, &original, 0, &infer)?;
    for e in 1..=epochs {
        let out = continue_training(g, d, &data, std::slice::from_ref(&stage), &tamper_cfg)?;
        g = out.generator;
        d = out.discriminator;
        let (pts, imgs) = tamper_eval(ctx, &clf, &g, &original, e, &infer)?;
        curve.extend(pts);
        pooled = imgs;
    }
    let verdict = verify_ownership(&clf, &pooled, &original, m)?;
    let rows: Vec<Vec<String>> = curve
        .iter()
        .map(|p| {
            vec![
                p.epoch.to_string(),
                p.infer.clone(),
                p.original_probability.to_string(),
                p.predicted.clone(),
                p.predicted_probability.to_string(),
            ]
        })
        .collect();
    write_csv(
        &ctx.out("tamper_curve.csv"),
        &["epoch", "infer", "original_probability", "predicted", "predicted_probability"],
        &rows,
    )?;
    let report = TamperReport {
        original,
        tamper_profile: profile,
        epochs,
        curve,
        verdict,
    };
    write_json(&ctx.out("tamper_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidRow {
    pub schedule: String,
    pub infer: String,
    pub stages: usize,
    pub fid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidReport {
    pub images: usize,
    pub real_images: usize,
    /// Real set against itself; zero up to rounding.
    pub real_vs_real: f64,
    pub rows: Vec<FidRow>,
    pub mean_single: Option<f64>,
    pub mean_sequence: Option<f64>,
    /// `mean_sequence / mean_single`.
    pub sequence_ratio: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// FID between the real digits and every trained generator on every
/// inference profile.
pub fn cmd_fid(ctx: &Context) -> Result<FidReport> {
    let real = ctx.cfg.real_images()?;
    let models = ctx.load_models()?;
    let infer = ctx.cfg.infer_profiles.iter().map(|n| ctx.noise(n)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for ck in &models {
        let label = ck.generator.schedule_label();
        for n in &infer {
            let seed = cell_seed(ctx.cfg.seed, FID_IMAGES, &label, n.name());
            let imgs: Vec<Image8> = generate_images(&ck.generator, Some(n), ctx.cfg.fid_images, seed)?
                .images
                .into_iter()
                .map(|i| i.image)
                .collect();
            rows.push(FidRow {
                schedule: label.clone(),
                infer: n.name().to_string(),
                stages: ck.generator.schedule.len(),
                fid: fid_images(&real, &imgs)?,
            });
        }
    }
    let single: Vec<f64> = rows.iter().filter(|r| r.stages == 1).map(|r| r.fid).collect();
    let seq: Vec<f64> = rows.iter().filter(|r| r.stages > 1).map(|r| r.fid).collect();
    let (ms, mq) = (mean(&single), mean(&seq));
    let report = FidReport {
        images: ctx.cfg.fid_images,
        real_images: real.len(),
        real_vs_real: fid_images(&real, &real)?,
        sequence_ratio: ms.zip(mq).map(|(s, q)| q / s),
        mean_single: ms,
        mean_sequence: mq,
        rows,
    };
    let table: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![r.schedule.clone(), r.infer.clone(), r.stages.to_string(), r.fid.to_string()])
        .collect();
    write_csv(&ctx.out("fid_table.csv"), &["schedule", "infer", "stages", "fid"], &table)?;
    write_json(&ctx.out("fid_report.json"), &report)?;
    Ok(report)
}

/// Exit status for a verdict: 0 when owned, 4 otherwise.
pub fn verdict_exit_code(v: &Verdict) -> i32 {
    match v.decision {
        Decision::Owned => 0,
        Decision::NotProven => 4,
    }
}
