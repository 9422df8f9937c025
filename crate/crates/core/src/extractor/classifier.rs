use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cnn::{min_side, LayerSpec, Network};
use super::ExtractorError;
use crate::imaging::{upscale, Interpolation};
use crate::par;
use crate::qgan::{Image8, LabeledImageSet};
use crate::seed;

/// Architecture and optimiser settings of the watermark classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub input_side: usize,
    pub channels: usize,
    pub filters: Vec<usize>,
    pub dense: usize,
    pub interpolation: Interpolation,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_fraction: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            input_side: 150,
            channels: 3,
            filters: vec![32, 64, 128],
            dense: 512,
            interpolation: Interpolation::Nearest,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            epochs: 15,
            validation_fraction: 0.2,
        }
    }
}

impl ClassifierConfig {
    /// Full architecture on 32×32 inputs.
    pub fn desk() -> Self {
        Self {
            input_side: 32,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ExtractorError> {
        let bad = |m: String| Err(ExtractorError::InvalidConfig(m));
        if self.filters.is_empty() || self.filters.contains(&0) || self.dense == 0 || self.channels == 0 {
            return bad("filters, dense width and channels must be positive".into());
        }
        let min = min_side(self.filters.len()).max(crate::qgan::IMAGE_SIDE);
        if self.input_side < min {
            return bad(format!(
                "input side {} is below {min}, the smallest that survives {} convolution stages",
                self.input_side,
                self.filters.len()
            ));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return bad("invalid optimiser settings".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation fraction must be in [0, 1)".into());
        }
        Ok(())
    }

    /// Untrained network with zero weights for `n_classes` labels.
    pub fn build(&self, n_classes: usize) -> Result<Network, ExtractorError> {
        self.validate()?;
        Network::zeros(self.input_side, self.channels, &self.filters, &[self.dense], n_classes)
            .ok_or_else(|| ExtractorError::InvalidConfig("spatial size collapses".into()))
    }

    /// Upscaled image with the gray channel replicated, channels last.
    pub fn prepare(&self, img: &Image8) -> Vec<f64> {
        let g = upscale(img, self.input_side, self.interpolation);
        g.pixels.iter().flat_map(|&p| std::iter::repeat_n(p, self.channels)).collect()
    }
}

/// Per-layer name and parameter count.
pub fn layer_param_counts(net: &Network) -> Vec<(String, usize)> {
    let mut conv = 0;
    let mut dense = 0;
    net.layers
        .iter()
        .map(|l| {
            let name = match l {
                LayerSpec::Conv { .. } => {
                    conv += 1;
                    format!("conv{conv}")
                }
                LayerSpec::Dense { relu: true, .. } => {
                    dense += 1;
                    format!("dense{dense}")
                }
                LayerSpec::Dense { relu: false, .. } => "output".to_string(),
            };
            (name, l.n_params())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// Trained CNN together with the label each output class stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WatermarkClassifier {
    pub config: ClassifierConfig,
    pub labels: Vec<String>,
    pub network: Network,
    pub history: Vec<ClassifierEpoch>,
    /// Ownership threshold, once computed.
    pub threshold: Option<f64>,
}

impl WatermarkClassifier {
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Probability of every label for one image.
    pub fn predict(&self, img: &Image8) -> Vec<f64> {
        self.network.predict(&self.config.prepare(img))
    }

    pub fn predict_batch(&self, imgs: &[Image8]) -> Vec<Vec<f64>> {
        par::map_slice(imgs, |im| self.predict(im))
    }

    /// Fraction of images whose argmax matches their training label.
    pub fn accuracy(&self, set: &LabeledImageSet) -> f64 {
        if set.is_empty() {
            return 0.0;
        }
        let imgs: Vec<Image8> = set.images.iter().map(|i| i.image.clone()).collect();
        let probs = self.predict_batch(&imgs);
        let hits = probs
            .iter()
            .zip(&set.images)
            .filter(|(p, im)| self.labels.get(argmax(p)) == Some(&im.train_label))
            .count();
        hits as f64 / set.len() as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("classifier serialises")
    }

    pub fn from_json(text: &str, source: &str) -> Result<Self, ExtractorError> {
        let c: Self = serde_json::from_str(text).map_err(|e| ExtractorError::Format {
            path: source.to_string(),
            message: e.to_string(),
        })?;
        let expected = c.config.build(c.labels.len())?;
        if expected.layers != c.network.layers || expected.params.len() != c.network.params.len() {
            return Err(ExtractorError::Format {
                path: source.to_string(),
                message: "network does not match its configuration".into(),
            });
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<(), ExtractorError> {
        std::fs::write(path, self.to_json()).map_err(|e| ExtractorError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ExtractorError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExtractorError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Class indices split per class into training and validation parts.
fn stratified_split(targets: &[usize], n_classes: usize, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..targets.len()).filter(|&i| targets[i] == c).collect();
        idx.shuffle(rng);
        let n_val = if fraction > 0.0 && idx.len() >= 2 {
            ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1)
        } else {
            0
        };
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &ClassifierConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
        }
    }
}

/// Gradient chunks per mini-batch. Fixed so the reduction order never
/// depends on the thread pool.
const GRAD_CHUNKS: usize = 8;

/// Mean cross-entropy gradient of a mini-batch, plus summed loss and hits.
fn batch_gradient(net: &Network, inputs: &[&[f64]], targets: &[usize]) -> (Vec<f64>, f64, usize) {
    let n = inputs.len();
    let scale = 1.0 / n as f64;
    let chunks = par::fixed_chunks(n, GRAD_CHUNKS);
    let partial = par::map_slice(&chunks, |range| {
        let mut g = vec![0.0; net.n_params()];
        let mut loss = 0.0;
        let mut hits = 0;
        for i in range.clone() {
            let tr = net.forward(inputs[i]);
            let t = targets[i];
            loss -= tr.probs[t].max(1e-300).ln();
            hits += usize::from(argmax(&tr.probs) == t);
            let mut d: Vec<f64> = tr.probs.iter().map(|p| p * scale).collect();
            d[t] -= scale;
            net.backward_into(&tr, &d, &mut g);
        }
        (g, loss, hits)
    });
    let mut grad = vec![0.0; net.n_params()];
    let mut loss = 0.0;
    let mut hits = 0;
    for (g, l, h) in partial {
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        loss += l;
        hits += h;
    }
    (grad, loss, hits)
}

fn evaluate(net: &Network, inputs: &[&[f64]], targets: &[usize]) -> (f64, f64) {
    if inputs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let probs = par::map_range(inputs.len(), |i| net.predict(inputs[i]));
    let mut loss = 0.0;
    let mut hits = 0;
    for (p, &t) in probs.iter().zip(targets) {
        loss -= p[t].max(1e-300).ln();
        hits += usize::from(argmax(p) == t);
    }
    (loss / inputs.len() as f64, hits as f64 / inputs.len() as f64)
}

/// Trains on the training labels of `data`. Labels are sorted, so the
/// class order does not depend on the order of the rows.
pub fn train_classifier(data: &LabeledImageSet, cfg: &ClassifierConfig, seed: u64) -> Result<WatermarkClassifier, ExtractorError> {
    cfg.validate()?;
    let mut labels = data.train_labels();
    labels.sort();
    if labels.len() < 2 {
        return Err(ExtractorError::SingleClass(labels.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[0xc1a5]));
    let mut net = cfg.build(labels.len())?.glorot(&mut rng);
    let targets: Vec<usize> = data
        .images
        .iter()
        .map(|im| labels.iter().position(|l| *l == im.train_label).expect("label collected above"))
        .collect();
    let (train_idx, val_idx) = stratified_split(&targets, labels.len(), cfg.validation_fraction, &mut rng);
    let inputs: Vec<Vec<f64>> = par::map_slice(&data.images, |im| cfg.prepare(&im.image));
    let val_in: Vec<&[f64]> = val_idx.iter().map(|&i| inputs[i].as_slice()).collect();
    let val_t: Vec<usize> = val_idx.iter().map(|&i| targets[i]).collect();

    let mut adam = Adam::new(net.n_params());
    let mut order = train_idx.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        let mut hits = 0;
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| inputs[i].as_slice()).collect();
            let ts: Vec<usize> = batch.iter().map(|&i| targets[i]).collect();
            let (g, l, h) = batch_gradient(&net, &xs, &ts);
            adam.step(&mut net.params, &g, cfg);
            loss += l;
            hits += h;
        }
        let (val_loss, val_accuracy) = evaluate(&net, &val_in, &val_t);
        let n = order.len().max(1) as f64;
        let rec = ClassifierEpoch {
            epoch,
            train_loss: loss / n,
            train_accuracy: hits as f64 / n,
            val_loss,
            val_accuracy,
        };
        info!(
            "classifier epoch {epoch}: loss {:.4} acc {:.3} val_loss {:.4} val_acc {:.3}",
            rec.train_loss, rec.train_accuracy, rec.val_loss, rec.val_accuracy
        );
        history.push(rec);
    }
    Ok(WatermarkClassifier {
        config: cfg.clone(),
        labels,
        network: net,
        history,
        threshold: None,
    })
}
