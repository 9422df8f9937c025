//! Watermark extraction: a CNN that names the hardware (or hardware
//! sequence) a generator was trained on, the ownership threshold and
//! verdicts.

mod classifier;
mod cnn;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classifier::{layer_param_counts, train_classifier, ClassifierConfig, ClassifierEpoch, WatermarkClassifier};
pub use cnn::{min_side, softmax, stage_side, LayerSpec, Network, Trace, KERNEL};

use crate::qgan::Image8;
use classifier::argmax;

/// Index of the largest entry; ties go to the lower index.
pub fn argmax_index(p: &[f64]) -> usize {
    argmax(p)
}

#[derive(Debug, Error)]
pub enum ExtractorError {
    #[error("invalid classifier configuration: {0}")]
    InvalidConfig(String),
    #[error("need at least 2 classes, found {0}")]
    SingleClass(usize),
    #[error("empty image batch")]
    EmptyBatch,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Owned,
    NotProven,
}

/// Outcome of an ownership check on a batch of images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub claimed: String,
    pub predicted: String,
    /// Mean probability of the predicted label over the batch.
    pub probability: f64,
    pub threshold: f64,
    pub decision: Decision,
    pub n_images: usize,
    pub diagnostic: Option<String>,
}

/// Mean of the winning-class probability over a known-hardware test set.
pub fn compute_threshold(c: &WatermarkClassifier, images: &[Image8]) -> Result<f64, ExtractorError> {
    if images.is_empty() {
        return Err(ExtractorError::EmptyBatch);
    }
    let probs = c.predict_batch(images);
    Ok(probs.iter().map(|p| p[argmax(p)]).sum::<f64>() / images.len() as f64)
}

/// Label-wise mean of the predicted probability vectors.
pub fn mean_probabilities(c: &WatermarkClassifier, images: &[Image8]) -> Result<Vec<f64>, ExtractorError> {
    if images.is_empty() {
        return Err(ExtractorError::EmptyBatch);
    }
    let probs = c.predict_batch(images);
    let mut mean = vec![0.0; c.labels.len()];
    for p in &probs {
        mean.iter_mut().zip(p).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= images.len() as f64);
    Ok(mean)
}

/// The batch is attributed to the label most images vote for (ties to the
/// lower class index). Ownership holds when that label is the claim and its
/// mean probability reaches `threshold`.
pub fn verify_ownership(c: &WatermarkClassifier, images: &[Image8], claim: &str, threshold: f64) -> Result<Verdict, ExtractorError> {
    if images.is_empty() {
        return Err(ExtractorError::EmptyBatch);
    }
    let probs = c.predict_batch(images);
    let mut votes = vec![0usize; c.labels.len()];
    for p in &probs {
        votes[argmax(p)] += 1;
    }
    let mut pred = 0;
    for (i, v) in votes.iter().enumerate() {
        if *v > votes[pred] {
            pred = i;
        }
    }
    let probability = probs.iter().map(|p| p[pred]).sum::<f64>() / images.len() as f64;
    let known = c.label_index(claim).is_some();
    let owned = known && c.labels[pred] == claim && probability >= threshold;
    let diagnostic = if !known {
        Some(format!("claimed label {claim:?} is not among the classifier's labels"))
    } else if c.labels[pred] != claim {
        Some(format!("batch is attributed to {:?}", c.labels[pred]))
    } else if !owned {
        Some(format!("probability {probability:.6} is below the threshold {threshold:.6}"))
    } else {
        None
    };
    Ok(Verdict {
        claimed: claim.to_string(),
        predicted: c.labels[pred].clone(),
        probability,
        threshold,
        decision: if owned { Decision::Owned } else { Decision::NotProven },
        n_images: images.len(),
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qgan::{LabeledImage, LabeledImageSet};

    fn trained() -> WatermarkClassifier {
        let images = (0..30)
            .map(|i| LabeledImage {
                train_label: if i % 2 == 0 { "dark" } else { "light" }.into(),
                infer_label: "x".into(),
                seed: i,
                image: Image8::filled(if i % 2 == 0 { 0.1 } else { 0.9 }).unwrap(),
            })
            .collect();
        let cfg = ClassifierConfig {
            input_side: 18,
            filters: vec![4, 4],
            dense: 8,
            batch_size: 8,
            epochs: 5,
            learning_rate: 1e-2,
            ..ClassifierConfig::default()
        };
        train_classifier(&LabeledImageSet { images }, &cfg, 2).unwrap()
    }

    #[test]
    fn verdicts() {
        let c = trained();
        let light = vec![Image8::filled(0.9).unwrap(); 4];
        let m = compute_threshold(&c, &light).unwrap();
        let v = verify_ownership(&c, &light, "light", m).unwrap();
        assert_eq!(v.decision, Decision::Owned);
        assert_eq!(v.predicted, "light");
        assert!((v.probability - m).abs() < 1e-12);

        let wrong = verify_ownership(&c, &light, "dark", 0.0).unwrap();
        assert_eq!(wrong.decision, Decision::NotProven);
        let unknown = verify_ownership(&c, &light, "ibm_nowhere", 0.0).unwrap();
        assert_eq!(unknown.decision, Decision::NotProven);
        assert!(unknown.diagnostic.unwrap().contains("ibm_nowhere"));
        assert!(matches!(verify_ownership(&c, &[], "light", 0.5), Err(ExtractorError::EmptyBatch)));
        assert!(compute_threshold(&c, &[]).is_err());

        // Raising the bar can only take ownership away.
        let mut prev_owned = true;
        for k in 0..=20 {
            let owned = verify_ownership(&c, &light, "light", k as f64 / 20.0).unwrap().decision == Decision::Owned;
            assert!(prev_owned || !owned);
            prev_owned = owned;
        }
    }

    #[test]
    fn mean_probabilities_sum_to_one() {
        let c = trained();
        let imgs = vec![Image8::filled(0.5).unwrap(), Image8::filled(0.2).unwrap()];
        let m = mean_probabilities(&c, &imgs).unwrap();
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
