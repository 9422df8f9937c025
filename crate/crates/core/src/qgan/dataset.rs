use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::generator::{generator_forward, GeneratorModel, LatentVector, NOISELESS};
use super::{Image8, QganError, IMAGE_PIXELS};
use crate::par;
use crate::sim::NoiseModel;

/// Leading columns of a dataset file; 64 pixel columns `p0..p63` follow.
pub const DATASET_HEADER: [&str; 3] = ["train_label", "infer_label", "seed"];

/// Generated image tagged with where it was trained and where it was run.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub train_label: String,
    pub infer_label: String,
    pub seed: u64,
    pub image: Image8,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledImageSet {
    pub images: Vec<LabeledImage>,
}

impl LabeledImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn extend(&mut self, other: LabeledImageSet) {
        self.images.extend(other.images);
    }

    /// Distinct training labels in order of first appearance.
    pub fn train_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for im in &self.images {
            if !out.contains(&im.train_label) {
                out.push(im.train_label.clone());
            }
        }
        out
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), QganError> {
        let fmt = |e: csv::Error| QganError::Format {
            path: "<dataset>".into(),
            message: e.to_string(),
        };
        let mut wr = csv::Writer::from_writer(w);
        let header: Vec<String> = DATASET_HEADER
            .iter()
            .map(|s| s.to_string())
            .chain((0..IMAGE_PIXELS).map(|i| format!("p{i}")))
            .collect();
        wr.write_record(&header).map_err(fmt)?;
        for im in &self.images {
            let row: Vec<String> = [im.train_label.clone(), im.infer_label.clone(), im.seed.to_string()]
                .into_iter()
                .chain(im.image.pixels().iter().map(|p| p.to_string()))
                .collect();
            wr.write_record(&row).map_err(fmt)?;
        }
        wr.flush().map_err(|e| QganError::Io {
            path: "<dataset>".into(),
            source: e,
        })
    }

    pub fn read_from<R: Read>(r: R, source: &str) -> Result<Self, QganError> {
        let err = |line: u64, m: String| QganError::Format {
            path: source.to_string(),
            message: format!("line {line}: {m}"),
        };
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rd.headers().map_err(|e| err(1, e.to_string()))?.clone();
        if header.len() != DATASET_HEADER.len() + IMAGE_PIXELS
            || header.iter().take(3).zip(DATASET_HEADER).any(|(a, b)| a != b)
        {
            return Err(err(1, "unexpected header".into()));
        }
        let mut images = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let seed = rec[2].parse::<u64>().map_err(|e| err(line, format!("seed: {e}")))?;
            let pixels = (3..rec.len())
                .map(|i| rec[i].parse::<f64>().map_err(|e| err(line, format!("pixel {}: {e}", i - 3))))
                .collect::<Result<Vec<_>, _>>()?;
            let image = Image8::new(pixels).map_err(|e| err(line, e.to_string()))?;
            images.push(LabeledImage {
                train_label: rec[0].to_string(),
                infer_label: rec[1].to_string(),
                seed,
                image,
            });
        }
        Ok(Self { images })
    }

    pub fn save(&self, path: &Path) -> Result<(), QganError> {
        let f = std::fs::File::create(path).map_err(|e| QganError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self, QganError> {
        let f = std::fs::File::open(path).map_err(|e| QganError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::read_from(std::io::BufReader::new(f), &path.display().to_string())
    }
}

/// `count` images from `model` run under `noise`. Image `i` draws its latent
/// from seed `seed + i`.
pub fn generate_images(model: &GeneratorModel, noise: Option<&NoiseModel>, count: usize, seed: u64) -> Result<LabeledImageSet, QganError> {
    model.validate()?;
    let train_label = model.schedule_label();
    let infer_label = noise.map_or(NOISELESS.to_string(), |n| n.name().to_string());
    let images = par::try_map_range(count, |i| {
        let s = seed.wrapping_add(i as u64);
        let z = LatentVector::sample(model.n_qubits, &mut ChaCha8Rng::seed_from_u64(s));
        Ok::<_, QganError>(LabeledImage {
            train_label: train_label.clone(),
            infer_label: infer_label.clone(),
            seed: s,
            image: generator_forward(model, &z, noise)?,
        })
    })?;
    Ok(LabeledImageSet { images })
}
