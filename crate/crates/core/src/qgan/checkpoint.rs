use std::path::Path;

use serde::{Deserialize, Serialize};

use super::discriminator::DiscriminatorModel;
use super::generator::GeneratorModel;
use super::train::{EpochRecord, GanTrainConfig};
use super::QganError;

/// Everything needed to resume or reuse a trained qGAN. Floats are written
/// in shortest round-trip form, so loading restores the exact values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanCheckpoint {
    pub generator: GeneratorModel,
    pub discriminator: DiscriminatorModel,
    pub config: GanTrainConfig,
    pub history: Vec<EpochRecord>,
}

impl GanCheckpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str, source: &str) -> Result<Self, QganError> {
        let ck: Self = serde_json::from_str(text).map_err(|e| QganError::Format {
            path: source.to_string(),
            message: e.to_string(),
        })?;
        ck.generator.validate()?;
        if !ck.discriminator.validate() {
            return Err(QganError::Format {
                path: source.to_string(),
                message: "discriminator layers have the wrong shape".into(),
            });
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<(), QganError> {
        std::fs::write(path, self.to_json()).map_err(|e| QganError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self, QganError> {
        let text = std::fs::read_to_string(path).map_err(|e| QganError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }
}
