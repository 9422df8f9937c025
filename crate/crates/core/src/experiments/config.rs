use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::extractor::ClassifierConfig;
use crate::imaging::{bundled_digits, load_digits};
use crate::qgan::{GanTrainConfig, Image8};
use crate::sim::{bundled_profiles, load_profiles_dir, HardwareProfile, IBM_SUITE};
use crate::{Error, Result};

/// Named starting points for an [`ExperimentConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Two synthetic profiles, 100 epochs, 32-pixel classifier input.
    #[default]
    Desk,
    /// Ten IBM backends, 500 epochs, 150-pixel classifier input.
    Full,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            other => Err(Error::Config(format!("unknown preset {other:?}; expected desk or full"))),
        }
    }
}

/// Everything a pipeline run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Drives every random stream in the pipeline, including generator
    /// initialisation (it replaces `gan.seed`).
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Directory of profile files; the bundled set is used when absent.
    pub profiles_dir: Option<PathBuf>,
    /// Digits table; the bundled copy is used when absent.
    pub digits_path: Option<PathBuf>,
    /// Only digits with this label serve as real training data.
    pub digit_label: Option<u8>,
    /// One generator is trained per schedule, written `a>b` with optional
    /// per-stage epochs `a:300>b:200`. Stages without a count share the
    /// remainder of `gan.epochs` evenly.
    pub schedules: Vec<String>,
    /// Profiles each trained generator is run on when building datasets.
    pub infer_profiles: Vec<String>,
    pub images_per_pair: usize,
    pub test_images_per_pair: usize,
    /// Images per ownership check.
    pub verify_batch: usize,
    pub fid_images: usize,
    pub tamper_profile: String,
    pub tamper_epochs: usize,
    pub gan: GanTrainConfig,
    pub classifier: ClassifierConfig,
}

impl ExperimentConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Desk => Self {
                seed: 0,
                out_dir: PathBuf::from("runs/desk"),
                profiles_dir: None,
                digits_path: None,
                digit_label: Some(0),
                schedules: vec!["desk_a".into(), "desk_b".into()],
                infer_profiles: vec!["desk_a".into(), "desk_b".into()],
                images_per_pair: 200,
                test_images_per_pair: 100,
                verify_batch: 50,
                fid_images: 1000,
                tamper_profile: "desk_c".into(),
                tamper_epochs: 10,
                gan: GanTrainConfig {
                    epochs: 100,
                    ..GanTrainConfig::default()
                },
                classifier: ClassifierConfig::desk(),
            },
            Preset::Full => Self {
                seed: 0,
                out_dir: PathBuf::from("runs/full"),
                profiles_dir: None,
                digits_path: None,
                digit_label: Some(0),
                schedules: IBM_SUITE.iter().map(|s| s.to_string()).collect(),
                infer_profiles: IBM_SUITE.iter().map(|s| s.to_string()).collect(),
                images_per_pair: 100,
                test_images_per_pair: 50,
                verify_batch: 100,
                fid_images: 1000,
                tamper_profile: "fake_kyiv".into(),
                tamper_epochs: 10,
                gan: GanTrainConfig::default(),
                classifier: ClassifierConfig::default(),
            },
        }
    }

    /// Parses a TOML document laid over `base`: keys present in the file
    /// replace the preset's values, nested tables merge key by key.
    pub fn from_toml_str(text: &str, base: Preset) -> Result<Self> {
        let overlay: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = toml::Table::try_from(Self::preset(base)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, overlay);
        merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn load(path: Option<&Path>, base: Preset) -> Result<Self> {
        match path {
            None => Ok(Self::preset(base)),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                Self::from_toml_str(&text, base).map_err(|e| match e {
                    Error::Config(m) => Error::Config(format!("{}: {m}", p.display())),
                    other => other,
                })
            }
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// GAN settings with the global seed applied.
    pub fn gan_config(&self) -> GanTrainConfig {
        GanTrainConfig {
            seed: self.seed,
            ..self.gan.clone()
        }
    }

    pub fn profiles(&self) -> Result<BTreeMap<String, HardwareProfile>> {
        match &self.profiles_dir {
            Some(dir) => Ok(load_profiles_dir(dir)?),
            None => Ok(bundled_profiles()),
        }
    }

    pub fn real_images(&self) -> Result<Vec<Image8>> {
        let imgs = match &self.digits_path {
            Some(p) => load_digits(p, self.digit_label)?,
            None => bundled_digits(self.digit_label),
        };
        if imgs.is_empty() {
            return Err(Error::Data("no digits match the configured label".into()));
        }
        Ok(imgs)
    }

    /// Every schedule as `(profile, epochs)` stages.
    pub fn resolved_schedules(&self) -> Result<Vec<Vec<(String, usize)>>> {
        self.schedules.iter().map(|s| parse_schedule(s, self.gan.epochs)).collect()
    }

    /// Checks settings and that every referenced profile exists and is wide
    /// enough for the generator circuits.
    pub fn validate(&self, profiles: &BTreeMap<String, HardwareProfile>) -> Result<()> {
        self.gan.validate()?;
        self.classifier.validate()?;
        if self.schedules.is_empty() {
            return Err(Error::Config("no schedules configured".into()));
        }
        if self.infer_profiles.is_empty() {
            return Err(Error::Config("no inference profiles configured".into()));
        }
        if self.verify_batch == 0 {
            return Err(Error::Config("verify_batch must be positive".into()));
        }
        let mut names: Vec<&str> = self.infer_profiles.iter().map(String::as_str).collect();
        names.push(&self.tamper_profile);
        let schedules = self.resolved_schedules()?;
        for s in &schedules {
            names.extend(s.iter().map(|(n, _)| n.as_str()));
        }
        for n in names {
            let p = profiles
                .get(n)
                .ok_or_else(|| Error::Config(format!("profile {n:?} is not available")))?;
            if p.n_qubits < self.gan.n_qubits {
                return Err(Error::Config(format!(
                    "profile {n} has {} qubits but the generator needs {}",
                    p.n_qubits, self.gan.n_qubits
                )));
            }
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses `a>b:200>c` into stages. Stages without an explicit count split
/// what is left of `total` evenly, earlier stages taking any remainder.
pub fn parse_schedule(text: &str, total: usize) -> Result<Vec<(String, usize)>> {
    let mut stages = Vec::new();
    for part in text.split('>') {
        let part = part.trim();
        let (name, epochs) = match part.split_once(':') {
            Some((n, e)) => {
                let e = e
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad epoch count in schedule {text:?}")))?;
                (n.trim(), Some(e))
            }
            None => (part, None),
        };
        if name.is_empty() {
            return Err(Error::Config(format!("empty stage in schedule {text:?}")));
        }
        stages.push((name.to_string(), epochs));
    }
    let fixed: usize = stages.iter().filter_map(|(_, e)| *e).sum();
    let open = stages.iter().filter(|(_, e)| e.is_none()).count();
    let rest = total.saturating_sub(fixed);
    let mut k = 0;
    Ok(stages
        .into_iter()
        .map(|(n, e)| {
            let e = e.unwrap_or_else(|| {
                let share = rest / open + usize::from(k < rest % open);
                k += 1;
                share
            });
            (n, e)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_parsing() {
        assert_eq!(parse_schedule("a", 100).unwrap(), vec![("a".into(), 100)]);
        assert_eq!(parse_schedule("a>b", 100).unwrap(), vec![("a".into(), 50), ("b".into(), 50)]);
        assert_eq!(parse_schedule("a>b>c", 100).unwrap(), vec![("a".into(), 34), ("b".into(), 33), ("c".into(), 33)]);
        assert_eq!(parse_schedule("a:70>b", 100).unwrap(), vec![("a".into(), 70), ("b".into(), 30)]);
        assert!(parse_schedule("a>>b", 10).is_err());
        assert!(parse_schedule("a:x", 10).is_err());
    }

    #[test]
    fn presets_validate_against_bundled_profiles() {
        for p in [Preset::Desk, Preset::Full] {
            let cfg = ExperimentConfig::preset(p);
            cfg.validate(&cfg.profiles().unwrap()).unwrap();
        }
    }

    #[test]
    fn toml_overlays_preset() {
        let cfg = ExperimentConfig::from_toml_str("seed = 9\n[gan]\nepochs = 3\n", Preset::Desk).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.gan.epochs, 3);
        assert_eq!(cfg.gan.lr_gen, 0.2);
        assert_eq!(cfg.classifier.input_side, 32);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string(), Preset::Full).unwrap();
        assert_eq!(back, cfg);
        assert!(ExperimentConfig::from_toml_str("bogus = 1", Preset::Desk).is_err());
        assert!(ExperimentConfig::from_toml_str("[gan]\nlr = 1", Preset::Desk).is_err());
    }

    #[test]
    fn unknown_profile_is_a_config_error() {
        let mut cfg = ExperimentConfig::preset(Preset::Desk);
        cfg.schedules.push("desk_a>nowhere".into());
        let err = cfg.validate(&cfg.profiles().unwrap()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
