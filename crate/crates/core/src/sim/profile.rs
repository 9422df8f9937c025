use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;

pub const DEFAULT_GATE_DUR_1Q_NS: f64 = 35.0;
pub const DEFAULT_GATE_DUR_2Q_NS: f64 = 300.0;
pub const DEFAULT_READOUT_DUR_NS: f64 = 700.0;

fn default_1q() -> f64 {
    DEFAULT_GATE_DUR_1Q_NS
}
fn default_2q() -> f64 {
    DEFAULT_GATE_DUR_2Q_NS
}
fn default_readout() -> f64 {
    DEFAULT_READOUT_DUR_NS
}

/// Mean noise calibration of one backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareProfile {
    pub name: String,
    pub n_qubits: usize,
    pub t1_us: f64,
    pub t2_us: f64,
    pub readout_err: f64,
    pub paulix_err: f64,
    #[serde(default = "default_1q")]
    pub gate_dur_1q_ns: f64,
    #[serde(default = "default_2q")]
    pub gate_dur_2q_ns: f64,
    #[serde(default = "default_readout")]
    pub readout_dur_ns: f64,
}

impl HardwareProfile {
    /// Profile with default gate durations.
    pub fn new(name: &str, n_qubits: usize, t1_us: f64, t2_us: f64, readout_err: f64, paulix_err: f64) -> Self {
        Self {
            name: name.to_string(),
            n_qubits,
            t1_us,
            t2_us,
            readout_err,
            paulix_err,
            gate_dur_1q_ns: DEFAULT_GATE_DUR_1Q_NS,
            gate_dur_2q_ns: DEFAULT_GATE_DUR_2Q_NS,
            readout_dur_ns: DEFAULT_READOUT_DUR_NS,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidProfile(format!("{}: {msg}", self.name)));
        if self.name.trim().is_empty() {
            return bad("empty name".into());
        }
        if self.n_qubits == 0 {
            return bad("n_qubits must be at least 1".into());
        }
        for (field, p) in [("readout_err", self.readout_err), ("paulix_err", self.paulix_err)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{field}={p} is not a probability"));
            }
        }
        if !(self.t1_us > 0.0 && self.t2_us > 0.0 && self.t1_us.is_finite() && self.t2_us.is_finite()) {
            return bad(format!("T1={} T2={} must be positive", self.t1_us, self.t2_us));
        }
        if self.t2_us > 2.0 * self.t1_us {
            return bad(format!("T2={} exceeds 2·T1={}", self.t2_us, 2.0 * self.t1_us));
        }
        for (field, d) in [
            ("gate_dur_1q_ns", self.gate_dur_1q_ns),
            ("gate_dur_2q_ns", self.gate_dur_2q_ns),
            ("readout_dur_ns", self.readout_dur_ns),
        ] {
            if !(d >= 0.0 && d.is_finite()) {
                return bad(format!("{field}={d} must be a non-negative duration"));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let p: HardwareProfile = toml::from_str(text).map_err(|e| SimError::ProfileFormat {
            source_name: "<string>".into(),
            message: e.to_string(),
        })?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("profile fields are always serialisable")
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::ProfileFormat {
            source_name: path.display().to_string(),
            message: e.to_string(),
        })?;
        let p: HardwareProfile = toml::from_str(&text).map_err(|e| SimError::ProfileFormat {
            source_name: path.display().to_string(),
            message: e.to_string(),
        })?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_toml_string())
    }
}

/// Loads every `*.toml` directly inside `dir`, keyed by profile name.
pub fn load_profiles_dir(dir: &Path) -> Result<BTreeMap<String, HardwareProfile>, SimError> {
    let entries = std::fs::read_dir(dir).map_err(|e| SimError::ProfileFormat {
        source_name: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    let mut out = BTreeMap::new();
    for path in paths {
        let p = HardwareProfile::load(&path)?;
        if out.contains_key(&p.name) {
            return Err(SimError::InvalidProfile(format!("duplicate profile name {}", p.name)));
        }
        out.insert(p.name.clone(), p);
    }
    Ok(out)
}

macro_rules! bundled {
    ($($file:literal),* $(,)?) => {
        &[$(($file, include_str!(concat!("../../profiles/", $file)))),*]
    };
}

const BUNDLED: &[(&str, &str)] = bundled!(
    "ibm_athens.toml",
    "ibm_bogota.toml",
    "ibm_burlington.toml",
    "ibm_jakarta.toml",
    "ibm_nairobi.toml",
    "ibm_lagos.toml",
    "ibm_cairo.toml",
    "ibm_cambridge.toml",
    "ibm_kolkata.toml",
    "ibm_washington.toml",
    "fake_brisbane.toml",
    "fake_kyiv.toml",
    "fake_osaka.toml",
    "fake_sherbrooke.toml",
    "real/real_brisbane.toml",
    "real/real_kyiv.toml",
    "real/real_osaka.toml",
    "real/real_sherbrooke.toml",
    "desk/desk_a.toml",
    "desk/desk_b.toml",
    "desk/desk_c.toml",
);

/// Names of the ten-backend suite, in table order.
pub const IBM_SUITE: [&str; 10] = [
    "ibm_athens",
    "ibm_bogota",
    "ibm_burlington",
    "ibm_jakarta",
    "ibm_nairobi",
    "ibm_lagos",
    "ibm_cairo",
    "ibm_cambridge",
    "ibm_kolkata",
    "ibm_washington",
];

/// Every profile compiled into the crate, keyed by name.
pub fn bundled_profiles() -> BTreeMap<String, HardwareProfile> {
    BUNDLED
        .iter()
        .map(|(file, text)| {
            let p = HardwareProfile::from_toml_str(text).unwrap_or_else(|e| panic!("bundled profile {file}: {e}"));
            (p.name.clone(), p)
        })
        .collect()
}

/// A bundled profile by name.
pub fn bundled_profile(name: &str) -> Option<HardwareProfile> {
    bundled_profiles().remove(name)
}
