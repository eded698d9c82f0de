use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsp::BandpassSpec;
use crate::features::SpectralConfig;
use crate::model::CvConfig;
use crate::protocol::OnlineConfig;
use crate::synth::SynthConfig;
use crate::{Error, Result};

/// The data seed is `synth.seed`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub maze: u64,
    pub sham: u64,
    pub training: u64,
    pub session: u64,
    pub benchmark: u64,
}

/// Output file names, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub recordings: [String; 2],
    pub ground_truth: [String; 2],
    pub model: String,
    pub cv_report: String,
    pub session_log: String,
    pub chance_report: String,
    pub report: String,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            recordings: ["calib_run1.eegr".into(), "calib_run2.eegr".into()],
            ground_truth: ["calib_run1.truth.json".into(), "calib_run2.truth.json".into()],
            model: "model.json".into(),
            cv_report: "cv_report.txt".into(),
            session_log: "session.log".into(),
            chance_report: "chance.txt".into(),
            report: "report.txt".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Seeds,
    pub synth: SynthConfig,
    /// Sham success probability of the two calibration runs.
    pub sham_p: [f64; 2],
    /// Sham probability used by `session --mode sham`.
    pub session_sham_p: f64,
    pub bandpass: BandpassSpec,
    pub spectral: SpectralConfig,
    pub cv: CvConfig,
    pub online: OnlineConfig,
    pub benchmark_runs: u64,
    #[serde(default)]
    pub paths: Paths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::with_seed(0)
    }
}

impl ExperimentConfig {
    /// Default experiment with every seed derived from one base seed.
    pub fn with_seed(seed: u64) -> Self {
        ExperimentConfig {
            seeds: Seeds {
                maze: seed,
                sham: seed.wrapping_add(1),
                training: seed.wrapping_add(2),
                session: seed.wrapping_add(3),
                benchmark: seed.wrapping_add(4),
            },
            synth: SynthConfig {
                seed,
                ..SynthConfig::default()
            },
            sham_p: [0.65, 0.75],
            session_sham_p: 0.75,
            bandpass: BandpassSpec::default(),
            spectral: SpectralConfig::default(),
            cv: CvConfig::default(),
            online: OnlineConfig::default(),
            benchmark_runs: 100_000,
            paths: Paths::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.spectral.validate()?;
        self.online.validate()?;
        for p in self.sham_p.iter().chain([&self.session_sham_p]) {
            crate::protocol::ShamConfig::with_p(*p).validate()?;
        }
        if self.benchmark_runs == 0 {
            return Err(Error::Config("benchmark_runs must be >= 1".into()));
        }
        if self.cv.k_grid.is_empty() || self.cv.c_grid.is_empty() {
            return Err(Error::Config("CV grids must be non-empty".into()));
        }
        if self.cv.k_grid.contains(&0) || self.cv.c_grid.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::Config("CV grid values must be positive".into()));
        }
        Ok(())
    }

    /// Compact JSON; also the hashed form.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON, lowercase hex.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
