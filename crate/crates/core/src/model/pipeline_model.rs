use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cv::TailModel;
use super::ova::{BinaryLinearModel, ClassWeightRule, OneVsAll};
use super::standardize::Standardizer;
use crate::dsp::{BandpassSpec, N_CHANNELS};
use crate::features::{FeatureExtractor, SpectralConfig};
use crate::ica::UnmixingMatrix;
use crate::{Error, Result};

pub const MODEL_FORMAT: &str = "mi-bci-model/1";

/// Everything frozen at calibration time and reused verbatim online.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineModel {
    pub format: String,
    pub config_hash: String,
    pub bandpass: BandpassSpec,
    pub spectral: SpectralConfig,
    pub unmixing: UnmixingMatrix,
    /// Ascending feature indices kept by the MI filter.
    pub selected: Vec<u32>,
    pub standardizer: Standardizer,
    pub classifiers: Vec<BinaryLinearModel>,
    pub k: usize,
    pub c: f64,
    pub weight_rule: ClassWeightRule,
    pub cv_mean_kappa: f64,
    pub training_seed: u64,
    /// Calibration segments per class, for stratified chance priors.
    pub class_counts: [u64; 3],
}

impl PipelineModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config_hash: String,
        bandpass: BandpassSpec,
        spectral: SpectralConfig,
        unmixing: UnmixingMatrix,
        tail: TailModel,
        c: f64,
        weight_rule: ClassWeightRule,
        cv_mean_kappa: f64,
        training_seed: u64,
        class_counts: [u64; 3],
    ) -> Result<Self> {
        let m = PipelineModel {
            format: MODEL_FORMAT.to_string(),
            config_hash,
            bandpass,
            spectral,
            unmixing,
            k: tail.selected.len(),
            selected: tail.selected.iter().map(|&i| i as u32).collect(),
            standardizer: tail.standardizer,
            classifiers: tail.classifiers.models,
            c,
            weight_rule,
            cv_mean_kappa,
            training_seed,
            class_counts,
        };
        m.validate()?;
        Ok(m)
    }

    /// Dimension consistency across all stored parts.
    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Format(format!("unknown model format {:?}", self.format)));
        }
        if self.unmixing.channel_means().len() != N_CHANNELS {
            return Err(Error::Format(format!(
                "model montage has {} channels, expected {N_CHANNELS}",
                self.unmixing.channel_means().len()
            )));
        }
        let d = FeatureExtractor::new(self.spectral)?.dimension(N_CHANNELS);
        let k = self.selected.len();
        if k != self.k || self.standardizer.len() != k {
            return Err(Error::Format("selected/standardizer lengths disagree".into()));
        }
        if self.selected.windows(2).any(|w| w[0] >= w[1])
            || self.selected.last().is_some_and(|&i| i as usize >= d)
        {
            return Err(Error::Format("selected indices must be ascending and < D".into()));
        }
        self.ova().validate()?;
        if self.classifiers[0].w.len() != k {
            return Err(Error::Format("classifier weight length disagrees with k".into()));
        }
        Ok(())
    }

    pub fn ova(&self) -> OneVsAll {
        OneVsAll {
            models: self.classifiers.clone(),
        }
    }

    pub fn tail(&self) -> TailModel {
        TailModel {
            selected: self.selected.iter().map(|&i| i as usize).collect(),
            standardizer: self.standardizer.clone(),
            classifiers: self.ova(),
        }
    }

    pub fn eligible(&self) -> bool {
        self.cv_mean_kappa > 0.0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: PipelineModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
