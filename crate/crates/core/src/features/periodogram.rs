use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Periodogram and band layout, frozen for the lifetime of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Samples per segment.
    pub n: usize,
    pub sample_rate_hz: f64,
    /// Zero-padded transform length.
    pub n_fft: usize,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    /// Average non-overlapping adjacent bin pairs before band selection.
    pub pair_average: bool,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            n: 500,
            sample_rate_hz: 250.0,
            n_fft: 512,
            band_low_hz: 2.0,
            band_high_hz: 40.0,
            pair_average: true,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > self.n_fft {
            return Err(Error::Config(format!(
                "segment length {} must be in 1..={}",
                self.n, self.n_fft
            )));
        }
        if !(self.band_low_hz <= self.band_high_hz && self.band_high_hz < self.sample_rate_hz / 2.0) {
            return Err(Error::Config(format!(
                "feature band [{}, {}] Hz invalid for {} Hz sampling",
                self.band_low_hz, self.band_high_hz, self.sample_rate_hz
            )));
        }
        Ok(())
    }

    /// Frequency spacing of the zero-padded transform.
    pub fn bin_spacing_hz(&self) -> f64 {
        self.sample_rate_hz / self.n_fft as f64
    }

    /// One-sided bin count, `n_fft / 2 + 1`.
    pub fn one_sided_len(&self) -> usize {
        self.n_fft / 2 + 1
    }
}

/// `P_k = |DFT_nfft(x zero-padded)|^2 / N`, no taper.
#[derive(Clone)]
pub struct Periodogram {
    cfg: SpectralConfig,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Periodogram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Periodogram").field("cfg", &self.cfg).finish()
    }
}

impl Periodogram {
    pub fn new(cfg: SpectralConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.n_fft);
        Ok(Periodogram { cfg, fft })
    }

    pub fn config(&self) -> &SpectralConfig {
        &self.cfg
    }

    /// Full two-sided spectrum, `n_fft` values.
    pub fn two_sided(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cfg.n {
            return Err(Error::shape(format!("{} samples", self.cfg.n), format!("{} samples", x.len())));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample at index {i}")));
        }
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(self.cfg.n_fft, Complex64::new(0.0, 0.0));
        self.fft.process(&mut buf);
        let scale = 1.0 / self.cfg.n as f64;
        Ok(buf.iter().map(|c| c.norm_sqr() * scale).collect())
    }

    /// One-sided spectrum, bins `0..=n_fft/2`.
    pub fn one_sided(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut p = self.two_sided(x)?;
        p.truncate(self.cfg.one_sided_len());
        Ok(p)
    }
}

/// Concatenated per-component band powers, component-major and
/// frequency-ascending within a component.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

/// Builds feature vectors from component segments.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    periodogram: Periodogram,
    /// `(first_bin, bin_count)` of each retained (possibly averaged) bin group.
    groups: Vec<(usize, usize)>,
}

impl FeatureExtractor {
    pub fn new(cfg: SpectralConfig) -> Result<Self> {
        let periodogram = Periodogram::new(cfg)?;
        let df = cfg.bin_spacing_hz();
        let width = if cfg.pair_average { 2 } else { 1 };
        let half = cfg.one_sided_len();
        let groups = (0..)
            .map(|g| g * width)
            .take_while(|&k| k + width <= half)
            .filter(|&k| {
                let center = (k as f64 + (width - 1) as f64 / 2.0) * df;
                center >= cfg.band_low_hz && center <= cfg.band_high_hz
            })
            .map(|k| (k, width))
            .collect::<Vec<_>>();
        if groups.is_empty() {
            return Err(Error::Config("feature band contains no bins".into()));
        }
        Ok(FeatureExtractor { periodogram, groups })
    }

    pub fn config(&self) -> &SpectralConfig {
        self.periodogram.config()
    }

    pub fn periodogram(&self) -> &Periodogram {
        &self.periodogram
    }

    pub fn features_per_component(&self) -> usize {
        self.groups.len()
    }

    /// Center frequency of each retained group.
    pub fn group_centers_hz(&self) -> Vec<f64> {
        let df = self.config().bin_spacing_hz();
        self.groups
            .iter()
            .map(|&(k, w)| (k as f64 + (w - 1) as f64 / 2.0) * df)
            .collect()
    }

    /// Feature dimension for `n_components` components.
    pub fn dimension(&self, n_components: usize) -> usize {
        n_components * self.groups.len()
    }

    /// `(component, center_hz)` of a feature index.
    pub fn describe(&self, index: usize) -> (usize, f64) {
        let per = self.groups.len();
        (index / per, self.group_centers_hz()[index % per])
    }

    pub fn extract(&self, components: &DMatrix<f64>) -> Result<FeatureVector> {
        let mut values = Vec::with_capacity(self.dimension(components.nrows()));
        let mut row = vec![0.0; components.ncols()];
        for c in 0..components.nrows() {
            for (t, v) in row.iter_mut().enumerate() {
                *v = components[(c, t)];
            }
            let p = self.periodogram.one_sided(&row)?;
            values.extend(
                self.groups
                    .iter()
                    .map(|&(k, w)| p[k..k + w].iter().sum::<f64>() / w as f64),
            );
        }
        Ok(FeatureVector { values })
    }
}
