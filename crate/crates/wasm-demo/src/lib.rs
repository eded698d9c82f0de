//! Browser bindings: band-pass response, synthetic ERD spectra and the
//! per-trial chance curve of the online rule.

use mi_bci::chance::binomial_upper_tail;
use mi_bci::dsp::{epoch_calibration, Bandpass, BandpassSpec, MONTAGE, SAMPLE_RATE_HZ};
use mi_bci::features::{Periodogram, SpectralConfig};
use mi_bci::protocol::OnlineConfig;
use mi_bci::synth::{generate_recording, ScheduledTrial, SynthConfig};
use mi_bci::{Result, TaskCode};
use wasm_bindgen::prelude::*;

/// Highest frequency shown in the spectrum plot.
pub const SPECTRUM_MAX_HZ: f64 = 45.0;

fn js(e: mi_bci::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Magnitude response of the default 1-45 Hz band-pass, in dB.
pub fn filter_response(freqs_hz: &[f64]) -> Result<Vec<f64>> {
    let bp = Bandpass::design(BandpassSpec::default(), SAMPLE_RATE_HZ as f64)?;
    Ok(freqs_hz
        .iter()
        .map(|&f| 20.0 * bp.magnitude(f).max(1e-12).log10())
        .collect())
}

#[wasm_bindgen(js_name = filterResponse)]
pub fn filter_response_js(freqs_hz: &[f64]) -> std::result::Result<Vec<f64>, JsError> {
    filter_response(freqs_hz).map_err(js)
}

/// Mean filtered periodograms at C3 and C4 during LEFT_HAND and RIGHT_HAND
/// imagery.
#[derive(Debug, Clone, PartialEq)]
pub struct ErdSpectra {
    pub freqs_hz: Vec<f64>,
    pub c3_left: Vec<f64>,
    pub c3_right: Vec<f64>,
    pub c4_left: Vec<f64>,
    pub c4_right: Vec<f64>,
}

impl ErdSpectra {
    /// `[n, freqs, c3_left, c3_right, c4_left, c4_right]`, powers in dB.
    pub fn to_flat(&self) -> Vec<f64> {
        let db = |v: &[f64]| v.iter().map(|p| 10.0 * p.max(1e-12).log10()).collect::<Vec<_>>();
        let mut out = vec![self.freqs_hz.len() as f64];
        out.extend(&self.freqs_hz);
        for s in [&self.c3_left, &self.c3_right, &self.c4_left, &self.c4_right] {
            out.extend(db(s));
        }
        out
    }
}

pub fn erd_spectra(erd_depth: f64, seed: u64, trials_per_side: u32) -> Result<ErdSpectra> {
    let cfg = SynthConfig {
        erd_depth,
        seed,
        ..SynthConfig::default()
    };
    let schedule: Vec<ScheduledTrial> = (0..2 * trials_per_side)
        .map(|i| ScheduledTrial {
            task: if i % 2 == 0 { TaskCode::LeftHand } else { TaskCode::RightHand },
            duration_s: 6.0,
        })
        .collect();
    let rec = generate_recording(&schedule, &cfg, 0, false)?.recording;
    let filtered = Bandpass::design(BandpassSpec::default(), SAMPLE_RATE_HZ as f64)?.apply(&rec)?;
    let segments = epoch_calibration(&filtered, 0)?.segments;

    let spectral = SpectralConfig::default();
    let pg = Periodogram::new(spectral)?;
    let df = spectral.bin_spacing_hz();
    let bins = (SPECTRUM_MAX_HZ / df).floor() as usize + 1;
    let c3 = MONTAGE.iter().position(|&c| c == "C3").expect("montage has C3");
    let c4 = MONTAGE.iter().position(|&c| c == "C4").expect("montage has C4");

    let mut sums = [vec![0.0; bins], vec![0.0; bins], vec![0.0; bins], vec![0.0; bins]];
    let mut counts = [0usize; 2];
    for seg in &segments {
        let side = match seg.label {
            Some(TaskCode::LeftHand) => 0,
            Some(TaskCode::RightHand) => 1,
            _ => continue,
        };
        counts[side] += 1;
        for (k, ch) in [c3, c4].into_iter().enumerate() {
            let row: Vec<f64> = seg.data().row(ch).iter().copied().collect();
            let p = pg.one_sided(&row)?;
            for (acc, v) in sums[2 * k + side].iter_mut().zip(&p) {
                *acc += v;
            }
        }
    }
    for (i, s) in sums.iter_mut().enumerate() {
        let n = counts[i % 2].max(1) as f64;
        s.iter_mut().for_each(|v| *v /= n);
    }
    let [c3_left, c3_right, c4_left, c4_right] = sums;
    Ok(ErdSpectra {
        freqs_hz: (0..bins).map(|k| k as f64 * df).collect(),
        c3_left,
        c3_right,
        c4_left,
        c4_right,
    })
}

#[wasm_bindgen(js_name = erdSpectra)]
pub fn erd_spectra_js(erd_depth: f64, seed: u32, trials_per_side: u32) -> std::result::Result<Vec<f64>, JsError> {
    erd_spectra(erd_depth, seed as u64, trials_per_side)
        .map(|s| s.to_flat())
        .map_err(js)
}

/// Probability that a trial completes when each decision is correct
/// independently with probability `p`.
#[wasm_bindgen(js_name = trialCompletion)]
pub fn trial_completion(p: f64) -> f64 {
    let cfg = OnlineConfig::default();
    binomial_upper_tail(cfg.opportunities() as u32, p.clamp(0.0, 1.0), cfg.corrects_needed())
}

/// Decision opportunities and corrects needed per trial under the default rule.
#[wasm_bindgen(js_name = onlineRule)]
pub fn online_rule() -> Vec<u32> {
    let cfg = OnlineConfig::default();
    vec![cfg.opportunities() as u32, cfg.corrects_needed()]
}
