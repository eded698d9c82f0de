//! Synthetic motor-imagery EEG.
//!
//! Three narrowband rhythm sources (mu + beta) sit under C3, Cz and C4; the
//! remaining 13 sources are pink noise under the other electrodes. A task
//! attenuates its own rhythm (ERD) and lifts the neighbouring one (ERS):
//!
//! | task       | C3 source | Cz source | C4 source |
//! |------------|-----------|-----------|-----------|
//! | RIGHT_HAND | 1 - erd   | 1 + ers   | 1         |
//! | LEFT_HAND  | 1         | 1 + ers   | 1 - erd   |
//! | FEET       | 1 + ers   | 1 - erd   | 1 + ers   |
//!
//! ERS is only applied when `erd_depth > 0`, so `erd_depth = 0` carries no
//! class information at all. Each source draws from its own random stream,
//! so changing `erd_depth` rescales the rhythms without touching any noise
//! realization.

mod mixing;

pub use mixing::{spatial_mixing, MONTAGE_XY};

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::{EegRecording, Marker, MarkerKind, TaskCode, N_CHANNELS, SAMPLE_RATE_HZ};
use crate::protocol::TrialOutcome;
use crate::{Error, Result};

/// Channel indices of the C3, Cz and C4 rhythm anchors.
pub const RHYTHM_ANCHORS: [usize; 3] = [5, 7, 9];
pub const N_RHYTHMS: usize = 3;

const MIXING_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub erd_depth: f64,
    /// Per-source ratio of rhythm power to pink-noise power, broadband.
    pub background_snr_db: f64,
    pub mixing_condition_cap: f64,
    pub seed: u64,
    pub mu_hz: f64,
    pub beta_hz: f64,
    pub rhythm_bandwidth_hz: f64,
    pub mu_amplitude_uv: f64,
    pub beta_amplitude_uv: f64,
    pub surround_ers: f64,
    pub lead_in_s: f64,
    pub inter_trial_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            erd_depth: 0.8,
            background_snr_db: 10.0,
            mixing_condition_cap: 10.0,
            seed: 0,
            mu_hz: 10.0,
            beta_hz: 20.0,
            rhythm_bandwidth_hz: 1.0,
            mu_amplitude_uv: 10.0,
            beta_amplitude_uv: 5.0,
            surround_ers: 0.1,
            lead_in_s: 2.0,
            inter_trial_s: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let nyq = SAMPLE_RATE_HZ as f64 / 2.0;
        let checks = [
            ((0.0..=1.0).contains(&self.erd_depth), "erd_depth must lie in [0, 1]"),
            (self.background_snr_db.is_finite(), "background_snr_db must be finite"),
            (self.mixing_condition_cap > 1.0, "mixing_condition_cap must exceed 1"),
            (self.mu_hz > 0.0 && self.mu_hz < nyq, "mu_hz out of range"),
            (self.beta_hz > 0.0 && self.beta_hz < nyq, "beta_hz out of range"),
            (self.rhythm_bandwidth_hz > 0.0, "rhythm_bandwidth_hz must be positive"),
            (
                self.mu_amplitude_uv >= 0.0 && self.beta_amplitude_uv >= 0.0,
                "rhythm amplitudes must be non-negative",
            ),
            (
                self.mu_amplitude_uv + self.beta_amplitude_uv > 0.0,
                "at least one rhythm amplitude must be positive",
            ),
            (self.surround_ers >= 0.0, "surround_ers must be non-negative"),
            (self.lead_in_s >= 0.0, "lead_in_s must be non-negative"),
            (
                self.inter_trial_s * SAMPLE_RATE_HZ as f64 >= 1.0,
                "inter_trial_s must cover at least one sample",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Config(msg.to_string())),
            None => Ok(()),
        }
    }

    fn rhythm_rms(&self) -> f64 {
        (self.mu_amplitude_uv.powi(2) + self.beta_amplitude_uv.powi(2)).sqrt()
    }

    pub fn noise_rms(&self) -> f64 {
        self.rhythm_rms() / 10f64.powf(self.background_snr_db / 20.0)
    }
}

/// Amplitude gains of the C3, Cz and C4 rhythm sources.
pub fn task_gains(task: Option<TaskCode>, cfg: &SynthConfig) -> [f64; 3] {
    let e = cfg.erd_depth;
    let ers = if e > 0.0 { 1.0 + cfg.surround_ers } else { 1.0 };
    match task {
        None => [1.0, 1.0, 1.0],
        Some(TaskCode::RightHand) => [1.0 - e, ers, 1.0],
        Some(TaskCode::LeftHand) => [1.0, ers, 1.0 - e],
        Some(TaskCode::Feet) => [ers, 1.0 - e, ers],
    }
}

/// Source index -> anchor channel: rhythms first, then noise sources under
/// the remaining electrodes in montage order.
pub fn source_anchors() -> Vec<usize> {
    let mut a = RHYTHM_ANCHORS.to_vec();
    a.extend((0..N_CHANNELS).filter(|c| !RHYTHM_ANCHORS.contains(c)));
    a
}

/// Ground-truth mixing for a config (depends on `seed` and the cap only).
pub fn mixing_matrix(cfg: &SynthConfig) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(MIXING_STREAM);
    spatial_mixing(&source_anchors(), cfg.mixing_condition_cap, &mut rng)
}

/// Seed of one run's noise, decorrelated from the head seed by a
/// splitmix64 finalizer.
fn run_seed(seed: u64, run_id: u64) -> u64 {
    let mut z = seed ^ run_id.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Unit-variance AR(2) resonator.
#[derive(Debug, Clone)]
struct Resonator {
    a1: f64,
    a2: f64,
    gain: f64,
    x1: f64,
    x2: f64,
}

impl Resonator {
    fn new(freq_hz: f64, bandwidth_hz: f64, fs: f64) -> Self {
        let r = (-PI * bandwidth_hz / fs).exp();
        let w = 2.0 * PI * freq_hz / fs;
        let (a1, a2) = (2.0 * r * w.cos(), -r * r);
        // Stationary variance for unit innovations.
        let var = (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2).powi(2) - a1 * a1));
        Resonator {
            a1,
            a2,
            gain: 1.0 / var.sqrt(),
            x1: 0.0,
            x2: 0.0,
        }
    }

    fn step(&mut self, e: f64) -> f64 {
        let x = self.a1 * self.x1 + self.a2 * self.x2 + self.gain * e;
        self.x2 = self.x1;
        self.x1 = x;
        x
    }
}

/// Kellet's economy 1/f filter, scaled to unit variance.
#[derive(Debug, Clone)]
struct Pink {
    b: [f64; 7],
    scale: f64,
}

impl Pink {
    fn new() -> Self {
        let mut p = Pink {
            b: [0.0; 7],
            scale: 1.0,
        };
        let mut energy = 0.0;
        let mut h = p.clone();
        for n in 0..40_000 {
            let y = h.raw(if n == 0 { 1.0 } else { 0.0 });
            energy += y * y;
        }
        p.scale = 1.0 / energy.sqrt();
        p
    }

    fn raw(&mut self, w: f64) -> f64 {
        let b = &mut self.b;
        b[0] = 0.99886 * b[0] + w * 0.0555179;
        b[1] = 0.99332 * b[1] + w * 0.0750759;
        b[2] = 0.96900 * b[2] + w * 0.1538520;
        b[3] = 0.86650 * b[3] + w * 0.3104856;
        b[4] = 0.55000 * b[4] + w * 0.5329522;
        b[5] = -0.7616 * b[5] - w * 0.0168980;
        let y = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + w * 0.5362;
        b[6] = w * 0.115926;
        y
    }

    fn step(&mut self, w: f64) -> f64 {
        self.scale * self.raw(w)
    }
}

/// Continuous source-and-sensor generator. `run_id` selects independent
/// noise realizations under the same head (mixing matrix).
#[derive(Debug, Clone)]
pub struct SynthStream {
    cfg: SynthConfig,
    mixing: DMatrix<f64>,
    rngs: Vec<ChaCha8Rng>,
    mu: Vec<Resonator>,
    beta: Vec<Resonator>,
    pink: Vec<Pink>,
    noise_rms: f64,
    emitted: u64,
}

impl SynthStream {
    pub fn new(cfg: &SynthConfig, run_id: u64) -> Result<Self> {
        cfg.validate()?;
        let fs = SAMPLE_RATE_HZ as f64;
        let run_seed = run_seed(cfg.seed, run_id);
        let rngs = (0..N_CHANNELS as u64)
            .map(|s| {
                let mut r = ChaCha8Rng::seed_from_u64(run_seed);
                r.set_stream(s);
                r
            })
            .collect();
        let pink = Pink::new();
        Ok(SynthStream {
            cfg: cfg.clone(),
            mixing: mixing_matrix(cfg)?,
            rngs,
            mu: vec![Resonator::new(cfg.mu_hz, cfg.rhythm_bandwidth_hz, fs); N_RHYTHMS],
            beta: vec![Resonator::new(cfg.beta_hz, cfg.rhythm_bandwidth_hz, fs); N_RHYTHMS],
            pink: vec![pink; N_CHANNELS - N_RHYTHMS],
            noise_rms: cfg.noise_rms(),
            emitted: 0,
        })
    }

    pub fn mixing(&self) -> &DMatrix<f64> {
        &self.mixing
    }

    pub fn samples_emitted(&self) -> u64 {
        self.emitted
    }

    /// Next `n` samples of all 16 sources under the given task state.
    pub fn next_sources(&mut self, n: usize, task: Option<TaskCode>) -> DMatrix<f64> {
        let g = task_gains(task, &self.cfg);
        let (mu_a, beta_a) = (self.cfg.mu_amplitude_uv, self.cfg.beta_amplitude_uv);
        let mut s = DMatrix::zeros(N_CHANNELS, n);
        for t in 0..n {
            for r in 0..N_RHYTHMS {
                let rng = &mut self.rngs[r];
                let e_mu: f64 = rng.sample(StandardNormal);
                let e_beta: f64 = rng.sample(StandardNormal);
                let v = mu_a * self.mu[r].step(e_mu) + beta_a * self.beta[r].step(e_beta);
                s[(r, t)] = g[r] * v;
            }
            for k in 0..N_CHANNELS - N_RHYTHMS {
                let w: f64 = self.rngs[N_RHYTHMS + k].sample(StandardNormal);
                s[(N_RHYTHMS + k, t)] = self.noise_rms * self.pink[k].step(w);
            }
        }
        self.emitted += n as u64;
        s
    }

    /// Mixes sources to sensors, rounding through `f32` so that recordings
    /// survive the file format unchanged.
    pub fn mix(&self, sources: &DMatrix<f64>) -> DMatrix<f64> {
        (&self.mixing * sources).map(|v| v as f32 as f64)
    }

    /// Next `n` sensor samples.
    pub fn next_block(&mut self, n: usize, task: Option<TaskCode>) -> DMatrix<f64> {
        let s = self.next_sources(n, task);
        self.mix(&s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledTrial {
    pub task: TaskCode,
    pub duration_s: f64,
}

/// Trial durations of a simulated sham run.
pub fn schedule_from_outcomes(outcomes: &[TrialOutcome]) -> Vec<ScheduledTrial> {
    outcomes
        .iter()
        .map(|o| ScheduledTrial {
            task: o.task,
            duration_s: o.elapsed_s as f64,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEnvelope {
    pub task: TaskCode,
    pub start_sample: u64,
    pub end_sample: u64,
    /// C3, Cz, C4 rhythm gains during the trial.
    pub gains: [f64; 3],
}

/// Sidecar with everything a test oracle needs about a generated recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Hash of the experiment config that produced the recording, if any.
    #[serde(default)]
    pub config_hash: String,
    pub config: SynthConfig,
    pub run_id: u64,
    /// Row-major 16 x 16 mixing, sensors x sources.
    pub mixing: Vec<f64>,
    pub source_anchors: Vec<String>,
    pub trials: Vec<TrialEnvelope>,
}

impl GroundTruth {
    pub fn mixing_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(N_CHANNELS, N_CHANNELS, &self.mixing)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub recording: EegRecording,
    pub truth: GroundTruth,
    /// Source activity, only kept on request.
    pub sources: Option<DMatrix<f64>>,
}

fn seconds_to_samples(s: f64) -> usize {
    (s * SAMPLE_RATE_HZ as f64).round() as usize
}

/// Renders a trial schedule: rest lead-in, then each trial followed by a
/// rest interval. Trial markers bracket `[start, end)`.
pub fn generate_recording(
    schedule: &[ScheduledTrial],
    cfg: &SynthConfig,
    run_id: u64,
    keep_sources: bool,
) -> Result<SynthOutput> {
    let mut stream = SynthStream::new(cfg, run_id)?;
    let mut blocks: Vec<(usize, Option<TaskCode>)> = vec![(seconds_to_samples(cfg.lead_in_s), None)];
    let mut markers = Vec::with_capacity(2 * schedule.len());
    let mut trials = Vec::with_capacity(schedule.len());
    let mut cursor = blocks[0].0 as u64;
    let rest = seconds_to_samples(cfg.inter_trial_s);
    for st in schedule {
        if !(st.duration_s > 0.0) {
            return Err(Error::Config(format!("trial duration must be positive, got {}", st.duration_s)));
        }
        let len = seconds_to_samples(st.duration_s);
        markers.push(Marker {
            sample_index: cursor,
            task: st.task,
            kind: MarkerKind::TrialStart,
        });
        markers.push(Marker {
            sample_index: cursor + len as u64,
            task: st.task,
            kind: MarkerKind::TrialEnd,
        });
        trials.push(TrialEnvelope {
            task: st.task,
            start_sample: cursor,
            end_sample: cursor + len as u64,
            gains: task_gains(Some(st.task), cfg),
        });
        blocks.push((len, Some(st.task)));
        blocks.push((rest, None));
        cursor += (len + rest) as u64;
    }
    let total = cursor as usize;
    let mut samples = DMatrix::zeros(N_CHANNELS, total);
    let mut sources = keep_sources.then(|| DMatrix::zeros(N_CHANNELS, total));
    let mut at = 0;
    for (len, task) in blocks {
        let s = stream.next_sources(len, task);
        samples.columns_mut(at, len).copy_from(&stream.mix(&s));
        if let Some(all) = sources.as_mut() {
            all.columns_mut(at, len).copy_from(&s);
        }
        at += len;
    }
    let truth = GroundTruth {
        config_hash: String::new(),
        config: cfg.clone(),
        run_id,
        mixing: stream.mixing().transpose().as_slice().to_vec(),
        source_anchors: source_anchors()
            .iter()
            .map(|&c| crate::dsp::MONTAGE[c].to_string())
            .collect(),
        trials,
    };
    Ok(SynthOutput {
        recording: EegRecording::new(SAMPLE_RATE_HZ, samples, markers)?,
        truth,
        sources,
    })
}

/// ICA benchmark scenario: 16 independent unit-variance Laplacian sources
/// mixed by the condition-capped spatial kernel. Returns `(sensors, mixing)`.
pub fn supergaussian_mixture(
    seed: u64,
    seconds: f64,
    condition_cap: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = spatial_mixing(&source_anchors(), condition_cap, &mut rng)?;
    let n = seconds_to_samples(seconds);
    let scale = 1.0 / 2f64.sqrt();
    let s = DMatrix::from_fn(N_CHANNELS, n, |_, _| {
        let e: f64 = rng.sample(Exp1);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        sign * e * scale
    });
    Ok((&a * s, a))
}

/// Mean per-source power, for quick sanity checks on generated blocks.
pub fn source_power(sources: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        sources.nrows(),
        sources.row_iter().map(|r| r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule() -> Vec<ScheduledTrial> {
        [TaskCode::Feet, TaskCode::LeftHand, TaskCode::RightHand]
            .iter()
            .map(|&task| ScheduledTrial {
                task,
                duration_s: 6.0,
            })
            .collect()
    }

    #[test]
    fn gains_table() {
        let cfg = SynthConfig::default();
        let g = task_gains(Some(TaskCode::RightHand), &cfg);
        assert!((g[0] - 0.2).abs() < 1e-12 && g[2] == 1.0 && (g[1] - 1.1).abs() < 1e-12);
        let flat = SynthConfig {
            erd_depth: 0.0,
            ..cfg
        };
        for t in TaskCode::ALL {
            assert_eq!(task_gains(Some(t), &flat), [1.0; 3]);
        }
    }

    #[test]
    fn deterministic_and_valid() {
        let cfg = SynthConfig::default();
        let a = generate_recording(&schedule(), &cfg, 0, false).unwrap();
        let b = generate_recording(&schedule(), &cfg, 0, false).unwrap();
        assert_eq!(a.recording, b.recording);
        assert_eq!(a.recording.markers().len(), 6);
        let bytes = a.recording.to_bytes();
        assert_eq!(EegRecording::from_bytes(&bytes).unwrap(), a.recording);
        let c = generate_recording(&schedule(), &cfg, 1, false).unwrap();
        assert_ne!(a.recording.samples(), c.recording.samples());
        assert_eq!(a.truth.mixing, c.truth.mixing);
    }

    #[test]
    fn erd_depth_only_rescales_rhythms() {
        let strong = SynthConfig::default();
        let none = SynthConfig {
            erd_depth: 0.0,
            ..strong.clone()
        };
        let a = generate_recording(&schedule(), &strong, 0, true).unwrap();
        let b = generate_recording(&schedule(), &none, 0, true).unwrap();
        let (sa, sb) = (a.sources.unwrap(), b.sources.unwrap());
        assert_eq!(sa.rows(3, 13), sb.rows(3, 13));
        // Inside the RIGHT_HAND trial, C3 is scaled by exactly 1 - erd.
        let span = &a.truth.trials[2];
        for t in span.start_sample as usize..span.end_sample as usize {
            assert!((sa[(0, t)] - 0.2 * sb[(0, t)]).abs() <= 1e-9 * sb[(0, t)].abs().max(1.0));
        }
    }

    #[test]
    fn noise_scaled_to_snr() {
        let cfg = SynthConfig::default();
        let mut s = SynthStream::new(&cfg, 0).unwrap();
        let src = s.next_sources(250 * 200, None);
        let p = source_power(&src);
        let rhythm = cfg.mu_amplitude_uv.powi(2) + cfg.beta_amplitude_uv.powi(2);
        for r in 0..3 {
            assert!((p[r] / rhythm - 1.0).abs() < 0.15, "rhythm power {}", p[r]);
        }
        for k in 3..16 {
            let snr = 10.0 * (rhythm / p[k]).log10();
            assert!((snr - 10.0).abs() < 1.0, "snr {snr}");
        }
    }

    #[test]
    fn ground_truth_roundtrip() {
        let out = generate_recording(&schedule(), &SynthConfig::default(), 0, false).unwrap();
        let back = GroundTruth::from_json(&out.truth.to_json().unwrap()).unwrap();
        assert_eq!(back, out.truth);
        let a = back.mixing_matrix();
        assert_eq!(a[(0, 1)], out.truth.mixing[1]);
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            SynthConfig {
                erd_depth: 1.5,
                ..SynthConfig::default()
            },
            SynthConfig {
                inter_trial_s: 0.0,
                ..SynthConfig::default()
            },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
    }
}
