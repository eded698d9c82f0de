use std::f64::consts::PI;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::EegRecording;
use crate::{Error, Result};

/// Parameters of the causal Butterworth band-pass: a high-pass and a low-pass
/// Butterworth cascade, each discretized with the bilinear transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandpassSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub highpass_order: usize,
    pub lowpass_order: usize,
}

impl Default for BandpassSpec {
    fn default() -> Self {
        BandpassSpec {
            low_hz: 1.0,
            high_hz: 45.0,
            highpass_order: 4,
            lowpass_order: 8,
        }
    }
}

/// Second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn butterworth(kind: PassKind, k: f64, q: f64) -> Biquad {
        let norm = 1.0 / (1.0 + k / q + k * k);
        let a = [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm];
        let b = match kind {
            PassKind::Low => [k * k * norm, 2.0 * k * k * norm, k * k * norm],
            PassKind::High => [norm, -2.0 * norm, norm],
        };
        Biquad { b, a }
    }

    /// Transposed direct form II step.
    #[inline]
    fn step(&self, x: f64, s: &mut [f64; 2]) -> f64 {
        let y = self.b[0] * x + s[0];
        s[0] = self.b[1] * x - self.a[0] * y + s[1];
        s[1] = self.b[2] * x - self.a[1] * y;
        y
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (1.0 + self.a[0] * z_inv + self.a[1] * z2)
    }
}

#[derive(Clone, Copy)]
enum PassKind {
    Low,
    High,
}

/// Designed band-pass filter (cascade of biquads).
#[derive(Debug, Clone, PartialEq)]
pub struct Bandpass {
    spec: BandpassSpec,
    sample_rate_hz: f64,
    sections: Vec<Biquad>,
}

impl Bandpass {
    pub fn design(spec: BandpassSpec, sample_rate_hz: f64) -> Result<Self> {
        let nyquist = sample_rate_hz / 2.0;
        if !(spec.high_hz < nyquist) {
            return Err(Error::Config(format!(
                "high cutoff {} Hz must be below Nyquist ({nyquist} Hz)",
                spec.high_hz
            )));
        }
        if !(spec.low_hz > 0.0 && spec.low_hz < spec.high_hz) {
            return Err(Error::Config(format!(
                "invalid band [{}, {}] Hz",
                spec.low_hz, spec.high_hz
            )));
        }
        for order in [spec.highpass_order, spec.lowpass_order] {
            if order == 0 || order % 2 != 0 {
                return Err(Error::Config(format!(
                    "filter order must be even and positive, got {order}"
                )));
            }
        }
        let mut sections = Vec::new();
        for (kind, order, fc) in [
            (PassKind::High, spec.highpass_order, spec.low_hz),
            (PassKind::Low, spec.lowpass_order, spec.high_hz),
        ] {
            let k = (PI * fc / sample_rate_hz).tan();
            for i in 0..order / 2 {
                let q = 1.0 / (2.0 * ((2 * i + 1) as f64 * PI / (2 * order) as f64).sin());
                sections.push(Biquad::butterworth(kind, k, q));
            }
        }
        Ok(Bandpass {
            spec,
            sample_rate_hz,
            sections,
        })
    }

    pub fn spec(&self) -> BandpassSpec {
        self.spec
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// |H(e^{jw})| at `freq_hz`, evaluated from the section coefficients.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .map(|s| s.response(z_inv))
            .product::<Complex64>()
            .norm()
    }

    pub fn initial_state(&self, n_channels: usize) -> FilterState {
        FilterState {
            state: vec![[0.0; 2]; n_channels * self.sections.len()],
            n_channels,
        }
    }

    /// Filters a channel (row) in place from the given per-section state.
    fn run_channel(&self, x: &mut [f64], state: &mut [[f64; 2]]) {
        for (sec, s) in self.sections.iter().zip(state.iter_mut()) {
            for v in x.iter_mut() {
                *v = sec.step(*v, s);
            }
        }
    }

    /// Filters a channels x time block, advancing `state`.
    pub fn process(&self, block: &DMatrix<f64>, state: &mut FilterState) -> Result<DMatrix<f64>> {
        if block.nrows() != state.n_channels {
            return Err(Error::shape(
                format!("{} channels", state.n_channels),
                format!("{} channels", block.nrows()),
            ));
        }
        let n_sec = self.sections.len();
        let mut out = DMatrix::zeros(block.nrows(), block.ncols());
        let mut row = vec![0.0; block.ncols()];
        for ch in 0..block.nrows() {
            for (t, v) in row.iter_mut().enumerate() {
                *v = block[(ch, t)];
            }
            self.run_channel(&mut row, &mut state.state[ch * n_sec..(ch + 1) * n_sec]);
            for (t, v) in row.iter().enumerate() {
                out[(ch, t)] = *v;
            }
        }
        Ok(out)
    }

    /// Filters a whole recording from rest. Markers are carried through.
    pub fn apply(&self, recording: &EegRecording) -> Result<EegRecording> {
        recording.check_finite()?;
        if (recording.sample_rate_hz() as f64 - self.sample_rate_hz).abs() > 0.0 {
            return Err(Error::Config(format!(
                "filter designed for {} Hz, recording is {} Hz",
                self.sample_rate_hz,
                recording.sample_rate_hz()
            )));
        }
        let mut state = self.initial_state(recording.samples().nrows());
        let out = self.process(recording.samples(), &mut state)?;
        recording.replace_samples(out)
    }
}

/// Per-channel, per-section delay-line state of a [`Bandpass`].
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    state: Vec<[f64; 2]>,
    n_channels: usize,
}

/// A band-pass plus its running state, for sample-by-sample streams.
#[derive(Debug, Clone)]
pub struct StreamingFilter {
    filter: Bandpass,
    state: FilterState,
}

impl StreamingFilter {
    pub fn new(filter: Bandpass, n_channels: usize) -> Self {
        let state = filter.initial_state(n_channels);
        StreamingFilter { filter, state }
    }

    pub fn process(&mut self, block: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if let Some((ch, t)) = (0..block.ncols())
            .flat_map(|t| (0..block.nrows()).map(move |ch| (ch, t)))
            .find(|&(ch, t)| !block[(ch, t)].is_finite())
        {
            return Err(Error::NonFinite {
                channel: ch,
                label: super::MONTAGE.get(ch).unwrap_or(&"?").to_string(),
                sample: t,
            });
        }
        self.filter.process(block, &mut self.state)
    }

    pub fn reset(&mut self) {
        self.state = self.filter.initial_state(self.state.n_channels);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{SAMPLE_RATE_HZ, N_CHANNELS};

    const FS: f64 = SAMPLE_RATE_HZ as f64;

    fn default_filter() -> Bandpass {
        Bandpass::design(BandpassSpec::default(), FS).unwrap()
    }

    /// Closed-form magnitude of a bilinear-transformed Butterworth
    /// high-pass/low-pass cascade, from prewarped frequencies only.
    fn butterworth_oracle(spec: BandpassSpec, f: f64) -> f64 {
        let warp = |x: f64| (PI * x / FS).tan();
        let hp = 1.0 / (1.0 + (warp(spec.low_hz) / warp(f)).powi(2 * spec.highpass_order as i32)).sqrt();
        let lp = 1.0 / (1.0 + (warp(f) / warp(spec.high_hz)).powi(2 * spec.lowpass_order as i32)).sqrt();
        hp * lp
    }

    /// Steady-state amplitude of the filtered sinusoid, by least squares
    /// on the last two seconds.
    fn steady_amplitude(freq: f64, seconds: f64) -> f64 {
        let f = default_filter();
        let n = (seconds * FS) as usize;
        let x: Vec<f64> = (0..n).map(|t| (2.0 * PI * freq * t as f64 / FS).sin()).collect();
        let mut y = x.clone();
        let mut st = vec![[0.0; 2]; f.sections().len()];
        f.run_channel(&mut y, &mut st);
        let tail = n - 2 * FS as usize;
        let (mut ss, mut sc, mut cc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for t in tail..n {
            let ph = 2.0 * PI * freq * t as f64 / FS;
            let (s, c) = ph.sin_cos();
            ss += s * s;
            sc += s * c;
            cc += c * c;
            ys += y[t] * s;
            yc += y[t] * c;
        }
        let det = ss * cc - sc * sc;
        let a = (ys * cc - yc * sc) / det;
        let b = (yc * ss - ys * sc) / det;
        a.hypot(b)
    }

    #[test]
    fn coefficient_response_matches_closed_form() {
        let f = default_filter();
        for freq in [0.5, 1.0, 3.0, 10.0, 20.0, 44.0, 45.0, 60.0, 100.0] {
            let got = f.magnitude(freq);
            let want = butterworth_oracle(f.spec(), freq);
            assert!((got - want).abs() < 1e-9, "{freq} Hz: {got} vs {want}");
        }
    }

    #[test]
    fn dc_is_rejected() {
        let f = default_filter();
        assert!(20.0 * f.magnitude(0.0).max(1e-300).log10() < -40.0);
        let n = 20 * SAMPLE_RATE_HZ as usize;
        let mut y = vec![100.0; n];
        let mut st = vec![[0.0; 2]; f.sections().len()];
        f.run_channel(&mut y, &mut st);
        let tail_max = y[n - 250..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(tail_max < 1.0, "residual {tail_max} uV after 20 s");
    }

    #[test]
    fn passband_10hz_matches_analytic_response() {
        let measured = steady_amplitude(10.0, 10.0);
        let analytic = butterworth_oracle(BandpassSpec::default(), 10.0);
        assert!((0.95..=1.05).contains(&measured), "{measured}");
        assert!((measured - analytic).abs() < 1e-3, "{measured} vs {analytic}");
    }

    #[test]
    fn line_noise_60hz_attenuated() {
        let measured = steady_amplitude(60.0, 10.0);
        let analytic = butterworth_oracle(BandpassSpec::default(), 60.0);
        assert!(measured <= 0.1, "{measured}");
        assert!((measured - analytic).abs() < 1e-3, "{measured} vs {analytic}");
    }

    #[test]
    fn configuration_errors() {
        let mut spec = BandpassSpec::default();
        spec.high_hz = 125.0;
        assert!(matches!(Bandpass::design(spec, FS), Err(Error::Config(_))));
        spec.high_hz = 45.0;
        spec.lowpass_order = 3;
        assert!(matches!(Bandpass::design(spec, FS), Err(Error::Config(_))));
    }

    #[test]
    fn streaming_in_chunks_equals_whole_block() {
        let f = default_filter();
        let x = DMatrix::from_fn(N_CHANNELS, 1000, |c, t| ((c + 1) as f64 * 0.37 * t as f64).sin() * 10.0);
        let mut whole_state = f.initial_state(N_CHANNELS);
        let whole = f.process(&x, &mut whole_state).unwrap();
        let mut sf = StreamingFilter::new(f, N_CHANNELS);
        let mut cols = Vec::new();
        for start in (0..1000).step_by(250) {
            let chunk = x.columns(start, 250).into_owned();
            cols.push(sf.process(&chunk).unwrap());
        }
        for (i, c) in cols.iter().enumerate() {
            assert_eq!(c, &whole.columns(i * 250, 250).into_owned());
        }
    }

    #[test]
    fn streaming_rejects_non_finite() {
        let mut sf = StreamingFilter::new(default_filter(), N_CHANNELS);
        let mut x = DMatrix::zeros(N_CHANNELS, 4);
        x[(2, 3)] = f64::INFINITY;
        assert!(matches!(sf.process(&x), Err(Error::NonFinite { channel: 2, sample: 3, .. })));
    }
}
