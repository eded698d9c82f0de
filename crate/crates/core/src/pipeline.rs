//! Calibration (offline) and the frozen real-time decoder (online).

use nalgebra::DMatrix;

use crate::config::ExperimentConfig;
use crate::dsp::{
    epoch_calibration, Bandpass, EegRecording, Segment, SkippedTrial, StreamBuffer,
    StreamingFilter, TaskCode, WindowStatus, N_CHANNELS, SAMPLE_RATE_HZ,
};
use crate::features::FeatureExtractor;
use crate::ica::{fit_infomax, FitMetadata, UnmixingMatrix};
use crate::model::{cross_validate, CvResult, PipelineModel, TailModel};
use crate::protocol::{Decision, DecisionSource};
use crate::synth::{SynthConfig, SynthStream};
use crate::{Error, Result};

/// Labeled, filtered calibration segments from all recordings.
#[derive(Debug, Clone)]
pub struct CalibrationData {
    pub segments: Vec<Segment>,
    pub skipped: Vec<SkippedTrial>,
}

impl CalibrationData {
    pub fn labels(&self) -> Vec<TaskCode> {
        self.segments
            .iter()
            .map(|s| s.label.expect("calibration segments are labeled"))
            .collect()
    }

    pub fn class_counts(&self) -> [u64; 3] {
        let mut c = [0; 3];
        for t in self.labels() {
            c[t.index()] += 1;
        }
        c
    }
}

/// Filters every recording from its first sample, then epochs its trials.
pub fn prepare_calibration(recordings: &[EegRecording], cfg: &ExperimentConfig) -> Result<CalibrationData> {
    if recordings.is_empty() {
        return Err(Error::InvalidInput("no calibration recordings".into()));
    }
    let filter = Bandpass::design(cfg.bandpass, SAMPLE_RATE_HZ as f64)?;
    let mut segments = Vec::new();
    let mut skipped = Vec::new();
    for (id, rec) in recordings.iter().enumerate() {
        let filtered = filter.apply(rec)?;
        let ep = epoch_calibration(&filtered, id as u32)?;
        segments.extend(ep.segments);
        skipped.extend(ep.skipped);
    }
    Ok(CalibrationData { segments, skipped })
}

/// Component-space feature matrix, one row per segment.
pub fn feature_matrix(
    segments: &[Segment],
    unmixing: &UnmixingMatrix,
    extractor: &FeatureExtractor,
) -> Result<DMatrix<f64>> {
    let d = extractor.dimension(N_CHANNELS);
    let mut m = DMatrix::zeros(segments.len(), d);
    for (i, s) in segments.iter().enumerate() {
        let comps = unmixing.apply_matrix(s.data())?;
        let f = extractor.extract(&comps)?;
        m.row_mut(i).copy_from_slice(&f.values);
    }
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub n_segments: usize,
    pub class_counts: [u64; 3],
    pub skipped: Vec<SkippedTrial>,
    pub ica: FitMetadata,
    pub cv: CvResult,
}

impl CalibrationReport {
    /// Online-use screening: mean CV kappa above zero.
    pub fn eligible(&self) -> bool {
        self.cv.eligible()
    }

    pub fn verdict(&self) -> &'static str {
        if self.eligible() {
            "eligible"
        } else {
            "not eligible"
        }
    }

    pub fn to_text(&self, config_hash: &str) -> String {
        let mut s = String::new();
        s.push_str("# mi-bci cv report v1\n");
        s.push_str(&format!("# config_hash={config_hash}\n"));
        s.push_str(&format!("# segments={}\n", self.n_segments));
        s.push_str(&format!(
            "# class_counts=LEFT_HAND:{},RIGHT_HAND:{},FEET:{}\n",
            self.class_counts[0], self.class_counts[1], self.class_counts[2]
        ));
        s.push_str(&format!("# skipped_trials={}\n", self.skipped.len()));
        s.push_str(&format!(
            "# ica_iterations={} converged={}\n",
            self.ica.iterations, self.ica.converged
        ));
        s.push_str(&format!(
            "# best_k={} best_c={} mean_kappa={:.6}\n# verdict={}\n",
            self.cv.best_k,
            self.cv.best_c,
            self.cv.mean_kappa,
            self.verdict()
        ));
        s.push_str("k,c,mean_kappa,std_kappa\n");
        for g in &self.cv.grid {
            s.push_str(&format!("{},{},{:.6},{:.6}\n", g.k, g.c, g.mean_kappa, g.std_kappa));
        }
        s
    }
}

/// Filter, epoch, fit ICA, extract features, grid-search `(k, C)` and refit
/// the tail on all segments.
pub fn calibrate(
    recordings: &[EegRecording],
    cfg: &ExperimentConfig,
) -> Result<(PipelineModel, CalibrationReport)> {
    cfg.validate()?;
    let data = prepare_calibration(recordings, cfg)?;
    let labels = data.labels();
    let counts = data.class_counts();
    if let Some(t) = TaskCode::ALL.iter().find(|t| counts[t.index()] < cfg.cv.folds as u64) {
        return Err(Error::Infeasible(format!(
            "{t} has {} calibration segments, fewer than {} folds",
            counts[t.index()],
            cfg.cv.folds
        )));
    }
    let seed = cfg.seeds.training;
    let unmixing = fit_infomax(&data.segments, seed)?;
    let extractor = FeatureExtractor::new(cfg.spectral)?;
    let features = feature_matrix(&data.segments, &unmixing, &extractor)?;
    let cv = cross_validate(&features, &labels, &cfg.cv, seed)?;
    let tail = TailModel::fit(&features, &labels, cv.best_k, cv.best_c, cfg.cv.weight_rule)?;
    let report = CalibrationReport {
        n_segments: data.segments.len(),
        class_counts: counts,
        skipped: data.skipped,
        ica: *unmixing.fit_metadata(),
        cv,
    };
    let model = PipelineModel::new(
        cfg.hash(),
        cfg.bandpass,
        cfg.spectral,
        unmixing,
        tail,
        report.cv.best_c,
        cfg.cv.weight_rule,
        report.cv.mean_kappa,
        seed,
        counts,
    )?;
    Ok((model, report))
}

/// The frozen pipeline fed sample blocks as they arrive.
#[derive(Debug, Clone)]
pub struct OnlineDecoder {
    filter: StreamingFilter,
    buffer: StreamBuffer,
    unmixing: UnmixingMatrix,
    extractor: FeatureExtractor,
    tail: TailModel,
}

impl OnlineDecoder {
    pub fn new(model: &PipelineModel) -> Result<Self> {
        model.validate()?;
        let bp = Bandpass::design(model.bandpass, SAMPLE_RATE_HZ as f64)?;
        Ok(OnlineDecoder {
            filter: StreamingFilter::new(bp, N_CHANNELS),
            buffer: StreamBuffer::new(u32::MAX),
            unmixing: model.unmixing.clone(),
            extractor: FeatureExtractor::new(model.spectral)?,
            tail: model.tail(),
        })
    }

    /// Appends raw samples (channels x time).
    pub fn push(&mut self, raw: &DMatrix<f64>) -> Result<()> {
        let y = self.filter.process(raw)?;
        self.buffer.push(&y)
    }

    /// Decodes the latest 2 s window, if one is available.
    pub fn decide(&self) -> Result<Decision> {
        match self.buffer.latest_window() {
            WindowStatus::NotReady => Ok(Decision::NoDecision),
            WindowStatus::Ready(seg) => {
                let comps = self.unmixing.apply_matrix(seg.data())?;
                let f = self.extractor.extract(&comps)?;
                Ok(Decision::Class(self.tail.predict(&f.values)?))
            }
        }
    }

    pub fn reset(&mut self) {
        self.filter.reset();
        self.buffer.reset();
    }

    pub fn samples_seen(&self) -> u64 {
        self.buffer.total_samples()
    }
}

type DecisionSink = Box<dyn FnMut(u64, Decision)>;

/// Closed loop: a synthetic subject performs the cued task while the
/// decoder reads the continuous stream. Time advances only as far as the
/// session asks for decisions.
pub struct SynthSubjectSource {
    decoder: OnlineDecoder,
    stream: SynthStream,
    task: Option<TaskCode>,
    trial_start: u64,
    inter_trial: usize,
    sink: Option<DecisionSink>,
}

impl SynthSubjectSource {
    pub fn new(decoder: OnlineDecoder, synth: &SynthConfig, run_id: u64) -> Result<Self> {
        let mut stream = SynthStream::new(synth, run_id)?;
        let mut decoder = decoder;
        let lead = (synth.lead_in_s * SAMPLE_RATE_HZ as f64).round() as usize;
        decoder.push(&stream.next_block(lead, None))?;
        Ok(SynthSubjectSource {
            decoder,
            stream,
            task: None,
            trial_start: 0,
            inter_trial: (synth.inter_trial_s * SAMPLE_RATE_HZ as f64).round() as usize,
            sink: None,
        })
    }

    /// Observer called with `(timestamp_ms, decision)` after every tick.
    pub fn with_sink(mut self, sink: impl FnMut(u64, Decision) + 'static) -> Self {
        self.sink = Some(Box::new(sink));
        self
    }

    fn advance_to(&mut self, sample: u64) -> Result<()> {
        let now = self.stream.samples_emitted();
        if sample > now {
            let block = self.stream.next_block((sample - now) as usize, self.task);
            self.decoder.push(&block)?;
        }
        Ok(())
    }
}

impl DecisionSource for SynthSubjectSource {
    fn begin_trial(&mut self, _index: usize, task: TaskCode) -> Result<()> {
        self.task = Some(task);
        self.trial_start = self.stream.samples_emitted();
        Ok(())
    }

    fn decide(&mut self, t_s: u32) -> Result<Option<Decision>> {
        self.advance_to(self.trial_start + t_s as u64 * SAMPLE_RATE_HZ as u64)?;
        let d = self.decoder.decide()?;
        if let Some(sink) = self.sink.as_mut() {
            sink(self.stream.samples_emitted() * 1000 / SAMPLE_RATE_HZ as u64, d);
        }
        Ok(Some(d))
    }

    fn end_trial(&mut self, elapsed_s: u32) -> Result<()> {
        self.advance_to(self.trial_start + elapsed_s as u64 * SAMPLE_RATE_HZ as u64)?;
        self.task = None;
        let block = self.stream.next_block(self.inter_trial, None);
        self.decoder.push(&block)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{Marker, MarkerKind};

    #[test]
    fn too_few_segments_is_infeasible() {
        let cfg = ExperimentConfig::default();
        let n = 250 * 20;
        let samples = DMatrix::from_fn(N_CHANNELS, n, |c, t| ((c * 7 + t * 13) % 17) as f64);
        let markers = vec![
            Marker {
                sample_index: 0,
                task: TaskCode::Feet,
                kind: MarkerKind::TrialStart,
            },
            Marker {
                sample_index: 3000,
                task: TaskCode::Feet,
                kind: MarkerKind::TrialEnd,
            },
        ];
        let rec = EegRecording::new(250, samples, markers).unwrap();
        let err = calibrate(&[rec], &cfg).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)), "{err}");
    }

    #[test]
    fn no_recordings_is_error() {
        assert!(prepare_calibration(&[], &ExperimentConfig::default()).is_err());
    }
}
