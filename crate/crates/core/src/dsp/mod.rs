//! Raw-signal representation, causal band-pass filtering, event markers and
//! 2-second epoching.

mod epoch;
mod filter;
mod recording;
mod stream;

pub use epoch::{epoch_calibration, trial_spans, Epochs, SkippedTrial, TrialSpan};
pub use filter::{Bandpass, BandpassSpec, Biquad, FilterState, StreamingFilter};
pub use recording::{
    EegRecording, Marker, MarkerKind, TaskCode, MONTAGE, N_CHANNELS, SAMPLE_RATE_HZ,
};
pub use stream::{window_starts, StreamBuffer, WindowStatus, WARMUP_SAMPLES};

use nalgebra::DMatrix;

/// Samples per 2 s segment at 250 Hz.
pub const SEGMENT_LEN: usize = 500;
/// Stride between online decisions (1 s).
pub const WINDOW_STRIDE: usize = 250;

/// Where a segment was cut from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentOrigin {
    pub recording_id: u32,
    pub start_sample: u64,
}

/// A 16 x 500 block of EEG (or ICA components), optionally labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    data: DMatrix<f64>,
    pub label: Option<TaskCode>,
    pub origin: SegmentOrigin,
}

impl Segment {
    pub fn new(
        data: DMatrix<f64>,
        label: Option<TaskCode>,
        origin: SegmentOrigin,
    ) -> crate::Result<Self> {
        if data.shape() != (N_CHANNELS, SEGMENT_LEN) {
            return Err(crate::Error::shape(
                format!("{N_CHANNELS}x{SEGMENT_LEN}"),
                format!("{}x{}", data.nrows(), data.ncols()),
            ));
        }
        Ok(Segment { data, label, origin })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }
}
