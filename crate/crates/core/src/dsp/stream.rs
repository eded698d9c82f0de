use std::collections::VecDeque;

use nalgebra::DMatrix;

use super::{Segment, SegmentOrigin, N_CHANNELS, SEGMENT_LEN, WINDOW_STRIDE};
use crate::{Error, Result};

/// The first second after a (re)start is a filter transient; no decisions.
pub const WARMUP_SAMPLES: u64 = 250;

/// Single-writer sample buffer holding the most recent filtered samples of a
/// stream. The writer appends whole columns, so a reader only ever sees
/// complete samples.
#[derive(Debug, Clone)]
pub struct StreamBuffer {
    columns: VecDeque<[f64; N_CHANNELS]>,
    capacity: usize,
    total: u64,
    recording_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WindowStatus {
    /// Fewer than 500 samples buffered, or still inside the warm-up second.
    NotReady,
    Ready(Segment),
}

impl StreamBuffer {
    pub fn new(recording_id: u32) -> Self {
        StreamBuffer {
            columns: VecDeque::with_capacity(2 * SEGMENT_LEN),
            capacity: 2 * SEGMENT_LEN,
            total: 0,
            recording_id,
        }
    }

    /// Appends a channels x time block.
    pub fn push(&mut self, block: &DMatrix<f64>) -> Result<()> {
        if block.nrows() != N_CHANNELS {
            return Err(Error::shape(
                format!("{N_CHANNELS} channels"),
                format!("{} channels", block.nrows()),
            ));
        }
        for col in block.column_iter() {
            if self.columns.len() == self.capacity {
                self.columns.pop_front();
            }
            let mut c = [0.0; N_CHANNELS];
            c.copy_from_slice(col.as_slice());
            self.columns.push_back(c);
        }
        self.total += block.ncols() as u64;
        Ok(())
    }

    /// Samples written since the last reset.
    pub fn total_samples(&self) -> u64 {
        self.total
    }

    pub fn reset(&mut self) {
        self.columns.clear();
        self.total = 0;
    }

    pub fn is_transient(&self) -> bool {
        self.total < WARMUP_SAMPLES
    }

    /// The most recent 500 samples as an unlabeled segment.
    pub fn latest_window(&self) -> WindowStatus {
        if self.columns.len() < SEGMENT_LEN || self.is_transient() {
            return WindowStatus::NotReady;
        }
        let skip = self.columns.len() - SEGMENT_LEN;
        let data = DMatrix::from_fn(N_CHANNELS, SEGMENT_LEN, |c, t| self.columns[skip + t][c]);
        let origin = SegmentOrigin {
            recording_id: self.recording_id,
            start_sample: self.total - SEGMENT_LEN as u64,
        };
        WindowStatus::Ready(Segment::new(data, None, origin).expect("window shape is fixed"))
    }
}

/// Start samples of the windows produced by 1 Hz ticks over a stream of
/// `total_samples`, first tick once 500 samples are available.
pub fn window_starts(total_samples: u64) -> Vec<u64> {
    let mut starts = Vec::new();
    let mut now = SEGMENT_LEN as u64;
    while now <= total_samples {
        starts.push(now - SEGMENT_LEN as u64);
        now += WINDOW_STRIDE as u64;
    }
    starts
}
