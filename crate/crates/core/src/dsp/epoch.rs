use super::{EegRecording, MarkerKind, Segment, SegmentOrigin, TaskCode, SEGMENT_LEN};
use crate::{Error, Result};

/// A task trial delimited by start/end markers, samples `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSpan {
    pub task: TaskCode,
    pub start: u64,
    pub end: u64,
}

impl TrialSpan {
    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedTrial {
    pub trial_index: usize,
    pub span: TrialSpan,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Epochs {
    pub segments: Vec<Segment>,
    pub skipped: Vec<SkippedTrial>,
}

/// Pairs trial-start and trial-end markers.
pub fn trial_spans(recording: &EegRecording) -> Result<Vec<TrialSpan>> {
    let mut spans = Vec::new();
    let mut open: Option<(TaskCode, u64)> = None;
    for m in recording.markers() {
        match (m.kind, open) {
            (MarkerKind::TrialStart, None) => open = Some((m.task, m.sample_index)),
            (MarkerKind::TrialEnd, Some((task, start))) if task == m.task => {
                spans.push(TrialSpan {
                    task,
                    start,
                    end: m.sample_index,
                });
                open = None;
            }
            (kind, _) => {
                return Err(Error::InvalidRecording(format!(
                    "unexpected {kind:?} marker for {} at sample {}",
                    m.task, m.sample_index
                )))
            }
        }
    }
    if let Some((task, start)) = open {
        return Err(Error::InvalidRecording(format!(
            "{task} trial starting at sample {start} has no end marker"
        )));
    }
    Ok(spans)
}

/// Cuts consecutive non-overlapping 500-sample segments out of every trial.
/// Tails shorter than a segment are dropped; trials shorter than a segment
/// are skipped and reported.
pub fn epoch_calibration(recording: &EegRecording, recording_id: u32) -> Result<Epochs> {
    let spans = trial_spans(recording)?;
    let mut segments = Vec::new();
    let mut skipped = Vec::new();
    for (i, span) in spans.into_iter().enumerate() {
        let count = span.len() as usize / SEGMENT_LEN;
        if count == 0 {
            skipped.push(SkippedTrial {
                trial_index: i,
                span,
                reason: format!("trial spans {} samples (< {SEGMENT_LEN})", span.len()),
            });
            continue;
        }
        for j in 0..count {
            let start = span.start as usize + j * SEGMENT_LEN;
            let data = recording.samples().columns(start, SEGMENT_LEN).into_owned();
            segments.push(Segment::new(
                data,
                Some(span.task),
                SegmentOrigin {
                    recording_id,
                    start_sample: start as u64,
                },
            )?);
        }
    }
    Ok(Epochs { segments, skipped })
}
