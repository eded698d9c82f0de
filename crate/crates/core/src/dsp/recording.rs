use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fixed 16-electrode sensorimotor montage, in file order.
pub const MONTAGE: [&str; 16] = [
    "Fz", "FC3", "FCz", "FC4", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "CP3", "CP1", "CPz",
    "CP2", "CP4",
];
pub const N_CHANNELS: usize = MONTAGE.len();
pub const SAMPLE_RATE_HZ: u32 = 250;

const MAGIC: &[u8; 4] = b"EEGR";
const FORMAT_VERSION: u16 = 1;

/// Motor-imagery task. The integer encoding is shared by files, the wire
/// format and confusion matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum TaskCode {
    LeftHand = 1,
    RightHand = 2,
    Feet = 3,
}

impl TaskCode {
    pub const ALL: [TaskCode; 3] = [TaskCode::LeftHand, TaskCode::RightHand, TaskCode::Feet];

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Zero-based position (code - 1), for indexing per-class arrays.
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_code(code: u8) -> Option<TaskCode> {
        match code {
            1 => Some(TaskCode::LeftHand),
            2 => Some(TaskCode::RightHand),
            3 => Some(TaskCode::Feet),
            _ => None,
        }
    }

    pub fn from_index(index: usize) -> TaskCode {
        TaskCode::ALL[index]
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskCode::LeftHand => "LEFT_HAND",
            TaskCode::RightHand => "RIGHT_HAND",
            TaskCode::Feet => "FEET",
        }
    }

    pub fn from_name(name: &str) -> Option<TaskCode> {
        TaskCode::ALL.into_iter().find(|t| t.name() == name)
    }
}

impl fmt::Display for TaskCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<TaskCode> for u8 {
    fn from(t: TaskCode) -> u8 {
        t.code()
    }
}

impl TryFrom<u8> for TaskCode {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        TaskCode::from_code(v).ok_or_else(|| format!("unknown task code {v}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkerKind {
    TrialStart = 1,
    TrialEnd = 2,
}

impl MarkerKind {
    fn from_code(code: u8) -> Option<MarkerKind> {
        match code {
            1 => Some(MarkerKind::TrialStart),
            2 => Some(MarkerKind::TrialEnd),
            _ => None,
        }
    }
}

/// Event marker embedded in a recording (replaces hardware triggers).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub sample_index: u64,
    pub task: TaskCode,
    pub kind: MarkerKind,
}

/// Multichannel EEG with sample rate and event markers.
///
/// Samples are stored channels x time in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecording {
    channels: Vec<String>,
    sample_rate_hz: u32,
    samples: DMatrix<f64>,
    markers: Vec<Marker>,
}

impl EegRecording {
    /// Builds a recording on the standard montage, validating every invariant.
    pub fn new(sample_rate_hz: u32, samples: DMatrix<f64>, markers: Vec<Marker>) -> Result<Self> {
        Self::with_channels(
            MONTAGE.iter().map(|s| s.to_string()).collect(),
            sample_rate_hz,
            samples,
            markers,
        )
    }

    pub fn with_channels(
        channels: Vec<String>,
        sample_rate_hz: u32,
        samples: DMatrix<f64>,
        markers: Vec<Marker>,
    ) -> Result<Self> {
        if channels.len() != N_CHANNELS {
            return Err(Error::InvalidRecording(format!(
                "expected {N_CHANNELS} channels, got {}",
                channels.len()
            )));
        }
        if let Some((i, (got, want))) = channels
            .iter()
            .zip(MONTAGE)
            .enumerate()
            .find(|(_, (got, want))| got.as_str() != *want)
        {
            return Err(Error::InvalidRecording(format!(
                "channel {i} is {got}, montage expects {want}"
            )));
        }
        if sample_rate_hz != SAMPLE_RATE_HZ {
            return Err(Error::InvalidRecording(format!(
                "sample rate {sample_rate_hz} Hz not supported (expected {SAMPLE_RATE_HZ} Hz)"
            )));
        }
        if samples.nrows() != N_CHANNELS {
            return Err(Error::shape(
                format!("{N_CHANNELS} rows"),
                format!("{} rows", samples.nrows()),
            ));
        }
        let total = samples.ncols() as u64;
        for pair in markers.windows(2) {
            if pair[1].sample_index <= pair[0].sample_index {
                return Err(Error::InvalidRecording(format!(
                    "marker indices not strictly increasing ({} then {})",
                    pair[0].sample_index, pair[1].sample_index
                )));
            }
        }
        if let Some(m) = markers.last() {
            if m.sample_index >= total {
                return Err(Error::InvalidRecording(format!(
                    "marker at sample {} beyond recording length {total}",
                    m.sample_index
                )));
            }
        }
        Ok(EegRecording {
            channels,
            sample_rate_hz,
            samples,
            markers,
        })
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn markers(&self) -> &[Marker] {
        &self.markers
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    /// Same channels, rate and markers with new sample values.
    pub fn replace_samples(&self, samples: DMatrix<f64>) -> Result<Self> {
        if samples.shape() != self.samples.shape() {
            return Err(Error::shape(
                format!("{:?}", self.samples.shape()),
                format!("{:?}", samples.shape()),
            ));
        }
        Ok(EegRecording {
            channels: self.channels.clone(),
            sample_rate_hz: self.sample_rate_hz,
            samples,
            markers: self.markers.clone(),
        })
    }

    /// Fails with the first non-finite sample location.
    pub fn check_finite(&self) -> Result<()> {
        for (t, col) in self.samples.column_iter().enumerate() {
            if let Some(ch) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    channel: ch,
                    label: self.channels[ch].clone(),
                    sample: t,
                });
            }
        }
        Ok(())
    }

    /// Serializes to the little-endian `EEGR` v1 layout. Samples are stored
    /// as f32, channel-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.n_samples();
        let mut out = Vec::with_capacity(24 + 4 * N_CHANNELS * n + 4 + 10 * self.markers.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(N_CHANNELS as u16).to_le_bytes());
        out.extend_from_slice(&self.sample_rate_hz.to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        for ch in 0..N_CHANNELS {
            for t in 0..n {
                out.extend_from_slice(&(self.samples[(ch, t)] as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.markers.len() as u32).to_le_bytes());
        for m in &self.markers {
            out.extend_from_slice(&m.sample_index.to_le_bytes());
            out.push(m.task.code());
            out.push(m.kind as u8);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic (expected EEGR)".into()));
        }
        let version = r.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        let n_channels = r.u16()? as usize;
        if n_channels != N_CHANNELS {
            return Err(Error::InvalidRecording(format!(
                "expected {N_CHANNELS} channels, file has {n_channels}"
            )));
        }
        let rate = r.u32()?;
        if rate != SAMPLE_RATE_HZ {
            return Err(Error::InvalidRecording(format!(
                "sample rate {rate} Hz not supported (expected {SAMPLE_RATE_HZ} Hz)"
            )));
        }
        let n = usize::try_from(r.u64()?)
            .map_err(|_| Error::Format("sample count overflows usize".into()))?;
        let raw = r.take(
            n.checked_mul(4 * N_CHANNELS)
                .ok_or_else(|| Error::Format("sample count too large".into()))?,
        )?;
        let mut samples = DMatrix::zeros(N_CHANNELS, n);
        for (i, chunk) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            samples[(i / n, i % n)] = f64::from(v);
        }
        let n_markers = r.u32()? as usize;
        let mut markers = Vec::with_capacity(n_markers.min(1 << 16));
        for _ in 0..n_markers {
            let sample_index = r.u64()?;
            let code = r.u8()?;
            let kind = r.u8()?;
            let task = TaskCode::from_code(code)
                .ok_or_else(|| Error::Format(format!("unknown task code {code}")))?;
            let kind = MarkerKind::from_code(kind)
                .ok_or_else(|| Error::Format(format!("unknown marker kind {kind}")))?;
            markers.push(Marker {
                sample_index,
                task,
                kind,
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after markers",
                bytes.len() - r.pos
            )));
        }
        EegRecording::new(rate, samples, markers)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(n: usize, markers: Vec<Marker>) -> Result<EegRecording> {
        let samples = DMatrix::from_fn(N_CHANNELS, n, |c, t| (c * 1000 + t) as f32 as f64);
        EegRecording::new(SAMPLE_RATE_HZ, samples, markers)
    }

    fn marker(i: u64, kind: MarkerKind) -> Marker {
        Marker {
            sample_index: i,
            task: TaskCode::Feet,
            kind,
        }
    }

    #[test]
    fn task_codes_are_stable() {
        assert_eq!(TaskCode::LeftHand.code(), 1);
        assert_eq!(TaskCode::RightHand.code(), 2);
        assert_eq!(TaskCode::Feet.code(), 3);
        assert_eq!(TaskCode::from_code(0), None);
        assert_eq!(TaskCode::from_code(4), None);
        for t in TaskCode::ALL {
            assert_eq!(TaskCode::from_index(t.index()), t);
        }
    }

    #[test]
    fn rejects_non_250hz() {
        let samples = DMatrix::zeros(N_CHANNELS, 10);
        let err = EegRecording::new(500, samples, vec![]).unwrap_err();
        assert!(err.to_string().contains("500 Hz"));
    }

    #[test]
    fn rejects_wrong_montage() {
        let mut ch: Vec<String> = MONTAGE.iter().map(|s| s.to_string()).collect();
        ch.swap(0, 1);
        let err =
            EegRecording::with_channels(ch, SAMPLE_RATE_HZ, DMatrix::zeros(16, 4), vec![]).unwrap_err();
        assert!(matches!(err, Error::InvalidRecording(_)));
    }

    #[test]
    fn marker_order_and_range_enforced() {
        assert!(tiny(10, vec![marker(3, MarkerKind::TrialStart), marker(3, MarkerKind::TrialEnd)]).is_err());
        assert!(tiny(10, vec![marker(5, MarkerKind::TrialStart), marker(2, MarkerKind::TrialEnd)]).is_err());
        assert!(tiny(10, vec![marker(10, MarkerKind::TrialStart)]).is_err());
        assert!(tiny(10, vec![marker(0, MarkerKind::TrialStart), marker(9, MarkerKind::TrialEnd)]).is_ok());
    }

    #[test]
    fn file_roundtrip_is_lossless_for_f32_values() {
        let rec = tiny(
            37,
            vec![marker(1, MarkerKind::TrialStart), marker(30, MarkerKind::TrialEnd)],
        )
        .unwrap();
        let bytes = rec.to_bytes();
        assert_eq!(&bytes[..4], b"EEGR");
        assert_eq!(bytes.len(), 4 + 2 + 2 + 4 + 8 + 16 * 37 * 4 + 4 + 2 * 10);
        let back = EegRecording::from_bytes(&bytes).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn truncated_and_corrupt_files_rejected() {
        let rec = tiny(8, vec![]).unwrap();
        let bytes = rec.to_bytes();
        assert!(EegRecording::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(EegRecording::from_bytes(&bad).is_err());
        let mut bad_rate = bytes.clone();
        bad_rate[8..12].copy_from_slice(&500u32.to_le_bytes());
        assert!(EegRecording::from_bytes(&bad_rate).is_err());
    }

    #[test]
    fn non_finite_reported_with_location() {
        let mut samples = DMatrix::zeros(N_CHANNELS, 20);
        samples[(7, 13)] = f64::NAN;
        let rec = EegRecording::new(SAMPLE_RATE_HZ, samples, vec![]).unwrap();
        match rec.check_finite() {
            Err(Error::NonFinite { channel, label, sample }) => {
                assert_eq!((channel, label.as_str(), sample), (7, "Cz", 13));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
