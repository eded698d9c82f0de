//! Fixed 16-byte little-endian decision frame.
//!
//! ```text
//! offset  size  field
//! 0       2     magic 0xBC1F
//! 2       1     version (1)
//! 3       1     class (0 = none, 1..=3 task code)
//! 4       4     sequence
//! 8       8     timestamp in ms
//! ```

use thiserror::Error;

use crate::dsp::TaskCode;

pub const FRAME_LEN: usize = 16;
pub const MAGIC: u16 = 0xBC1F;
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("decision frame must be {FRAME_LEN} bytes, got {0}")]
    Length(usize),
    #[error("bad magic 0x{0:04X}")]
    Magic(u16),
    #[error("unsupported frame version {0}")]
    Version(u8),
    #[error("class code {0} out of range 0..=3")]
    Class(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DecisionMessage {
    /// `None` encodes class 0 (warm-up / no decision).
    pub class: Option<TaskCode>,
    pub sequence: u32,
    pub timestamp_ms: u64,
}

impl DecisionMessage {
    pub fn class_code(&self) -> u8 {
        self.class.map_or(0, TaskCode::code)
    }
}

pub fn encode_decision(msg: &DecisionMessage) -> [u8; FRAME_LEN] {
    let mut out = [0u8; FRAME_LEN];
    out[0..2].copy_from_slice(&MAGIC.to_le_bytes());
    out[2] = VERSION;
    out[3] = msg.class_code();
    out[4..8].copy_from_slice(&msg.sequence.to_le_bytes());
    out[8..16].copy_from_slice(&msg.timestamp_ms.to_le_bytes());
    out
}

pub fn decode_decision(bytes: &[u8]) -> Result<DecisionMessage, WireError> {
    if bytes.len() != FRAME_LEN {
        return Err(WireError::Length(bytes.len()));
    }
    let magic = u16::from_le_bytes([bytes[0], bytes[1]]);
    if magic != MAGIC {
        return Err(WireError::Magic(magic));
    }
    if bytes[2] != VERSION {
        return Err(WireError::Version(bytes[2]));
    }
    let class = match bytes[3] {
        0 => None,
        c => Some(TaskCode::from_code(c).ok_or(WireError::Class(c))?),
    };
    let sequence = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let timestamp_ms = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    Ok(DecisionMessage {
        class,
        sequence,
        timestamp_ms,
    })
}

/// Receiver-side check that sequence numbers strictly increase within a session.
#[derive(Debug, Default, Clone)]
pub struct SequenceGuard {
    last: Option<u32>,
}

impl SequenceGuard {
    pub fn accept(&mut self, msg: &DecisionMessage) -> bool {
        if self.last.is_some_and(|l| msg.sequence <= l) {
            return false;
        }
        self.last = Some(msg.sequence);
        true
    }
}
