//! Experiment protocol: maze plan, sham feedback, online session rules,
//! session metrics, the decision frame and its UDP transport.

pub mod log;
pub mod maze;
pub mod metrics;
pub mod online;
pub mod sham;
pub mod transport;
pub mod wire;

pub use log::{SessionLog, SessionMode};
pub use maze::{build_maze, MazePlan, N_TRIALS};
pub use metrics::{compute_metrics, tally, SessionMetrics};
pub use online::{
    run_online_session, Decision, DecisionRecord, DecisionSource, OnlineConfig, OnlineSession,
    SessionStatus, TrialOutcome,
};
pub use sham::{draws_until, run_sham_session, ShamConfig};
pub use wire::{decode_decision, encode_decision, DecisionMessage, WireError};
