//! Motor-imagery brain-computer-interface engine.
//!
//! The crate covers the full offline/online decoding chain for a three-class
//! (left hand, right hand, feet) motor-imagery BCI driving a maze navigation
//! task:
//!
//! - [`dsp`]: recordings, causal band-pass filtering, epoching, sliding windows
//! - [`ica`]: infomax ICA fitted once on calibration data
//! - [`features`]: zero-padded periodogram features and mutual-information filtering
//! - [`model`]: standardization, L1-penalized one-vs-all linear SVM, kappa, repeated CV
//! - [`protocol`]: maze plan, sham feedback, online session rules, decision wire format
//! - [`chance`]: dummy classifiers, Monte Carlo chance levels and z-scores
//! - [`synth`]: synthetic EEG with controllable event-related desynchronization
//! - [`pipeline`]: calibration and the frozen real-time decoder
//! - [`experiment`]: config-driven end-to-end steps

pub mod chance;
pub mod config;
pub mod dsp;
pub mod experiment;
pub mod error;
pub mod features;
pub mod ica;
pub mod model;
pub mod pipeline;
pub mod protocol;
pub mod synth;

pub use dsp::{EegRecording, Segment, TaskCode};
pub use error::{Error, Result};
