//! End-to-end steps driven by an [`ExperimentConfig`]; the command-line
//! harness adds file I/O around these.

use crate::chance::{monte_carlo, ChanceReport, NullModel};
use crate::config::ExperimentConfig;
use crate::model::PipelineModel;
use crate::pipeline::{calibrate, CalibrationReport, OnlineDecoder, SynthSubjectSource};
use crate::protocol::{
    build_maze, run_online_session, run_sham_session, Decision, MazePlan, SessionLog,
    SessionMode, SessionStatus, ShamConfig,
};
use crate::synth::{generate_recording, schedule_from_outcomes, SynthOutput};
use crate::{EegRecording, Result};

/// Noise realization of the online test stream; calibration runs use 0 and 1.
pub const SESSION_RUN_BASE: u64 = 1 << 32;

pub fn maze(cfg: &ExperimentConfig) -> MazePlan {
    build_maze(cfg.seeds.maze)
}

/// Two sham-feedback calibration runs through the maze, rendered as
/// synthetic EEG.
pub fn synth_calibration(cfg: &ExperimentConfig) -> Result<Vec<SynthOutput>> {
    cfg.validate()?;
    let plan = maze(cfg);
    let hash = cfg.hash();
    cfg.sham_p
        .iter()
        .enumerate()
        .map(|(run, &p)| {
            let sham = run_sham_session(&plan, &ShamConfig::with_p(p), cfg.seeds.sham.wrapping_add(run as u64))?;
            let mut out = generate_recording(&schedule_from_outcomes(&sham), &cfg.synth, run as u64, false)?;
            out.truth.config_hash = hash.clone();
            Ok(out)
        })
        .collect()
}

pub fn calibrate_model(
    recordings: &[EegRecording],
    cfg: &ExperimentConfig,
) -> Result<(PipelineModel, CalibrationReport)> {
    calibrate(recordings, cfg)
}

/// Closed-loop online session of the synthetic subject. `on_decision`
/// observes every tick as `(timestamp_ms, decision)`.
pub fn online_session(
    model: &PipelineModel,
    cfg: &ExperimentConfig,
    on_decision: Option<Box<dyn FnMut(u64, Decision)>>,
) -> Result<SessionLog> {
    cfg.validate()?;
    let plan = maze(cfg);
    let decoder = OnlineDecoder::new(model)?;
    let mut source = SynthSubjectSource::new(
        decoder,
        &cfg.synth,
        SESSION_RUN_BASE.wrapping_add(cfg.seeds.session),
    )?;
    if let Some(sink) = on_decision {
        source = source.with_sink(sink);
    }
    let session = run_online_session(&plan, &cfg.online, &mut source)?;
    Ok(SessionLog {
        mode: SessionMode::Online,
        maze_seed: plan.seed,
        config_hash: cfg.hash(),
        config_json: cfg.canonical_json(),
        outcomes: session.outcomes,
        status: session.status,
    })
}

pub fn sham_session(cfg: &ExperimentConfig) -> Result<SessionLog> {
    cfg.validate()?;
    let plan = maze(cfg);
    let outcomes = run_sham_session(&plan, &ShamConfig::with_p(cfg.session_sham_p), cfg.seeds.session)?;
    Ok(SessionLog {
        mode: SessionMode::Sham,
        maze_seed: plan.seed,
        config_hash: cfg.hash(),
        config_json: cfg.canonical_json(),
        outcomes,
        status: SessionStatus::Complete,
    })
}

/// Default stratified priors when no model is at hand: the maze trial mix.
pub fn maze_priors(plan: &MazePlan) -> [u64; 3] {
    let mut c = [0u64; 3];
    for t in &plan.trials {
        c[t.index()] += 1;
    }
    c
}

/// Monte Carlo chance levels under both null models.
pub fn benchmark(cfg: &ExperimentConfig, class_counts: [u64; 3]) -> Result<ChanceReport> {
    cfg.validate()?;
    let plan = maze(cfg);
    let stratified = NullModel::from_counts(class_counts)?;
    let mut distributions = monte_carlo(&stratified, &plan, &cfg.online, cfg.benchmark_runs, cfg.seeds.benchmark)?;
    distributions.extend(monte_carlo(
        &NullModel::uniform(),
        &plan,
        &cfg.online,
        cfg.benchmark_runs,
        cfg.seeds.benchmark.wrapping_add(1),
    )?);
    Ok(ChanceReport {
        maze_seed: plan.seed,
        seed: cfg.seeds.benchmark,
        config_hash: cfg.hash(),
        stratified_priors: stratified.priors,
        distributions,
    })
}
