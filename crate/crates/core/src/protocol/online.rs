use serde::{Deserialize, Serialize};

use super::maze::MazePlan;
use crate::dsp::TaskCode;
use crate::{Error, Result};

/// Online feedback timing, in whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub decision_period_s: u32,
    pub window_s: u32,
    pub trial_timeout_s: u32,
    pub required_motion_s: u32,
    pub motion_grant_per_correct_s: u32,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            decision_period_s: 1,
            window_s: 2,
            trial_timeout_s: 14,
            required_motion_s: 6,
            motion_grant_per_correct_s: 1,
        }
    }
}

impl OnlineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.decision_period_s == 0 || self.motion_grant_per_correct_s == 0 {
            return Err(Error::Config("decision period and motion grant must be positive".into()));
        }
        if self.required_motion_s == 0 || self.trial_timeout_s < self.required_motion_s {
            return Err(Error::Config(format!(
                "timeout {} s must be >= required motion {} s > 0",
                self.trial_timeout_s, self.required_motion_s
            )));
        }
        if self.window_s == 0 || self.window_s > self.trial_timeout_s {
            return Err(Error::Config("window must fit inside the trial timeout".into()));
        }
        Ok(())
    }

    /// Decision times within a trial: first full window, then every period.
    pub fn ticks(&self) -> impl Iterator<Item = u32> + '_ {
        (self.window_s..=self.trial_timeout_s).step_by(self.decision_period_s as usize)
    }

    pub fn opportunities(&self) -> usize {
        self.ticks().count()
    }

    /// Correct decisions needed to complete a trial.
    pub fn corrects_needed(&self) -> u32 {
        self.required_motion_s.div_ceil(self.motion_grant_per_correct_s)
    }
}

/// What the decoder said at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// Warm-up or not-ready tick; never counts as correct.
    NoDecision,
    Class(TaskCode),
}

impl Decision {
    pub fn class(self) -> Option<TaskCode> {
        match self {
            Decision::NoDecision => None,
            Decision::Class(c) => Some(c),
        }
    }
}

/// Time-ordered producer of decisions for an online session. `decide`
/// returning `Ok(None)` means the stream has ended.
pub trait DecisionSource {
    fn begin_trial(&mut self, _index: usize, _task: TaskCode) -> Result<()> {
        Ok(())
    }
    fn decide(&mut self, t_s: u32) -> Result<Option<Decision>>;
    fn end_trial(&mut self, _elapsed_s: u32) -> Result<()> {
        Ok(())
    }
}

impl<F: FnMut(u32) -> Option<Decision>> DecisionSource for F {
    fn decide(&mut self, t_s: u32) -> Result<Option<Decision>> {
        Ok(self(t_s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub t_s: u32,
    pub predicted: Option<TaskCode>,
    pub correct: bool,
    /// Cumulative motion after this decision.
    pub motion_s: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub task: TaskCode,
    pub success: bool,
    pub elapsed_s: u32,
    pub decisions: Vec<DecisionRecord>,
}

impl TrialOutcome {
    pub fn motion_s(&self) -> u32 {
        self.decisions.last().map_or(0, |d| d.motion_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionStatus {
    Complete,
    /// The decision stream ended before the maze was finished.
    Incomplete { trials_finished: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OnlineSession {
    pub outcomes: Vec<TrialOutcome>,
    pub status: SessionStatus,
}

impl OnlineSession {
    pub fn duration_s(&self) -> u64 {
        self.outcomes.iter().map(|o| o.elapsed_s as u64).sum()
    }
}

/// Runs the maze under the online rule: each correct decision grants motion;
/// the trial succeeds once the required motion is reached and fails at the
/// timeout.
pub fn run_online_session<S: DecisionSource + ?Sized>(
    plan: &MazePlan,
    cfg: &OnlineConfig,
    source: &mut S,
) -> Result<OnlineSession> {
    cfg.validate()?;
    let mut outcomes = Vec::with_capacity(plan.trials.len());
    for (index, &task) in plan.trials.iter().enumerate() {
        source.begin_trial(index, task)?;
        match run_trial(index, task, cfg, source)? {
            Some(outcome) => {
                source.end_trial(outcome.elapsed_s)?;
                outcomes.push(outcome);
            }
            None => {
                return Ok(OnlineSession {
                    status: SessionStatus::Incomplete {
                        trials_finished: outcomes.len(),
                    },
                    outcomes,
                })
            }
        }
    }
    Ok(OnlineSession {
        outcomes,
        status: SessionStatus::Complete,
    })
}

fn run_trial<S: DecisionSource + ?Sized>(
    index: usize,
    task: TaskCode,
    cfg: &OnlineConfig,
    source: &mut S,
) -> Result<Option<TrialOutcome>> {
    let mut motion = 0;
    let mut decisions = Vec::new();
    for t in cfg.ticks() {
        let Some(decision) = source.decide(t)? else {
            return Ok(None);
        };
        let predicted = decision.class();
        let correct = predicted == Some(task);
        if correct {
            motion += cfg.motion_grant_per_correct_s;
        }
        decisions.push(DecisionRecord {
            t_s: t,
            predicted,
            correct,
            motion_s: motion.min(cfg.required_motion_s),
        });
        if motion >= cfg.required_motion_s {
            return Ok(Some(TrialOutcome {
                index,
                task,
                success: true,
                elapsed_s: t,
                decisions,
            }));
        }
    }
    Ok(Some(TrialOutcome {
        index,
        task,
        success: false,
        elapsed_s: cfg.trial_timeout_s,
        decisions,
    }))
}
