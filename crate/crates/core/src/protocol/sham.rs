use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::maze::MazePlan;
use super::online::{DecisionRecord, TrialOutcome};
use crate::{Error, Result};

/// Sham feedback: a Bernoulli draw every period; each success moves the
/// element for one period; the trial ends at the required number of successes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShamConfig {
    pub p: f64,
    pub decision_period_s: u32,
    pub corrects_to_complete: u32,
}

impl ShamConfig {
    pub fn with_p(p: f64) -> Self {
        ShamConfig {
            p,
            decision_period_s: 2,
            corrects_to_complete: 3,
        }
    }

    /// `p = 1` is accepted as the best-case limit.
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::Config(format!("sham p must lie in (0, 1], got {}", self.p)));
        }
        if self.decision_period_s == 0 || self.corrects_to_complete == 0 {
            return Err(Error::Config("sham period and required corrects must be positive".into()));
        }
        Ok(())
    }
}

/// Number of draws until the `r`-th success.
pub fn draws_until<R: Rng>(p: f64, r: u32, rng: &mut R) -> u32 {
    let (mut draws, mut hits) = (0, 0);
    while hits < r {
        draws += 1;
        if rng.random_bool(p) {
            hits += 1;
        }
    }
    draws
}

/// Simulates a sham-feedback run through the maze. Decisions are logged at
/// the draw times with the task as prediction on a successful draw.
pub fn run_sham_session(plan: &MazePlan, cfg: &ShamConfig, seed: u64) -> Result<Vec<TrialOutcome>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes = Vec::with_capacity(plan.trials.len());
    for (index, &task) in plan.trials.iter().enumerate() {
        let mut decisions = Vec::new();
        let mut hits = 0;
        let mut t = 0;
        while hits < cfg.corrects_to_complete {
            t += cfg.decision_period_s;
            let correct = rng.random_bool(cfg.p);
            if correct {
                hits += 1;
            }
            decisions.push(DecisionRecord {
                t_s: t,
                predicted: correct.then_some(task),
                correct,
                motion_s: hits * cfg.decision_period_s,
            });
        }
        outcomes.push(TrialOutcome {
            index,
            task,
            success: true,
            elapsed_s: t,
            decisions,
        });
    }
    Ok(outcomes)
}
