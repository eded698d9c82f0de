use serde::{Deserialize, Serialize};

use super::maze::N_TRIALS;
use super::online::TrialOutcome;
use crate::dsp::TaskCode;
use crate::{Error, Result};

/// Success counts kept as exact integers; percentages derived on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub successes: u32,
    pub trials: u32,
    /// `(successes, trials)` per task, indexed by [`TaskCode::index`].
    pub per_task: [(u32, u32); 3],
    pub duration_s: u64,
}

impl SessionMetrics {
    pub fn overall_percent(&self) -> f64 {
        100.0 * self.successes as f64 / self.trials as f64
    }

    /// `None` when the plan holds no trial of this task.
    pub fn task_fraction(&self, task: TaskCode) -> Option<f64> {
        let (s, n) = self.per_task[task.index()];
        (n > 0).then(|| s as f64 / n as f64)
    }
}

pub fn compute_metrics(outcomes: &[TrialOutcome]) -> Result<SessionMetrics> {
    if outcomes.len() != N_TRIALS {
        return Err(Error::InvalidInput(format!(
            "a session has {N_TRIALS} trials, got {}",
            outcomes.len()
        )));
    }
    Ok(tally(outcomes))
}

/// Same bookkeeping without the trial-count check, for custom plans.
pub fn tally(outcomes: &[TrialOutcome]) -> SessionMetrics {
    let mut per_task = [(0u32, 0u32); 3];
    let mut successes = 0;
    let mut duration_s = 0;
    for o in outcomes {
        let e = &mut per_task[o.task.index()];
        e.1 += 1;
        if o.success {
            e.0 += 1;
            successes += 1;
        }
        duration_s += o.elapsed_s as u64;
    }
    SessionMetrics {
        successes,
        trials: outcomes.len() as u32,
        per_task,
        duration_s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::maze::build_maze;

    fn outcomes(successes: usize) -> Vec<TrialOutcome> {
        build_maze(5)
            .trials
            .iter()
            .enumerate()
            .map(|(index, &task)| TrialOutcome {
                index,
                task,
                success: index < successes,
                elapsed_s: if index < successes { 7 } else { 14 },
                decisions: vec![],
            })
            .collect()
    }

    #[test]
    fn all_success() {
        let m = compute_metrics(&outcomes(57)).unwrap();
        assert_eq!(m.overall_percent(), 100.0);
        assert_eq!(m.per_task, [(14, 14), (14, 14), (29, 29)]);
    }

    #[test]
    fn reported_extremes() {
        let m = compute_metrics(&outcomes(30)).unwrap();
        assert_eq!(format!("{:.2}", m.overall_percent()), "52.63");
        let m = compute_metrics(&outcomes(51)).unwrap();
        assert_eq!(format!("{:.2}", m.overall_percent()), "89.47");
        assert_eq!(m.per_task.iter().map(|p| p.0).sum::<u32>(), m.successes);
    }

    #[test]
    fn wrong_count_rejected() {
        assert!(compute_metrics(&outcomes(57)[..56]).is_err());
    }
}
