use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::TaskCode;

pub const N_CHECKPOINTS: usize = 29;
pub const TURNS_PER_SIDE: usize = 14;
pub const N_TRIALS: usize = 2 * N_CHECKPOINTS - 1;
pub const CHECKPOINT_SPACING_M: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazePlan {
    pub seed: u64,
    /// Checkpoint coordinates in metres, starting at the origin heading +y.
    pub checkpoints: Vec<(f64, f64)>,
    /// Turn taken at checkpoints 2..=29.
    pub turns: Vec<TaskCode>,
    pub trials: Vec<TaskCode>,
}

impl MazePlan {
    pub fn count(&self, task: TaskCode) -> usize {
        self.trials.iter().filter(|&&t| t == task).count()
    }
}

/// The first checkpoint is forward only; every later one is a turn followed
/// by a forward segment.
pub fn build_maze(seed: u64) -> MazePlan {
    let mut turns: Vec<TaskCode> = std::iter::repeat_n(TaskCode::LeftHand, TURNS_PER_SIDE)
        .chain(std::iter::repeat_n(TaskCode::RightHand, TURNS_PER_SIDE))
        .collect();
    turns.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut trials = Vec::with_capacity(N_TRIALS);
    trials.push(TaskCode::Feet);
    for &t in &turns {
        trials.push(t);
        trials.push(TaskCode::Feet);
    }

    let mut checkpoints = Vec::with_capacity(N_CHECKPOINTS);
    let (mut x, mut y) = (0.0, 0.0);
    let mut heading: i32 = 0;
    checkpoints.push((x, y));
    for t in std::iter::once(None).chain(turns.iter().take(N_CHECKPOINTS - 2).map(Some)) {
        match t {
            Some(TaskCode::LeftHand) => heading += 1,
            Some(TaskCode::RightHand) => heading -= 1,
            _ => {}
        }
        let (dx, dy) = match heading.rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (-1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (1.0, 0.0),
        };
        x += dx * CHECKPOINT_SPACING_M;
        y += dy * CHECKPOINT_SPACING_M;
        checkpoints.push((x, y));
    }

    MazePlan {
        seed,
        checkpoints,
        turns,
        trials,
    }
}
