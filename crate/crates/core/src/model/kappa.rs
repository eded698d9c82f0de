use crate::dsp::TaskCode;
use crate::{Error, Result};

/// 3 x 3 confusion counts, rows = true class, columns = predicted class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion(pub [[u64; 3]; 3]);

impl Confusion {
    pub fn from_pairs(truth: &[TaskCode], predicted: &[TaskCode]) -> Self {
        let mut c = Confusion::default();
        for (t, p) in truth.iter().zip(predicted) {
            c.add(*t, *p);
        }
        c
    }

    pub fn add(&mut self, truth: TaskCode, predicted: TaskCode) {
        self.0[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }
}

/// Cohen's kappa of signed counts; defined as 0 when chance agreement is 1.
pub fn kappa(confusion: &[[i64; 3]; 3]) -> Result<f64> {
    if confusion.iter().flatten().any(|&c| c < 0) {
        return Err(Error::InvalidInput("confusion counts must be non-negative".into()));
    }
    let mut c = Confusion::default();
    for i in 0..3 {
        for j in 0..3 {
            c.0[i][j] = confusion[i][j] as u64;
        }
    }
    c.kappa()
}

impl Confusion {
    pub fn kappa(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::InvalidInput("confusion matrix is empty".into()));
        }
        let n = total as f64;
        let trace: u64 = (0..3).map(|i| self.0[i][i]).sum();
        let p_o = trace as f64 / n;
        let p_e: f64 = (0..3)
            .map(|i| {
                let row: u64 = self.0[i].iter().sum();
                let col: u64 = (0..3).map(|r| self.0[r][i]).sum();
                row as f64 * col as f64
            })
            .sum::<f64>()
            / (n * n);
        if p_e >= 1.0 {
            return Ok(0.0);
        }
        Ok((p_o - p_e) / (1.0 - p_e))
    }
}
