use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::svm::{train_l1_binary, train_l1_path, NONZERO_THRESHOLD};
use crate::dsp::TaskCode;
use crate::{Error, Result};

/// How the base penalty is scaled per one-vs-all problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeightRule {
    /// `C_i = C * W_i`, `W_i` the fraction of training examples in class i.
    #[default]
    Literal,
    /// `C_i = C * V_i` with `V_i` proportional to `1 / W_i`, normalized to sum to 1.
    Inverse,
}

/// Class fractions of a training set, indexed by `TaskCode::index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub fractions: [f64; 3],
}

impl ClassWeights {
    pub fn from_labels(labels: &[TaskCode]) -> Result<Self> {
        let mut counts = [0usize; 3];
        for l in labels {
            counts[l.index()] += 1;
        }
        if let Some(i) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidInput(format!(
                "class {} missing from training data",
                TaskCode::from_index(i)
            )));
        }
        let n = labels.len() as f64;
        Ok(ClassWeights {
            fractions: counts.map(|c| c as f64 / n),
        })
    }

    pub fn penalty_factors(&self, rule: ClassWeightRule) -> [f64; 3] {
        match rule {
            ClassWeightRule::Literal => self.fractions,
            ClassWeightRule::Inverse => {
                let inv = self.fractions.map(|f| 1.0 / f);
                let s: f64 = inv.iter().sum();
                inv.map(|v| v / s)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLinearModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub positive_class: TaskCode,
    pub c_effective: f64,
}

impl BinaryLinearModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }

    pub fn nonzero_count(&self) -> usize {
        self.w.iter().filter(|v| v.abs() > NONZERO_THRESHOLD).count()
    }
}

/// Three binary models, one per class in code order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsAll {
    pub models: Vec<BinaryLinearModel>,
}

/// Argmax of the three class scores; ties go to the lowest class code.
pub fn predict_from_scores(scores: [f64; 3]) -> TaskCode {
    let mut best = 0;
    for i in 1..3 {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    TaskCode::from_index(best)
}

impl OneVsAll {
    pub fn dimension(&self) -> usize {
        self.models[0].w.len()
    }

    pub fn scores(&self, x: &[f64]) -> Result<[f64; 3]> {
        if x.len() != self.dimension() {
            return Err(Error::shape(
                format!("{} features", self.dimension()),
                format!("{} features", x.len()),
            ));
        }
        Ok([0, 1, 2].map(|i| self.models[i].score(x)))
    }

    pub fn predict(&self, x: &[f64]) -> Result<TaskCode> {
        Ok(predict_from_scores(self.scores(x)?))
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.len() != 3 {
            return Err(Error::Format(format!("expected 3 class models, got {}", self.models.len())));
        }
        let k = self.models[0].w.len();
        for (i, m) in self.models.iter().enumerate() {
            if m.positive_class != TaskCode::from_index(i) {
                return Err(Error::Format("class models out of order".into()));
            }
            if m.w.len() != k || m.w.iter().any(|v| !v.is_finite()) || !m.b.is_finite() {
                return Err(Error::Format(format!("class model {i} malformed")));
            }
        }
        Ok(())
    }
}

/// One-vs-all training: class i against the rest with `C_i = c * factor_i`.
pub fn train_ova(
    x: &DMatrix<f64>,
    labels: &[TaskCode],
    c: f64,
    rule: ClassWeightRule,
) -> Result<OneVsAll> {
    let weights = ClassWeights::from_labels(labels)?;
    let factors = weights.penalty_factors(rule);
    let mut models = Vec::with_capacity(3);
    for class in TaskCode::ALL {
        let y: Vec<f64> = labels
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let c_effective = c * factors[class.index()];
        let sol = train_l1_binary(x, &y, c_effective)?;
        models.push(BinaryLinearModel {
            w: sol.w,
            b: sol.b,
            positive_class: class,
            c_effective,
        });
    }
    Ok(OneVsAll { models })
}

/// `train_ova` for every base penalty in `cs`, sharing warm starts along
/// the penalty path of each binary problem.
pub fn train_ova_path(
    x: &DMatrix<f64>,
    labels: &[TaskCode],
    cs: &[f64],
    rule: ClassWeightRule,
) -> Result<Vec<OneVsAll>> {
    let weights = ClassWeights::from_labels(labels)?;
    let factors = weights.penalty_factors(rule);
    let mut out: Vec<OneVsAll> = cs.iter().map(|_| OneVsAll { models: Vec::with_capacity(3) }).collect();
    for class in TaskCode::ALL {
        let y: Vec<f64> = labels
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let effective: Vec<f64> = cs.iter().map(|c| c * factors[class.index()]).collect();
        let path = train_l1_path(x, &y, &effective)?;
        for ((ova, sol), c_effective) in out.iter_mut().zip(path).zip(effective) {
            ova.models.push(BinaryLinearModel {
                w: sol.w,
                b: sol.b,
                positive_class: class,
                c_effective,
            });
        }
    }
    Ok(out)
}
