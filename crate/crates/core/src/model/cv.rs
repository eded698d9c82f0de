use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kappa::Confusion;
use super::ova::{train_ova, train_ova_path, ClassWeightRule, OneVsAll};
use super::standardize::Standardizer;
use crate::dsp::TaskCode;
use crate::features::{score_features, FeatureScore};
use crate::{Error, Result};

pub fn default_k_grid() -> Vec<usize> {
    vec![10, 20, 40, 80, 160, 320]
}

/// `2^-8, 2^-6, ..., 2^4`.
pub fn default_c_grid() -> Vec<f64> {
    (-4..=2).map(|e| 2f64.powi(2 * e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k_grid: Vec<usize>,
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub repeats: usize,
    pub weight_rule: ClassWeightRule,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k_grid: default_k_grid(),
            c_grid: default_c_grid(),
            folds: 5,
            repeats: 10,
            weight_rule: ClassWeightRule::Literal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub k: usize,
    pub c: f64,
    pub mean_kappa: f64,
    pub std_kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_k: usize,
    pub best_c: f64,
    pub mean_kappa: f64,
    pub grid: Vec<GridScore>,
}

impl CvResult {
    /// Online-use screening: mean cross-validated kappa above zero.
    pub fn eligible(&self) -> bool {
        self.mean_kappa > 0.0
    }
}

/// Fold index of every example. Each class is shuffled and dealt round-robin,
/// continuing the deal across classes, so per-class fold counts differ by at
/// most one.
pub fn stratified_folds<R: Rng>(labels: &[TaskCode], n_folds: usize, rng: &mut R) -> Vec<usize> {
    let mut assignment = vec![0; labels.len()];
    let mut offset = 0;
    for class in TaskCode::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        for (pos, &i) in idx.iter().enumerate() {
            assignment[i] = (offset + pos) % n_folds;
        }
        offset += idx.len();
    }
    assignment
}

/// MI selection + standardization + one-vs-all SVM, fitted on one training set.
#[derive(Debug, Clone, PartialEq)]
pub struct TailModel {
    pub selected: Vec<usize>,
    pub standardizer: Standardizer,
    pub classifiers: OneVsAll,
}

impl TailModel {
    pub fn fit(
        features: &DMatrix<f64>,
        labels: &[TaskCode],
        k: usize,
        c: f64,
        rule: ClassWeightRule,
    ) -> Result<Self> {
        let scores = score_features(features, labels)?;
        let selected = crate::features::select_from_scores(&scores, k)?;
        let sub = select_columns(features, &selected);
        let standardizer = Standardizer::fit(&sub)?;
        let z = standardizer.apply_matrix(&sub)?;
        let classifiers = train_ova(&z, labels, c, rule)?;
        Ok(TailModel {
            selected,
            standardizer,
            classifiers,
        })
    }

    /// Predicts from a full-length feature vector.
    pub fn predict(&self, features: &[f64]) -> Result<TaskCode> {
        let picked: Vec<f64> = self
            .selected
            .iter()
            .map(|&j| {
                features.get(j).copied().ok_or_else(|| {
                    Error::shape(format!("> {j} features"), format!("{} features", features.len()))
                })
            })
            .collect::<Result<_>>()?;
        let z = self.standardizer.apply(&picked)?;
        self.classifiers.predict(&z)
    }
}

pub(crate) fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

pub(crate) fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Repeated stratified k-fold grid search over `(k, C)`. The whole tail
/// (MI ranking, standardizer, classifiers) is refit inside every training
/// fold. Best pair: highest mean kappa, ties to smaller k then smaller C.
pub fn cross_validate(
    features: &DMatrix<f64>,
    labels: &[TaskCode],
    cfg: &CvConfig,
    seed: u64,
) -> Result<CvResult> {
    if cfg.k_grid.is_empty() || cfg.c_grid.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    if cfg.folds < 2 || cfg.repeats == 0 {
        return Err(Error::Config(format!(
            "need >= 2 folds and >= 1 repeat, got {} x {}",
            cfg.folds, cfg.repeats
        )));
    }
    if features.nrows() != labels.len() {
        return Err(Error::shape(
            format!("{} rows", labels.len()),
            format!("{} rows", features.nrows()),
        ));
    }
    if let Some(&c) = cfg.c_grid.iter().find(|&&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::Config(format!("penalty {c} must be positive")));
    }
    let min_per_class = cfg.folds.max(5);
    for class in TaskCode::ALL {
        let count = labels.iter().filter(|&&l| l == class).count();
        if count < min_per_class {
            return Err(Error::Infeasible(format!(
                "class {class} has {count} segments, cross-validation needs {min_per_class}"
            )));
        }
    }
    let d = features.ncols();
    let mut ks: Vec<usize> = cfg.k_grid.iter().map(|&k| k.min(d)).filter(|&k| k > 0).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut cs = cfg.c_grid.clone();
    cs.sort_by(f64::total_cmp);
    cs.dedup();

    let mut fold_kappas = vec![vec![Vec::with_capacity(cfg.folds * cfg.repeats); cs.len()]; ks.len()];
    for rep in 0..cfg.repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep as u64);
        let assignment = stratified_folds(labels, cfg.folds, &mut rng);
        for fold in 0..cfg.folds {
            let train: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] != fold).collect();
            let test: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] == fold).collect();
            let x_train = select_rows(features, &train);
            let x_test = select_rows(features, &test);
            let y_train: Vec<TaskCode> = train.iter().map(|&i| labels[i]).collect();
            let y_test: Vec<TaskCode> = test.iter().map(|&i| labels[i]).collect();
            let scores: Vec<FeatureScore> = score_features(&x_train, &y_train)?;
            for (ki, &k) in ks.iter().enumerate() {
                let selected = crate::features::select_from_scores(&scores, k)?;
                let sub_train = select_columns(&x_train, &selected);
                let standardizer = Standardizer::fit(&sub_train)?;
                let z_train = standardizer.apply_matrix(&sub_train)?;
                let z_test = standardizer.apply_matrix(&select_columns(&x_test, &selected))?;
                let path = train_ova_path(&z_train, &y_train, &cs, cfg.weight_rule)?;
                for (ci, ova) in path.iter().enumerate() {
                    let mut confusion = Confusion::default();
                    for (row, &truth) in y_test.iter().enumerate() {
                        let x: Vec<f64> = z_test.row(row).iter().copied().collect();
                        confusion.add(truth, ova.predict(&x)?);
                    }
                    fold_kappas[ki][ci].push(confusion.kappa()?);
                }
            }
        }
    }

    let mut grid = Vec::with_capacity(ks.len() * cs.len());
    let mut best: Option<(usize, f64, f64)> = None;
    for (ki, &k) in ks.iter().enumerate() {
        for (ci, &c) in cs.iter().enumerate() {
            let v = &fold_kappas[ki][ci];
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
            grid.push(GridScore {
                k,
                c,
                mean_kappa: mean,
                std_kappa: var.sqrt(),
            });
            if best.is_none_or(|(_, _, m)| mean > m) {
                best = Some((k, c, mean));
            }
        }
    }
    let (best_k, best_c, mean_kappa) = best.expect("grid is non-empty");
    Ok(CvResult {
        best_k,
        best_c,
        mean_kappa,
        grid,
    })
}
