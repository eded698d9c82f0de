//! Standardization, L1-penalized one-vs-all linear SVM, kappa scoring and
//! repeated stratified cross-validation.

mod cv;
mod kappa;
mod ova;
mod pipeline_model;
mod standardize;
mod svm;

pub use cv::{
    cross_validate, default_c_grid, default_k_grid, stratified_folds, CvConfig, CvResult,
    GridScore, TailModel,
};
pub use kappa::{kappa, Confusion};
pub use ova::{predict_from_scores, train_ova, train_ova_path, BinaryLinearModel, ClassWeightRule, ClassWeights, OneVsAll};
pub use pipeline_model::{PipelineModel, MODEL_FORMAT};
pub use standardize::Standardizer;
pub use svm::{l1_svm_objective, train_l1_binary, train_l1_path, L1Solution, SolveStats, NONZERO_THRESHOLD};
