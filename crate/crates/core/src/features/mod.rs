//! Periodogram features per ICA component and mutual-information filtering.

mod mutual_info;
mod periodogram;

pub use mutual_info::{
    entropy_bits, equal_frequency_bins, mutual_info_score, score_features, select_from_scores,
    select_top_k, FeatureScore, MI_BINS,
};
pub use periodogram::{FeatureExtractor, FeatureVector, Periodogram, SpectralConfig};
