use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dsp::TaskCode;
use crate::{Error, Result};

/// Equal-frequency bins used to discretize a feature column.
pub const MI_BINS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub index: usize,
    pub mi_bits: f64,
}

/// Equal-frequency bin of every value. Values are ranked by (value, original
/// position); rank `r` falls in bin `r * n_bins / n`, and tied values all take
/// the bin of the first member of their run, so ties never straddle bins.
pub fn equal_frequency_bins(column: &[f64], n_bins: usize) -> Vec<usize> {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]).then(a.cmp(&b)));
    let mut bins = vec![0; n];
    let mut run_bin = 0;
    for (rank, &i) in order.iter().enumerate() {
        if rank == 0 || column[i] != column[order[rank - 1]] {
            run_bin = rank * n_bins / n;
        }
        bins[i] = run_bin;
    }
    bins
}

/// Shannon entropy in bits of a count histogram.
pub fn entropy_bits(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// `I[y; x] = H[y] - H[y | x_bin]` in bits, from empirical counts.
pub fn mutual_info_score(column: &[f64], labels: &[TaskCode]) -> Result<f64> {
    if column.len() != labels.len() {
        return Err(Error::shape(
            format!("{} values", labels.len()),
            format!("{} values", column.len()),
        ));
    }
    check_labels(labels)?;
    if let Some(i) = column.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite feature value at row {i}")));
    }
    Ok(mi_unchecked(column, labels))
}

fn check_labels(labels: &[TaskCode]) -> Result<()> {
    let first = labels.first().copied();
    if labels.iter().all(|&l| Some(l) == first) {
        return Err(Error::InvalidInput(
            "mutual information needs at least two distinct labels".into(),
        ));
    }
    Ok(())
}

fn mi_unchecked(column: &[f64], labels: &[TaskCode]) -> f64 {
    let bins = equal_frequency_bins(column, MI_BINS);
    let mut joint = [[0usize; 3]; MI_BINS];
    let mut marginal = [0usize; 3];
    for (&b, &y) in bins.iter().zip(labels) {
        joint[b][y.index()] += 1;
        marginal[y.index()] += 1;
    }
    let n = labels.len() as f64;
    let h_y = entropy_bits(&marginal);
    let h_y_given_x: f64 = joint
        .iter()
        .map(|row| {
            let nb: usize = row.iter().sum();
            nb as f64 / n * entropy_bits(row)
        })
        .sum();
    (h_y - h_y_given_x).max(0.0)
}

/// MI of every column of an `n x D` feature matrix (rows are segments).
pub fn score_features(matrix: &DMatrix<f64>, labels: &[TaskCode]) -> Result<Vec<FeatureScore>> {
    if matrix.nrows() != labels.len() {
        return Err(Error::shape(
            format!("{} rows", labels.len()),
            format!("{} rows", matrix.nrows()),
        ));
    }
    check_labels(labels)?;
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("feature matrix has non-finite values".into()));
    }
    Ok(matrix
        .column_iter()
        .enumerate()
        .map(|(index, col)| FeatureScore {
            index,
            mi_bits: mi_unchecked(col.as_slice(), labels),
        })
        .collect())
}

/// Indices of the `k` highest-MI features (ties to the lower index), sorted
/// ascending.
pub fn select_top_k(matrix: &DMatrix<f64>, labels: &[TaskCode], k: usize) -> Result<Vec<usize>> {
    let scores = score_features(matrix, labels)?;
    select_from_scores(&scores, k)
}

/// Top-`k` selection from precomputed scores.
pub fn select_from_scores(scores: &[FeatureScore], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.len() {
        return Err(Error::InvalidInput(format!(
            "k = {k} out of range 1..={}",
            scores.len()
        )));
    }
    let mut ranked: Vec<&FeatureScore> = scores.iter().collect();
    ranked.sort_by(|a, b| b.mi_bits.total_cmp(&a.mi_bits).then(a.index.cmp(&b.index)));
    let mut chosen: Vec<usize> = ranked[..k].iter().map(|s| s.index).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn balanced_labels(n: usize) -> Vec<TaskCode> {
        (0..n).map(|i| TaskCode::from_index(i % 3)).collect()
    }

    #[test]
    fn label_column_gives_label_entropy_exactly() {
        let labels = balanced_labels(300);
        let column: Vec<f64> = labels.iter().map(|l| l.code() as f64).collect();
        let mi = mutual_info_score(&column, &labels).unwrap();
        let mut counts = [0usize; 3];
        labels.iter().for_each(|l| counts[l.index()] += 1);
        assert_eq!(mi, entropy_bits(&counts));
        assert!((mi - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn unbalanced_label_column_gives_label_entropy() {
        let labels: Vec<TaskCode> = (0..114)
            .map(|i| if i < 58 { TaskCode::Feet } else if i < 86 { TaskCode::LeftHand } else { TaskCode::RightHand })
            .collect();
        let column: Vec<f64> = labels.iter().map(|l| l.code() as f64).collect();
        let mut counts = [0usize; 3];
        labels.iter().for_each(|l| counts[l.index()] += 1);
        assert_eq!(mutual_info_score(&column, &labels).unwrap(), entropy_bits(&counts));
    }

    #[test]
    fn constant_column_has_zero_mi() {
        let labels = balanced_labels(90);
        assert_eq!(mutual_info_score(&[5.0; 90], &labels).unwrap(), 0.0);
    }

    #[test]
    fn independent_noise_has_small_mi() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let labels: Vec<TaskCode> = (0..1000).map(|_| TaskCode::from_index(rng.random_range(0..3))).collect();
        let column: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let mi = mutual_info_score(&column, &labels).unwrap();
        assert!(mi < 0.05, "{mi}");
    }

    #[test]
    fn single_label_is_an_error() {
        let labels = vec![TaskCode::Feet; 10];
        assert!(mutual_info_score(&[0.0; 10], &labels).is_err());
    }

    #[test]
    fn bins_are_equal_frequency() {
        let column: Vec<f64> = (0..80).rev().map(|v| v as f64).collect();
        let bins = equal_frequency_bins(&column, 8);
        let mut counts = [0; 8];
        bins.iter().for_each(|&b| counts[b] += 1);
        assert_eq!(counts, [10; 8]);
        assert_eq!(bins[0], 7);
        assert_eq!(bins[79], 0);
    }

    #[test]
    fn top_k_edges() {
        let labels = balanced_labels(60);
        let mut m = DMatrix::from_fn(60, 5, |i, j| ((i * 7 + j * 13) % 11) as f64);
        for (i, l) in labels.iter().enumerate() {
            m[(i, 3)] = l.code() as f64;
        }
        assert_eq!(select_top_k(&m, &labels, 1).unwrap(), vec![3]);
        assert_eq!(select_top_k(&m, &labels, 5).unwrap(), vec![0, 1, 2, 3, 4]);
        assert!(select_top_k(&m, &labels, 0).is_err());
        assert!(select_top_k(&m, &labels, 6).is_err());
    }

    #[test]
    fn ties_break_to_lower_index() {
        let scores = vec![
            FeatureScore { index: 0, mi_bits: 0.5 },
            FeatureScore { index: 1, mi_bits: 0.9 },
            FeatureScore { index: 2, mi_bits: 0.5 },
        ];
        assert_eq!(select_from_scores(&scores, 2).unwrap(), vec![0, 1]);
    }
}
