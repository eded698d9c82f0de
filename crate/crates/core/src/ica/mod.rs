//! Infomax ICA: fitted once on the concatenated calibration segments, then
//! applied as a frozen linear transform to every segment.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dsp::{Segment, MONTAGE};
use crate::{Error, Result};

/// Segments required before a 16-channel whitening is considered stable.
pub const MIN_SEGMENTS: usize = 32;

/// Learning schedule for the natural-gradient infomax.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfomaxOptions {
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once the largest absolute weight change over one pass is below this.
    pub tolerance: f64,
    /// Standard deviation of the seeded perturbation added to the identity start.
    pub init_noise: f64,
    /// Weight training uses at most this many samples, evenly strided.
    /// Means and whitening always use every sample.
    pub max_fit_samples: usize,
}

impl Default for InfomaxOptions {
    fn default() -> Self {
        InfomaxOptions {
            learning_rate: 0.01,
            max_iterations: 512,
            tolerance: 1e-6,
            init_noise: 0.01,
            max_fit_samples: 32_768,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub iterations: usize,
    pub final_change: f64,
    pub final_learning_rate: f64,
    pub seed: u64,
    pub converged: bool,
}

/// Fitted unmixing transform `w * whitener * (x - channel_means)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "UnmixingFile", try_from = "UnmixingFile")]
pub struct UnmixingMatrix {
    w: DMatrix<f64>,
    whitener: DMatrix<f64>,
    channel_means: DVector<f64>,
    fit: FitMetadata,
    combined: DMatrix<f64>,
}

impl UnmixingMatrix {
    pub fn from_parts(
        w: DMatrix<f64>,
        whitener: DMatrix<f64>,
        channel_means: DVector<f64>,
        fit: FitMetadata,
    ) -> Result<Self> {
        let n = channel_means.len();
        if w.shape() != (n, n) || whitener.shape() != (n, n) {
            return Err(Error::shape(
                format!("{n}x{n} matrices"),
                format!("w {:?}, whitener {:?}", w.shape(), whitener.shape()),
            ));
        }
        if w.iter().chain(whitener.iter()).chain(channel_means.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("unmixing matrix has non-finite entries".into()));
        }
        let combined = &w * &whitener;
        Ok(UnmixingMatrix {
            w,
            whitener,
            channel_means,
            fit,
            combined,
        })
    }

    pub fn identity(n: usize) -> Self {
        let fit = FitMetadata {
            iterations: 0,
            final_change: 0.0,
            final_learning_rate: 0.0,
            seed: 0,
            converged: true,
        };
        Self::from_parts(DMatrix::identity(n, n), DMatrix::identity(n, n), DVector::zeros(n), fit)
            .expect("identity is valid")
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn whitener(&self) -> &DMatrix<f64> {
        &self.whitener
    }

    pub fn channel_means(&self) -> &DVector<f64> {
        &self.channel_means
    }

    pub fn fit_metadata(&self) -> &FitMetadata {
        &self.fit
    }

    /// `w * whitener`.
    pub fn combined(&self) -> &DMatrix<f64> {
        &self.combined
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.combined)
    }

    /// Components of a channels x time block.
    pub fn apply_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.channel_means.len() {
            return Err(Error::shape(
                format!("{} rows", self.channel_means.len()),
                format!("{} rows", x.nrows()),
            ));
        }
        let mut centered = x.clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.channel_means;
        }
        Ok(&self.combined * centered)
    }

    /// Maps a segment to its 16 x 500 component segment (label and origin kept).
    pub fn apply(&self, segment: &Segment) -> Result<Segment> {
        let data = self.apply_matrix(segment.data())?;
        Segment::new(data, segment.label, segment.origin)
    }

    /// Reconstructs channel data from components.
    pub fn inverse_apply(&self, components: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let inv = self
            .combined
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Infeasible("unmixing matrix is singular".into()))?;
        let mut x = inv * components;
        for mut col in x.column_iter_mut() {
            col += &self.channel_means;
        }
        Ok(x)
    }
}

/// Fits the unmixing matrix on all calibration segments, concatenated in time.
pub fn fit_infomax(segments: &[Segment], seed: u64) -> Result<UnmixingMatrix> {
    if segments.len() < MIN_SEGMENTS {
        return Err(Error::Infeasible(format!(
            "ICA needs at least {MIN_SEGMENTS} segments, got {}",
            segments.len()
        )));
    }
    let len = segments[0].data().ncols();
    let n = segments[0].data().nrows();
    let mut data = DMatrix::zeros(n, len * segments.len());
    for (i, s) in segments.iter().enumerate() {
        data.columns_mut(i * len, len).copy_from(s.data());
    }
    let labels: Vec<String> = MONTAGE.iter().map(|s| s.to_string()).collect();
    fit_infomax_data(&data, Some(&labels), seed, InfomaxOptions::default())
}

/// Centers, PCA-whitens and runs natural-gradient infomax (logistic
/// nonlinearity) on a channels x samples matrix.
pub fn fit_infomax_data(
    data: &DMatrix<f64>,
    channel_labels: Option<&[String]>,
    seed: u64,
    opts: InfomaxOptions,
) -> Result<UnmixingMatrix> {
    let (m, n) = data.shape();
    if n < 2 * m {
        return Err(Error::Infeasible(format!(
            "{n} samples are too few to whiten {m} channels"
        )));
    }
    if let Some((ch, t)) = (0..n)
        .flat_map(|t| (0..m).map(move |ch| (ch, t)))
        .find(|&(ch, t)| !data[(ch, t)].is_finite())
    {
        return Err(Error::NonFinite {
            channel: ch,
            label: label_of(channel_labels, ch),
            sample: t,
        });
    }

    let means = data.column_mean();
    let mut centered = data.clone();
    for mut col in centered.column_iter_mut() {
        col -= &means;
    }
    let cov = (&centered * centered.transpose()) / n as f64;
    let whitener = whitening_matrix(&cov, channel_labels)?;
    let mut z = &whitener * &centered;
    let n = if n > opts.max_fit_samples.max(2 * m) {
        let keep = opts.max_fit_samples.max(2 * m);
        let idx: Vec<usize> = (0..keep).map(|i| i * n / keep).collect();
        z = z.select_columns(&idx);
        keep
    } else {
        n
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, opts.init_noise).map_err(|e| Error::Config(e.to_string()))?;
    let w0 = DMatrix::from_fn(m, m, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        d + noise.sample(&mut rng)
    });

    // One iteration is a full-data natural-gradient step sized like an
    // epoch of block updates at the nominal rate. A step that fails to raise
    // the likelihood is rejected and the rate halved.
    let block = ((5.0 * (n as f64).ln()).min(0.3 * n as f64).ceil() as usize).max(1);
    let steps_per_epoch = n.div_ceil(block) as f64;
    let identity = DMatrix::<f64>::identity(m, m);

    let mut w = w0;
    let mut lr = opts.learning_rate;
    let mut u = &w * &z;
    let (mut y, mut objective) = score_and_objective(&w, &u);
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;
        let grad = &identity + (&y * u.transpose()) / n as f64;
        let delta = (lr * steps_per_epoch) * (grad * &w);
        change = delta.amax();
        if change < opts.tolerance {
            converged = true;
            break;
        }
        let next = &w + &delta;
        let next_u = &next * &z;
        let (next_y, next_obj) = score_and_objective(&next, &next_u);
        if next_obj.is_finite() && next_obj > objective {
            w = next;
            u = next_u;
            y = next_y;
            objective = next_obj;
        } else {
            lr *= 0.5;
        }
    }

    let fit = FitMetadata {
        iterations,
        final_change: change,
        final_learning_rate: lr,
        seed,
        converged,
    };
    let u = UnmixingMatrix::from_parts(w, whitener, means, fit)?;
    let cond = u.condition_number();
    if !(cond < 1e8) {
        return Err(Error::Infeasible(format!(
            "fitted unmixing matrix is ill-conditioned (condition {cond:e})"
        )));
    }
    Ok(u)
}

/// Score `1 - 2 s(u)` and the mean log-likelihood under logistic source
/// densities, `ln|det W| + mean_t sum_i ln(s(u) (1 - s(u)))`.
fn score_and_objective(w: &DMatrix<f64>, u: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let mut dens = 0.0;
    let y = u.map(|v| {
        let a = v.abs();
        let e = (-a).exp();
        dens -= a + 2.0 * e.ln_1p();
        let t = (1.0 - e) / (1.0 + e);
        if v > 0.0 {
            -t
        } else {
            t
        }
    });
    let det = w.determinant().abs();
    let obj = if det > 0.0 {
        det.ln() + dens / u.ncols() as f64
    } else {
        f64::NEG_INFINITY
    };
    (y, obj)
}

fn label_of(labels: Option<&[String]>, ch: usize) -> String {
    labels
        .and_then(|l| l.get(ch).cloned())
        .unwrap_or_else(|| format!("channel {ch}"))
}

/// `diag(lambda)^(-1/2) * E^T` with eigenvalues in descending order.
fn whitening_matrix(cov: &DMatrix<f64>, labels: Option<&[String]>) -> Result<DMatrix<f64>> {
    let m = cov.nrows();
    let variances: Vec<f64> = (0..m).map(|i| cov[(i, i)]).collect();
    let max_var = variances.iter().cloned().fold(0.0, f64::max);
    if let Some(dead) = variances.iter().position(|&v| v <= 1e-12 * max_var.max(f64::MIN_POSITIVE)) {
        return Err(Error::RankDeficient {
            channel: label_of(labels, dead),
        });
    }
    let eig = cov.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[idx[0]];
    let smallest = idx[m - 1];
    if eig.eigenvalues[smallest] <= 1e-10 * top {
        let v = eig.eigenvectors.column(smallest);
        let ch = v.iamax();
        return Err(Error::RankDeficient {
            channel: label_of(labels, ch),
        });
    }
    let mut whitener = DMatrix::zeros(m, m);
    for (row, &k) in idx.iter().enumerate() {
        let scale = 1.0 / eig.eigenvalues[k].sqrt();
        let v = eig.eigenvectors.column(k);
        // fix the eigenvector sign so the largest loading is positive
        let sign = if v[v.iamax()] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..m {
            whitener[(row, j)] = sign * scale * v[j];
        }
    }
    Ok(whitener)
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Amari performance index of `p = W * A`, normalized to [0, 1]; zero iff
/// `p` is a scaled permutation.
pub fn amari_index(p: &DMatrix<f64>) -> f64 {
    let n = p.nrows();
    assert_eq!(n, p.ncols(), "Amari index needs a square matrix");
    if n < 2 {
        return 0.0;
    }
    let a = p.abs();
    let mut total = 0.0;
    for i in 0..n {
        let row = a.row(i);
        total += row.sum() / row.max() - 1.0;
    }
    for j in 0..n {
        let col = a.column(j);
        total += col.sum() / col.max() - 1.0;
    }
    total / (2.0 * n as f64 * (n as f64 - 1.0))
}

#[derive(Serialize, Deserialize)]
struct UnmixingFile {
    size: usize,
    /// row-major
    w: Vec<f64>,
    /// row-major
    whitener: Vec<f64>,
    channel_means: Vec<f64>,
    fit: FitMetadata,
}

impl From<UnmixingMatrix> for UnmixingFile {
    fn from(u: UnmixingMatrix) -> Self {
        let row_major = |m: &DMatrix<f64>| m.transpose().as_slice().to_vec();
        UnmixingFile {
            size: u.channel_means.len(),
            w: row_major(&u.w),
            whitener: row_major(&u.whitener),
            channel_means: u.channel_means.as_slice().to_vec(),
            fit: u.fit,
        }
    }
}

impl TryFrom<UnmixingFile> for UnmixingMatrix {
    type Error = Error;

    fn try_from(f: UnmixingFile) -> Result<Self> {
        let n = f.size;
        if f.w.len() != n * n || f.whitener.len() != n * n || f.channel_means.len() != n {
            return Err(Error::Format("unmixing matrix dimensions disagree".into()));
        }
        UnmixingMatrix::from_parts(
            DMatrix::from_row_slice(n, n, &f.w),
            DMatrix::from_row_slice(n, n, &f.whitener),
            DVector::from_vec(f.channel_means),
            f.fit,
        )
    }
}
