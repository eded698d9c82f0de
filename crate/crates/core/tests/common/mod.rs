//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code under test except for plain data types.

#![allow(dead_code)]

use mi_bci::TaskCode;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Optimal objective of `min ||w||_1 + c * sum(zeta)` subject to
/// `y_i (w.x_i + b) >= 1 - zeta_i`, `zeta >= 0`, by a dense tableau primal
/// simplex with Bland's rule. Columns: w+, w-, b+, b-, zeta, surplus.
pub fn lp_reference(x: &DMatrix<f64>, y: &[f64], c: f64) -> f64 {
    let (n, p) = x.shape();
    let cols = 2 * p + 2 + 2 * n;
    let zeta0 = 2 * p + 2;
    let surplus0 = zeta0 + n;
    let mut t = vec![vec![0.0; cols + 1]; n];
    for i in 0..n {
        for j in 0..p {
            t[i][j] = y[i] * x[(i, j)];
            t[i][p + j] = -y[i] * x[(i, j)];
        }
        t[i][2 * p] = y[i];
        t[i][2 * p + 1] = -y[i];
        t[i][zeta0 + i] = 1.0;
        t[i][surplus0 + i] = -1.0;
        t[i][cols] = 1.0;
    }
    let mut cost = vec![0.0; cols];
    for v in cost.iter_mut().take(2 * p) {
        *v = 1.0;
    }
    for v in cost.iter_mut().skip(zeta0).take(n) {
        *v = c;
    }
    let mut basis: Vec<usize> = (0..n).map(|i| zeta0 + i).collect();
    const EPS: f64 = 1e-10;
    for _ in 0..1_000_000 {
        let entering = (0..cols).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let r = cost[j] - (0..n).map(|i| cost[basis[i]] * t[i][j]).sum::<f64>();
            r < -EPS
        });
        let Some(q) = entering else {
            return (0..n).map(|i| cost[basis[i]] * t[i][cols]).sum();
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..n {
            if t[i][q] > EPS {
                let ratio = t[i][cols] / t[i][q];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - 1e-12 || (ratio <= best + 1e-12 && basis[i] < basis[r]) {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
        }
        let (r, _) = leave.expect("objective is bounded below by zero");
        let piv = t[r][q];
        for v in t[r].iter_mut() {
            *v /= piv;
        }
        let row = t[r].clone();
        for (i, ti) in t.iter_mut().enumerate() {
            if i != r && ti[q] != 0.0 {
                let f = ti[q];
                for (a, b) in ti.iter_mut().zip(&row) {
                    *a -= f * b;
                }
            }
        }
        basis[r] = q;
    }
    panic!("reference simplex did not terminate");
}

/// Small random binary problem: Gaussian features, labels from a random
/// hyperplane with some flipped.
pub fn random_binary_problem(seed: u64) -> (DMatrix<f64>, Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(16..40);
    let p = rng.random_range(2..8);
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let w: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            let s: f64 = (0..p).map(|j| w[j] * x[(i, j)]).sum::<f64>() + 0.2;
            let flip = rng.random_bool(0.15);
            if (s >= 0.0) != flip {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    y[0] = 1.0;
    y[1] = -1.0;
    let c = [0.05, 0.3, 1.0, 4.0][rng.random_range(0..4)];
    (x, y, c)
}

/// `informative` columns carry a class-dependent mean shift of `shift`
/// standard deviations, the rest are pure noise. Labels balanced +-1.
pub fn planted_binary(seed: u64, n: usize, informative: usize, noise: usize, shift: f64) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let x = DMatrix::from_fn(n, informative + noise, |i, j| {
        let z: f64 = rng.sample(StandardNormal);
        if j < informative {
            z + 0.5 * shift * y[i]
        } else {
            z
        }
    });
    (x, y)
}

/// Balanced three-class labels, cycling LEFT, RIGHT, FEET.
pub fn cyclic_labels(n: usize) -> Vec<TaskCode> {
    (0..n).map(|i| TaskCode::ALL[i % 3]).collect()
}

/// Shannon entropy in bits of a label sequence.
pub fn label_entropy(labels: &[TaskCode]) -> f64 {
    let mut c = [0usize; 3];
    for l in labels {
        c[l.index()] += 1;
    }
    let n = labels.len() as f64;
    c.iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let q = k as f64 / n;
            -q * q.log2()
        })
        .sum()
}

/// Brute-force MI with 8 equal-frequency bins: sort by (value, position),
/// rank r goes to bin floor(8r/n), ties share the first member's bin.
pub fn mi_oracle(column: &[f64], labels: &[TaskCode]) -> f64 {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].partial_cmp(&column[b]).unwrap().then(a.cmp(&b)));
    let mut bin = vec![0; n];
    for r in 0..n {
        bin[order[r]] = if r > 0 && column[order[r]] == column[order[r - 1]] {
            bin[order[r - 1]]
        } else {
            r * 8 / n
        };
    }
    let mut joint = [[0f64; 3]; 8];
    for i in 0..n {
        joint[bin[i]][labels[i].index()] += 1.0;
    }
    let nf = n as f64;
    let py: Vec<f64> = (0..3).map(|k| joint.iter().map(|r| r[k]).sum::<f64>() / nf).collect();
    let mut mi = 0.0;
    for row in &joint {
        let pb: f64 = row.iter().sum::<f64>() / nf;
        for k in 0..3 {
            let pj = row[k] / nf;
            if pj > 0.0 {
                mi += pj * (pj / (pb * py[k])).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Three-class feature matrix with `planted` leading columns whose class
/// means differ by `shift` standard deviations.
pub fn planted_multiclass(seed: u64, n: usize, planted: usize, noise: usize, shift: f64) -> (DMatrix<f64>, Vec<TaskCode>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = cyclic_labels(n);
    let x = DMatrix::from_fn(n, planted + noise, |i, j| {
        let z: f64 = rng.sample(StandardNormal);
        if j < planted {
            z + shift * labels[i].index() as f64
        } else {
            z
        }
    });
    (x, labels)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// `P[Binomial(n, p) >= k]` by direct summation.
pub fn binomial_tail(n: u64, p: f64, k: u64) -> f64 {
    (k..=n)
        .map(|j| (ln_choose(n, j) + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp())
        .sum()
}

/// `P[draws = k]` for the number of Bernoulli(p) draws up to the r-th success.
pub fn negbin_pmf(r: u64, p: f64, k: u64) -> f64 {
    if k < r {
        return 0.0;
    }
    (ln_choose(k - 1, r - 1) + r as f64 * p.ln() + (k - r) as f64 * (1.0 - p).ln()).exp()
}

/// Pearson chi-square of observed draw counts against NegBin(r, p), pooling
/// the upper tail so every expected cell holds at least 5.
pub fn negbin_chi_square(counts: &[u64], r: u64, p: f64) -> (f64, usize) {
    let total: u64 = counts.iter().sum();
    let nf = total as f64;
    let mut cells = Vec::new();
    let mut k = r;
    let mut cum = 0.0;
    loop {
        let e = nf * negbin_pmf(r, p, k);
        if e < 5.0 {
            break;
        }
        cum += e / nf;
        cells.push((counts.get(k as usize).copied().unwrap_or(0) as f64, e));
        k += 1;
    }
    let tail_obs: u64 = counts.iter().skip(k as usize).sum();
    cells.push((tail_obs as f64, nf * (1.0 - cum)));
    let chi2 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    (chi2, cells.len() - 1)
}

/// Upper 1% point of the chi-square distribution.
pub fn chi_square_crit_01(df: usize) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    ChiSquared::new(df as f64).unwrap().inverse_cdf(0.99)
}

/// Hand-assembled decision frame: magic 0xBC1F, version 1, FEET,
/// sequence 0x01020304, timestamp 0x1122334455667788, all little-endian.
pub const GOLDEN_FRAME: [u8; 16] = [
    0x1F, 0xBC, 0x01, 0x03, 0x04, 0x03, 0x02, 0x01, 0x88, 0x77, 0x66, 0x55, 0x44, 0x33, 0x22, 0x11,
];

/// Cohen's kappa straight from the definition.
pub fn kappa_oracle(m: &[[f64; 3]; 3]) -> f64 {
    let total: f64 = m.iter().flatten().sum();
    let po = (0..3).map(|i| m[i][i]).sum::<f64>() / total;
    let pe = (0..3)
        .map(|i| m[i].iter().sum::<f64>() * (0..3).map(|r| m[r][i]).sum::<f64>())
        .sum::<f64>()
        / (total * total);
    (po - pe) / (1.0 - pe)
}
