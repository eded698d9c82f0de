//! Dummy classifiers, Monte Carlo chance levels and z-score significance.

mod report;

pub use report::{significance_table, ChanceReport, SignificanceRow};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dsp::TaskCode;
use crate::protocol::{run_online_session, tally, Decision, MazePlan, OnlineConfig, SessionMetrics};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NullKind {
    Stratified,
    Uniform,
}

impl NullKind {
    pub fn name(self) -> &'static str {
        match self {
            NullKind::Stratified => "STRATIFIED",
            NullKind::Uniform => "UNIFORM",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [NullKind::Stratified, NullKind::Uniform]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

/// Input-independent classifier. Priors are indexed by [`TaskCode::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullModel {
    pub kind: NullKind,
    pub priors: [f64; 3],
}

impl NullModel {
    pub fn uniform() -> Self {
        NullModel {
            kind: NullKind::Uniform,
            priors: [1.0 / 3.0; 3],
        }
    }

    pub fn stratified(priors: [f64; 3]) -> Result<Self> {
        if priors.iter().any(|p| !p.is_finite() || *p < 0.0)
            || (priors.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(format!("priors must be >= 0 and sum to 1, got {priors:?}")));
        }
        Ok(NullModel {
            kind: NullKind::Stratified,
            priors,
        })
    }

    /// Priors proportional to training-set class counts.
    pub fn from_counts(counts: [u64; 3]) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidInput("no training examples for class priors".into()));
        }
        Self::stratified(counts.map(|c| c as f64 / n as f64))
    }
}

/// Draws a class from the model's priors.
pub fn dummy_predict<R: Rng + ?Sized>(nm: &NullModel, rng: &mut R) -> TaskCode {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in nm.priors.iter().enumerate() {
        acc += p;
        if u < acc {
            return TaskCode::from_index(i);
        }
    }
    // Rounding left a sliver above the last cumulative value.
    let last = nm.priors.iter().rposition(|&p| p > 0.0).unwrap_or(2);
    TaskCode::from_index(last)
}

/// Mean and spread of one metric over Monte Carlo runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChanceDistribution {
    pub null_model: NullKind,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub runs: u64,
}

impl ChanceDistribution {
    pub fn standard_error(&self) -> f64 {
        self.std / (self.runs as f64).sqrt()
    }
}

/// Count/mean/M2 accumulator; merging is associative, so partial results
/// from independent run ranges combine to the same totals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    /// Sample standard deviation (n - 1 denominator).
    pub fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0).sqrt()
        }
    }
}

pub const OVERALL_METRIC: &str = "overall";

/// Metric names in report order: overall, then each task. All in percent.
pub fn metric_names() -> [&'static str; 4] {
    [OVERALL_METRIC, "LEFT_HAND", "RIGHT_HAND", "FEET"]
}

/// Metric values in [`metric_names`] order; `None` for tasks absent from the plan.
pub fn metric_values(m: &SessionMetrics) -> [Option<f64>; 4] {
    let t = |task| m.task_fraction(task).map(|f| 100.0 * f);
    [
        Some(m.overall_percent()),
        t(TaskCode::LeftHand),
        t(TaskCode::RightHand),
        t(TaskCode::Feet),
    ]
}

/// One simulated session of the dummy under the online rule. Run `r` draws
/// from ChaCha8 stream `r` of `seed`.
pub fn simulate_run(
    nm: &NullModel,
    plan: &MazePlan,
    cfg: &OnlineConfig,
    seed: u64,
    run: u64,
) -> Result<SessionMetrics> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    let mut source = |_t: u32| Some(Decision::Class(dummy_predict(nm, &mut rng)));
    let session = run_online_session(plan, cfg, &mut source)?;
    Ok(tally(&session.outcomes))
}

/// Simulates `runs` sessions and summarizes each metric.
pub fn monte_carlo(
    nm: &NullModel,
    plan: &MazePlan,
    cfg: &OnlineConfig,
    runs: u64,
    seed: u64,
) -> Result<Vec<ChanceDistribution>> {
    if runs == 0 {
        return Err(Error::Config("Monte Carlo needs at least one run".into()));
    }
    cfg.validate()?;
    let mut stats = [RunningStats::default(); 4];
    for r in 0..runs {
        let m = simulate_run(nm, plan, cfg, seed, r)?;
        for (s, v) in stats.iter_mut().zip(metric_values(&m)) {
            if let Some(v) = v {
                s.push(v);
            }
        }
    }
    Ok(metric_names()
        .iter()
        .zip(stats)
        .filter(|(_, s)| s.n > 0)
        .map(|(name, s)| ChanceDistribution {
            null_model: nm.kind,
            metric: name.to_string(),
            mean: s.mean,
            std: s.std(),
            runs: s.n,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZScore {
    pub z: f64,
    /// One-sided upper-tail p-value.
    pub p: f64,
    /// Zero-spread distribution; `p` is 0 or 1 by the sign of the difference.
    pub degenerate: bool,
}

pub fn z_score(observed: f64, mean: f64, std: f64) -> ZScore {
    let diff = observed - mean;
    if std <= 0.0 {
        let (z, p) = if diff > 0.0 {
            (f64::INFINITY, 0.0)
        } else if diff < 0.0 {
            (f64::NEG_INFINITY, 1.0)
        } else {
            (0.0, 1.0)
        };
        return ZScore {
            z,
            p,
            degenerate: true,
        };
    }
    let z = diff / std;
    let normal = Normal::standard();
    ZScore {
        z,
        p: normal.sf(z),
        degenerate: false,
    }
}

/// `P[Binomial(n, p) >= k]`.
pub fn binomial_upper_tail(n: u32, p: f64, k: u32) -> f64 {
    use statrs::distribution::{Binomial, DiscreteCDF};
    if k == 0 {
        return 1.0;
    }
    let b = Binomial::new(p, n as u64).expect("valid binomial");
    b.sf(k as u64 - 1)
}
