use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dsp::N_CHANNELS;
use crate::ica::condition_number;
use crate::{Error, Result};

/// Scalp-plane electrode positions in montage order, in units of the
/// inter-electrode spacing.
pub const MONTAGE_XY: [(f64, f64); N_CHANNELS] = [
    (0.0, 2.0),   // Fz
    (-2.0, 1.0),  // FC3
    (0.0, 1.0),   // FCz
    (2.0, 1.0),   // FC4
    (-3.0, 0.0),  // C5
    (-2.0, 0.0),  // C3
    (-1.0, 0.0),  // C1
    (0.0, 0.0),   // Cz
    (1.0, 0.0),   // C2
    (2.0, 0.0),   // C4
    (3.0, 0.0),   // C6
    (-2.0, -1.0), // CP3
    (-1.0, -1.0), // CP1
    (0.0, -1.0),  // CPz
    (1.0, -1.0),  // CP2
    (2.0, -1.0),  // CP4
];

/// Gaussian volume-conduction kernel from sources (at the given channel
/// anchors) to all channels, with seeded multiplicative jitter. The kernel
/// width shrinks until the condition number is within `cap`.
pub fn spatial_mixing<R: Rng>(anchors: &[usize], cap: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    if !(cap > 1.0) {
        return Err(Error::Config(format!("mixing condition cap must exceed 1, got {cap}")));
    }
    if anchors.len() != N_CHANNELS || anchors.iter().any(|&a| a >= N_CHANNELS) {
        return Err(Error::Config("need one in-montage anchor per source".into()));
    }
    let jitter: Vec<f64> = (0..N_CHANNELS * N_CHANNELS)
        .map(|_| (1.0 + 0.1 * rng.sample::<f64, _>(StandardNormal)).clamp(0.8, 1.2))
        .collect();
    let mut sigma = 1.0;
    for _ in 0..200 {
        let a = DMatrix::from_fn(N_CHANNELS, N_CHANNELS, |c, s| {
            let (xc, yc) = MONTAGE_XY[c];
            let (xs, ys) = MONTAGE_XY[anchors[s]];
            let d2 = (xc - xs).powi(2) + (yc - ys).powi(2);
            (-d2 / (2.0 * sigma * sigma)).exp() * jitter[c * N_CHANNELS + s]
        });
        if condition_number(&a) <= cap {
            return Ok(a);
        }
        sigma *= 0.95;
    }
    Err(Error::Infeasible(format!("no mixing kernel meets condition cap {cap}")))
}
