use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Asymptotic critical values of `D * sqrt(r)`.
pub const KS_CRITICAL_1PCT: f64 = 1.63;
pub const KS_CRITICAL_5PCT: f64 = 1.36;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsStatistic {
    pub d: f64,
    pub d_sqrt_r: f64,
}

/// One-sample Kolmogorov-Smirnov distance between the empirical CDF of
/// `samples` and `cdf`, evaluated exactly at the jump points.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsStatistic> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig("KS sample contains non-finite values".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / r - f;
            let below = f - i as f64 / r;
            above.max(below)
        })
        .fold(0.0f64, f64::max);
    Ok(KsStatistic {
        d,
        d_sqrt_r: d * r.sqrt(),
    })
}
