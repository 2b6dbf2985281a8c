use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ks::{ks_statistic, KsStatistic, KS_CRITICAL_1PCT, KS_CRITICAL_5PCT};
use super::{ExperimentPlan, Study, TrialRecord};
use crate::error::Result;
use crate::tracy_widom::{tw1_upper_quantile, Tw1Table};

/// Significance levels at which realizable exceedance ratios are reported.
pub const EXCEEDANCE_ALPHAS: [f64; 3] = [0.01, 0.05, 0.1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "study", rename_all = "lowercase")]
pub enum Summary {
    Realizable(RealizableSummary),
    Unrealizable(UnrealizableSummary),
    Accuracy(AccuracySummary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub alpha: f64,
    pub quantile: f64,
    /// Fraction of valid trials with `T >= quantile`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizableCell {
    pub n: usize,
    pub p: usize,
    pub valid: usize,
    pub failed: usize,
    /// Fraction of trials whose estimated structure matched the truth.
    pub recovery_rate: f64,
    pub exceedance: Vec<Exceedance>,
    pub ks: Option<KsStatistic>,
    pub ks_exceeds_1pct: Option<bool>,
    pub ks_exceeds_5pct: Option<bool>,
    /// Sorted statistics of the valid trials.
    pub sorted_t: Vec<f64>,
    /// TW1 quantiles at plotting positions `(i - 0.5) / r`, paired with `sorted_t`.
    pub theoretical_quantiles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizableSummary {
    pub cells: Vec<RealizableCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCell {
    pub n: usize,
    pub p: usize,
    pub valid: usize,
    pub failed: usize,
    #[serde(rename = "mean_T")]
    pub mean_t: Option<f64>,
    #[serde(rename = "mean_T_over_n53")]
    pub mean_t_over_n53: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSeries {
    #[serde(rename = "K0")]
    pub k0: usize,
    #[serde(rename = "H0")]
    pub h0: usize,
    pub cells: Vec<ScalingCell>,
    /// Least-squares slope of `ln(mean T)` against `ln(n)`.
    pub loglog_slope: Option<f64>,
    /// max / min of `mean T / n^(5/3)` over the third and later sizes.
    pub flatness_ratio: Option<f64>,
    /// Smallest per-size `mean T / t(0.01)`.
    pub min_mean_over_quantile: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnrealizableSummary {
    pub series: Vec<ScalingSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub t: u32,
    pub n: usize,
    pub p: usize,
    pub trials: usize,
    pub correct: usize,
    pub exhausted: usize,
    pub failed: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub cells: Vec<AccuracyCell>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Ordinary least-squares slope of `y` on `x`.
pub(crate) fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let mx = mean(x)?;
    let my = mean(y)?;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if x.len() < 2 || sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

fn by_size<'a>(
    plan: &ExperimentPlan,
    records: &'a [TrialRecord],
    t: u32,
) -> Vec<((usize, usize), Vec<&'a TrialRecord>)> {
    plan.size_grid
        .iter()
        .map(|&(n, p)| {
            let rs = records
                .iter()
                .filter(|r| r.n == n && r.p == p && r.t == t)
                .collect();
            ((n, p), rs)
        })
        .collect()
}

impl Summary {
    pub fn from_records(plan: &ExperimentPlan, records: &[TrialRecord]) -> Summary {
        match plan.study {
            Study::Realizable => Summary::Realizable(realizable(plan, records)),
            Study::Unrealizable => Summary::Unrealizable(unrealizable(plan, records)),
            Study::Accuracy => Summary::Accuracy(accuracy(plan, records)),
        }
    }
}

fn realizable(plan: &ExperimentPlan, records: &[TrialRecord]) -> RealizableSummary {
    let table = Tw1Table::embedded();
    let (k0, h0) = plan.hypotheses[0];
    let cells = by_size(plan, records, plan.t_grid[0])
        .into_iter()
        .map(|((n, p), rs)| {
            let outcomes: Vec<_> = rs
                .iter()
                .filter_map(|r| r.outcomes.iter().find(|o| o.k0 == k0 && o.h0 == h0))
                .collect();
            let mut sorted_t: Vec<f64> = outcomes.iter().filter_map(|o| o.statistic_t).collect();
            sorted_t.sort_by(f64::total_cmp);
            let r = sorted_t.len();
            let recovered = outcomes.iter().filter(|o| o.recovered == Some(true)).count();
            let exceedance = EXCEEDANCE_ALPHAS
                .iter()
                .map(|&alpha| {
                    let quantile = tw1_upper_quantile(alpha).expect("alpha in range");
                    let above = sorted_t.iter().filter(|&&t| t >= quantile).count();
                    Exceedance {
                        alpha,
                        quantile,
                        ratio: (r > 0).then(|| above as f64 / r as f64),
                    }
                })
                .collect();
            let ks = ks_statistic(&sorted_t, |s| table.cdf(s)).ok();
            let theoretical_quantiles = (1..=r)
                .map(|i| table.quantile((i as f64 - 0.5) / r as f64))
                .collect();
            RealizableCell {
                n,
                p,
                valid: r,
                failed: rs.len() - r,
                recovery_rate: if rs.is_empty() { 0.0 } else { recovered as f64 / rs.len() as f64 },
                exceedance,
                ks_exceeds_1pct: ks.map(|k| k.d_sqrt_r >= KS_CRITICAL_1PCT),
                ks_exceeds_5pct: ks.map(|k| k.d_sqrt_r >= KS_CRITICAL_5PCT),
                ks,
                sorted_t,
                theoretical_quantiles,
            }
        })
        .collect();
    RealizableSummary { cells }
}

fn unrealizable(plan: &ExperimentPlan, records: &[TrialRecord]) -> UnrealizableSummary {
    let q01 = tw1_upper_quantile(0.01).expect("alpha in range");
    let groups = by_size(plan, records, plan.t_grid[0]);
    let series = plan
        .hypotheses
        .iter()
        .map(|&(k0, h0)| {
            let cells: Vec<ScalingCell> = groups
                .iter()
                .map(|&((n, p), ref rs)| {
                    let ts: Vec<f64> = rs
                        .iter()
                        .filter_map(|r| r.outcomes.iter().find(|o| o.k0 == k0 && o.h0 == h0))
                        .filter_map(|o| o.statistic_t)
                        .collect();
                    let mean_t = mean(&ts);
                    ScalingCell {
                        n,
                        p,
                        valid: ts.len(),
                        failed: rs.len() - ts.len(),
                        mean_t,
                        mean_t_over_n53: mean_t.map(|m| m / (n as f64).powf(5.0 / 3.0)),
                    }
                })
                .collect();
            let positive: Option<Vec<(f64, f64)>> = cells
                .iter()
                .map(|c| c.mean_t.filter(|&m| m > 0.0).map(|m| ((c.n as f64).ln(), m.ln())))
                .collect();
            let loglog_slope = positive.and_then(|pts| {
                let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                ols_slope(&x, &y)
            });
            let tail: Option<Vec<f64>> = cells.iter().skip(2).map(|c| c.mean_t_over_n53).collect();
            let flatness_ratio = tail.filter(|v| !v.is_empty()).and_then(|v| {
                let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                (min > 0.0).then(|| max / min)
            });
            let min_mean_over_quantile = cells
                .iter()
                .map(|c| c.mean_t.map(|m| m / q01))
                .collect::<Option<Vec<f64>>>()
                .and_then(|v| v.into_iter().reduce(f64::min));
            ScalingSeries {
                k0,
                h0,
                cells,
                loglog_slope,
                flatness_ratio,
                min_mean_over_quantile,
            }
        })
        .collect();
    UnrealizableSummary { series }
}

fn accuracy(plan: &ExperimentPlan, records: &[TrialRecord]) -> AccuracySummary {
    let mut cells = Vec::new();
    for &t in &plan.t_grid {
        for ((n, p), rs) in by_size(plan, records, t) {
            let correct = rs
                .iter()
                .filter(|r| r.selection.as_ref().is_some_and(|s| s.correct))
                .count();
            let exhausted = rs
                .iter()
                .filter(|r| r.selection.as_ref().is_some_and(|s| s.selected.is_none()))
                .count();
            let failed = rs.iter().filter(|r| r.selection.is_none()).count();
            cells.push(AccuracyCell {
                t,
                n,
                p,
                trials: rs.len(),
                correct,
                exhausted,
                failed,
                accuracy: if rs.is_empty() { 0.0 } else { correct as f64 / rs.len() as f64 },
            });
        }
    }
    AccuracySummary { cells }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_file(dir: &Path, name: &str, body: String, out: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, body)?;
    out.push(path);
    Ok(())
}

fn scaling_csv(series: &ScalingSeries) -> String {
    let mut s = String::from("n,mean_T,mean_T_over_n53\n");
    for c in &series.cells {
        let _ = writeln!(s, "{},{},{}", c.n, opt(c.mean_t), opt(c.mean_t_over_n53));
    }
    s
}

/// Writes plot-ready CSV files for `summary` into `dir`, creating it if needed.
pub(crate) fn write_csv(summary: &Summary, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    match summary {
        Summary::Realizable(sum) => {
            let mut exc = String::from("n,p,alpha,quantile,exceedance\n");
            let mut ks = String::from("n,p,r,D,D_sqrt_r,exceeds_1pct,exceeds_5pct\n");
            for c in &sum.cells {
                let mut qq = String::from("theoretical_quantile,sample_quantile\n");
                for (q, t) in c.theoretical_quantiles.iter().zip(&c.sorted_t) {
                    let _ = writeln!(qq, "{q},{t}");
                }
                write_file(dir, &format!("qq_{}.csv", c.n), qq, &mut out)?;
                for e in &c.exceedance {
                    let _ = writeln!(exc, "{},{},{},{},{}", c.n, c.p, e.alpha, e.quantile, opt(e.ratio));
                }
                if let Some(k) = c.ks {
                    let _ = writeln!(
                        ks,
                        "{},{},{},{},{},{},{}",
                        c.n,
                        c.p,
                        c.valid,
                        k.d,
                        k.d_sqrt_r,
                        k.d_sqrt_r >= KS_CRITICAL_1PCT,
                        k.d_sqrt_r >= KS_CRITICAL_5PCT
                    );
                }
            }
            write_file(dir, "exceedance.csv", exc, &mut out)?;
            write_file(dir, "ks.csv", ks, &mut out)?;
        }
        Summary::Unrealizable(sum) => {
            if let Some(first) = sum.series.first() {
                write_file(dir, "scaling.csv", scaling_csv(first), &mut out)?;
            }
            for series in &sum.series {
                let name = format!("scaling_{}x{}.csv", series.k0, series.h0);
                write_file(dir, &name, scaling_csv(series), &mut out)?;
            }
        }
        Summary::Accuracy(sum) => {
            let mut acc = String::from("t,n,accuracy\n");
            for c in &sum.cells {
                let _ = writeln!(acc, "{},{},{}", c.t, c.n, c.accuracy);
            }
            write_file(dir, "accuracy.csv", acc, &mut out)?;
        }
    }
    Ok(out)
}

/// Exceedance ratio at `alpha` for each size, keyed by `n`.
pub fn exceedance_by_size(summary: &RealizableSummary, alpha: f64) -> BTreeMap<usize, f64> {
    summary
        .cells
        .iter()
        .filter_map(|c| {
            c.exceedance
                .iter()
                .find(|e| e.alpha == alpha)
                .and_then(|e| e.ratio.map(|r| (c.n, r)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let x: Vec<f64> = [100.0f64, 200.0, 400.0, 800.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = x.iter().map(|v| 5.0 / 3.0 * v + 0.3).collect();
        assert!((ols_slope(&x, &y).unwrap() - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(ols_slope(&[1.0], &[2.0]), None);
    }
}
