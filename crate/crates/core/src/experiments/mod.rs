//! Monte-Carlo studies of the test on synthetic 4×3 latent block models.
//!
//! * `Realizable`: fit the true (4, 3) structure and compare the statistic's
//!   distribution with Tracy-Widom (Q-Q data, exceedance ratios, KS distance).
//! * `Unrealizable`: fit too few clusters and measure how fast the statistic grows.
//! * `Accuracy`: run the sequential selection on data whose block means are
//!   shrunk toward a common value and count how often (4, 3) is selected.
//!
//! Every (size, t, trial) cell draws its data from a seed derived from the
//! plan's base seed and the cell coordinates, so any subset of trials can be
//! run separately and merged into the same report.

mod ks;
mod summary;

pub use ks::{ks_statistic, KsStatistic, KS_CRITICAL_1PCT, KS_CRITICAL_5PCT};
pub use summary::{
    exceedance_by_size, AccuracyCell, AccuracySummary, Exceedance, RealizableCell, RealizableSummary, ScalingCell,
    ScalingSeries, Summary, UnrealizableSummary, EXCEEDANCE_ALPHAS,
};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocluster::{align_labels, ward_cocluster, ClusteringRequest};
use crate::error::{Error, Result};
use crate::generator::{generate, interpolate_means, presets, Family, GeneratorSpec};
use crate::gof::{sequential_select, test_statistic, TestConfig, DEFAULT_L_MAX};
use crate::model::{BlockStructure, ObservedMatrix, StepError};
use crate::rng::derive_seed;
use crate::spectral::SpectralConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Row and column cluster counts of the simulated models.
pub const TRUE_CLUSTERS: (usize, usize) = (4, 3);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    Realizable,
    Unrealizable,
    Accuracy,
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Study::Realizable => "realizable",
            Study::Unrealizable => "unrealizable",
            Study::Accuracy => "accuracy",
        })
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "realizable" => Ok(Study::Realizable),
            "unrealizable" => Ok(Study::Unrealizable),
            "accuracy" => Ok(Study::Accuracy),
            other => Err(Error::InvalidConfig(format!("unknown study '{other}'"))),
        }
    }
}

/// Grid size: `Desk` runs in minutes on a workstation, `Paper` is the full
/// published grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::InvalidConfig(format!("unknown scale '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub study: Study,
    pub family: Family,
    pub size_grid: Vec<(usize, usize)>,
    pub trials: usize,
    /// Index of the first trial; trials `first_trial..first_trial + trials` are run.
    #[serde(default)]
    pub first_trial: usize,
    pub alpha: f64,
    /// Mean-shrinkage steps (accuracy study); `[0]` for the other studies.
    pub t_grid: Vec<u32>,
    /// Hypotheses fitted in the realizable and unrealizable studies.
    pub hypotheses: Vec<(usize, usize)>,
    pub l_max: usize,
    pub spectral: SpectralConfig,
    pub base_seed: u64,
}

fn sizes(base: (usize, usize), steps: impl IntoIterator<Item = usize>) -> Vec<(usize, usize)> {
    steps.into_iter().map(|i| (base.0 * i, base.1 * i)).collect()
}

impl ExperimentPlan {
    pub fn preset(study: Study, family: Family, scale: Scale, base_seed: u64) -> Self {
        let paper = scale == Scale::Paper;
        let (size_grid, trials, t_grid, hypotheses, alpha) = match study {
            Study::Realizable => (
                sizes((300, 225), 1..=if paper { 10 } else { 5 }),
                if paper { 1000 } else { 100 },
                vec![0],
                vec![TRUE_CLUSTERS],
                0.05,
            ),
            Study::Unrealizable => (
                sizes((200, 150), 1..=if paper { 10 } else { 6 }),
                100,
                vec![0],
                vec![(1, 1), (3, 3)],
                0.01,
            ),
            Study::Accuracy => {
                if paper {
                    (sizes((40, 30), 1..=10), 1000, (0..=9).collect(), vec![], 0.01)
                } else {
                    (sizes((40, 30), [1, 3, 5, 10]), 50, vec![0, 3, 6, 9], vec![], 0.01)
                }
            }
        };
        Self {
            study,
            family,
            size_grid,
            trials,
            first_trial: 0,
            alpha,
            t_grid,
            hypotheses,
            l_max: DEFAULT_L_MAX,
            spectral: SpectralConfig::default(),
            base_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.size_grid.is_empty() {
            return Err(Error::InvalidConfig("size grid is empty".into()));
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|&t| t > 9) {
            return Err(Error::InvalidConfig("t grid must be nonempty with values in 0..=9".into()));
        }
        if self.study != Study::Accuracy && self.hypotheses.is_empty() {
            return Err(Error::InvalidConfig("no hypotheses to fit".into()));
        }
        let (k, h) = TRUE_CLUSTERS;
        for &(n, p) in &self.size_grid {
            if n < k.max(2) || p < h.max(2) {
                return Err(Error::InvalidConfig(format!("size {n}x{p} is too small")));
            }
            if self.study == Study::Accuracy && self.l_max > n.min(p) + 1 {
                return Err(Error::InvalidConfig(format!(
                    "l_max {} exceeds min(n, p) + 1 for size {n}x{p}",
                    self.l_max
                )));
            }
            if let Some(&(k0, h0)) = self.hypotheses.iter().find(|&&(k0, h0)| k0 > n || h0 > p) {
                return Err(Error::InvalidConfig(format!(
                    "hypothesis ({k0},{h0}) does not fit size {n}x{p}"
                )));
            }
        }
        if self.study == Study::Accuracy {
            TestConfig {
                alpha: self.alpha,
                l_max: self.l_max,
                ..TestConfig::default()
            }
            .validate()?;
        }
        self.spectral.validate()
    }

    /// Seed of one (size, t, trial) cell.
    pub fn cell_seed(&self, n: usize, p: usize, t: u32, trial: usize) -> u64 {
        derive_seed(
            self.base_seed,
            &[n as u64, p as u64, u64::from(t), trial as u64],
        )
    }

    pub fn generator_spec(&self, n: usize, p: usize, t: u32, trial: usize) -> GeneratorSpec {
        let base = presets::paper_4x3(self.family);
        GeneratorSpec {
            family: self.family,
            params: interpolate_means(&base, t, self.family.interpolation_center()),
            n,
            p,
            seed: self.cell_seed(n, p, t, trial),
        }
    }

    fn cells(&self) -> Vec<(usize, usize, u32, usize)> {
        let mut cells = Vec::with_capacity(self.size_grid.len() * self.t_grid.len() * self.trials);
        for &t in &self.t_grid {
            for &(n, p) in &self.size_grid {
                for trial in self.first_trial..self.first_trial + self.trials {
                    cells.push((n, p, t, trial));
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisOutcome {
    #[serde(rename = "K0")]
    pub k0: usize,
    #[serde(rename = "H0")]
    pub h0: usize,
    #[serde(rename = "statistic_T")]
    pub statistic_t: Option<f64>,
    pub lambda1_hat: Option<f64>,
    /// Whether the estimated structure equals the truth up to relabeling
    /// (only checked for the true cluster counts).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recovered: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<StepError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub selected: Option<(usize, usize)>,
    pub correct: bool,
    pub tests_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub p: usize,
    pub t: u32,
    pub trial: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub outcomes: Vec<HypothesisOutcome>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selection: Option<SelectionOutcome>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<StepError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    pub plan: ExperimentPlan,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub metadata: ReportMetadata,
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

fn fit_hypothesis(
    matrix: &ObservedMatrix,
    truth: &BlockStructure,
    (k0, h0): (usize, usize),
    spectral: &SpectralConfig,
) -> HypothesisOutcome {
    let mut outcome = HypothesisOutcome {
        k0,
        h0,
        statistic_t: None,
        lambda1_hat: None,
        recovered: None,
        error: None,
    };
    let fitted = ward_cocluster(&ClusteringRequest { matrix, k0, h0 }).and_then(|structure| {
        if (k0, h0) == (truth.k(), truth.h()) {
            outcome.recovered = Some(align_labels(&structure, truth)?.exact());
        }
        test_statistic(matrix, &structure, spectral)
    });
    match fitted {
        Ok(stat) => {
            outcome.statistic_t = Some(stat.t);
            outcome.lambda1_hat = Some(stat.lambda1_hat);
        }
        Err(e) => outcome.error = Some(StepError::from(&e)),
    }
    outcome
}

fn run_cell(plan: &ExperimentPlan, (n, p, t, trial): (usize, usize, u32, usize)) -> TrialRecord {
    let spec = plan.generator_spec(n, p, t, trial);
    let mut record = TrialRecord {
        n,
        p,
        t,
        trial,
        seed: spec.seed,
        outcomes: Vec::new(),
        selection: None,
        error: None,
    };
    let (matrix, truth) = match generate(&spec) {
        Ok(generated) => generated,
        Err(e) => {
            record.error = Some(StepError::from(&e));
            return record;
        }
    };
    match plan.study {
        Study::Realizable | Study::Unrealizable => {
            record.outcomes = plan
                .hypotheses
                .iter()
                .map(|&kh| fit_hypothesis(&matrix, &truth, kh, &plan.spectral))
                .collect();
        }
        Study::Accuracy => {
            let cfg = TestConfig {
                alpha: plan.alpha,
                l_max: plan.l_max,
                spectral: plan.spectral,
                ..TestConfig::default()
            };
            match sequential_select(&matrix, &cfg) {
                Ok(trace) => {
                    record.selection = Some(SelectionOutcome {
                        selected: trace.selected,
                        correct: trace.selected == Some(TRUE_CLUSTERS),
                        tests_run: trace.steps.len(),
                    })
                }
                Err(e) => record.error = Some(StepError::from(&e)),
            }
        }
    }
    record
}

fn notes(plan: &ExperimentPlan) -> Vec<String> {
    let mut notes = vec![format!(
        "true model: {} 4x3 latent block model, uniform row and column labels",
        plan.family
    )];
    match plan.study {
        Study::Realizable => notes.push(
            "Q-Q theoretical quantiles are TW1 quantiles at plotting positions (i - 0.5) / r".into(),
        ),
        Study::Unrealizable => notes.push(format!(
            "fitted hypotheses {:?} lie strictly below the true (4,3); slope is least squares of ln(mean T) on ln(n)",
            plan.hypotheses
        )),
        Study::Accuracy => notes.push(format!(
            "block means shrunk as (1 - t/10)(B - c) + c with c = {}",
            plan.family.interpolation_center()
        )),
    }
    notes
}

/// Assembles a report from records; the summary is a function of the records alone.
pub fn assemble_report(plan: &ExperimentPlan, records: Vec<TrialRecord>) -> StudyReport {
    let summary = Summary::from_records(plan, &records);
    StudyReport {
        metadata: ReportMetadata {
            tool_version: TOOL_VERSION.to_string(),
            plan: plan.clone(),
            notes: notes(plan),
        },
        records,
        summary,
    }
}

fn run_study(plan: &ExperimentPlan, expected: Study) -> Result<StudyReport> {
    if plan.study != expected {
        return Err(Error::InvalidConfig(format!(
            "plan is for the {} study, not {expected}",
            plan.study
        )));
    }
    plan.validate()?;
    let cells = plan.cells();
    tracing::info!(study = %plan.study, family = %plan.family, cells = cells.len(), "running study");
    let records: Vec<TrialRecord> = cells.into_par_iter().map(|cell| run_cell(plan, cell)).collect();
    Ok(assemble_report(plan, records))
}

pub fn run_realizable(plan: &ExperimentPlan) -> Result<StudyReport> {
    run_study(plan, Study::Realizable)
}

pub fn run_unrealizable(plan: &ExperimentPlan) -> Result<StudyReport> {
    run_study(plan, Study::Unrealizable)
}

pub fn run_accuracy(plan: &ExperimentPlan) -> Result<StudyReport> {
    run_study(plan, Study::Accuracy)
}

pub fn run(plan: &ExperimentPlan) -> Result<StudyReport> {
    run_study(plan, plan.study)
}

impl StudyReport {
    /// Combines reports over disjoint trial ranges of otherwise identical plans.
    pub fn merge(parts: Vec<StudyReport>) -> Result<StudyReport> {
        let first = parts.first().ok_or(Error::EmptySample)?;
        let mut plan = first.metadata.plan.clone();
        let same = |a: &ExperimentPlan| {
            let mut a = a.clone();
            a.trials = plan.trials;
            a.first_trial = plan.first_trial;
            a == plan
        };
        if let Some(bad) = parts.iter().find(|r| !same(&r.metadata.plan)) {
            return Err(Error::InvalidConfig(format!(
                "cannot merge reports of different plans (base seed {} vs {})",
                plan.base_seed, bad.metadata.plan.base_seed
            )));
        }
        let mut ranges: Vec<(usize, usize)> = parts
            .iter()
            .map(|r| {
                let p = &r.metadata.plan;
                (p.first_trial, p.first_trial + p.trials)
            })
            .collect();
        ranges.sort_unstable();
        if ranges.windows(2).any(|w| w[0].1 != w[1].0) {
            return Err(Error::InvalidConfig(
                "trial ranges must be contiguous and disjoint".into(),
            ));
        }
        plan.first_trial = ranges[0].0;
        plan.trials = ranges[ranges.len() - 1].1 - ranges[0].0;

        let t_pos = |t: u32| plan.t_grid.iter().position(|&x| x == t);
        let size_pos = |n: usize, p: usize| plan.size_grid.iter().position(|&s| s == (n, p));
        let mut records: Vec<TrialRecord> = parts.into_iter().flat_map(|r| r.records).collect();
        records.sort_by_key(|r| (t_pos(r.t), size_pos(r.n, r.p), r.trial));
        Ok(assemble_report(&plan, records))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Writes the plot-ready CSV files of this study into `dir`.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        summary::write_csv(&self.summary, dir.as_ref())
    }
}
