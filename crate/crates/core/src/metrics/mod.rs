//! Success rate, time to goal, discrete Fréchet distance to a reference
//! trajectory, and the per-(scenario, policy) report table.

mod frechet;
mod report;

pub use frechet::{frechet, resample, trajectory_frechet, Point, RESAMPLE_SPACING_M};
pub use report::{report, Report, ReportRow, REPORT_CSV_HEADER};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{trajectory_from_csv, EpisodeResult, EpisodeStatus, TrajectorySample};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("report csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Trials of one policy on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSet {
    pub scenario: String,
    pub policy: String,
    pub trials: Vec<EpisodeResult>,
}

impl TrialSet {
    /// Groups results, checking they all share scenario and policy.
    pub fn new(trials: Vec<EpisodeResult>) -> Result<Self> {
        let first = trials
            .first()
            .ok_or_else(|| MetricsError::Domain("empty trial set".into()))?;
        let (scenario, policy) = (first.scenario.clone(), first.policy.clone());
        if let Some(t) = trials
            .iter()
            .find(|t| t.scenario != scenario || t.policy != policy)
        {
            return Err(MetricsError::Domain(format!(
                "trial {}/{} does not match {scenario}/{policy}",
                t.scenario, t.policy
            )));
        }
        Ok(Self {
            scenario,
            policy,
            trials,
        })
    }
}

/// Percentage of trials that reached the goal.
pub fn success_rate(set: &TrialSet) -> Result<f64> {
    if set.trials.is_empty() {
        return Err(MetricsError::Domain(
            "success rate of an empty trial set".into(),
        ));
    }
    let ok = set
        .trials
        .iter()
        .filter(|t| t.status == EpisodeStatus::ReachedGoal)
        .count();
    Ok(100.0 * ok as f64 / set.trials.len() as f64)
}

/// Mean time over successful trials; `None` when nothing succeeded.
pub fn time_to_goal(set: &TrialSet) -> Result<Option<f64>> {
    if set.trials.is_empty() {
        return Err(MetricsError::Domain(
            "time to goal of an empty trial set".into(),
        ));
    }
    let times: Vec<f64> = set
        .trials
        .iter()
        .filter(|t| t.status == EpisodeStatus::ReachedGoal)
        .filter_map(|t| t.time_to_goal)
        .collect();
    Ok((!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    TeleopRecording,
    Scripted,
}

/// Timed reference polyline a policy is compared against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTrajectory {
    pub scenario: String,
    pub provenance: Provenance,
    pub samples: Vec<TrajectorySample>,
}

const BUNDLED_REFERENCES: [(&str, &str); 4] = [
    ("scen1", include_str!("../../references/scen1.csv")),
    ("scen2", include_str!("../../references/scen2.csv")),
    ("scen3", include_str!("../../references/scen3.csv")),
    ("scen4", include_str!("../../references/scen4.csv")),
];

impl ReferenceTrajectory {
    pub fn new(
        scenario: impl Into<String>,
        provenance: Provenance,
        samples: Vec<TrajectorySample>,
    ) -> Result<Self> {
        if samples.len() < 2 {
            return Err(MetricsError::Domain(
                "reference needs at least 2 points".into(),
            ));
        }
        if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(MetricsError::Domain(
                "reference timestamps must strictly increase".into(),
            ));
        }
        Ok(Self {
            scenario: scenario.into(),
            provenance,
            samples,
        })
    }

    pub fn from_csv(
        scenario: impl Into<String>,
        provenance: Provenance,
        text: &str,
    ) -> Result<Self> {
        Self::new(scenario, provenance, trajectory_from_csv(text)?)
    }

    pub fn load(
        scenario: impl Into<String>,
        provenance: Provenance,
        path: impl AsRef<std::path::Path>,
    ) -> Result<Self> {
        Self::from_csv(scenario, provenance, &std::fs::read_to_string(path)?)
    }

    /// Scripted reference shipped for a bundled scenario.
    pub fn bundled(scenario: &str) -> Option<Self> {
        BUNDLED_REFERENCES
            .iter()
            .find(|(id, _)| *id == scenario)
            .map(|(id, text)| {
                Self::from_csv(*id, Provenance::Scripted, text).expect("bundled reference parses")
            })
    }

    pub fn path(&self) -> Vec<Point> {
        self.samples.iter().map(|s| (s.x, s.y)).collect()
    }

    /// Fréchet distance from a trial's trajectory to this reference.
    pub fn frechet_to(&self, trial: &EpisodeResult) -> Result<f64> {
        trajectory_frechet(&trial.path(), &self.path())
    }
}
