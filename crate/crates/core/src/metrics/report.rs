use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{success_rate, time_to_goal, MetricsError, ReferenceTrajectory, Result, TrialSet};

pub const REPORT_CSV_HEADER: &str = "scenario,policy,trials,success_rate,time_to_goal,frechet";

/// One (scenario, policy) line. `None` cells are undefined (no successes)
/// or missing (no reference), never zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub policy: String,
    pub trials: usize,
    pub success_rate: f64,
    pub time_to_goal: Option<f64>,
    pub frechet: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

/// Builds one row per trial set, in the order given. Fréchet is the mean over
/// all trials of a set, successful or not.
pub fn report(
    sets: &[TrialSet],
    references: &BTreeMap<String, ReferenceTrajectory>,
) -> Result<Report> {
    let mut rows = Vec::with_capacity(sets.len());
    for set in sets {
        let frechet = match references.get(&set.scenario) {
            Some(r) => {
                let mut sum = 0.0;
                for t in &set.trials {
                    sum += r.frechet_to(t)?;
                }
                Some(sum / set.trials.len() as f64)
            }
            None => None,
        };
        rows.push(ReportRow {
            scenario: set.scenario.clone(),
            policy: set.policy.clone(),
            trials: set.trials.len(),
            success_rate: success_rate(set)?,
            time_to_goal: time_to_goal(set)?,
            frechet,
        });
    }
    Ok(Report { rows })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_cell(s: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| MetricsError::Csv {
        line,
        reason: format!("bad number {s:?}"),
    })
}

impl Report {
    /// CSV with exact round-trip float formatting; undefined cells are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.scenario,
                r.policy,
                r.trials,
                r.success_rate,
                cell(r.time_to_goal),
                cell(r.frechet)
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == REPORT_CSV_HEADER => {}
            _ => {
                return Err(MetricsError::Csv {
                    line: 1,
                    reason: "missing header".into(),
                })
            }
        }
        let mut rows = Vec::new();
        for (i, l) in lines {
            let line = i + 1;
            if l.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(MetricsError::Csv {
                    line,
                    reason: format!("expected 6 fields, got {}", f.len()),
                });
            }
            rows.push(ReportRow {
                scenario: f[0].to_string(),
                policy: f[1].to_string(),
                trials: f[2].parse().map_err(|_| MetricsError::Csv {
                    line,
                    reason: "bad trial count".into(),
                })?,
                success_rate: parse_cell(f[3], line)?.ok_or_else(|| MetricsError::Csv {
                    line,
                    reason: "missing success rate".into(),
                })?,
                time_to_goal: parse_cell(f[4], line)?,
                frechet: parse_cell(f[5], line)?,
            });
        }
        Ok(Self { rows })
    }

    /// Column-aligned plain text table for terminals.
    pub fn to_text_table(&self) -> String {
        let header = [
            "Scenario",
            "Policy",
            "Trials",
            "Success Rate ↑",
            "Time to Goal ↓",
            "Fréchet ↓",
        ];
        let body: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.scenario.clone(),
                    r.policy.clone(),
                    r.trials.to_string(),
                    format!("{:.1}", r.success_rate),
                    r.time_to_goal
                        .map_or("undefined".into(), |t| format!("{t:.2}")),
                    r.frechet.map_or("missing".into(), |f| format!("{f:.3}")),
                ]
            })
            .collect();
        let mut widths = header.map(|h| h.chars().count());
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let fmt_row = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = fmt_row(&header.map(String::from));
        out.push('\n');
        out.push_str(&widths.map(|w| "-".repeat(w)).join("  "));
        out.push('\n');
        for row in &body {
            out.push_str(&fmt_row(row));
            out.push('\n');
        }
        out
    }
}
