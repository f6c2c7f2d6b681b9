//! End-to-end demo: annotate with the mock oracle, distill, run every policy
//! on the bundled scenarios and tabulate metrics. Every artifact is a pure
//! function of the config.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{
    build_dataset, load_training_samples, AnnotateError, DatasetConfig, DatasetSource, MockOracle,
    PromptTemplate,
};
use crate::costmap::CostmapError;
use crate::distill::{
    export_distilled, save_model, train, AttentionModel, DistillConfig, DistillError, ModelConfig,
};
use crate::metrics::{report, MetricsError, ReferenceTrajectory, Report, TrialSet};
use crate::sim::{
    run_episode, trajectory_to_csv, EpisodeConfig, EpisodeResult, Policy, ScenarioSpec, SimError,
    SynthMode, World,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("run file {path}: {reason}")]
    RunFile { path: PathBuf, reason: String },
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Distill(#[from] DistillError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Costmap(#[from] CostmapError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Bundled scenario ids.
    pub scenarios: Vec<String>,
    /// Episodes per (scenario, policy); trial `k` uses seed `seed + k`.
    pub trials: usize,
    /// Annotated records per scenario.
    pub records_per_scenario: usize,
    pub model: ModelConfig,
    pub distill: DistillConfig,
    pub episode: EpisodeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scenarios: ScenarioSpec::bundled_ids().map(String::from).collect(),
            trials: 2,
            records_per_scenario: 6,
            model: ModelConfig::default(),
            distill: DistillConfig::default(),
            episode: EpisodeConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(PipelineError::Config("no scenarios selected".into()));
        }
        if self.trials == 0 || self.records_per_scenario == 0 {
            return Err(PipelineError::Config(
                "trials and records per scenario must be at least 1".into(),
            ));
        }
        if self.model.rank != self.distill.rank {
            return Err(PipelineError::Config(format!(
                "model rank {} differs from distill rank {}",
                self.model.rank, self.distill.rank
            )));
        }
        self.model.validate()?;
        self.distill.validate()?;
        Ok(())
    }
}

/// Paths written by [`run_demo`], relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub datasets: Vec<String>,
    pub model: String,
    pub distilled_maps: Vec<String>,
    pub runs: Vec<String>,
    pub report_csv: String,
    pub report_table: String,
    pub final_loss: Option<f64>,
    pub report: Report,
}

/// Directory-safe form of a policy label.
pub fn policy_slug(label: &str) -> String {
    label.replace(':', "_")
}

/// Writes `<dir>/<scenario>/<policy>/seed_<s>.json` and the matching
/// trajectory CSV. Returns the JSON path.
pub fn write_episode(dir: &Path, result: &EpisodeResult) -> Result<PathBuf> {
    let sub = dir.join(&result.scenario).join(policy_slug(&result.policy));
    fs::create_dir_all(&sub)?;
    let stem = format!("seed_{:04}", result.seed);
    let json = sub.join(format!("{stem}.json"));
    fs::write(&json, result.to_json())?;
    fs::write(
        sub.join(format!("{stem}.csv")),
        trajectory_to_csv(&result.trajectory),
    )?;
    Ok(json)
}

fn is_episode_file(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "json")
        && p.file_name()
            .is_some_and(|n| n.to_string_lossy().starts_with("seed_"))
}

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_json(&p, out)?;
        } else if is_episode_file(&p) {
            out.push(p);
        }
    }
    Ok(())
}

/// Reads every `seed_*.json` episode file under `dir` and groups them by (scenario,
/// policy), in path order.
pub fn load_runs(dir: &Path) -> Result<Vec<TrialSet>> {
    let mut paths = Vec::new();
    collect_json(dir, &mut paths)?;
    let mut groups: Vec<((String, String), Vec<EpisodeResult>)> = Vec::new();
    for path in paths {
        let text = fs::read_to_string(&path)?;
        let result: EpisodeResult =
            serde_json::from_str(&text).map_err(|e| PipelineError::RunFile {
                path: path.clone(),
                reason: e.to_string(),
            })?;
        let key = (result.scenario.clone(), result.policy.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(result),
            None => groups.push((key, vec![result])),
        }
    }
    if groups.is_empty() {
        return Err(PipelineError::Config(format!(
            "no episode results under {}",
            dir.display()
        )));
    }
    groups
        .into_iter()
        .map(|(_, v)| Ok(TrialSet::new(v)?))
        .collect()
}

fn rel(base: &Path, p: &Path) -> String {
    p.strip_prefix(base)
        .unwrap_or(p)
        .to_string_lossy()
        .replace('\\', "/")
}

fn bundled(id: &str) -> Result<ScenarioSpec> {
    ScenarioSpec::bundled(id).ok_or_else(|| PipelineError::UnknownScenario(id.into()))
}

/// Runs annotate -> distill -> sim -> report into `out`.
pub fn run_demo(cfg: &PipelineConfig, out: &Path) -> Result<PipelineSummary> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let template = PromptTemplate::default();

    let mut datasets = Vec::new();
    let mut samples = Vec::new();
    for id in &cfg.scenarios {
        let spec = bundled(id)?;
        let dir = out.join("dataset").join(id);
        let ds_cfg = DatasetConfig {
            history: cfg.model.history,
            count: cfg.records_per_scenario,
            grid_width: cfg.model.grid_width,
            grid_height: cfg.model.grid_height,
            seed: cfg.seed,
            max_clips: 64,
            episode: cfg.episode,
        };
        let mut oracle = MockOracle::for_scenario(&spec);
        build_dataset(
            &DatasetSource::Scenario(spec),
            &mut oracle,
            &template,
            &ds_cfg,
            &dir,
        )?;
        for mut s in load_training_samples(&dir, &cfg.model)? {
            s.id = format!("{id}_{}", s.id);
            samples.push(s);
        }
        datasets.push(rel(out, &dir));
    }

    let mut model = AttentionModel::new(cfg.model, cfg.seed)?;
    let distill_cfg = DistillConfig {
        seed: cfg.seed,
        ..cfg.distill
    };
    let train_report = train(&mut model, &samples, &distill_cfg)?;
    let model_path = out.join("model.vlad");
    save_model(&model, &model_path)?;
    fs::write(
        out.join("train_loss.json"),
        serde_json::to_string_pretty(&train_report)?,
    )?;

    let maps_dir = out.join("distilled");
    fs::create_dir_all(&maps_dir)?;
    let mut distilled_maps = Vec::new();
    for s in &samples {
        let p = maps_dir.join(format!("{}.agrid", s.id));
        export_distilled(&model, &s.sequence, &p)?;
        distilled_maps.push(rel(out, &p));
    }

    let policies = [
        Policy::GoalOnly,
        Policy::PlannerWithMap(SynthMode::GroundTruthSocial),
        Policy::ViLad(Box::new(model)),
    ];
    let runs_dir = out.join("runs");
    let mut runs = Vec::new();
    let mut sets = Vec::new();
    let mut references = BTreeMap::new();
    for id in &cfg.scenarios {
        let spec = bundled(id)?;
        if let Some(r) = ReferenceTrajectory::bundled(id) {
            references.insert(id.clone(), r);
        }
        for policy in &policies {
            let mut results = Vec::with_capacity(cfg.trials);
            for k in 0..cfg.trials {
                let world = World::new(
                    spec.instantiate(cfg.seed + k as u64),
                    cfg.episode.planner.robot_radius,
                    cfg.episode.planner.goal_tolerance,
                )?;
                let result = run_episode(world, policy.clone(), cfg.episode)?;
                runs.push(rel(out, &write_episode(&runs_dir, &result)?));
                results.push(result);
            }
            sets.push(TrialSet::new(results)?);
        }
    }

    let table = report(&sets, &references)?;
    fs::write(out.join("report.csv"), table.to_csv())?;
    fs::write(out.join("report.txt"), table.to_text_table())?;
    Ok(PipelineSummary {
        datasets,
        model: "model.vlad".into(),
        distilled_maps,
        runs,
        report_csv: "report.csv".into(),
        report_table: "report.txt".into(),
        final_loss: train_report.final_loss(),
        report: table,
    })
}
