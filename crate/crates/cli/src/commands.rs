use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use vilad_core::annotate::{
    build_dataset, load_index, load_training_samples, AnnotationOracle, DatasetConfig,
    DatasetSource, MockOracle, PromptTemplate, RemoteOracle,
};
use vilad_core::costmap::{save_grid, save_jet_png};
use vilad_core::distill::{export_distilled, save_model, train, AttentionModel, DistillConfig};
use vilad_core::metrics::{report, Provenance, ReferenceTrajectory};
use vilad_core::pipeline::{load_runs, run_demo, write_episode, PipelineConfig};
use vilad_core::planner::{Candidate, VelocityWindow};
use vilad_core::sim::{run_episode, Episode, Policy, ScenarioSpec, World};
use vilad_server::ServerConfig;

use crate::config::{env_overrides, GlobalConfig};
use crate::{
    AnnotateArgs, Cli, CliError, Command, DemoArgs, DistillArgs, MetricsCommand, OracleKind,
    PipelineCommand, PlanArgs, ReportArgs, ServeArgs, SimCommand, SimRunArgs,
};

const RUN_FILE: &str = "run.json";

#[derive(Debug, Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    tool: &'static str,
    version: &'static str,
    command: Vec<String>,
    config: &'a GlobalConfig,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_file(path: &Path) -> Result<FileHash, CliError> {
    Ok(FileHash {
        path: path.to_string_lossy().into_owned(),
        sha256: sha256(&fs::read(path)?),
    })
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Hashes of every file under `dir` except `run.json`, with paths relative to `dir`.
fn hash_tree(dir: &Path) -> Result<Vec<FileHash>, CliError> {
    let mut files = Vec::new();
    walk(dir, &mut files)?;
    files
        .into_iter()
        .filter(|p| p.file_name().is_none_or(|n| n != RUN_FILE))
        .map(|p| {
            let rel = p
                .strip_prefix(dir)
                .unwrap_or(&p)
                .to_string_lossy()
                .replace('\\', "/");
            Ok(FileHash {
                path: rel,
                sha256: sha256(&fs::read(&p)?),
            })
        })
        .collect()
}

fn write_run_record(
    dir: &Path,
    cfg: &GlobalConfig,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
) -> Result<(), CliError> {
    let record = RunRecord {
        tool: "vilad",
        version: env!("CARGO_PKG_VERSION"),
        command: std::env::args().skip(1).collect(),
        config: cfg,
        inputs,
        outputs,
    };
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join(RUN_FILE),
        serde_json::to_string_pretty(&record)? + "\n",
    )?;
    Ok(())
}

/// A scenario file path, or a bundled id (with or without `.json`).
fn load_scenario(arg: &str) -> Result<(ScenarioSpec, FileHash), CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        return Ok((ScenarioSpec::load(path)?, hash_file(path)?));
    }
    let id = arg.strip_suffix(".json").unwrap_or(arg);
    let spec = ScenarioSpec::bundled(id).ok_or_else(|| {
        CliError::Input(format!(
            "scenario `{arg}` is neither a file nor a bundled id (scen1..scen4)"
        ))
    })?;
    let hash = FileHash {
        path: format!("bundled:{id}"),
        sha256: sha256(spec.to_json().as_bytes()),
    };
    Ok((spec, hash))
}

fn policy_inputs(policy: &str) -> Result<Vec<FileHash>, CliError> {
    match policy.strip_prefix("vilad:") {
        Some(path) if Path::new(path).is_file() => Ok(vec![hash_file(Path::new(path))?]),
        _ => Ok(Vec::new()),
    }
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let cfg = GlobalConfig::resolve(
        cli.config.as_deref(),
        env_overrides(std::env::vars()),
        cli.seed,
    )?;
    match &cli.command {
        Command::Annotate(a) => annotate(&cfg, a),
        Command::Distill(a) => distill(&cfg, a),
        Command::Plan(a) => plan(&cfg, a),
        Command::Sim {
            command: SimCommand::Run(a),
        } => sim_run(&cfg, a),
        Command::Metrics {
            command: MetricsCommand::Report(a),
        } => metrics_report(&cfg, a),
        Command::Serve(a) => serve(&cfg, a),
        Command::Pipeline {
            command: PipelineCommand::Demo(a),
        } => demo(&cfg, a),
    }
}

fn annotate(cfg: &GlobalConfig, a: &AnnotateArgs) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    let template = match &a.template {
        Some(p) => {
            inputs.push(hash_file(p)?);
            serde_json::from_str(&fs::read_to_string(p)?)?
        }
        None => PromptTemplate::default(),
    };
    let (source, spec) = match (&a.scenario, &a.images) {
        (Some(s), _) => {
            let (spec, h) = load_scenario(s)?;
            inputs.push(h);
            (DatasetSource::Scenario(spec.clone()), Some(spec))
        }
        (None, Some(dir)) => {
            let mut files = Vec::new();
            walk(dir, &mut files)?;
            for f in files
                .iter()
                .filter(|p| p.extension().is_some_and(|e| e == "png" || e == "agrid"))
            {
                inputs.push(hash_file(f)?);
            }
            (DatasetSource::ImageDir(dir.clone()), None)
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    let mut oracle: Box<dyn AnnotationOracle> = match a.oracle {
        OracleKind::Mock => Box::new(match &spec {
            Some(s) => MockOracle::for_scenario(s),
            None => MockOracle::default(),
        }),
        OracleKind::Remote => {
            let mut rc = cfg.remote.clone();
            if let Some(e) = &a.endpoint {
                rc.endpoint = e.clone();
            }
            Box::new(RemoteOracle::from_env(rc)?)
        }
    };
    let ds_cfg = DatasetConfig {
        history: a.history.unwrap_or(cfg.model.history),
        count: a.count,
        grid_width: cfg.model.grid_width,
        grid_height: cfg.model.grid_height,
        seed: cfg.seed,
        episode: cfg.episode,
        ..DatasetConfig::default()
    };
    let index = build_dataset(&source, oracle.as_mut(), &template, &ds_cfg, &a.out)?;
    println!(
        "annotated {} records into {}",
        index.records.len(),
        a.out.display()
    );
    write_run_record(&a.out, cfg, inputs, hash_tree(&a.out)?)
}

fn distill(cfg: &GlobalConfig, a: &DistillArgs) -> Result<(), CliError> {
    let first = load_index(&a.data[0])?;
    let model_cfg = vilad_core::distill::ModelConfig {
        history: first.history,
        grid_width: first.grid_width,
        grid_height: first.grid_height,
        rank: cfg.distill.rank,
        ..cfg.model
    };
    let mut samples = Vec::new();
    let mut inputs = Vec::new();
    for (k, dir) in a.data.iter().enumerate() {
        inputs.push(hash_file(&dir.join(vilad_core::annotate::INDEX_FILE))?);
        for mut s in load_training_samples(dir, &model_cfg)? {
            s.id = format!("d{k}_{}", s.id);
            samples.push(s);
        }
    }
    let dc = DistillConfig {
        steps: a.steps.unwrap_or(cfg.distill.steps),
        lambda_vlm: a.lambda.unwrap_or(cfg.distill.lambda_vlm),
        learning_rate: a.lr.unwrap_or(cfg.distill.learning_rate),
        seed: cfg.seed,
        ..cfg.distill
    };
    let mut model = AttentionModel::new(model_cfg, cfg.seed)?;
    let report = train(&mut model, &samples, &dc)?;
    fs::create_dir_all(a.out.join("distilled"))?;
    save_model(&model, a.out.join("model.vlad"))?;
    fs::write(
        a.out.join("train_loss.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    for s in &samples {
        let map = export_distilled(
            &model,
            &s.sequence,
            a.out.join("distilled").join(format!("{}.agrid", s.id)),
        )?;
        save_jet_png(
            &map,
            8,
            a.out.join("distilled").join(format!("{}.png", s.id)),
        )?;
    }
    println!(
        "trained {} steps on {} samples; final loss {}",
        dc.steps,
        samples.len(),
        report
            .final_loss()
            .map_or("n/a".into(), |l| format!("{l:.4}"))
    );
    write_run_record(&a.out, cfg, inputs, hash_tree(&a.out)?)
}

#[derive(Debug, Serialize)]
struct PlanDump {
    time: f64,
    pose: [f64; 3],
    command: [f64; 2],
    recovery: bool,
    window: Option<VelocityWindow>,
    sampled: usize,
    feasible: usize,
    chosen: Option<Candidate>,
    top: Vec<Candidate>,
}

fn plan(cfg: &GlobalConfig, a: &PlanArgs) -> Result<(), CliError> {
    let (spec, h) = load_scenario(&a.scenario)?;
    let mut inputs = vec![h];
    inputs.extend(policy_inputs(&a.policy)?);
    let policy = Policy::parse(&a.policy)?;
    let world = World::new(
        spec.instantiate(cfg.seed),
        cfg.episode.planner.robot_radius,
        cfg.episode.planner.goal_tolerance,
    )?;
    let mut ep = Episode::new(world, policy, cfg.episode)?;
    while ep.state().time + 1e-9 < a.at {
        if ep.is_done() {
            break;
        }
        ep.tick(None)?;
    }
    if ep.is_done() {
        return Err(CliError::Input(format!(
            "episode ended ({:?}) at t = {:.2} s, before the requested time",
            ep.state().status,
            ep.state().time
        )));
    }
    let r = ep.state().robot;
    let time = ep.state().time;
    let out = ep.tick(None)?;
    fs::create_dir_all(&a.out)?;
    let dump = PlanDump {
        time,
        pose: [r.x, r.y, r.theta],
        command: [out.command.v, out.command.omega],
        recovery: out.plan.as_ref().is_some_and(|p| p.diagnostics.recovery),
        window: out.plan.as_ref().map(|p| p.diagnostics.window),
        sampled: out.plan.as_ref().map_or(0, |p| p.diagnostics.sampled),
        feasible: out
            .plan
            .as_ref()
            .map_or(0, |p| p.diagnostics.candidates.len()),
        chosen: out.plan.as_ref().and_then(|p| p.chosen),
        top: out
            .plan
            .as_ref()
            .map_or_else(Vec::new, |p| p.diagnostics.top_k(a.top_k)),
    };
    let text = serde_json::to_string_pretty(&dump)?;
    fs::write(a.out.join("plan.json"), &text)?;
    if let Some(map) = &out.map {
        save_grid(map, a.out.join("map.agrid"))?;
        save_jet_png(map, 4, a.out.join("map.png"))?;
    }
    println!("{text}");
    write_run_record(&a.out, cfg, inputs, hash_tree(&a.out)?)
}

fn sim_run(cfg: &GlobalConfig, a: &SimRunArgs) -> Result<(), CliError> {
    if a.trials == 0 {
        return Err(CliError::Input("--trials must be at least 1".into()));
    }
    let (spec, h) = load_scenario(&a.scenario)?;
    let mut inputs = vec![h];
    inputs.extend(policy_inputs(&a.policy)?);
    let policy = Policy::parse(&a.policy)?;
    for k in 0..a.trials {
        let seed = cfg.seed + k as u64;
        let world = World::new(
            spec.instantiate(seed),
            cfg.episode.planner.robot_radius,
            cfg.episode.planner.goal_tolerance,
        )?;
        let result = run_episode(world, policy.clone(), cfg.episode)?;
        let path = write_episode(&a.out, &result)?;
        println!(
            "seed {seed}: {:?} t={:.2}s clearance={} -> {}",
            result.status,
            result.trajectory.last().map_or(0.0, |s| s.t),
            result
                .min_clearance
                .map_or("n/a".into(), |c| format!("{c:.3}")),
            path.display()
        );
    }
    write_run_record(&a.out, cfg, inputs, hash_tree(&a.out)?)
}

/// Reference for `scenario` under `refs`: `<scenario>.csv`, else the newest
/// CSV in `<scenario>/`.
fn find_reference(
    refs: &Path,
    scenario: &str,
) -> Result<Option<(ReferenceTrajectory, PathBuf)>, CliError> {
    let flat = refs.join(format!("{scenario}.csv"));
    let path = if flat.is_file() {
        Some(flat)
    } else {
        vilad_server::recordings(refs, scenario)?.pop()
    };
    let Some(path) = path else { return Ok(None) };
    let provenance = if path
        .file_name()
        .is_some_and(|n| n.to_string_lossy().starts_with("teleop_"))
    {
        Provenance::TeleopRecording
    } else {
        Provenance::Scripted
    };
    Ok(Some((
        ReferenceTrajectory::load(scenario, provenance, &path)?,
        path,
    )))
}

fn metrics_report(cfg: &GlobalConfig, a: &ReportArgs) -> Result<(), CliError> {
    let sets = load_runs(&a.runs)?;
    let mut inputs = hash_tree(&a.runs)?
        .into_iter()
        .map(|h| FileHash {
            path: a.runs.join(&h.path).to_string_lossy().into_owned(),
            ..h
        })
        .collect::<Vec<_>>();
    let mut refs = BTreeMap::new();
    for set in &sets {
        if refs.contains_key(&set.scenario) {
            continue;
        }
        let found = match &a.refs {
            Some(dir) => find_reference(dir, &set.scenario)?.map(|(r, p)| {
                inputs.push(hash_file(&p).expect("reference was just read"));
                r
            }),
            None => ReferenceTrajectory::bundled(&set.scenario),
        };
        match found {
            Some(r) => {
                refs.insert(set.scenario.clone(), r);
            }
            None => log::warn!("no reference for scenario {}", set.scenario),
        }
    }
    let table = report(&sets, &refs)?;
    let parent = a
        .out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    fs::write(&a.out, table.to_csv())?;
    let txt = a.out.with_extension("txt");
    let text = table.to_text_table();
    fs::write(&txt, &text)?;
    print!("{text}");
    write_run_record(
        parent,
        cfg,
        inputs,
        vec![hash_file(&a.out)?, hash_file(&txt)?],
    )
}

fn serve(cfg: &GlobalConfig, a: &ServeArgs) -> Result<(), CliError> {
    let (spec, h) = load_scenario(&a.scenario)?;
    let mut inputs = vec![h];
    inputs.extend(policy_inputs(&a.policy)?);
    let mut sc = ServerConfig::new(spec, Policy::parse(&a.policy)?);
    sc.episode = cfg.episode;
    sc.seed = cfg.seed;
    sc.record_dir = a.record_dir.clone();
    write_run_record(&a.record_dir, cfg, inputs, Vec::new())?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    eprintln!("serving on ws://0.0.0.0:{}/ws (Ctrl-C to stop)", a.port);
    rt.block_on(vilad_server::serve(sc, a.port))?;
    Ok(())
}

fn demo(cfg: &GlobalConfig, a: &DemoArgs) -> Result<(), CliError> {
    let pc = PipelineConfig {
        seed: cfg.seed,
        scenarios: cfg.demo.scenarios.clone(),
        trials: cfg.demo.trials,
        records_per_scenario: cfg.demo.records_per_scenario,
        model: vilad_core::distill::ModelConfig {
            rank: cfg.distill.rank,
            ..cfg.model
        },
        distill: cfg.distill,
        episode: cfg.episode,
    };
    let summary = run_demo(&pc, &a.out)?;
    print!("{}", summary.report.to_text_table());
    fs::write(
        a.out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    write_run_record(&a.out, cfg, Vec::new(), hash_tree(&a.out)?)
}
