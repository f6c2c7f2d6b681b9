use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn vilad(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vilad"))
        .args(args)
        .current_dir(cwd)
        .env_remove("VILAD_CONFIG")
        .env_remove("VILAD_SEED")
        .env_remove("VILAD_LOG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn episode_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p
                .file_name()
                .unwrap()
                .to_string_lossy()
                .starts_with("seed_")
            {
                out.push((
                    p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn help_and_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vilad(&["--help"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("pipeline"));
    assert_eq!(code(&vilad(&["sim", "run", "--help"], tmp.path())), 0);

    let o = vilad(
        &["sim", "run", "--scenario", "scen1", "--out", "r"],
        tmp.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--policy"));
    assert_eq!(code(&vilad(&["frobnicate"], tmp.path())), 2);
    assert_eq!(code(&vilad(&["annotate", "--out", "x"], tmp.path())), 2);
    assert_eq!(
        code(&vilad(
            &[
                "sim",
                "run",
                "--scenario",
                "scen1",
                "--policy",
                "goal_only",
                "--out",
                "r",
                "--trials",
                "x"
            ],
            tmp.path()
        )),
        2
    );
}

#[test]
fn domain_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vilad(
        &[
            "sim",
            "run",
            "--scenario",
            "scen1",
            "--policy",
            "bogus",
            "--out",
            "r",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unknown policy"));
    let o = vilad(
        &[
            "sim",
            "run",
            "--scenario",
            "nowhere",
            "--policy",
            "goal_only",
            "--out",
            "r",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 1);
    let o = vilad(
        &["metrics", "report", "--runs", "missing", "--out", "t.csv"],
        tmp.path(),
    );
    assert_eq!(code(&o), 1);
    fs::write(tmp.path().join("bad.toml"), "[episode.planner]\nbeta = 1\n").unwrap();
    let o = vilad(
        &[
            "--config",
            "bad.toml",
            "sim",
            "run",
            "--scenario",
            "scen1",
            "--policy",
            "goal_only",
            "--out",
            "r",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("episode.planner.beta"));
}

#[test]
fn sim_run_is_reproducible_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "sim",
            "run",
            "--scenario",
            "scen1.json",
            "--policy",
            "goal_only",
            "--trials",
            "3",
            "--seed",
            "7",
            "--out",
            out,
        ]
    };
    let o = vilad(&args("a"), tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a = episode_files(&tmp.path().join("a"));
    assert_eq!(a.len(), 6, "three JSON and three CSV files");
    let first: Value = serde_json::from_slice(
        &a.iter()
            .find(|(p, _)| p.ends_with("seed_0007.json"))
            .unwrap()
            .1,
    )
    .unwrap();
    assert_eq!(first["scenario"], "scen1");

    let run: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/run.json")).unwrap()).unwrap();
    assert_eq!(run["config"]["seed"], 7);
    assert_eq!(run["outputs"].as_array().unwrap().len(), 6);
    assert!(run["inputs"][0]["path"].as_str().unwrap().contains("scen1"));

    assert_eq!(code(&vilad(&args("b"), tmp.path())), 0);
    assert_eq!(a, episode_files(&tmp.path().join("b")));

    let o = vilad(
        &["metrics", "report", "--runs", "a", "--out", "rep/table.csv"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("rep/table.csv")).unwrap();
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("scen1,goal_only,3,"));
    assert!(tmp.path().join("rep/table.txt").exists());
    assert!(tmp.path().join("rep/run.json").exists());
}

#[test]
fn env_overrides_reach_the_planner() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_vilad"))
        .args([
            "plan",
            "--scenario",
            "scen1",
            "--at",
            "0.5",
            "--top-k",
            "3",
            "--out",
            "p",
        ])
        .env("VILAD_EPISODE__PLANNER__SAMPLES_V", "5")
        .env("VILAD_EPISODE__PLANNER__SAMPLES_OMEGA", "7")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let plan: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("p/plan.json")).unwrap()).unwrap();
    assert_eq!(plan["sampled"], 35);
    assert_eq!(plan["top"].as_array().unwrap().len(), 3);
    assert!(plan["time"].as_f64().unwrap() >= 0.5 - 1e-9);
    assert!(tmp.path().join("p/map.agrid").exists());
    assert!(tmp.path().join("p/map.png").exists());
}

#[test]
fn annotate_distill_then_drive_the_model() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vilad(
        &[
            "annotate",
            "--scenario",
            "scen1",
            "--count",
            "3",
            "--out",
            "ds",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let index: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("ds/index.json")).unwrap())
            .unwrap();
    assert_eq!(index["records"].as_array().unwrap().len(), 3);

    let o = vilad(
        &["distill", "--data", "ds", "--steps", "5", "--out", "m"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(tmp.path().join("m/model.vlad").exists());
    let pngs = fs::read_dir(tmp.path().join("m/distilled"))
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "png")
        })
        .count();
    assert_eq!(pngs, 3);

    let o = vilad(
        &[
            "sim",
            "run",
            "--scenario",
            "scen1",
            "--policy",
            "vilad:m/model.vlad",
            "--out",
            "r",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let run: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("r/run.json")).unwrap()).unwrap();
    assert_eq!(
        run["inputs"].as_array().unwrap().len(),
        2,
        "scenario and model are hashed"
    );
}

#[test]
fn report_prefers_reference_dir() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&vilad(
            &[
                "sim",
                "run",
                "--scenario",
                "scen1",
                "--policy",
                "goal_only",
                "--out",
                "r"
            ],
            tmp.path()
        )),
        0
    );
    let csv = fs::read_dir(tmp.path().join("r/scen1/goal_only"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "csv"))
        .unwrap();
    fs::create_dir_all(tmp.path().join("refs/scen1")).unwrap();
    fs::copy(&csv, tmp.path().join("refs/scen1/teleop_1_001.csv")).unwrap();
    let o = vilad(
        &[
            "metrics", "report", "--runs", "r", "--refs", "refs", "--out", "t.csv",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let row = fs::read_to_string(tmp.path().join("t.csv")).unwrap();
    let row = row.lines().nth(1).unwrap().to_string();
    // the run is its own reference, so the distance is zero
    let frechet: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
    assert!(frechet.abs() < 1e-9, "{row}");
}
