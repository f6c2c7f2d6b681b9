use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use vilad_core::pipeline::{load_runs, run_demo, PipelineConfig};

fn tiny() -> PipelineConfig {
    let mut cfg = PipelineConfig {
        scenarios: vec!["scen1".into()],
        trials: 1,
        records_per_scenario: 3,
        ..PipelineConfig::default()
    };
    cfg.distill.steps = 20;
    cfg
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn demo_is_byte_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = run_demo(&tiny(), a.path()).unwrap();
    let sb = run_demo(&tiny(), b.path()).unwrap();
    assert_eq!(sa, sb);
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(tb[k] == *v, "{} differs", k.display());
    }
    assert!(ta
        .keys()
        .any(|k| k.extension().is_some_and(|e| e == "agrid")));
    assert!(ta.contains_key(Path::new("model.vlad")));
    assert!(ta.contains_key(Path::new("report.csv")));
    assert_eq!(sa.report.rows.len(), 3);
}

#[test]
fn seed_changes_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_demo(&tiny(), a.path()).unwrap();
    run_demo(&PipelineConfig { seed: 9, ..tiny() }, b.path()).unwrap();
    assert_ne!(
        fs::read(a.path().join("model.vlad")).unwrap(),
        fs::read(b.path().join("model.vlad")).unwrap()
    );
}

#[test]
fn runs_reload_into_trial_sets() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_demo(
        &PipelineConfig {
            trials: 2,
            ..tiny()
        },
        dir.path(),
    )
    .unwrap();
    let sets = load_runs(&dir.path().join("runs")).unwrap();
    assert_eq!(sets.len(), 3);
    assert!(sets
        .iter()
        .all(|s| s.trials.len() == 2 && s.scenario == "scen1"));
    let mut labels: Vec<_> = sets.iter().map(|s| s.policy.clone()).collect();
    labels.sort();
    let mut expected: Vec<_> = summary
        .report
        .rows
        .iter()
        .map(|r| r.policy.clone())
        .collect();
    expected.sort();
    assert_eq!(labels, expected);
}

#[test]
fn bad_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_demo(
        &PipelineConfig {
            scenarios: vec!["nope".into()],
            ..tiny()
        },
        dir.path()
    )
    .is_err());
    assert!(run_demo(
        &PipelineConfig {
            trials: 0,
            ..tiny()
        },
        dir.path()
    )
    .is_err());
    let mut cfg = tiny();
    cfg.model.rank = 2;
    assert!(run_demo(&cfg, dir.path()).is_err());
    assert!(load_runs(dir.path()).is_err());
}

#[test]
#[ignore]
fn default_demo_timing() {
    let t = std::time::Instant::now();
    let s = run_demo(&PipelineConfig::default(), Path::new("/tmp/pd")).unwrap();
    println!(
        "{:?} {:?}\n{}",
        t.elapsed(),
        s.final_loss,
        s.report.to_text_table()
    );
}
