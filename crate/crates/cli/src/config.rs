//! Resolved configuration: defaults, then the config file, then `VILAD_*`
//! environment overrides, then command-line flags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use vilad_core::annotate::RemoteConfig;
use vilad_core::distill::{DistillConfig, ModelConfig};
use vilad_core::sim::EpisodeConfig;

use crate::CliError;

/// Prefix for environment overrides. `VILAD_EPISODE__PLANNER__BETA_SOCIAL=0`
/// sets `episode.planner.beta_social`.
pub const ENV_PREFIX: &str = "VILAD_";

/// Variables read by clap directly rather than as config paths.
const FLAG_VARS: [&str; 3] = ["VILAD_CONFIG", "VILAD_SEED", "VILAD_LOG"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSettings {
    pub scenarios: Vec<String>,
    pub trials: usize,
    pub records_per_scenario: usize,
}

impl Default for DemoSettings {
    fn default() -> Self {
        let p = vilad_core::pipeline::PipelineConfig::default();
        Self {
            scenarios: p.scenarios,
            trials: p.trials,
            records_per_scenario: p.records_per_scenario,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct GlobalConfig {
    pub seed: u64,
    pub episode: EpisodeConfig,
    pub model: ModelConfig,
    pub distill: DistillConfig,
    pub remote: RemoteConfig,
    pub demo: DemoSettings,
}

fn merge(base: &mut Value, over: Value, path: &str) -> Result<(), CliError> {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                let sub = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &sub)?,
                    None => return Err(CliError::Config(format!("unknown config key `{sub}`"))),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

fn parse_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    } else {
        let t: toml::Value = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::to_value(t).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Turns `VILAD_A__B=v` pairs into a nested object. Values parse as JSON
/// when they can (numbers, bools, arrays) and are strings otherwise.
pub fn env_overrides(vars: impl IntoIterator<Item = (String, String)>) -> Value {
    let mut root = Value::Object(Default::default());
    let mut pairs: Vec<(String, String)> = vars
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX) && !FLAG_VARS.contains(&k.as_str()))
        .collect();
    pairs.sort();
    for (k, v) in pairs {
        let keys: Vec<String> = k[ENV_PREFIX.len()..]
            .split("__")
            .map(|s| s.to_ascii_lowercase())
            .collect();
        let value = serde_json::from_str(&v).unwrap_or(Value::String(v));
        insert_path(&mut root, &keys, value);
    }
    root
}

fn insert_path(node: &mut Value, keys: &[String], value: Value) {
    if !node.is_object() {
        *node = Value::Object(Default::default());
    }
    let obj = node.as_object_mut().expect("just made an object");
    match keys {
        [] => {}
        [last] => {
            obj.insert(last.clone(), value);
        }
        [first, rest @ ..] => {
            let child = obj
                .entry(first.clone())
                .or_insert_with(|| Value::Object(Default::default()));
            insert_path(child, rest, value);
        }
    }
}

impl GlobalConfig {
    /// Defaults overlaid with `file` and then `env`. Unknown keys are errors.
    pub fn resolve(file: Option<&Path>, env: Value, seed: Option<u64>) -> Result<Self, CliError> {
        let mut v = serde_json::to_value(GlobalConfig::default()).expect("config serializes");
        if let Some(path) = file {
            merge(&mut v, parse_file(path)?, "")?;
        }
        merge(&mut v, env, "")?;
        let mut cfg: GlobalConfig = serde_json::from_value(v)
            .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_paths_nest_and_parse() {
        let v = env_overrides([
            (
                "VILAD_EPISODE__PLANNER__BETA_SOCIAL".to_string(),
                "0".to_string(),
            ),
            ("VILAD_REMOTE__MODEL".to_string(), "small".to_string()),
            ("VILAD_SEED".to_string(), "3".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ]);
        assert_eq!(v["episode"]["planner"]["beta_social"], 0);
        assert_eq!(v["remote"]["model"], "small");
        assert!(v.get("seed").is_none());
    }

    #[test]
    fn layers_apply_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.toml");
        std::fs::write(
            &file,
            "seed = 4\n[episode.planner]\nbeta_social = 1.5\nhorizon = 2.0\n",
        )
        .unwrap();
        let env = env_overrides([(
            "VILAD_EPISODE__PLANNER__HORIZON".to_string(),
            "2.5".to_string(),
        )]);
        let cfg = GlobalConfig::resolve(Some(&file), env, None).unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.episode.planner.beta_social, 1.5);
        assert_eq!(cfg.episode.planner.horizon, 2.5);
        let cfg =
            GlobalConfig::resolve(Some(&file), Value::Object(Default::default()), Some(9)).unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let env = env_overrides([("VILAD_EPISODE__PLANNER__BETA".to_string(), "1".to_string())]);
        assert!(GlobalConfig::resolve(None, env, None).is_err());
        let env = env_overrides([(
            "VILAD_EPISODE__PLANNER__HORIZON".to_string(),
            "long".to_string(),
        )]);
        assert!(GlobalConfig::resolve(None, env, None).is_err());
    }
}
