//! Run configuration: a JSON document or a built-in preset, patched by
//! `--set key=value` overrides on dotted paths.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rsgrowth_core::bellman::{GridConfig, SolveOptions};
use rsgrowth_core::dynamics::StationaryConfig;
use rsgrowth_core::model::{preset_document, ModelDocument, PresetName};
use rsgrowth_core::verify::VerifyConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::failure::Failure;

/// Default seed of the randomized verification suites.
pub const DEFAULT_VERIFY_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelDocument,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub simulate: StationaryConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn preset(name: PresetName) -> Result<Self, Failure> {
        let model = preset_document(name, &BTreeMap::new()).map_err(Failure::model)?;
        Ok(Self {
            model,
            grid: GridConfig::log(400, name.default_x_max()),
            solver: SolveOptions::default(),
            simulate: StationaryConfig::default(),
            output_dir: None,
        })
    }

    pub fn verify_config(&self, seed: Option<u64>) -> VerifyConfig {
        VerifyConfig {
            grid: self.grid.clone(),
            solver: self.solver,
            simulate: self.simulate.clone(),
            seed: seed.unwrap_or(DEFAULT_VERIFY_SEED),
        }
    }
}

/// Where the configuration comes from before overrides.
pub enum Source<'a> {
    File(&'a Path),
    Preset(PresetName),
}

pub fn load(source: Source<'_>, overrides: &[String], seed: Option<u64>) -> Result<RunConfig, Failure> {
    let mut doc: Value = match source {
        Source::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config("config_unreadable", format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::config("invalid_config", format!("{}: {e}", path.display())))?
        }
        Source::Preset(name) => serde_json::to_value(RunConfig::preset(name)?)
            .map_err(|e| Failure::config("invalid_config", e.to_string()))?,
    };
    for item in overrides {
        apply_override(&mut doc, item)?;
    }
    let mut cfg: RunConfig =
        serde_json::from_value(doc).map_err(|e| Failure::config("invalid_config", e.to_string()))?;
    if let Some(s) = seed {
        cfg.simulate.seeds = StationaryConfig::seeds_from(s, cfg.simulate.chains);
    }
    Ok(cfg)
}

/// Applies `a.b.c=value`; the value is parsed as JSON, falling back to a string.
pub fn apply_override(doc: &mut Value, item: &str) -> Result<(), Failure> {
    let bad = |why: String| Failure::config("invalid_override", format!("--set {item}: {why}"));
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| bad("expected key=value".into()))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(bad("empty path segment".into()));
    }
    let (last, parents) = keys.split_last().expect("split yields one segment");
    let mut node = doc;
    for key in parents {
        node = node
            .get_mut(*key)
            .ok_or_else(|| bad(format!("no section `{key}`")))?;
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| bad(format!("`{path}` is not inside an object")))?;
    obj.insert(last.to_string(), value);
    Ok(())
}

/// `--out`, then the config's `output_dir`, then `RSGROWTH_OUT`, then `rsgrowth-out`.
pub fn output_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os("RSGROWTH_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("rsgrowth-out"))
}
