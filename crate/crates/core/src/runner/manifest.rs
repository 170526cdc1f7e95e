use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::controllers::ControllerSpec;
use crate::env::EnvConfig;
use crate::error::{Error, Result};

fn one() -> usize {
    1
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub env: EnvConfig,
    pub controller: ControllerSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Write every n-th cavity frame.
    #[serde(default = "one")]
    pub frame_stride: usize,
}

impl RunManifest {
    pub fn new(env: EnvConfig, controller: ControllerSpec) -> Self {
        Self { env, controller, seed: 0, out_dir: None, frame_stride: 1 }
    }

    /// Accepts either a manifest (`env` key) or a bare environment document (`problem` key).
    pub fn from_value(doc: Value) -> Result<Self> {
        let mut obj = match doc {
            Value::Object(o) => o,
            _ => return Err(Error::Config("manifest must be a table/object".into())),
        };
        if !obj.contains_key("env") {
            let env = EnvConfig::from_value(Value::Object(obj))?;
            let controller = ControllerSpec::default_for(env.problem);
            return Ok(Self::new(env, controller));
        }
        let env = EnvConfig::from_value(obj.remove("env").expect("checked"))?;
        obj.insert("env".into(), serde_json::to_value(&env)?);
        if !obj.contains_key("controller") {
            obj.insert("controller".into(), serde_json::to_value(ControllerSpec::default_for(env.problem))?);
        }
        let m: RunManifest = serde_json::from_value(Value::Object(obj)).map_err(|e| Error::Config(e.to_string()))?;
        if m.frame_stride == 0 {
            return Err(Error::Config("frame_stride must be at least 1".into()));
        }
        Ok(m)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: Value = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text)?
        } else {
            serde_json::from_str(&text)?
        };
        Self::from_value(value)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Problem;

    #[test]
    fn round_trips() {
        for p in [Problem::Hyperbolic, Problem::Parabolic, Problem::NavierStokes] {
            let mut m = RunManifest::new(EnvConfig::defaults(p), ControllerSpec::default_for(p));
            m.seed = 17;
            m.out_dir = Some("out/x".into());
            let j = RunManifest::from_value(serde_json::from_str(&m.to_json().unwrap()).unwrap()).unwrap();
            assert_eq!(j, m);
            let t = RunManifest::from_value(toml::from_str(&m.to_toml().unwrap()).unwrap()).unwrap();
            assert_eq!(t, m);
        }
    }

    #[test]
    fn bare_environment_document() {
        let m = RunManifest::from_value(serde_json::json!({"problem": "parabolic"})).unwrap();
        assert_eq!(m.controller, ControllerSpec::default_for(Problem::Parabolic));
        let e = RunManifest::from_value(serde_json::json!({"env": {"problem": "parabolic"}, "sed": 3})).unwrap_err();
        assert!(e.to_string().contains("sed"));
    }
}
