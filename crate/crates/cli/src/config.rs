//! Run settings: defaults, JSON config files, and the manifests written next
//! to every output.
//!
//! Settings resolve in three layers. The built-in defaults (with the seed
//! taken from `HDBO_SEED` when set) are overlaid by a config file, which is in
//! turn overlaid by command-line flags. A manifest is itself a valid config
//! file for the command that wrote it.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{usage, Result};

pub const SEED_ENV: &str = "HDBO_SEED";

pub fn version() -> String {
    format!("hdbo-cli {}", env!("CARGO_PKG_VERSION"))
}

/// Seed from the environment, if set.
pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| {
            usage(format!(
                "{SEED_ENV} must be a non-negative integer, got `{s}`"
            ))
        }),
        Err(_) => Ok(None),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// Fully resolved settings, every default materialized.
    pub config: Value,
    pub outputs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new<T: Serialize>(
        command: &str,
        seed: u64,
        config: &T,
        outputs: Vec<PathBuf>,
    ) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            version: version(),
            seed,
            config: serde_json::to_value(config).map_err(|e| usage(e.to_string()))?,
            outputs,
            error: None,
        })
    }
}

/// Overlays a config file on `base`.
pub fn apply_file<T: Serialize + DeserializeOwned>(
    base: T,
    path: Option<&Path>,
    command: &str,
) -> Result<T> {
    let Some(path) = path else {
        return Ok(base);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let file: Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    let overlay = match file {
        Value::Object(mut obj) if obj.contains_key("command") && obj.contains_key("config") => {
            let written_by = obj
                .get("command")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string();
            if written_by != command {
                return Err(usage(format!(
                    "{} is a manifest of `{written_by}`, not `{command}`",
                    path.display()
                )));
            }
            obj.remove("config").unwrap_or(Value::Null)
        }
        other => other,
    };
    if !overlay.is_object() {
        return Err(usage(format!(
            "config {} must hold a JSON object",
            path.display()
        )));
    }
    let mut merged = serde_json::to_value(&base).map_err(|e| usage(e.to_string()))?;
    merge(&mut merged, &overlay);
    let resolved: T = serde_json::from_value(merged)
        .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    let check = serde_json::to_value(&resolved).map_err(|e| usage(e.to_string()))?;
    if let Some(key) = unknown_key(&overlay, &check, String::new()) {
        return Err(usage(format!(
            "config {}: unknown key `{key}`",
            path.display()
        )));
    }
    Ok(resolved)
}

/// Recursive object merge. A nested object whose `kind` tag differs from the
/// base replaces it outright, since its fields belong to another variant.
fn merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() && same_kind(slot, v) => {
                        merge(slot, v)
                    }
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

fn same_kind(a: &Value, b: &Value) -> bool {
    match (a.get("kind"), b.get("kind")) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    }
}

fn unknown_key(file: &Value, resolved: &Value, prefix: String) -> Option<String> {
    let (Value::Object(f), Value::Object(r)) = (file, resolved) else {
        return None;
    };
    for (k, v) in f {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match r.get(k) {
            None => return Some(path),
            Some(rv) => {
                if let Some(p) = unknown_key(v, rv, path) {
                    return Some(p);
                }
            }
        }
    }
    None
}

/// Parses a comma-separated list.
pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|e| usage(format!("bad {what} `{t}`: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Demo {
        a: u32,
        inner: Inner,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Inner {
        x: f64,
        y: String,
    }

    fn demo() -> Demo {
        Demo {
            a: 1,
            inner: Inner {
                x: 0.5,
                y: "keep".into(),
            },
        }
    }

    fn write(dir: &tempfile::TempDir, v: &Value) -> PathBuf {
        let p = dir.path().join("c.json");
        std::fs::write(&p, v.to_string()).unwrap();
        p
    }

    #[test]
    fn partial_files_merge_deeply() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, &serde_json::json!({"inner": {"x": 2.0}}));
        let d = apply_file(demo(), Some(&p), "demo").unwrap();
        assert_eq!(d.inner.x, 2.0);
        assert_eq!(d.inner.y, "keep");
        assert_eq!(d.a, 1);
    }

    #[test]
    fn unknown_keys_and_foreign_manifests_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, &serde_json::json!({"inner": {"z": 2.0}}));
        assert!(apply_file(demo(), Some(&p), "demo")
            .unwrap_err()
            .to_string()
            .contains("inner.z"));
        let m = RunManifest::new("other", 0, &demo(), vec![]).unwrap();
        let p = write(&dir, &serde_json::to_value(&m).unwrap());
        assert!(apply_file(demo(), Some(&p), "demo").is_err());
        let m = RunManifest::new("demo", 0, &Demo { a: 9, ..demo() }, vec![]).unwrap();
        let p = write(&dir, &serde_json::to_value(&m).unwrap());
        assert_eq!(apply_file(demo(), Some(&p), "demo").unwrap().a, 9);
    }

    #[test]
    fn manifest_round_trips() {
        let m = RunManifest::new("demo", 7, &demo(), vec![PathBuf::from("a.csv")]).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<RunManifest>(&text).unwrap(), m);
    }

    #[test]
    fn lists() {
        assert_eq!(
            parse_list::<usize>("50, 100,200", "dim").unwrap(),
            vec![50, 100, 200]
        );
        assert!(parse_list::<usize>("5,x", "dim").is_err());
    }
}
