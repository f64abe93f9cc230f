//! `--config FILE` support: a flat JSON object whose keys are long flag
//! names. Flags already given on the command line win.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::Value;

fn flag_given(args: &[OsString], flag: &str) -> bool {
    args.iter().any(|a| {
        let a = a.to_string_lossy();
        a == flag || a.strip_prefix(flag).is_some_and(|rest| rest.starts_with('='))
    })
}

fn config_path(args: &[OsString]) -> Result<Option<String>> {
    for (i, a) in args.iter().enumerate() {
        let a = a.to_string_lossy();
        if a == "--config" {
            let path = args.get(i + 1).context("--config needs a file path")?;
            return Ok(Some(path.to_string_lossy().into_owned()));
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Ok(Some(p.to_string()));
        }
    }
    Ok(None)
}

/// Append flags from the config file named by `--config` that are not
/// already present in `args`.
pub fn merge_config_file(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config file {path}"))?;
    let Value::Object(map) = serde_json::from_str(&text).with_context(|| format!("parsing config file {path}"))? else {
        bail!("config file {path} must hold a JSON object");
    };
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" || flag_given(&args, &flag) {
            continue;
        }
        let rendered = match value {
            Value::Bool(true) => None,
            Value::Bool(false) | Value::Null => continue,
            Value::String(s) => Some(s),
            Value::Number(n) => Some(n.to_string()),
            Value::Array(items) => Some(
                items
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            Value::Object(_) => bail!("config key `{key}` must be a scalar or a list"),
        };
        args.push(flag.into());
        if let Some(v) = rendered {
            args.push(v.into());
        }
    }
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn command_line_beats_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"epochs": 3, "seed": 9, "no_augment": true, "values": [1, 4]}"#).unwrap();
        let args = os(&["coopsteer", "train", "--seed=2", "--config", cfg.to_str().unwrap()]);
        let merged: Vec<String> = merge_config_file(args)
            .unwrap()
            .into_iter()
            .map(|a| a.into_string().unwrap())
            .collect();
        assert!(merged.contains(&"--seed=2".to_string()));
        assert!(!merged.contains(&"9".to_string()));
        let pos = merged.iter().position(|a| a == "--epochs").unwrap();
        assert_eq!(merged[pos + 1], "3");
        assert!(merged.contains(&"--no-augment".to_string()));
        let pos = merged.iter().position(|a| a == "--values").unwrap();
        assert_eq!(merged[pos + 1], "1,4");
    }

    #[test]
    fn no_config_is_identity() {
        let args = os(&["coopsteer", "eval"]);
        assert_eq!(merge_config_file(args.clone()).unwrap(), args);
    }
}
