//! Optional key-value config file merged into the command line.
//!
//! Each key names a long flag of the chosen subcommand (`perplexity = 10`,
//! `k = [5, 10]`, `all_conditions = true`). Values are spliced in after the
//! subcommand unless the same flag was given explicitly.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Returns `argv` with the config file's settings inserted, or `argv`
/// unchanged when no `--config` is present.
pub fn merge_config_file(argv: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>> {
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let Some(config_path) = find_config(&args) else {
        return Ok(argv);
    };
    let Some(sub_pos) = args.iter().skip(1).position(|a| subcommands.contains(&a.as_str())).map(|p| p + 1) else {
        return Ok(argv);
    };
    let extra = config_args(Path::new(&config_path), &args[sub_pos + 1..])?;
    let mut merged = argv;
    merged.splice(sub_pos + 1..sub_pos + 1, extra.into_iter().map(OsString::from));
    Ok(merged)
}

fn find_config(args: &[String]) -> Option<String> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix("--config=") {
            return Some(v.to_string());
        }
    }
    None
}

fn given_explicitly(flag: &str, user_args: &[String]) -> bool {
    user_args.iter().any(|a| a == flag || a.strip_prefix(flag).is_some_and(|rest| rest.starts_with('=')))
}

fn config_args(path: &Path, user_args: &[String]) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let table: toml::Table = text.parse().with_context(|| format!("invalid config {}", path.display()))?;
    let mut out = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            bail!("config file {} cannot name another config file", path.display());
        }
        if given_explicitly(&flag, user_args) {
            continue;
        }
        match value {
            toml::Value::Boolean(true) => out.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                for item in items {
                    out.push(flag.clone());
                    out.push(scalar(&key, item)?);
                }
            }
            other => {
                out.push(flag);
                out.push(scalar(&key, other)?);
            }
        }
    }
    Ok(out)
}

fn scalar(key: &str, value: toml::Value) -> Result<String> {
    Ok(match value {
        toml::Value::String(s) => s,
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        other => bail!("config key `{key}` has unsupported value {other}"),
    })
}
