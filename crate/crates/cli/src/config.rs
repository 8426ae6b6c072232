//! `key = value` files that supply flag values.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::CommandFactory;

use crate::args::Cli;

/// Parses `key = value` lines. `#` starts a comment; blank lines are
/// ignored; keys may use `-` or `_`.
pub fn parse_keyed(text: &str, origin: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{}:{}: expected `key = value`", origin.display(), i + 1);
        };
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            bail!("{}:{}: empty key", origin.display(), i + 1);
        }
        out.insert(key, v.trim().to_owned());
    }
    Ok(out)
}

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_owned());
        }
    }
    None
}

fn given(argv: &[String], key: &str) -> bool {
    let flag = format!("--{key}");
    argv.iter()
        .any(|a| *a == flag || a.starts_with(&format!("{flag}=")))
}

/// Appends the config file's values as flags, unless the flag was given on
/// the command line. Keys that are not flags of the chosen subcommand are
/// passed through so that argument parsing rejects them.
pub fn merge_config(argv: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let values = parse_keyed(&text, path)?;

    let cmd = Cli::command();
    let sub = argv
        .iter()
        .skip(1)
        .find_map(|a| cmd.find_subcommand(a.as_str()).cloned());
    let switch = |key: &str| {
        let is_switch = |c: &clap::Command| {
            c.get_arguments()
                .find(|a| a.get_long() == Some(key))
                .map(|a| !a.get_action().takes_values())
        };
        sub.as_ref()
            .and_then(is_switch)
            .or_else(|| is_switch(&cmd))
            .unwrap_or(false)
    };

    let mut out = argv.clone();
    for (key, value) in values {
        if key == "config" || given(&argv, &key) {
            continue;
        }
        if switch(&key) {
            match value.as_str() {
                "true" => out.push(format!("--{key}")),
                "false" => {}
                _ => bail!(
                    "{}: {key} takes true or false, got {value:?}",
                    path.display()
                ),
            }
        } else {
            out.push(format!("--{key}={value}"));
        }
    }
    Ok(out)
}
