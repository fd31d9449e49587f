//! `key = value` run files. Every long flag of a subcommand can be set here;
//! values given on the command line take precedence.

use std::ffi::OsString;
use std::path::Path;

use anyhow::Context;
use clap::parser::ValueSource;
use clap::{ArgMatches, Command};

use crate::UsageError;

/// One `key = value` line, with the key normalized to its flag spelling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
}

pub fn parse_config(text: &str) -> Result<Vec<Entry>, UsageError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(UsageError(format!(
                "config line {}: expected `key = value`",
                n + 1
            )));
        };
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(UsageError(format!("config line {}: empty key", n + 1)));
        }
        out.push(Entry {
            key,
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

/// Appends `--key value` for each config entry whose flag was not given on
/// the command line. `sub` and `matches` describe the selected subcommand.
pub fn merge_args(
    argv: &[OsString],
    sub: &Command,
    matches: &ArgMatches,
    config: &Path,
) -> anyhow::Result<Vec<OsString>> {
    let text = std::fs::read_to_string(config)
        .with_context(|| format!("reading config {}", config.display()))?;
    let entries = parse_config(&text)?;
    let mut out = argv.to_vec();
    for e in entries {
        if e.key == "config" {
            return Err(UsageError("config files cannot include other config files".into()).into());
        }
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(e.key.as_str()))
            .ok_or_else(|| UsageError(format!("unknown config key `{}`", e.key)))?;
        if matches.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        out.push(format!("--{}", e.key).into());
        out.push(e.value.into());
    }
    Ok(out)
}
