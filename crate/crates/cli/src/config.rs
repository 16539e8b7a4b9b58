//! Key=value config files, merged into the argument list before parsing.
//!
//! Config entries are spliced in ahead of the user's own flags, so a flag
//! given on the command line always wins over the file.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use clap::{Command, CommandFactory};

use crate::cli::Cli;
use crate::UsageError;

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("config line {}: expected key=value", n + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(UsageError(format!("config line {}: empty key", n + 1)).into());
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Index of the subcommand token, skipping global options and their values.
fn subcommand_position(args: &[OsString], cmd: &Command) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if cmd.find_subcommand(s.as_ref()).is_some() {
            return Some(i);
        }
        let takes_value = matches!(s.as_ref(), "--config" | "--seed" | "--threads");
        i += if takes_value { 2 } else { 1 };
    }
    None
}

fn expand(cmd: &Command, key: &str, value: &str) -> Option<Vec<OsString>> {
    let arg = cmd.get_arguments().find(|a| a.get_long() == Some(key))?;
    let flag = format!("--{key}");
    if arg.get_action().takes_values() {
        Some(vec![flag.into(), value.into()])
    } else {
        match value.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" => Some(vec![flag.into()]),
            _ => Some(Vec::new()),
        }
    }
}

/// Returns `args` with the entries of the `--config` file spliced in.
pub fn merge_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    let entries = parse_config(&text).with_context(|| format!("in {}", path.display()))?;

    let root = Cli::command();
    let sub_at = subcommand_position(&args, &root);
    let sub = sub_at.and_then(|i| root.find_subcommand(args[i].to_string_lossy().as_ref()));

    let mut global = Vec::new();
    let mut local = Vec::new();
    for (key, value) in &entries {
        if key == "config" {
            return Err(UsageError("config files cannot include other config files".into()).into());
        }
        if let Some(a) = expand(&root, key, value) {
            global.extend(a);
        } else if let Some(a) = sub.and_then(|s| expand(s, key, value)) {
            local.extend(a);
        } else {
            return Err(UsageError(format!("unknown config key '{key}'")).into());
        }
    }

    let mut out = Vec::with_capacity(args.len() + global.len() + local.len());
    out.push(args[0].clone());
    out.extend(global);
    match sub_at {
        Some(i) => {
            out.extend(args[1..=i].iter().cloned());
            out.extend(local);
            out.extend(args[i + 1..].iter().cloned());
        }
        None => out.extend(args[1..].iter().cloned()),
    }
    Ok(out)
}
