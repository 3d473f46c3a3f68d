//! Flat `key = value` config files.
//!
//! Each entry becomes the flag `--key value`; those flags are placed ahead of
//! the command-line ones so that the command line wins.

use std::path::Path;

use crate::error::{CliError, CliResult};

/// Parsed entries in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    pub entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| CliError::Config {
                path: path.to_path_buf(),
                line: n + 1,
                message: m.to_string(),
            };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
            let key = k.trim().replace('_', "-");
            if key.is_empty() || key.starts_with('-') || key.contains(char::is_whitespace) {
                return Err(err("malformed key"));
            }
            if key == "config" {
                return Err(err("config files cannot include other config files"));
            }
            entries.push((key, v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Flags for the entries; `true`/`false` values become bare switches or nothing.
    pub fn to_args(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (k, v) in &self.entries {
            match v.as_str() {
                "true" => out.push(format!("--{k}")),
                "false" => {}
                _ => {
                    out.push(format!("--{k}"));
                    out.push(v.clone());
                }
            }
        }
        out
    }
}

/// Finds `--config PATH` / `--config=PATH` in `args`, removes it and returns the path.
pub fn take_config_flag(args: &mut Vec<String>) -> CliResult<Option<String>> {
    let mut found = None;
    let mut i = 0;
    while i < args.len() {
        if args[i] == "--" {
            break;
        }
        if let Some(p) = args[i].strip_prefix("--config=") {
            found = Some(p.to_string());
            args.remove(i);
        } else if args[i] == "--config" {
            if i + 1 >= args.len() {
                return Err(CliError::Usage("--config needs a path".into()));
            }
            found = Some(args.remove(i + 1));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(found)
}
