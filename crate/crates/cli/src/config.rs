// SPDX-License-Identifier: Apache-2.0

//! `key=value` config files. Every key is a long flag of the subcommand
//! (`ams_c` and `ams-c` both mean `--ams-c`); flags given on the command line
//! take precedence over the file.

use std::ffi::OsString;
use std::path::Path;

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", lineno + 1))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(format!("config line {}: bad key {:?}", lineno + 1, k.trim()));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Vec<(String, String)>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    parse_config(&text)
}

/// Splices the settings of any `--config FILE` into the argument list,
/// right after the subcommand name, so explicit flags override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut path = None;
    let mut iter = args.iter().enumerate();
    while let Some((_, a)) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = iter.next().map(|(_, v)| v.clone());
        } else if let Some(v) = s.strip_prefix("--config=") {
            path = Some(OsString::from(v));
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let settings = load_config(Path::new(&path))?;
    let at = 2.min(args.len());
    let mut out: Vec<OsString> = args[..at].to_vec();
    out.extend(settings.into_iter().map(|(k, v)| OsString::from(format!("--{k}={v}"))));
    out.extend_from_slice(&args[at..]);
    Ok(out)
}
