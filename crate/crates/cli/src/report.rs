// SPDX-License-Identifier: Apache-2.0

//! Tabular reports with a self-describing header, emitted as CSV or JSON.
//!
//! CSV layout: `# key=value` header lines (tool, command, build, seed, one
//! `config.*` line per resolved setting, timestamp), then `# summary.*`
//! lines, then the column row and the data rows. Floats are written in
//! shortest round-trip form in both formats, so the two agree bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const BUILD_ID: &str = env!("FPDISJ_BUILD_ID");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub tool: String,
    pub command: String,
    pub build: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    /// Unix seconds; the only field allowed to differ between reruns.
    pub timestamp: u64,
}

impl Header {
    pub fn new(command: &str, seed: u64, config: BTreeMap<String, String>) -> Self {
        Header {
            tool: "fpdisj".into(),
            command: command.into(),
            build: BUILD_ID.into(),
            seed,
            config,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub header: Header,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub summary: BTreeMap<String, Value>,
}

impl Report {
    pub fn new(header: Header, columns: &[&str]) -> Self {
        Report {
            header,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Csv => self.to_csv(),
        }
    }

    fn to_csv(&self) -> String {
        let h = &self.header;
        let mut out = String::new();
        let _ = writeln!(out, "# tool={}", h.tool);
        let _ = writeln!(out, "# command={}", h.command);
        let _ = writeln!(out, "# build={}", h.build);
        let _ = writeln!(out, "# seed={}", h.seed);
        for (k, v) in &h.config {
            let _ = writeln!(out, "# config.{k}={v}");
        }
        let _ = writeln!(out, "# timestamp={}", h.timestamp);
        for (k, v) in &self.summary {
            let _ = writeln!(out, "# summary.{k}={}", cell(v));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(cell).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Writes to `path`, or stdout when `None`.
    pub fn write(&self, format: Format, path: Option<&Path>) -> std::io::Result<()> {
        let text = self.render(format);
        match path {
            Some(p) => std::fs::write(p, text),
            None => std::io::stdout().lock().write_all(text.as_bytes()),
        }
    }
}

/// CSV cell text. Arrays are `;`-joined; strings with separators are quoted.
pub fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => n.to_string(),
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(cell).collect::<Vec<_>>().join(";"),
        Value::Object(_) => v.to_string(),
    }
}

/// `f64` as a JSON value; non-finite values become strings.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(x.to_string()), Value::Number)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn csv_layout() {
        let mut cfg = BTreeMap::new();
        cfg.insert("p".to_string(), "3".to_string());
        let mut r = Report::new(Header::new("demo", 7, cfg), &["a", "b"]);
        r.push(vec![json!(1), num(0.1)]);
        r.push(vec![json!("x,y"), json!([1, 2])]);
        r.set("rows", 2);
        let csv = r.render(Format::Csv);
        assert!(csv.starts_with("# tool=fpdisj\n# command=demo\n"));
        assert!(csv.contains("# config.p=3\n"));
        assert!(csv.contains("# summary.rows=2\n"));
        assert!(csv.ends_with("a,b\n1,0.1\n\"x,y\",1;2\n"));
    }

    #[test]
    fn json_round_trip() {
        let mut r = Report::new(Header::new("demo", 1, BTreeMap::new()), &["x"]);
        r.push(vec![num(1.0 / 3.0)]);
        let back: Report = serde_json::from_str(&r.render(Format::Json)).unwrap();
        assert_eq!(back, r);
    }
}
