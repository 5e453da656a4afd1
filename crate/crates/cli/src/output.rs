use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use aoi_mech::eval::format_number;
use serde_json::{Map, Value};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Significant digits of every number the tool prints.
pub const DIGITS: usize = 12;

pub fn num(x: f64) -> String {
    format_number(x, DIGITS)
}

/// A JSON number rounded to [`DIGITS`] significant digits; non-finite values
/// become strings.
pub fn jnum(x: f64) -> Value {
    let s = num(x);
    if x.is_finite() {
        s.parse::<f64>()
            .ok()
            .and_then(serde_json::Number::from_f64)
            .map_or(Value::String(s), Value::Number)
    } else {
        Value::String(s)
    }
}

pub fn jnums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| jnum(x)).collect())
}

pub fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",")
}

/// Run metadata written at the top of every output.
#[derive(Debug, Clone)]
pub struct Metadata {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub extra: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(command: String, config_sha256: String, seed: u64) -> Self {
        Self {
            command,
            config_sha256,
            seed,
            extra: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.extra.push((key.to_string(), value.into()));
        self
    }

    /// `# key: value` lines for CSV and text outputs.
    pub fn comment_block(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# tool: aoi-mech {VERSION}");
        let _ = writeln!(s, "# command: {}", self.command);
        let _ = writeln!(s, "# config_sha256: {}", self.config_sha256);
        let _ = writeln!(s, "# seed: {}", self.seed);
        for (k, v) in &self.extra {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s
    }

    pub fn json(&self) -> Value {
        let mut m = Map::new();
        m.insert("tool".into(), format!("aoi-mech {VERSION}").into());
        m.insert("command".into(), self.command.clone().into());
        m.insert("config_sha256".into(), self.config_sha256.clone().into());
        m.insert("seed".into(), self.seed.into());
        for (k, v) in &self.extra {
            m.insert(k.clone(), v.clone().into());
        }
        Value::Object(m)
    }
}

/// The invocation with output paths removed, so reruns to another file
/// carry the same metadata.
pub fn command_line(args: &[String]) -> String {
    let mut kept = Vec::new();
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--out" || a == "--ages" {
            skip = true;
            continue;
        }
        if a.starts_with("--out=") || a.starts_with("--ages=") {
            continue;
        }
        kept.push(a.as_str());
    }
    kept.join(" ")
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, contents)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn json_document(meta: &Metadata, mut body: Map<String, Value>) -> String {
    let mut doc = Map::new();
    doc.insert("metadata".into(), meta.json());
    doc.append(&mut body);
    let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("JSON values serialize");
    s.push('\n');
    s
}
