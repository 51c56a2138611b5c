//! Artifact conventions: every CSV/JSON/SVG file carries tool version, the
//! full parameter set, the seed and a timestamp.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const TOOL_NAME: &str = "spaghetto";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub params: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub timestamp: String,
}

impl Metadata {
    pub fn new(command: impl Into<String>, params: &impl Serialize) -> Result<Self> {
        let params = match serde_json::to_value(params)? {
            Value::Object(map) => map.into_iter().collect(),
            Value::Null => BTreeMap::new(),
            other => BTreeMap::from([("value".to_string(), other)]),
        };
        Ok(Metadata {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            command: command.into(),
            params,
            seed: None,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Parameters decoded back into their original structure.
    pub fn params_as<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        let map: serde_json::Map<String, Value> = self.params.clone().into_iter().collect();
        Ok(serde_json::from_value(Value::Object(map))?)
    }

    fn comment_lines(&self) -> Result<Vec<String>> {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        Ok(vec![
            format!("# tool: {} {}", self.tool, self.version),
            format!("# command: {}", self.command),
            format!("# params: {}", serde_json::to_string(&self.params)?),
            format!("# seed: {seed}"),
            format!("# timestamp: {}", self.timestamp),
        ])
    }

    /// Recover metadata from the comment preamble of a CSV artifact.
    pub fn from_csv_text(text: &str) -> Result<Self> {
        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            if let Some((k, v)) = line.trim_start_matches('#').trim().split_once(": ") {
                fields.insert(k, v);
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Serialization(format!("CSV metadata lacks `{k}`")))
        };
        let (tool, version) = get("tool")?
            .split_once(' ')
            .ok_or_else(|| Error::Serialization("malformed tool line".into()))?;
        let seed = match get("seed")? {
            "none" => None,
            s => Some(s.parse().map_err(|_| Error::Serialization(format!("bad seed {s:?}")))?),
        };
        Ok(Metadata {
            tool: tool.to_string(),
            version: version.to_string(),
            command: get("command")?.to_string(),
            params: serde_json::from_str(get("params")?)?,
            seed,
            timestamp: get("timestamp")?.to_string(),
        })
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Rows of string cells under a fixed header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, mut w: W, meta: &Metadata) -> Result<()> {
        let io = |e| Error::io("<csv>", e);
        for line in meta.comment_lines()? {
            writeln!(w, "{line}").map_err(io)?;
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.header)?;
        for row in &self.rows {
            csv.write_record(row)?;
        }
        csv.flush().map_err(io)?;
        Ok(())
    }

    pub fn to_string_with(&self, meta: &Metadata) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf, meta)?;
        String::from_utf8(buf).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn write_file(&self, path: &Path, meta: &Metadata) -> Result<()> {
        write_file(path, self.to_string_with(meta)?.as_bytes())
    }
}

#[derive(Serialize)]
struct JsonArtifact<'a, T: Serialize> {
    meta: &'a Metadata,
    #[serde(flatten)]
    body: &'a T,
}

pub fn to_json_string<T: Serialize>(body: &T, meta: &Metadata) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&JsonArtifact { meta, body })?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, body: &T, meta: &Metadata) -> Result<()> {
    write_file(path, to_json_string(body, meta)?.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Artifact text with the timestamp line removed, for reproducibility checks.
pub fn strip_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("# timestamp:") && !l.trim_start().starts_with("\"timestamp\":"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct P {
        n: usize,
        q: String,
    }

    #[test]
    fn csv_metadata_round_trip() {
        let params = P { n: 4, q: "3/2".into() };
        let meta = Metadata::new("count", &params).unwrap().with_seed(7);
        let mut t = CsvTable::new(&["x", "value"]);
        t.push(vec!["0".into(), fmt_f64(0.1)]);
        let text = t.to_string_with(&meta).unwrap();
        assert!(text.contains("x,value\n0,1.0000000000000001e-1\n"));
        let back = Metadata::from_csv_text(&text).unwrap();
        assert_eq!(back, meta);
        assert_eq!(back.params_as::<P>().unwrap(), params);
    }

    #[test]
    fn seventeen_digits() {
        let s = fmt_f64(std::f64::consts::PI);
        assert_eq!(s.parse::<f64>().unwrap(), std::f64::consts::PI);
        assert_eq!(s.split('e').next().unwrap().replace('.', "").len(), 17);
    }

    #[test]
    fn stripping_timestamps() {
        let meta = Metadata::new("x", &P { n: 1, q: "1".into() }).unwrap();
        let a = to_json_string(&P { n: 1, q: "1".into() }, &meta).unwrap();
        let mut other = meta.clone();
        other.timestamp = "1970-01-01T00:00:00Z".into();
        let b = to_json_string(&P { n: 1, q: "1".into() }, &other).unwrap();
        assert_ne!(a, b);
        assert_eq!(strip_timestamp(&a), strip_timestamp(&b));
    }
}
