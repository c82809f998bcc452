//! Report tables and their CSV/JSON files.
//!
//! A report's payload (`<name>.csv`, `<name>.json`) depends only on the
//! config and seed. Wall-clock data goes to `<name>.meta.json`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{Map, Value};

/// Rows of flat records with a fixed column order.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

impl Table {
    /// One row per record; nested objects become dotted columns. Columns
    /// appear in first-seen order and missing cells are null.
    pub fn from_records<T: Serialize>(records: &[T]) -> Self {
        let mut table = Table::default();
        let flat: Vec<Vec<(String, Value)>> = records
            .iter()
            .map(|r| {
                let mut out = Vec::new();
                flatten(
                    "",
                    &serde_json::to_value(r).expect("record serializes"),
                    &mut out,
                );
                out
            })
            .collect();
        for row in &flat {
            for (k, _) in row {
                if !table.columns.contains(k) {
                    table.columns.push(k.clone());
                }
            }
        }
        for row in flat {
            let cells = table
                .columns
                .iter()
                .map(|c| {
                    row.iter()
                        .find(|(k, _)| k == c)
                        .map(|(_, v)| v.clone())
                        .unwrap_or(Value::Null)
                })
                .collect();
            table.rows.push(cells);
        }
        table
    }

    fn records(&self) -> Vec<Value> {
        self.rows
            .iter()
            .map(|row| {
                let map: Map<String, Value> = self
                    .columns
                    .iter()
                    .cloned()
                    .zip(row.iter().cloned())
                    .collect();
                Value::Object(map)
            })
            .collect()
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => n.to_string(),
        other => other.to_string(),
    }
}

/// A named result with everything needed to identify how it was made.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub name: String,
    pub seed: u64,
    pub config_hash: String,
    /// Expected number of misclassified target vertices per window, one
    /// entry per simulated configuration.
    pub bias_bounds: Vec<f64>,
    /// `None` for reports without assertions.
    pub passed: Option<bool>,
    #[serde(skip)]
    pub table: Table,
    pub extra: Value,
}

impl Report {
    pub fn new(name: &str, seed: u64, config_hash: &str, table: Table) -> Self {
        Report {
            name: name.to_string(),
            seed,
            config_hash: config_hash.to_string(),
            bias_bounds: Vec::new(),
            passed: None,
            table,
            extra: Value::Null,
        }
    }

    pub fn with_bias(mut self, bias: Vec<f64>) -> Self {
        self.bias_bounds = bias;
        self
    }

    pub fn with_verdict(mut self, passed: bool) -> Self {
        self.passed = Some(passed);
        self
    }

    pub fn with_extra(mut self, extra: Value) -> Self {
        self.extra = extra;
        self
    }

    /// RFC-4180 quoting, `.` decimals and LF line ends. The seed, config
    /// hash and largest bias bound are repeated on every row.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let mut header: Vec<String> =
            vec!["seed".into(), "config_hash".into(), "bias_bound".into()];
        header.extend(self.table.columns.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        let bias = self.bias_bounds.iter().cloned().fold(0.0, f64::max);
        for row in &self.table.rows {
            let mut rec = vec![
                self.seed.to_string(),
                self.config_hash.clone(),
                Value::from(bias).to_string(),
            ];
            rec.extend(row.iter().map(cell));
            w.write_record(&rec).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["rows"] = Value::Array(self.table.records());
        let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Run facts that legitimately change between identical runs.
#[derive(Clone, Debug, Serialize)]
pub struct Metadata {
    pub report: String,
    pub tool_version: String,
    pub started_unix_seconds: u64,
    pub elapsed_seconds: f64,
    pub workers: usize,
    pub timings: Vec<(String, f64)>,
}

impl Metadata {
    pub fn new(report: &str, started: SystemTime, elapsed: Duration, workers: usize) -> Self {
        Metadata {
            report: report.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_seconds: started
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            elapsed_seconds: elapsed.as_secs_f64(),
            workers,
            timings: Vec::new(),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    f.flush()
}

/// Writes the payload files the format asks for plus the metadata file,
/// returning the paths written.
pub fn write_report(
    dir: &Path,
    report: &Report,
    meta: &Metadata,
    csv: bool,
    json: bool,
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if csv {
        let p = dir.join(format!("{}.csv", report.name));
        write_file(&p, &report.to_csv())?;
        written.push(p);
    }
    if json {
        let p = dir.join(format!("{}.json", report.name));
        write_file(&p, report.to_json().as_bytes())?;
        written.push(p);
    }
    let p = dir.join(format!("{}.meta.json", report.name));
    let mut s = serde_json::to_string_pretty(meta).map_err(std::io::Error::other)?;
    s.push('\n');
    write_file(&p, s.as_bytes())?;
    written.push(p);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flattening_keeps_first_seen_order() {
        let t = Table::from_records(&[json!({"a": 1, "b": {"c": 2.5}}), json!({"a": 2, "d": "x"})]);
        assert_eq!(t.columns, vec!["a", "b.c", "d"]);
        assert_eq!(t.rows[1][1], Value::Null);
    }

    #[test]
    fn csv_quotes_and_uses_lf() {
        let t = Table::from_records(&[json!({"label": "a,b \"q\"", "x": 0.1})]);
        let r = Report::new("t", 7, "abc", t).with_bias(vec![1e-7]);
        let text = String::from_utf8(r.to_csv()).unwrap();
        assert!(!text.contains('\r'));
        assert_eq!(
            text,
            "seed,config_hash,bias_bound,label,x\n7,abc,1e-7,\"a,b \"\"q\"\"\",0.1\n"
        );
    }

    #[test]
    fn json_embeds_identity() {
        let t = Table::from_records(&[json!({"x": 1})]);
        let r = Report::new("t", 3, "h", t).with_verdict(true);
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["seed"], 3);
        assert_eq!(v["config_hash"], "h");
        assert_eq!(v["passed"], true);
        assert_eq!(v["rows"][0]["x"], 1);
    }
}
