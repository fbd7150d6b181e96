use std::time::{SystemTime, UNIX_EPOCH};

use clap::ValueEnum;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// One rendered analysis: the same results as prose, JSON and a table.
#[derive(Debug, Default)]
pub struct Report {
    pub text: String,
    pub json: serde_json::Map<String, Value>,
    pub table: Table,
    /// Preformatted CSV that replaces the table.
    pub raw_csv: Option<String>,
}

#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<const N: usize>(header: [&str; N]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

impl Report {
    pub fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    pub fn set(&mut self, key: &str, value: impl serde::Serialize) -> anyhow::Result<()> {
        self.json
            .insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    /// Appends another report under `key`, prefixing its table rows.
    pub fn absorb(&mut self, key: &str, other: Report) {
        if !self.text.is_empty() {
            self.text.push('\n');
        }
        self.text.push_str(&format!("[{key}]\n"));
        self.text.push_str(&other.text);
        self.json.insert(key.to_string(), Value::Object(other.json));
        if self.table.header.is_empty() {
            self.table = Table::new(["section", "key", "value"]);
        }
        let mut flat = Vec::new();
        flatten(
            "",
            &Value::Object(self.json[key].as_object().cloned().unwrap_or_default()),
            &mut flat,
        );
        for (k, v) in flat {
            self.table.push(vec![key.to_string(), k, v]);
        }
    }

    pub fn render(&self, format: Format, stamp: bool) -> anyhow::Result<String> {
        let stamp = stamp.then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Ok(match format {
            Format::Text => {
                let mut s = self.text.clone();
                if let Some(t) = stamp {
                    s.push_str(&format!("generated: {t} (unix seconds)\n"));
                }
                s
            }
            Format::Json => {
                let mut obj = self.json.clone();
                if let Some(t) = stamp {
                    obj.insert("generated_unix_seconds".into(), t.into());
                }
                let mut s = serde_json::to_string_pretty(&Value::Object(obj))?;
                s.push('\n');
                s
            }
            Format::Csv if self.raw_csv.is_some() => {
                let mut s = self.raw_csv.clone().unwrap_or_default();
                if let Some(t) = stamp {
                    s = format!("# generated {t} (unix seconds)\n{s}");
                }
                s
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                let (header, rows) = if self.table.header.is_empty() {
                    let mut flat = Vec::new();
                    flatten("", &Value::Object(self.json.clone()), &mut flat);
                    let rows = flat.into_iter().map(|(k, v)| vec![k, v]).collect();
                    (vec!["key".to_string(), "value".to_string()], rows)
                } else {
                    (self.table.header.clone(), self.table.rows.clone())
                };
                w.write_record(&header)?;
                for row in &rows {
                    w.write_record(row)?;
                }
                let mut s = String::from_utf8(w.into_inner()?)?;
                if let Some(t) = stamp {
                    s = format!("# generated {t} (unix seconds)\n{s}");
                }
                s
            }
        })
    }
}

/// Dotted-path scalars of a JSON value, arrays indexed by position.
pub fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&join(k), v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&join(&i.to_string()), v, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
