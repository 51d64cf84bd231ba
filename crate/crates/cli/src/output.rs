//! CSV and JSON writers. Every output starts with the resolved config.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

/// 17 significant digits.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

fn csv_field(c: &Cell) -> String {
    match c {
        Cell::Real(v) => format_real(*v),
        Cell::Int(v) => v.to_string(),
        Cell::Bool(v) => v.to_string(),
        Cell::Missing => String::new(),
        Cell::Text(s) if s.contains([',', '"', '\n', '\r']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::Text(s) => s.clone(),
    }
}

fn json_value(c: &Cell) -> Value {
    match c {
        Cell::Real(v) if v.is_finite() => json!(v),
        Cell::Real(_) | Cell::Missing => Value::Null,
        Cell::Int(v) => json!(v),
        Cell::Bool(v) => json!(v),
        Cell::Text(s) => json!(s),
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Scalar results, written as comment lines in CSV.
    pub summary: Vec<(&'static str, Cell)>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            ..Table::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &'static str, value: impl Into<Cell>) {
        self.summary.push((key, value.into()));
    }
}

fn stamp() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    format!("unix:{secs}")
}

pub fn write_table(w: &mut dyn Write, table: &Table, cfg: &RunConfig) -> std::io::Result<()> {
    let config = serde_json::to_value(cfg).expect("config serializes");
    match cfg.format {
        Format::Csv => {
            writeln!(w, "# epd-screen {} {}", env!("CARGO_PKG_VERSION"), cfg.command.name())?;
            writeln!(w, "# config: {config}")?;
            if cfg.stamp {
                writeln!(w, "# stamp: {}", stamp())?;
            }
            for (k, v) in &table.summary {
                writeln!(w, "# {k}: {}", csv_field(v))?;
            }
            writeln!(w, "{}", table.columns.join(","))?;
            for row in &table.rows {
                let fields: Vec<String> = row.iter().map(csv_field).collect();
                writeln!(w, "{}", fields.join(","))?;
            }
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| {
                    let m: Map<String, Value> = table
                        .columns
                        .iter()
                        .zip(r)
                        .map(|(c, v)| (c.to_string(), json_value(v)))
                        .collect();
                    Value::Object(m)
                })
                .collect();
            let summary: Map<String, Value> = table
                .summary
                .iter()
                .map(|(k, v)| (k.to_string(), json_value(v)))
                .collect();
            let mut doc = json!({ "config": config, "summary": summary, "rows": rows });
            if cfg.stamp {
                doc["stamp"] = json!(stamp());
            }
            serde_json::to_writer_pretty(&mut *w, &doc)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_keep_seventeen_digits() {
        let x = 0.1 + 0.2;
        let s = format_real(x);
        assert_eq!(s, "3.0000000000000004e-1");
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert_eq!(format_real(f64::NAN), "NaN");
    }

    #[test]
    fn text_fields_are_quoted() {
        assert_eq!(csv_field(&Cell::Text("a,b".into())), "\"a,b\"");
        assert_eq!(csv_field(&Cell::Text("say \"hi\"".into())), "\"say \"\"hi\"\"\"");
        assert_eq!(csv_field(&Cell::Missing), "");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1usize.into(), 0.5.into()]);
        t.note("max", 2usize);
        let mut buf = Vec::new();
        write_table(&mut buf, &t, &RunConfig::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# epd-screen"));
        assert!(lines[1].starts_with("# config: {"));
        assert_eq!(lines[2], "# max: 2");
        assert_eq!(lines[3], "a,b");
        assert_eq!(lines[4], "1,5.0000000000000000e-1");
    }
}
