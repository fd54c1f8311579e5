//! Self-describing CSV / JSON tables.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::args::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
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

/// Shortest round-trip representation, exponent form for very small or large
/// magnitudes.
pub fn format_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e15) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format_num(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(_) => Value::Null,
            Cell::Int(v) => json!(v),
            Cell::Bool(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

/// Rows plus summary values that go into the header.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub notes: Vec<(&'static str, Value)>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &'static str, value: Value) {
        self.notes.push((key, value));
    }
}

/// Provenance written ahead of every table.
#[derive(Debug, Clone)]
pub struct Header {
    pub command: &'static str,
    pub config: Value,
    pub timestamp: Option<u64>,
}

pub fn write_table<W: Write>(out: &mut W, format: Format, header: &Header, table: &Table) -> std::io::Result<()> {
    match format {
        Format::Csv => {
            writeln!(out, "# cvbell {}", env!("CARGO_PKG_VERSION"))?;
            writeln!(out, "# command: {}", header.command)?;
            writeln!(out, "# config: {}", header.config)?;
            if let Some(t) = header.timestamp {
                writeln!(out, "# timestamp_unix: {t}")?;
            }
            for (k, v) in &table.notes {
                writeln!(out, "# {k}: {v}")?;
            }
            writeln!(out, "# columns: {}", table.columns.join(","))?;
            writeln!(out, "{}", table.columns.join(","))?;
            for row in &table.rows {
                let line: Vec<String> = row.iter().map(Cell::csv).collect();
                writeln!(out, "{}", line.join(","))?;
            }
        }
        Format::Json => {
            let mut head = Map::new();
            head.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
            head.insert("command".into(), json!(header.command));
            head.insert("config".into(), header.config.clone());
            if let Some(t) = header.timestamp {
                head.insert("timestamp_unix".into(), json!(t));
            }
            let notes: Map<String, Value> = table.notes.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
            head.insert("notes".into(), Value::Object(notes));
            head.insert("columns".into(), json!(table.columns));
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
                .collect();
            serde_json::to_writer_pretty(&mut *out, &json!({ "header": head, "rows": rows }))?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.0, 1.0157, -3.25e-9, 1e20, 0.1 + 0.2, 5e-324] {
            assert_eq!(format_num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_num(0.5), "0.5");
        assert_eq!(format_num(2.5e-7), "2.5e-7");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.5.into(), "x,y".into()]);
        t.note("max", json!(2));
        let h = Header {
            command: "test",
            config: json!({"k": 1}),
            timestamp: None,
        };
        let mut buf = Vec::new();
        write_table(&mut buf, Format::Csv, &h, &t).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "# command: test");
        assert_eq!(lines[2], r#"# config: {"k":1}"#);
        assert_eq!(lines[3], "# max: 2");
        assert_eq!(lines[5], "a,b");
        assert_eq!(lines[6], "1.5,\"x,y\"");
    }
}
