//! CSV tables and JSON summaries.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::Value;

/// 17 significant digits, scientific notation; round-trips bit-exactly.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
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

/// Long-format table with a fixed header.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// First line is `# config: <json>`, then the header and rows.
    pub fn write<W: Write>(&self, w: W, config: &Value) -> io::Result<()> {
        let mut w = io::BufWriter::new(w);
        writeln!(w, "# config: {}", serde_json::to_string(config)?)?;
        let mut csv = csv::WriterBuilder::new().from_writer(w);
        csv.write_record(&self.header)?;
        for row in &self.rows {
            csv.write_record(row.iter().map(Cell::render))?;
        }
        csv.flush()
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ErrorRecord {
    pub code: String,
    pub message: String,
    /// Where the failure happened, e.g. a grid cell.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
}

impl ErrorRecord {
    pub fn from_core(e: &flatgp_core::Error, context: Option<String>) -> Self {
        Self {
            code: e.code().to_string(),
            message: e.to_string(),
            context,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Partial,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: String,
    pub seed: u64,
    pub status: RunStatus,
    pub config: Value,
    pub metrics: Value,
    pub errors: Vec<ErrorRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, f64::MAX] {
            let s = fmt_float(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
        assert_eq!(fmt_float(f64::NAN), "NaN");
    }

    #[test]
    fn table_has_config_line_then_header() {
        let mut t = Table::new(&["a", "status"]);
        t.push(vec![Cell::Num(1.5), "ok".into()]);
        let mut buf = Vec::new();
        t.write(&mut buf, &serde_json::json!({"seed": 3})).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"# config: {"seed":3}"#);
        assert_eq!(lines[1], "a,status");
        assert_eq!(lines[2], "1.5000000000000000e0,ok");
    }
}
