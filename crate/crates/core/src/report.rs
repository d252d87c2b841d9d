//! Typed tables with lossless CSV and JSON round-trips.
//!
//! Floats are written with 17 significant digits in scientific notation and a
//! `.` decimal separator regardless of locale, so `parse(emit(t)) == t`.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub enum Cell {
    UInt(u64),
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    pub fn int(v: i64) -> Self {
        if v >= 0 {
            Cell::UInt(v as u64)
        } else {
            Cell::Int(v)
        }
    }

    pub fn text(v: impl Into<String>) -> Self {
        Cell::Text(v.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Float(v) => Some(v),
            Cell::UInt(v) => Some(v as f64),
            Cell::Int(v) => Some(v as f64),
            _ => None,
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        match *self {
            Cell::UInt(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Cell::Bool(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn parse(raw: &str) -> Self {
        if raw.is_empty() {
            return Cell::Empty;
        }
        match raw {
            "true" => return Cell::Bool(true),
            "false" => return Cell::Bool(false),
            _ => {}
        }
        if let Ok(v) = raw.parse::<u64>() {
            return Cell::UInt(v);
        }
        if let Ok(v) = raw.parse::<i64>() {
            return Cell::Int(v);
        }
        if let Ok(v) = raw.parse::<f64>() {
            return Cell::Float(v);
        }
        Cell::Text(raw.to_string())
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::UInt(v) => json!(v),
            Cell::Int(v) => json!(v),
            Cell::Float(v) if v.is_finite() => json!(v),
            Cell::Float(v) => json!(format_float(*v)),
            Cell::Bool(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }

    fn from_json(value: &Value) -> Result<Self> {
        Ok(match value {
            Value::Null => Cell::Empty,
            Value::Bool(b) => Cell::Bool(*b),
            Value::Number(n) => {
                if let Some(v) = n.as_u64() {
                    Cell::UInt(v)
                } else if let Some(v) = n.as_i64() {
                    Cell::Int(v)
                } else {
                    Cell::Float(n.as_f64().unwrap_or(f64::NAN))
                }
            }
            Value::String(s) => match s.as_str() {
                "inf" | "-inf" | "NaN" => Cell::Float(s.parse().expect("non-finite literal")),
                _ => Cell::Text(s.clone()),
            },
            other => {
                return Err(Error::InvalidInput(format!(
                    "table cell must be a scalar, got {other}"
                )))
            }
        })
    }
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Cell::UInt(a), Cell::UInt(b)) => a == b,
            (Cell::Int(a), Cell::Int(b)) => a == b,
            (Cell::Float(a), Cell::Float(b)) => {
                (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits()
            }
            (Cell::Bool(a), Cell::Bool(b)) => a == b,
            (Cell::Text(a), Cell::Text(b)) => a == b,
            (Cell::Empty, Cell::Empty) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::UInt(v) => write!(f, "{v}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => f.write_str(&format_float(*v)),
            Cell::Bool(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Empty => Ok(()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::UInt(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::UInt(v as u64)
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
        v.map_or(Cell::Empty, Into::into)
    }
}

/// 17 significant digits, scientific notation.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Column-named table with optional `key: value` metadata lines.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Table {
    pub meta: BTreeMap<String, String>,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            meta: BTreeMap::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.meta.insert(key.into(), value.to_string());
        self
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                what: "table row",
                expected: self.columns.len(),
                actual: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, row: usize, column: &str) -> Option<&Cell> {
        let j = self.column_index(column)?;
        self.rows.get(row).map(|r| &r[j])
    }

    pub fn emit(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn parse(text: &str, format: Format) -> Result<Self> {
        match format {
            Format::Csv => Self::from_csv(text),
            Format::Json => Self::from_json(text),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        for (k, v) in &self.meta {
            if k.contains(':') || k.contains('\n') || v.contains('\n') {
                return Err(Error::InvalidInput(format!("metadata entry {k:?} not representable")));
            }
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
        writer.write_record(&self.columns)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(|c| c.to_string()))?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
        Ok(out)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut meta = BTreeMap::new();
        let mut body_start = 0;
        for line in text.split_inclusive('\n') {
            let Some(rest) = line.strip_prefix("# ") else {
                break;
            };
            let (k, v) = rest
                .trim_end_matches(['\n', '\r'])
                .split_once(": ")
                .ok_or_else(|| Error::InvalidInput(format!("bad metadata line {line:?}")))?;
            meta.insert(k.to_string(), v.to_string());
            body_start += line.len();
        }
        let mut reader = csv::ReaderBuilder::new().from_reader(&text.as_bytes()[body_start..]);
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            rows.push(record?.iter().map(Cell::parse).collect());
        }
        Ok(Self { meta, columns, rows })
    }

    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::to_json).collect()))
            .collect();
        let value = json!({ "meta": self.meta, "columns": self.columns, "rows": rows });
        Ok(serde_json::to_string_pretty(&value)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidInput("table JSON must be an object".into()))?;
        let meta = match obj.get("meta") {
            Some(Value::Object(m)) => string_map(m)?,
            None | Some(Value::Null) => BTreeMap::new(),
            Some(_) => return Err(Error::InvalidInput("meta must be an object".into())),
        };
        let columns: Vec<String> = serde_json::from_value(obj.get("columns").cloned().unwrap_or(Value::Null))?;
        let mut table = Self {
            meta,
            columns,
            rows: Vec::new(),
        };
        let rows = obj
            .get("rows")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::InvalidInput("rows must be an array".into()))?;
        for row in rows {
            let cells = row
                .as_array()
                .ok_or_else(|| Error::InvalidInput("row must be an array".into()))?
                .iter()
                .map(Cell::from_json)
                .collect::<Result<Vec<_>>>()?;
            table.push(cells)?;
        }
        Ok(table)
    }
}

fn string_map(m: &Map<String, Value>) -> Result<BTreeMap<String, String>> {
    m.iter()
        .map(|(k, v)| match v {
            Value::String(s) => Ok((k.clone(), s.clone())),
            other => Err(Error::InvalidInput(format!("meta value for {k} must be a string, got {other}"))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Table {
        let mut t = Table::new(["n", "z", "flag", "label", "gap", "neg"]).with_meta("seed", 7);
        t.push(vec![64usize.into(), 0.1.into(), true.into(), "a,b".into(), Cell::Empty, Cell::int(-3)])
            .unwrap();
        t.push(vec![
            1024usize.into(),
            f64::INFINITY.into(),
            false.into(),
            "x".into(),
            1.0.into(),
            Cell::int(4),
        ])
        .unwrap();
        t
    }

    #[test]
    fn csv_layout() {
        let text = sample().to_csv().unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# seed: 7"));
        assert_eq!(lines.next(), Some("n,z,flag,label,gap,neg"));
        assert_eq!(
            lines.next(),
            Some("64,1.0000000000000001e-1,true,\"a,b\",,-3")
        );
    }

    #[test]
    fn round_trips() {
        let t = sample();
        assert_eq!(Table::from_csv(&t.to_csv().unwrap()).unwrap(), t);
        assert_eq!(Table::from_json(&t.to_json().unwrap()).unwrap(), t);
    }

    #[test]
    fn rejects_ragged_rows() {
        let mut t = Table::new(["a"]);
        assert!(t.push(vec![Cell::Empty, Cell::Empty]).is_err());
    }

    proptest! {
        #[test]
        fn floats_round_trip(v in any::<f64>()) {
            let mut t = Table::new(["v"]);
            t.push(vec![v.into()]).unwrap();
            prop_assert_eq!(Table::from_csv(&t.to_csv().unwrap()).unwrap(), t.clone());
            prop_assert_eq!(Table::from_json(&t.to_json().unwrap()).unwrap(), t);
        }
    }
}
