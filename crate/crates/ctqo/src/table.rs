//! Plain CSV tables: numbers are written at twelve significant digits and
//! parsed back for verification.

use std::collections::BTreeMap;

use crate::error::CliError;

/// Twelve significant digits, shortest of fixed or scientific notation, with
/// trailing zeros trimmed. Non-finite values print as `nan`, `inf`, `-inf`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    // Round first so the exponent reflects the printed mantissa.
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa.to_string()))
    }
}

fn trim(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.into()
    }
}

pub fn int(x: impl Into<i128>) -> String {
    x.into().to_string()
}

pub fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.into()
}

/// Optional value; absent prints as `nan`.
pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), num)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: Table) {
        debug_assert_eq!(self.header, other.header);
        self.rows.extend(other.rows);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.into_inner()
            .map_err(|e| CliError::Internal(e.to_string()))
    }

    pub fn from_bytes(name: &str, bytes: &[u8]) -> Result<Self, CliError> {
        let mut r = csv::Reader::from_reader(bytes);
        let header = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(csv_err)?.iter().map(str::to_string).collect());
        }
        Ok(Self {
            name: name.into(),
            header,
            rows,
        })
    }

    fn index(&self, column: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| CliError::Data(format!("{}: missing column `{column}`", self.name)))
    }

    pub fn strings(&self, column: &str) -> Result<Vec<&str>, CliError> {
        let k = self.index(column)?;
        Ok(self.rows.iter().map(|r| r[k].as_str()).collect())
    }

    pub fn numbers(&self, column: &str) -> Result<Vec<f64>, CliError> {
        self.strings(column)?
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                s.parse::<f64>().map_err(|_| {
                    CliError::Data(format!(
                        "{}: row {} column `{column}`: `{s}` is not a number",
                        self.name,
                        i + 1
                    ))
                })
            })
            .collect()
    }

    /// Row indices grouped by the value of an integer key column, in order of
    /// first appearance.
    pub fn groups(&self, column: &str) -> Result<Vec<(String, Vec<usize>)>, CliError> {
        let keys = self.strings(column)?;
        let mut order: Vec<String> = Vec::new();
        let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, k) in keys.iter().enumerate() {
            let e = map.entry(k).or_default();
            if e.is_empty() {
                order.push(k.to_string());
            }
            e.push(i);
        }
        Ok(order
            .into_iter()
            .map(|k| {
                let rows = map.remove(k.as_str()).unwrap_or_default();
                (k, rows)
            })
            .collect())
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(e.to_string())
}
