//! Measurement containers (time traces, power sweeps) and their CSV form.
//!
//! CSV files are UTF-8, comma separated, with a header row naming the
//! columns as `name_unit`. Lines starting with `#` are comments. Numbers are
//! written with 17 significant digits so that re-reading is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const TIME_COLUMN: &str = "time_s";
pub const MASK_COLUMN: &str = "masked";
pub const SIGMA_COLUMN: &str = "sigma";
pub const PUMP_POWER_COLUMN: &str = "pump_power_mW";

/// Time series with optional per-sample mask (e.g. mode-hopping intervals).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    time_s: Vec<f64>,
    value: Vec<f64>,
    masked: Vec<bool>,
    value_label: String,
}

impl Trace {
    pub fn new(time_s: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        if time_s.len() != value.len() {
            return Err(Error::invalid("time and value columns differ in length"));
        }
        if time_s.is_empty() {
            return Err(Error::invalid("empty trace"));
        }
        if let Some(i) = time_s.iter().chain(&value).position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at sample {}",
                i % time_s.len()
            )));
        }
        if let Some(i) = time_s.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "time not strictly increasing at sample {}",
                i + 1
            )));
        }
        let n = time_s.len();
        Ok(Trace {
            time_s,
            value,
            masked: vec![false; n],
            value_label: "value".into(),
        })
    }

    pub fn with_mask(mut self, masked: Vec<bool>) -> Result<Self> {
        if masked.len() != self.time_s.len() {
            return Err(Error::invalid("mask length differs from trace length"));
        }
        self.masked = masked;
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.value_label = label.into();
        self
    }

    /// Masks every sample with `start_s <= t <= end_s`.
    pub fn mask_interval(&mut self, start_s: f64, end_s: f64) {
        for (t, m) in self.time_s.iter().zip(self.masked.iter_mut()) {
            if *t >= start_s && *t <= end_s {
                *m = true;
            }
        }
    }

    pub fn time(&self) -> &[f64] {
        &self.time_s
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    pub fn masked(&self) -> &[bool] {
        &self.masked
    }

    pub fn value_label(&self) -> &str {
        &self.value_label
    }

    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }

    pub fn has_mask(&self) -> bool {
        self.masked.iter().any(|&m| m)
    }

    /// Unmasked (time, value) samples.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.time_s
            .iter()
            .zip(&self.value)
            .zip(&self.masked)
            .filter(|(_, &m)| !m)
            .map(|((&t, &v), _)| (t, v))
    }

    pub fn to_csv(&self, provenance: &[String]) -> String {
        let mut out = comment_block(provenance);
        let with_mask = self.has_mask();
        out.push_str(TIME_COLUMN);
        out.push(',');
        out.push_str(&self.value_label);
        if with_mask {
            out.push(',');
            out.push_str(MASK_COLUMN);
        }
        out.push('\n');
        for i in 0..self.len() {
            write!(out, "{},{}", num(self.time_s[i]), num(self.value[i])).unwrap();
            if with_mask {
                write!(out, ",{}", u8::from(self.masked[i])).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Values against a sorted abscissa (usually pump power), with optional
/// per-point standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepData {
    abscissa_label: String,
    value_label: String,
    abscissa: Vec<f64>,
    value: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<Vec<f64>>,
}

impl SweepData {
    pub fn new(abscissa: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        if abscissa.len() != value.len() {
            return Err(Error::invalid("abscissa and value columns differ in length"));
        }
        if abscissa.is_empty() {
            return Err(Error::invalid("empty sweep"));
        }
        if abscissa.iter().chain(&value).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite value in sweep"));
        }
        if let Some(i) = abscissa.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "abscissa not strictly ascending at point {}",
                i + 1
            )));
        }
        Ok(SweepData {
            abscissa_label: PUMP_POWER_COLUMN.into(),
            value_label: "value".into(),
            abscissa,
            value,
            sigma: None,
        })
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Result<Self> {
        if sigma.len() != self.abscissa.len() {
            return Err(Error::invalid("sigma column length differs"));
        }
        if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("sigma values must be positive and finite"));
        }
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn with_labels(mut self, abscissa: impl Into<String>, value: impl Into<String>) -> Self {
        self.abscissa_label = abscissa.into();
        self.value_label = value.into();
        self
    }

    pub fn abscissa(&self) -> &[f64] {
        &self.abscissa
    }

    pub fn value(&self) -> &[f64] {
        &self.value
    }

    pub fn sigma(&self) -> Option<&[f64]> {
        self.sigma.as_deref()
    }

    pub fn abscissa_label(&self) -> &str {
        &self.abscissa_label
    }

    pub fn value_label(&self) -> &str {
        &self.value_label
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.abscissa.iter().copied().zip(self.value.iter().copied())
    }

    pub fn to_csv(&self, provenance: &[String]) -> String {
        let mut out = comment_block(provenance);
        write!(out, "{},{}", self.abscissa_label, self.value_label).unwrap();
        if self.sigma.is_some() {
            write!(out, ",{SIGMA_COLUMN}").unwrap();
        }
        out.push('\n');
        for i in 0..self.len() {
            write!(out, "{},{}", num(self.abscissa[i]), num(self.value[i])).unwrap();
            if let Some(s) = &self.sigma {
                write!(out, ",{}", num(s[i])).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// JSON form carrying free-form metadata (temperature, geometry, ...).
    pub fn to_json(&self, metadata: serde_json::Value) -> serde_json::Value {
        let mut doc = serde_json::to_value(self).expect("sweep serializes");
        doc["metadata"] = metadata;
        doc
    }
}

/// 17 significant digits: enough for an exact f64 round trip.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn comment_block(lines: &[String]) -> String {
    let mut out = String::new();
    for line in lines {
        for part in line.lines() {
            writeln!(out, "# {part}").unwrap();
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Trace,
    Sweep,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Trace(Trace),
    Sweep(SweepData),
}

/// A validated container plus any non-fatal normalization notes.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub data: Dataset,
    pub warnings: Vec<String>,
}

pub fn ingest_csv(path: &Path, kind: DataKind) -> Result<Ingested> {
    let mut text = String::new();
    fs::File::open(path)?.read_to_string(&mut text)?;
    parse_csv(&text, &path.display().to_string(), kind)
}

pub fn parse_csv(text: &str, source_name: &str, kind: DataKind) -> Result<Ingested> {
    let table = read_table(text, source_name)?;
    match kind {
        DataKind::Trace => parse_trace(table, source_name),
        DataKind::Sweep => parse_sweep(table, source_name),
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<(u64, Vec<f64>)>,
}

fn read_table(text: &str, source_name: &str) -> Result<Table> {
    let data_err = |line: u64, message: String| Error::Data {
        source_name: source_name.to_owned(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| data_err(0, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.len() < 2 || header.iter().any(String::is_empty) {
        return Err(data_err(1, "header must name at least two columns".into()));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            data_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(data_err(
                line,
                format!("expected {} columns, found {}", header.len(), record.len()),
            ));
        }
        let mut values = Vec::with_capacity(record.len());
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| data_err(line, format!("cannot parse `{field}` as a number")))?;
            if !v.is_finite() {
                return Err(data_err(line, format!("non-finite value `{field}`")));
            }
            values.push(v);
        }
        rows.push((line, values));
    }
    if rows.is_empty() {
        return Err(data_err(0, "no data rows".into()));
    }
    Ok(Table { header, rows })
}

fn parse_trace(table: Table, source_name: &str) -> Result<Ingested> {
    let err = |line: u64, message: String| Error::Data {
        source_name: source_name.to_owned(),
        line,
        message,
    };
    let Table { header, rows } = table;
    if header[0] != TIME_COLUMN {
        return Err(err(1, format!("first column must be `{TIME_COLUMN}`")));
    }
    let with_mask = match header.len() {
        2 => false,
        3 if header[2] == MASK_COLUMN => true,
        _ => {
            return Err(err(
                1,
                format!("trace columns are `{TIME_COLUMN},<value>[,{MASK_COLUMN}]`"),
            ))
        }
    };
    let mut time = Vec::with_capacity(rows.len());
    let mut value = Vec::with_capacity(rows.len());
    let mut masked = Vec::with_capacity(rows.len());
    for (line, row) in &rows {
        if let Some(&prev) = time.last() {
            if row[0] <= prev {
                return Err(err(*line, "time not strictly increasing".into()));
            }
        }
        time.push(row[0]);
        value.push(row[1]);
        if with_mask {
            let m = row[2];
            if m != 0.0 && m != 1.0 {
                return Err(err(*line, "mask entries must be 0 or 1".into()));
            }
            masked.push(m == 1.0);
        } else {
            masked.push(false);
        }
    }
    let trace = Trace::new(time, value)?
        .with_mask(masked)?
        .with_label(header[1].clone());
    Ok(Ingested {
        data: Dataset::Trace(trace),
        warnings: Vec::new(),
    })
}

fn parse_sweep(table: Table, source_name: &str) -> Result<Ingested> {
    let err = |line: u64, message: String| Error::Data {
        source_name: source_name.to_owned(),
        line,
        message,
    };
    let Table { header, mut rows } = table;
    let with_sigma = match header.len() {
        2 => false,
        3 if header[2] == SIGMA_COLUMN => true,
        _ => {
            return Err(err(
                1,
                format!("sweep columns are `<abscissa>,<value>[,{SIGMA_COLUMN}]`"),
            ))
        }
    };
    let mut warnings = Vec::new();
    if rows.windows(2).any(|w| w[1].1[0] < w[0].1[0]) {
        warnings.push(format!(
            "{source_name}: rows not sorted by `{}`; sorted on ingest",
            header[0]
        ));
        rows.sort_by(|a, b| a.1[0].total_cmp(&b.1[0]));
    }
    if let Some(w) = rows.windows(2).find(|w| w[1].1[0] == w[0].1[0]) {
        return Err(err(
            w[1].0,
            format!("duplicate `{}` value {}", header[0], w[1].1[0]),
        ));
    }
    if with_sigma {
        if let Some((line, _)) = rows.iter().find(|(_, r)| r[2] <= 0.0) {
            return Err(err(*line, "sigma must be positive".into()));
        }
    }
    let abscissa = rows.iter().map(|(_, r)| r[0]).collect();
    let value = rows.iter().map(|(_, r)| r[1]).collect();
    let mut sweep = SweepData::new(abscissa, value)?.with_labels(&header[0], &header[1]);
    if with_sigma {
        sweep = sweep.with_sigma(rows.iter().map(|(_, r)| r[2]).collect())?;
    }
    Ok(Ingested {
        data: Dataset::Sweep(sweep),
        warnings,
    })
}

impl Ingested {
    pub fn into_trace(self) -> Result<Trace> {
        match self.data {
            Dataset::Trace(t) => Ok(t),
            Dataset::Sweep(_) => Err(Error::invalid("expected a trace, found a sweep")),
        }
    }

    pub fn into_sweep(self) -> Result<SweepData> {
        match self.data {
            Dataset::Sweep(s) => Ok(s),
            Dataset::Trace(_) => Err(Error::invalid("expected a sweep, found a trace")),
        }
    }
}
