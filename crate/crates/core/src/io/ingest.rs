use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::Recording;

/// A column picked by zero-based index or by header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Column {
    Index(usize),
    Name(String),
}

/// Where the samples (and optionally triggers) live in a delimited file.
///
/// The default layout is tab-separated `time, ch1, ch2, trigger` with the
/// samples in `ch1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub sample: Column,
    pub trigger: Option<Column>,
    /// `None` picks tab for `.tsv`, comma for `.csv`, otherwise sniffs the
    /// first line.
    pub delimiter: Option<char>,
    /// `None` treats a first row with non-numeric selected fields as a header.
    pub has_header: Option<bool>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            sample: Column::Index(1),
            trigger: None,
            delimiter: None,
            has_header: None,
        }
    }
}

impl ColumnMap {
    /// Samples in column `index`, no triggers.
    pub fn single(index: usize) -> Self {
        Self {
            sample: Column::Index(index),
            ..Self::default()
        }
    }

    pub fn with_trigger(mut self, trigger: Column) -> Self {
        self.trigger = Some(trigger);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Volts,
    Microvolts,
}

impl Units {
    fn to_microvolts(self) -> f64 {
        match self {
            Units::Volts => 1e6,
            Units::Microvolts => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRecording {
    pub recording: Recording,
    /// Sample indices of trigger onsets; empty without a trigger column.
    pub triggers: Vec<usize>,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn sniff_delimiter(path: &Path, text_head: &str) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("tsv") => return b'\t',
        Some(e) if e.eq_ignore_ascii_case("csv") => return b',',
        _ => {}
    }
    let first = text_head.lines().next().unwrap_or("");
    if first.contains('\t') {
        b'\t'
    } else if first.contains(',') {
        b','
    } else if first.contains(';') {
        b';'
    } else {
        b'\t'
    }
}

fn resolve(column: &Column, header: Option<&csv::StringRecord>, path: &Path) -> Result<usize> {
    match column {
        Column::Index(i) => Ok(*i),
        Column::Name(name) => {
            let header = header.ok_or_else(|| parse_err(path, 1, format!("column {name:?} named but file has no header")))?;
            header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| parse_err(path, 1, format!("no column named {name:?} in header")))
        }
    }
}

fn field(record: &csv::StringRecord, index: usize, path: &Path, line: usize) -> Result<f64> {
    let raw = record
        .get(index)
        .ok_or_else(|| parse_err(path, line, format!("row has {} fields, column {index} missing", record.len())))?;
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {raw:?} as a number")))?;
    if !value.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value {raw:?}")));
    }
    Ok(value)
}

/// Reads one channel from a CSV/TSV file. Values are scaled from `units` to
/// microvolts. Blank lines are skipped.
pub fn load_recording(
    path: impl AsRef<Path>,
    columns: &ColumnMap,
    sample_rate_hz: f64,
    units: Units,
) -> Result<LoadedRecording> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let delimiter = match columns.delimiter {
        Some(c) if c.is_ascii() => c as u8,
        Some(c) => return Err(Error::Config(format!("delimiter {c:?} is not ASCII"))),
        None => sniff_delimiter(path, &text),
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        rows.push((line, record));
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "file contains no data rows"));
    }

    let wanted_name = matches!(columns.sample, Column::Name(_))
        || matches!(columns.trigger, Some(Column::Name(_)));
    let has_header = match columns.has_header {
        Some(h) => h,
        None if wanted_name => true,
        None => rows[0].1.iter().any(|f| f.trim().parse::<f64>().is_err()),
    };
    let header = if has_header { Some(rows.remove(0).1) } else { None };
    let sample_col = resolve(&columns.sample, header.as_ref(), path)?;
    let trigger_col = columns
        .trigger
        .as_ref()
        .map(|c| resolve(c, header.as_ref(), path))
        .transpose()?;
    if rows.is_empty() {
        return Err(parse_err(path, 1, "file contains a header but no data rows"));
    }

    let scale = units.to_microvolts();
    let mut samples = Vec::with_capacity(rows.len());
    let mut trigger_values = Vec::new();
    for (line, record) in &rows {
        samples.push(field(record, sample_col, path, *line)? * scale);
        if let Some(t) = trigger_col {
            trigger_values.push(field(record, t, path, *line)?);
        }
    }
    let recording = Recording::new(samples, sample_rate_hz)?;
    Ok(LoadedRecording {
        recording,
        triggers: rising_edges(&trigger_values, 0.5),
    })
}

/// Indices where `values` crosses from `<= threshold` to `> threshold`. A
/// first sample above the threshold counts as an edge.
pub fn rising_edges(values: &[f64], threshold: f64) -> Vec<usize> {
    let mut previous = false;
    let mut edges = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let high = v > threshold;
        if high && !previous {
            edges.push(i);
        }
        previous = high;
    }
    edges
}

/// Trigger sample indices from a text file, one non-negative integer per
/// line. `#` starts a comment.
pub fn load_triggers(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    use std::io::{BufRead, BufReader};
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let index = content
            .parse::<usize>()
            .map_err(|_| parse_err(path, i + 1, format!("cannot parse {content:?} as a sample index")))?;
        out.push(index);
    }
    if out.windows(2).any(|w| w[1] <= w[0]) {
        return Err(parse_err(path, 0, "trigger indices must be strictly increasing"));
    }
    Ok(out)
}
