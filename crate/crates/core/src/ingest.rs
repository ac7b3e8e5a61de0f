//! CSV ingestion.
//!
//! Two layouts are accepted, both with a header row:
//!
//! * components: `unit,condition,re,im`
//! * time series: `unit,condition,t_index,value`, preceded by
//!   `# sample_rate=<Hz>` and `# target_frequency=<Hz>` comment lines
//!
//! Either layout may carry an optional `repetition` column. Rows sharing a
//! (unit, condition) pair are repetitions and are averaged coherently.
//! Column order is free; extra columns are ignored.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{coherent_mean, ComplexObservation, ComplexSample, Design, GroupedDataset};
use crate::dft::extract_component;
use crate::error::{Result, StatsError};

/// One complex component for a (unit, condition) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRow {
    pub unit: String,
    pub condition: String,
    pub re: f64,
    pub im: f64,
}

/// Acquisition metadata of a time-series file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetadata {
    pub sample_rate: f64,
    pub target_frequency: f64,
}

fn parse_err(line: u64, message: impl Into<String>) -> StatsError {
    StatsError::Parse {
        line,
        message: message.into(),
    }
}

fn metadata(text: &str) -> Result<(Option<f64>, Option<f64>)> {
    let (mut rate, mut freq) = (None, None);
    for (i, raw) in text.lines().enumerate() {
        let Some(body) = raw.trim_start().strip_prefix('#') else {
            continue;
        };
        let Some((key, value)) = body.split_once('=') else {
            continue;
        };
        let slot = match key.trim() {
            "sample_rate" => &mut rate,
            "target_frequency" => &mut freq,
            _ => continue,
        };
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| parse_err(i as u64 + 1, format!("bad {} value '{}'", key.trim(), value.trim())))?;
        *slot = Some(v);
    }
    Ok((rate, freq))
}

struct Columns {
    unit: usize,
    condition: usize,
    repetition: Option<usize>,
    layout: Layout,
}

enum Layout {
    Components { re: usize, im: usize },
    Series { t: usize, value: usize },
}

fn columns(header: &csv::StringRecord, line: u64) -> Result<Columns> {
    let find = |name: &str| header.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let need = |name: &str| {
        find(name).ok_or_else(|| parse_err(line, format!("header is missing column '{name}'")))
    };
    let layout = match (find("re"), find("im"), find("t_index"), find("value")) {
        (Some(re), Some(im), None, None) => Layout::Components { re, im },
        (None, None, Some(t), Some(value)) => Layout::Series { t, value },
        _ => {
            return Err(parse_err(
                line,
                "header must contain either re,im or t_index,value",
            ))
        }
    };
    Ok(Columns {
        unit: need("unit")?,
        condition: need("condition")?,
        repetition: find("repetition"),
        layout,
    })
}

fn field<'r>(rec: &'r csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<&'r str> {
    match rec.get(idx).map(str::trim) {
        Some(s) if !s.is_empty() => Ok(s),
        _ => Err(parse_err(line, format!("missing value for '{name}'"))),
    }
}

fn number(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<f64> {
    let s = field(rec, idx, name, line)?;
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(line, format!("'{s}' is not a number in column '{name}'")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value in column '{name}'")));
    }
    Ok(v)
}

type Key = (String, String, String);

/// Parses either layout into per-repetition component rows, extracting
/// the target-frequency coefficient from time series.
fn parse_repetitions(text: &str) -> Result<Vec<(Key, ComplexObservation)>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_err(e.position().map_or(1, |p| p.line()), e.to_string()))?
        .clone();
    if header.is_empty() || header.iter().all(|h| h.trim().is_empty()) {
        return Err(StatsError::InvalidInput("input is empty".into()));
    }
    let header_line = header.position().map_or(1, |p| p.line());
    let cols = columns(&header, header_line)?;

    let mut components = Vec::new();
    // series samples keyed by (unit, condition, repetition), with the line
    // of each sample kept for error messages
    let mut series: BTreeMap<Key, Vec<(i64, f64, u64)>> = BTreeMap::new();
    let mut order: Vec<Key> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let key = (
            field(&rec, cols.unit, "unit", line)?.to_string(),
            field(&rec, cols.condition, "condition", line)?.to_string(),
            match cols.repetition {
                Some(i) => rec.get(i).unwrap_or("").trim().to_string(),
                None => String::new(),
            },
        );
        match cols.layout {
            Layout::Components { re, im } => {
                let obs = ComplexObservation::new(
                    number(&rec, re, "re", line)?,
                    number(&rec, im, "im", line)?,
                );
                components.push((key, obs));
            }
            Layout::Series { t, value } => {
                let ts = field(&rec, t, "t_index", line)?;
                let ti: i64 = ts
                    .parse()
                    .map_err(|_| parse_err(line, format!("'{ts}' is not an integer t_index")))?;
                let v = number(&rec, value, "value", line)?;
                let entry = series.entry(key.clone()).or_default();
                if entry.is_empty() {
                    order.push(key);
                }
                entry.push((ti, v, line));
            }
        }
    }

    if let Layout::Series { .. } = cols.layout {
        let (rate, freq) = metadata(text)?;
        let meta = SeriesMetadata {
            sample_rate: rate.ok_or_else(|| {
                StatsError::InvalidInput("time-series input needs a '# sample_rate=' line".into())
            })?,
            target_frequency: freq.ok_or_else(|| {
                StatsError::InvalidInput(
                    "time-series input needs a '# target_frequency=' line".into(),
                )
            })?,
        };
        for key in order {
            let mut samples = series.remove(&key).expect("recorded key");
            samples.sort_by_key(|s| s.0);
            for (expected, &(ti, _, line)) in samples.iter().enumerate() {
                if ti != expected as i64 {
                    return Err(parse_err(
                        line,
                        format!(
                            "t_index values for unit '{}', condition '{}' must run 0, 1, 2, ... without gaps or repeats",
                            key.0, key.1
                        ),
                    ));
                }
            }
            let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
            let obs = extract_component(&values, meta.sample_rate, meta.target_frequency)
                .map_err(|e| {
                    StatsError::InvalidInput(format!("unit '{}', condition '{}': {e}", key.0, key.1))
                })?;
            components.push((key, obs));
        }
    }
    if components.is_empty() {
        return Err(StatsError::InvalidInput("input has no data rows".into()));
    }
    Ok(components)
}

/// Parses a components or time-series CSV into one row per (unit,
/// condition) pair, coherently averaging repetitions. Rows keep the
/// order in which pairs first appear.
pub fn parse_components(text: &str) -> Result<Vec<ComponentRow>> {
    let reps = parse_repetitions(text)?;
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    let mut grouped: Vec<((String, String), Vec<ComplexObservation>)> = Vec::new();
    for ((unit, condition, _), obs) in reps {
        let k = (unit, condition);
        match index.get(&k) {
            Some(&i) => grouped[i].1.push(obs),
            None => {
                index.insert(k.clone(), grouped.len());
                grouped.push((k, vec![obs]));
            }
        }
    }
    grouped
        .into_iter()
        .map(|((unit, condition), obs)| {
            let m = coherent_mean("", &[ComplexSample::new(unit.clone(), obs)?])?;
            let o = m.observations()[0];
            Ok(ComponentRow {
                unit,
                condition,
                re: o.re,
                im: o.im,
            })
        })
        .collect()
}

/// One [`ComplexSample`] per condition, in order of first appearance,
/// labelled by unit.
pub fn rows_to_samples(rows: &[ComponentRow]) -> Result<Vec<ComplexSample>> {
    let mut conditions: Vec<(String, Vec<ComplexObservation>, Vec<String>)> = Vec::new();
    for row in rows {
        let slot = match conditions.iter().position(|c| c.0 == row.condition) {
            Some(i) => i,
            None => {
                conditions.push((row.condition.clone(), Vec::new(), Vec::new()));
                conditions.len() - 1
            }
        };
        conditions[slot].1.push(ComplexObservation::new(row.re, row.im));
        conditions[slot].2.push(row.unit.clone());
    }
    conditions
        .into_iter()
        .map(|(label, obs, units)| ComplexSample::with_units(label, obs, units))
        .collect()
}

/// Parses `text` and assembles the dataset for `design`.
pub fn load_dataset(text: &str, design: Design, mu: ComplexObservation) -> Result<GroupedDataset> {
    let samples = rows_to_samples(&parse_components(text)?)?;
    Ok(GroupedDataset::new(samples, design)?.with_mu(mu))
}

/// Components CSV (`unit,condition,re,im`).
pub fn components_to_csv(rows: &[ComponentRow]) -> String {
    let mut out = String::from("unit,condition,re,im\n");
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for r in rows {
        writer
            .write_record([r.unit.clone(), r.condition.clone(), r.re.to_string(), r.im.to_string()])
            .expect("in-memory write");
    }
    out.push_str(&String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8"));
    out
}
