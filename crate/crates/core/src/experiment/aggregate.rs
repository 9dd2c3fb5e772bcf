//! Collapses per-seed sweep rows into mean and standard error per grid point.

use std::collections::HashMap;

use thiserror::Error;

use super::CSV_COLUMNS;

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("input is missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("row {row}: cannot parse `{value}` in column {column}")]
    BadValue { row: usize, column: &'static str, value: String },
}

/// Columns identifying a grid point (everything before `seed`).
const KEY_COLUMNS: [&str; 9] = [
    "topology",
    "slot_width_ghz",
    "load_erlang_per_node",
    "dist",
    "dist_param1",
    "dist_param2",
    "guard_ghz",
    "link_bandwidth_ghz",
    "total_requests",
];
const METRICS: [&str; 3] = ["bp", "bbp", "spectrum_efficiency"];

pub const AGGREGATE_COLUMNS: [&str; 17] = [
    "topology",
    "slot_width_ghz",
    "load_erlang_per_node",
    "dist",
    "dist_param1",
    "dist_param2",
    "guard_ghz",
    "link_bandwidth_ghz",
    "total_requests",
    "runs",
    "errors",
    "bp_mean",
    "bp_stderr",
    "bbp_mean",
    "bbp_stderr",
    "spectrum_efficiency_mean",
    "spectrum_efficiency_stderr",
];

/// Arithmetic mean and standard error of the mean (sample standard deviation
/// over `sqrt(n)`; absent below two samples).
pub fn mean_stderr(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

#[derive(Default)]
struct Group {
    key: Vec<String>,
    runs: usize,
    errors: usize,
    metrics: [Vec<f64>; 3],
}

/// Reads sweep CSV text and returns aggregate CSV text, one row per grid
/// point in first-appearance order. Empty metric cells are skipped.
pub fn aggregate_csv(input: &str) -> Result<String, AggregateError> {
    let mut reader = csv::Reader::from_reader(input.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &'static str| headers.iter().position(|h| h == name).ok_or(AggregateError::MissingColumn(name));
    for c in CSV_COLUMNS {
        col(c)?;
    }
    let key_idx: Vec<usize> = KEY_COLUMNS.iter().map(|c| col(c)).collect::<Result<_, _>>()?;
    let metric_idx: Vec<usize> = METRICS.iter().map(|c| col(c)).collect::<Result<_, _>>()?;
    let status_idx = col("status")?;

    let mut order: Vec<Group> = Vec::new();
    let mut index: HashMap<Vec<String>, usize> = HashMap::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let key: Vec<String> = key_idx.iter().map(|&i| record[i].to_string()).collect();
        let gi = *index.entry(key.clone()).or_insert_with(|| {
            order.push(Group { key, ..Group::default() });
            order.len() - 1
        });
        let group = &mut order[gi];
        group.runs += 1;
        if &record[status_idx] != "ok" {
            group.errors += 1;
            continue;
        }
        for (m, &i) in metric_idx.iter().enumerate() {
            let cell = &record[i];
            if cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| AggregateError::BadValue {
                row: row_no + 2,
                column: METRICS[m],
                value: cell.to_string(),
            })?;
            group.metrics[m].push(v);
        }
    }

    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(AGGREGATE_COLUMNS)?;
    for g in &order {
        let mut rec = g.key.clone();
        rec.push(g.runs.to_string());
        rec.push(g.errors.to_string());
        for values in &g.metrics {
            let (mean, se) = mean_stderr(values);
            rec.push(fmt(mean));
            rec.push(fmt(se));
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
}
