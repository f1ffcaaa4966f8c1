//! CSV and JSON output.
//!
//! The CSV holds one row per recorded checkpoint of every (run, strategy)
//! pair. Its first line is a `#`-prefixed header naming the columns:
//!
//! ```text
//! # run_id,strategy,T,p_2,..,p_M,e_1,..,e_K,stop_2,..,stop_M
//! ```
//!
//! `strategy` is the numeric tag of [`Strategy::tag`], the `p` columns follow
//! the recorded orders, `K` is the ESP depth and the stop flags are 0 or 1.
//! Undefined values are written as `NaN`. Every column is numeric, so the
//! file loads directly into gnuplot (`set datafile separator ","`).

use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::{esp_depth, ExperimentOutput};
use crate::error::{invalid, Error, Result};
use crate::estimators::Strategy;

/// A parsed CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub run_id: usize,
    pub strategy: Strategy,
    pub shot: usize,
    pub moments: Vec<Option<f64>>,
    pub esp: Vec<Option<f64>>,
    pub stopped: Vec<bool>,
}

/// Column names for the given recorded orders.
pub fn csv_header(orders: &[usize]) -> Vec<String> {
    let mut cols = vec!["run_id".to_string(), "strategy".into(), "T".into()];
    cols.extend(orders.iter().map(|k| format!("p_{k}")));
    cols.extend((1..=esp_depth(orders)).map(|k| format!("e_{k}")));
    cols.extend(orders.iter().map(|k| format!("stop_{k}")));
    cols
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NaN".into(),
    }
}

/// Rows of `output` in trace order.
pub fn csv_rows(output: &ExperimentOutput) -> Vec<CsvRow> {
    let mut rows = Vec::new();
    for tr in &output.traces {
        let depth = esp_depth(&tr.orders);
        for p in &tr.points {
            rows.push(CsvRow {
                run_id: tr.run_id,
                strategy: tr.strategy,
                shot: p.shot,
                moments: p.moments.clone(),
                esp: (0..depth).map(|i| p.esp.get(i).copied()).collect(),
                stopped: p.stopped.clone(),
            });
        }
    }
    rows
}

pub fn write_csv(output: &ExperimentOutput, path: impl AsRef<Path>) -> Result<()> {
    let rows = csv_rows(output);
    if rows.is_empty() {
        return Err(invalid("no recorded checkpoints to export"));
    }
    let orders = output.config.recorded_orders();
    let mut text = format!("# {}\n", csv_header(&orders).join(","));
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for r in &rows {
        let mut rec = vec![
            r.run_id.to_string(),
            r.strategy.tag().to_string(),
            r.shot.to_string(),
        ];
        rec.extend(r.moments.iter().map(|&v| num(v)));
        rec.extend(r.esp.iter().map(|&v| num(v)));
        rec.extend(r.stopped.iter().map(|&s| u8::from(s).to_string()));
        w.write_record(&rec)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    text.push_str(std::str::from_utf8(&body).expect("ascii"));
    fs::write(path, text)?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`]. Returns the header columns and rows.
pub fn read_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<CsvRow>)> {
    let text = fs::read_to_string(path)?;
    let first = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| Error::Format("missing '#' header line".into()))?;
    let header: Vec<String> = first.split(',').map(str::to_string).collect();
    let n_orders = header.iter().filter(|c| c.starts_with("p_")).count();
    let depth = header.iter().filter(|c| c.starts_with("e_")).count();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let bad = |what: &str| Error::Format(format!("bad CSV field: {what}"));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(bad("column count"));
        }
        let f = |i: usize| -> Result<Option<f64>> {
            let x: f64 = rec[i].parse().map_err(|_| bad(&rec[i]))?;
            Ok((!x.is_nan()).then_some(x))
        };
        let tag: u8 = rec[1].parse().map_err(|_| bad("strategy"))?;
        rows.push(CsvRow {
            run_id: rec[0].parse().map_err(|_| bad("run_id"))?,
            strategy: Strategy::from_tag(tag).ok_or_else(|| bad("strategy"))?,
            shot: rec[2].parse().map_err(|_| bad("T"))?,
            moments: (3..3 + n_orders).map(f).collect::<Result<_>>()?,
            esp: (3 + n_orders..3 + n_orders + depth)
                .map(f)
                .collect::<Result<_>>()?,
            stopped: (3 + n_orders + depth..rec.len())
                .map(|i| match &rec[i] {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    _ => Err(bad("stop flag")),
                })
                .collect::<Result<_>>()?,
        });
    }
    Ok((header, rows))
}

pub fn write_json(output: &ExperimentOutput, path: impl AsRef<Path>) -> Result<()> {
    if output.traces.iter().all(|t| t.points.is_empty()) {
        return Err(invalid("no recorded checkpoints to export"));
    }
    let mut text = serde_json::to_string_pretty(output)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json(path: impl AsRef<Path>) -> Result<ExperimentOutput> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Writes `traces.csv` and `results.json` into `dir`, creating it if needed.
pub fn write_outputs(
    output: &ExperimentOutput,
    dir: impl AsRef<Path>,
) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("traces.csv");
    let json_path = dir.join("results.json");
    write_csv(output, &csv_path)?;
    write_json(output, &json_path)?;
    Ok((csv_path, json_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::{run_experiment, ExperimentConfig};

    fn output() -> ExperimentOutput {
        run_experiment(&ExperimentConfig {
            shots: 60,
            runs: 2,
            orders: vec![2, 3, 4],
            strategies: vec![Strategy::OnlineRecon, Strategy::PlugIn],
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn header_schema() {
        assert_eq!(
            csv_header(&[2, 3]).join(","),
            "run_id,strategy,T,p_2,p_3,e_1,e_2,e_3,stop_2,stop_3"
        );
        assert_eq!(
            csv_header(&[3]).join(","),
            "run_id,strategy,T,p_3,e_1,stop_3"
        );
    }

    #[test]
    fn csv_round_trip() {
        let out = output();
        let dir = tempfile::tempdir().unwrap();
        let (csv_path, _) = write_outputs(&out, dir.path()).unwrap();
        let (header, rows) = read_csv(&csv_path).unwrap();
        assert_eq!(header, csv_header(&[2, 3, 4]));
        assert_eq!(rows, csv_rows(&out));
        assert_eq!(rows.len(), 4 * 60);
        assert!(rows[0].moments[2].is_none());
    }

    #[test]
    fn json_round_trip() {
        let out = output();
        let dir = tempfile::tempdir().unwrap();
        let (_, json_path) = write_outputs(&out, dir.path()).unwrap();
        let back = read_json(&json_path).unwrap();
        assert_eq!(back, out);
        for (a, b) in back.summaries.iter().zip(&out.summaries) {
            assert_eq!(a.verdict, b.verdict);
        }
    }

    #[test]
    fn empty_checkpoints_are_an_error() {
        let mut out = output();
        for t in &mut out.traces {
            t.points.clear();
        }
        let dir = tempfile::tempdir().unwrap();
        assert!(write_csv(&out, dir.path().join("a.csv")).is_err());
        assert!(write_json(&out, dir.path().join("a.json")).is_err());
    }
}
