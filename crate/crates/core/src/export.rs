//! CSV and JSON export: one row per (scheme, bss, load, seed).

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::error::ExportError;
use crate::metrics::BssStats;
use crate::sim::RunReport;
use crate::sweep::SweepTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (csv or json)")),
        }
    }
}

/// Flattened per-BSS results.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scheme: String,
    pub bss: String,
    pub load_bps: f64,
    pub seed: u64,
    pub delay_p50_us: Option<f64>,
    pub delay_p95_us: Option<f64>,
    pub delay_p99_us: Option<f64>,
    pub delay_mean_us: Option<f64>,
    pub throughput_bps: f64,
    pub agg_p50: Option<usize>,
    pub agg_p99: Option<usize>,
    /// P(n links in TX | active), n = 0..=links; `None` if never active.
    pub occupancy: Option<Vec<f64>>,
    pub starvation_frac: f64,
    pub drops: u64,
    pub saturated: bool,
}

impl Row {
    pub fn from_stats(scheme: &str, load_bps: f64, seed: u64, s: &BssStats) -> Self {
        Row {
            scheme: scheme.to_string(),
            bss: s.label.clone(),
            load_bps,
            seed,
            delay_p50_us: s.delay_percentile_us(50.0),
            delay_p95_us: s.delay_percentile_us(95.0),
            delay_p99_us: s.delay_percentile_us(99.0),
            delay_mean_us: s.delay_mean_us(),
            throughput_bps: s.throughput_bps(),
            agg_p50: s.aggregation_percentile(50.0),
            agg_p99: s.aggregation_percentile(99.0),
            occupancy: s.occupancy(),
            starvation_frac: s.starvation_fraction(),
            drops: s.drops(),
            saturated: s.saturated(),
        }
    }
}

pub fn rows_for_report(report: &RunReport, load_bps: f64) -> Vec<Row> {
    report
        .bss
        .iter()
        .map(|s| Row::from_stats(&report.scenario.name, load_bps, report.seed, s))
        .collect()
}

pub fn rows_for_table(table: &SweepTable) -> Vec<Row> {
    table
        .results
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|rep| (r, rep)))
        .flat_map(|(r, rep)| rows_for_report(rep, r.total_load_bps))
        .collect()
}

fn max_links(rows: &[Row]) -> usize {
    rows.iter()
        .filter_map(|r| r.occupancy.as_ref().map(|o| o.len().saturating_sub(1)))
        .max()
        .unwrap_or(1)
        .max(1)
}

/// Column names for a table whose widest MLD has `k` links.
pub fn header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "scheme",
        "bss",
        "load_bps",
        "seed",
        "delay_p50_us",
        "delay_p95_us",
        "delay_p99_us",
        "delay_mean_us",
        "throughput_bps",
        "agg_p50",
        "agg_p99",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend((0..=k).map(|n| format!("occ_{n}")));
    h.extend(["starvation_frac", "drops", "saturated"].map(String::from));
    h
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<(), ExportError> {
    let k = max_links(rows);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(k))?;
    for r in rows {
        let mut rec = vec![
            r.scheme.clone(),
            r.bss.clone(),
            r.load_bps.to_string(),
            r.seed.to_string(),
            opt(r.delay_p50_us),
            opt(r.delay_p95_us),
            opt(r.delay_p99_us),
            opt(r.delay_mean_us),
            r.throughput_bps.to_string(),
            opt(r.agg_p50),
            opt(r.agg_p99),
        ];
        for n in 0..=k {
            rec.push(match &r.occupancy {
                Some(o) => o.get(n).copied().unwrap_or(0.0).to_string(),
                None => String::new(),
            });
        }
        rec.push(r.starvation_frac.to_string());
        rec.push(r.drops.to_string());
        rec.push(r.saturated.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json(rows: &[Row]) -> Value {
    let k = max_links(rows);
    Value::Array(
        rows.iter()
            .map(|r| {
                let mut m = Map::new();
                m.insert("scheme".into(), json!(r.scheme));
                m.insert("bss".into(), json!(r.bss));
                m.insert("load_bps".into(), json!(r.load_bps));
                m.insert("seed".into(), json!(r.seed));
                m.insert("delay_p50_us".into(), json!(r.delay_p50_us));
                m.insert("delay_p95_us".into(), json!(r.delay_p95_us));
                m.insert("delay_p99_us".into(), json!(r.delay_p99_us));
                m.insert("delay_mean_us".into(), json!(r.delay_mean_us));
                m.insert("throughput_bps".into(), json!(r.throughput_bps));
                m.insert("agg_p50".into(), json!(r.agg_p50));
                m.insert("agg_p99".into(), json!(r.agg_p99));
                for n in 0..=k {
                    let v = r
                        .occupancy
                        .as_ref()
                        .map(|o| o.get(n).copied().unwrap_or(0.0));
                    m.insert(format!("occ_{n}"), json!(v));
                }
                m.insert("starvation_frac".into(), json!(r.starvation_frac));
                m.insert("drops".into(), json!(r.drops));
                m.insert("saturated".into(), json!(r.saturated));
                Value::Object(m)
            })
            .collect(),
    )
}

pub fn write_json<W: Write>(rows: &[Row], mut out: W) -> Result<(), ExportError> {
    serde_json::to_writer_pretty(&mut out, &to_json(rows))?;
    writeln!(out)?;
    Ok(())
}

/// Full report, including the resolved scenario and seed.
pub fn write_report_json<W: Write>(report: &RunReport, mut out: W) -> Result<(), ExportError> {
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    Ok(())
}

pub fn write<W: Write>(rows: &[Row], format: Format, out: W) -> Result<(), ExportError> {
    match format {
        Format::Csv => write_csv(rows, out),
        Format::Json => write_json(rows, out),
    }
}
