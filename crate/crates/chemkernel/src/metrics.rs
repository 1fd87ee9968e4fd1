//! Metric, tap-series and trajectory writers.

use std::io::{self, Write};

use chemkernel_core::fluid::Trajectory;
use chemkernel_core::traffic::MetricsReport;
use serde_json::{json, Value};

use crate::Provenance;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

/// A table written either as CSV (with a `#` provenance line) or as JSON
/// lines (provenance object first, then one object per row).
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// Sample times are multiples of a period; strips the binary noise.
fn tidy_time(t: f64) -> f64 {
    (t * 1e9).round() / 1e9
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn to_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

impl Table {
    pub fn write<W: Write>(&self, mut out: W, prov: &Provenance, fmt: Format) -> io::Result<()> {
        match fmt {
            Format::Csv => {
                writeln!(out, "{}", prov.comment_line())?;
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.columns).map_err(to_io)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(csv_cell)).map_err(to_io)?;
                }
                w.flush()
            }
            Format::Jsonl => {
                let mut head = serde_json::to_value(prov).expect("serializable");
                head["type"] = json!("header");
                head["columns"] = json!(self.columns);
                writeln!(out, "{head}")?;
                for row in &self.rows {
                    let obj: serde_json::Map<String, Value> =
                        self.columns.iter().cloned().zip(row.iter().cloned()).collect();
                    writeln!(out, "{}", Value::Object(obj))?;
                }
                out.flush()
            }
        }
    }
}

/// Sliding-window queue metrics, one row per queue and window position.
/// Per-flow departure rates follow the aggregate columns.
pub fn queue_table(rep: &MetricsReport) -> Table {
    let mut columns: Vec<String> = [
        "queue",
        "t",
        "offered_bps",
        "tx_bps",
        "head_drop_bps",
        "tail_drop_bps",
        "occupancy_bytes",
        "occupancy_packets",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    columns.extend(rep.flows.iter().map(|f| format!("tx_bps_{f}")));
    let mut rows = Vec::new();
    for q in &rep.queues {
        for s in rep.series(&q.name) {
            let mut row = vec![
                json!(q.name),
                json!(tidy_time(s.t)),
                json!(s.offered_bps),
                json!(s.tx_bps),
                json!(s.head_drop_bps),
                json!(s.tail_drop_bps),
                json!(s.occupancy_bytes),
                json!(s.occupancy_packets),
            ];
            for f in 0..rep.flows.len() {
                row.push(json!(rep.flow_rate(&q.name, f, s.t - rep.window, s.t)));
            }
            rows.push(row);
        }
    }
    Table { columns, rows }
}

/// Sampled tap concentrations.
pub fn tap_table(taps: &[String], samples: &[(f64, Vec<Option<u64>>)]) -> Table {
    let mut columns = vec!["t".to_string()];
    columns.extend(taps.iter().cloned());
    let rows = samples
        .iter()
        .map(|(t, vals)| {
            let mut row = vec![json!(tidy_time(*t))];
            row.extend(vals.iter().map(|v| v.map_or(Value::Null, |x| json!(x))));
            row
        })
        .collect();
    Table { columns, rows }
}

pub fn trajectory_table(traj: &Trajectory, names: &[String]) -> Table {
    let mut columns = vec!["t".to_string()];
    columns.extend(names.iter().cloned());
    let rows = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, c)| {
            let mut row = vec![json!(t)];
            row.extend(c.iter().map(|x| json!(x)));
            row
        })
        .collect();
    Table { columns, rows }
}

/// Aggregate run summary.
pub fn summary(rep: &MetricsReport, prov: &Provenance, engine_extra: Option<Value>) -> Value {
    let d = rep.duration;
    let queues: Vec<Value> = rep
        .queues
        .iter()
        .map(|q| {
            let t = &q.totals;
            json!({
                "name": q.name,
                "arrived": t.arrived,
                "arrived_bytes": t.arrived_bytes,
                "departed": t.departed,
                "departed_bytes": t.departed_bytes,
                "head_dropped": t.head_dropped,
                "head_dropped_bytes": t.head_dropped_bytes,
                "tail_dropped": t.tail_dropped,
                "tail_dropped_bytes": t.tail_dropped_bytes,
                "injected_molecules": t.injected_molecules,
                "mean_offered_bps": t.arrived_bytes as f64 * 8.0 / d,
                "mean_tx_bps": t.departed_bytes as f64 * 8.0 / d,
                "mean_drop_bps": (t.head_dropped_bytes + t.tail_dropped_bytes) as f64 * 8.0 / d,
            })
        })
        .collect();
    let reconfigs: Vec<Value> = rep
        .reconfigs
        .iter()
        .map(|r| json!({"t": r.time, "kind": r.kind.as_str(), "edits": r.edits, "register_writes": r.register_writes}))
        .collect();
    let mut v = json!({
        "provenance": prov,
        "scenario": rep.scenario,
        "duration": rep.duration,
        "window": rep.window,
        "hop": rep.hop,
        "firings": rep.firings,
        "injections": rep.injections,
        "conservation_violations": rep.conservation_violations,
        "queues": queues,
        "reconfigs": reconfigs,
    });
    if let Some(extra) = engine_extra {
        v["engine_stats"] = extra;
    }
    v
}
