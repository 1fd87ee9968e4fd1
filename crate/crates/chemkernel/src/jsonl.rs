//! JSON-lines trace writer.

use std::io::Write;

use chemkernel_core::engine::{TraceRecord, TraceSink};
use chemkernel_core::ReactionNetwork;
use serde_json::{json, Map, Value};

use crate::Provenance;

/// Streams trace records as one JSON object per line after a header line.
/// The first IO error is kept and reported by [`JsonlTrace::finish`].
pub struct JsonlTrace<W: Write> {
    out: W,
    taps: Vec<String>,
    error: Option<std::io::Error>,
}

impl<W: Write> JsonlTrace<W> {
    pub fn new(mut out: W, prov: &Provenance, taps: &[String]) -> std::io::Result<Self> {
        let mut head = serde_json::to_value(prov).expect("serializable");
        head["type"] = json!("header");
        head["taps"] = json!(taps);
        writeln!(out, "{head}")?;
        Ok(JsonlTrace { out, taps: taps.to_vec(), error: None })
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn record_to_json(rec: &TraceRecord, net: &ReactionNetwork, taps: &[String]) -> Value {
    match rec {
        TraceRecord::Fired(f) => {
            let mut delta = Map::new();
            for d in f.delta.iter() {
                delta.insert(net.species_name(d.species).to_string(), json!(d.delta));
            }
            json!({
                "type": "fired",
                "t": f.time,
                "reaction": net.reactions()[f.reaction.index()].name,
                "delta": delta,
            })
        }
        TraceRecord::Injected(ev) => json!({
            "type": "injected",
            "t": ev.time,
            "species": net.species_name(ev.species),
            "amount": ev.amount,
        }),
        TraceRecord::Sample { time, values } => {
            let mut m = Map::new();
            for (n, v) in taps.iter().zip(values) {
                m.insert(n.clone(), v.map_or(Value::Null, |x| json!(x)));
            }
            json!({ "type": "sample", "t": time, "values": m })
        }
        TraceRecord::Reconfig { outcome, network } => {
            let mut v = json!({
                "type": "reconfig",
                "t": outcome.time,
                "kind": outcome.kind.as_str(),
                "edits": outcome.edits,
                "register_writes": outcome.register_writes,
            });
            if let Some(n) = network {
                v["network_hash"] = json!(crate::network_hash(n));
                v["network"] = json!(chemkernel_core::cadl::serialize(n));
            }
            v
        }
    }
}

impl<W: Write> TraceSink for JsonlTrace<W> {
    fn record(&mut self, rec: &TraceRecord, net: &ReactionNetwork) {
        if self.error.is_some() {
            return;
        }
        let v = record_to_json(rec, net, &self.taps);
        if let Err(e) = writeln!(self.out, "{v}") {
            self.error = Some(e);
        }
    }
}

/// Forwards to two sinks.
pub struct Tee<'a, A: TraceSink, B: TraceSink>(pub &'a mut A, pub &'a mut B);

impl<A: TraceSink, B: TraceSink> TraceSink for Tee<'_, A, B> {
    fn record(&mut self, rec: &TraceRecord, net: &ReactionNetwork) {
        self.0.record(rec, net);
        self.1.record(rec, net);
    }
}

/// Sleeps so that virtual time never runs ahead of wall time, checked at
/// every sample record.
pub struct Pacer {
    start: std::time::Instant,
    origin: f64,
}

impl Pacer {
    pub fn new(origin: f64) -> Self {
        Pacer { start: std::time::Instant::now(), origin }
    }
}

impl TraceSink for Pacer {
    fn record(&mut self, rec: &TraceRecord, _net: &ReactionNetwork) {
        if let TraceRecord::Sample { time, .. } = rec {
            let due = std::time::Duration::from_secs_f64((time - self.origin).max(0.0));
            if let Some(wait) = due.checked_sub(self.start.elapsed()) {
                std::thread::sleep(wait);
            }
        }
    }
}
