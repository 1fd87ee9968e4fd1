//! Line-oriented scenario files.
//!
//! ```text
//! scenario demo
//! network limiter.cadl            # or builtin:rnet1
//! duration 20
//! seed 3
//! window 0.1
//! hop 0.1
//! queue q capacity 4000000
//! bind q input S output P drop D quantum 1000 credit_cap 120 forward q2
//! arrival q poisson rate 600M size 1500 from 0 to 8.5
//! arrival q poisson rate 100M size 64..1500
//! arrival q cbr rate 3M size 500
//! arrival q onoff on 0.2 off 0.2 rate 400M size 1500 exp
//! arrival q trace packets.txt     # lines of `<time> <bytes>`
//! patch 5 retune.capatch
//! tap S
//! ```
//!
//! Rates take `k`, `M` or `G` suffixes. Relative paths resolve against the
//! scenario file's directory. An arrival may carry several `from A to B`
//! windows.

use std::path::{Path, PathBuf};

use chemkernel_core::traffic::{ArrivalProcess, ArrivalSpec, BindingSpec, QueueSpec, Scenario, SizeDist};

use crate::LoadError;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioFileError {
    #[error("{path}:{line}: {msg}")]
    Syntax { path: String, line: usize, msg: String },
    #[error(transparent)]
    Load(#[from] LoadError),
}

pub fn parse_rate(s: &str) -> Option<f64> {
    let (num, mult) = match s.chars().last()? {
        'k' | 'K' => (&s[..s.len() - 1], 1e3),
        'M' => (&s[..s.len() - 1], 1e6),
        'G' => (&s[..s.len() - 1], 1e9),
        _ => (s, 1.0),
    };
    let v: f64 = num.parse().ok()?;
    (v.is_finite() && v >= 0.0).then_some(v * mult)
}

fn parse_size(s: &str) -> Option<SizeDist> {
    match s.split_once("..") {
        Some((lo, hi)) => {
            let (lo, hi) = (lo.parse().ok()?, hi.parse().ok()?);
            (lo <= hi).then_some(SizeDist::Uniform { lo, hi })
        }
        None => s.parse().ok().map(SizeDist::Fixed),
    }
}

struct Ctx<'a> {
    path: &'a str,
    line: usize,
}

impl Ctx<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ScenarioFileError> {
        Err(ScenarioFileError::Syntax { path: self.path.to_string(), line: self.line, msg: msg.into() })
    }
}

fn resolve(dir: &Path, file: &str) -> String {
    if file.starts_with("builtin:") {
        return file.to_string();
    }
    let p = Path::new(file);
    if p.is_absolute() { p.to_path_buf() } else { dir.join(p) }.display().to_string()
}

/// Reads `key value` pairs from `rest`, returning them in order.
fn pairs<'a>(cx: &Ctx, rest: &[&'a str], flags: &[&str]) -> Result<Vec<(&'a str, Option<&'a str>)>, ScenarioFileError> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < rest.len() {
        if flags.contains(&rest[i]) {
            out.push((rest[i], None));
            i += 1;
        } else if i + 1 < rest.len() {
            out.push((rest[i], Some(rest[i + 1])));
            i += 2;
        } else {
            return cx.err(format!("`{}` needs a value", rest[i]));
        }
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(cx: &Ctx, key: &str, v: Option<&str>) -> Result<T, ScenarioFileError> {
    match v.and_then(|v| v.parse().ok()) {
        Some(x) => Ok(x),
        None => cx.err(format!("bad value for `{key}`")),
    }
}

fn read_trace(cx: &Ctx, file: &str) -> Result<Vec<(f64, u32)>, ScenarioFileError> {
    let bytes = crate::read_file(Path::new(file))?;
    let text = String::from_utf8_lossy(&bytes);
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        match (it.next().and_then(|t| t.parse().ok()), it.next().and_then(|b| b.parse().ok())) {
            (Some(t), Some(b)) => out.push((t, b)),
            _ => return cx.err(format!("{file}:{}: expected `<time> <bytes>`", n + 1)),
        }
    }
    Ok(out)
}

fn arrival(cx: &Ctx, dir: &Path, words: &[&str]) -> Result<ArrivalSpec, ScenarioFileError> {
    let [queue, kind, rest @ ..] = words else {
        return cx.err("arrival needs a queue and a process");
    };
    let mut windows = Vec::new();
    let mut opts = Vec::new();
    let mut i = 0;
    while i < rest.len() {
        if rest[i] == "from" {
            if rest.get(i + 2) != Some(&"to") {
                return cx.err("expected `from A to B`");
            }
            let a: f64 = num(cx, "from", rest.get(i + 1).copied())?;
            let b: f64 = num(cx, "to", rest.get(i + 3).copied())?;
            windows.push((a, b));
            i += 4;
        } else {
            opts.push(rest[i]);
            i += 1;
        }
    }
    let kv = if *kind == "trace" { Vec::new() } else { pairs(cx, &opts, &["exp", "fixed"])? };
    let get = |k: &str| kv.iter().find(|(key, _)| *key == k).and_then(|(_, v)| *v);
    for (k, _) in &kv {
        if !["rate", "size", "on", "off", "exp", "fixed"].contains(k) {
            return cx.err(format!("unknown arrival option `{k}`"));
        }
    }
    let rate = || match get("rate").and_then(parse_rate) {
        Some(r) => Ok(r),
        None => cx.err("missing or bad `rate`"),
    };
    let size = || match get("size").and_then(parse_size) {
        Some(s) => Ok(s),
        None => cx.err("missing or bad `size`"),
    };
    let fixed_size = || match size()? {
        SizeDist::Fixed(b) => Ok(b),
        _ => cx.err("this process needs a fixed size"),
    };
    let process = match *kind {
        "cbr" => ArrivalProcess::Cbr { rate_bps: rate()?, size: fixed_size()? },
        "poisson" => ArrivalProcess::Poisson { rate_bps: rate()?, size: size()? },
        "onoff" => ArrivalProcess::OnOff {
            on: num(cx, "on", get("on"))?,
            off: num(cx, "off", get("off"))?,
            rate_bps: rate()?,
            size: fixed_size()?,
            exponential: !kv.iter().any(|(k, _)| *k == "fixed"),
        },
        "trace" => match opts.as_slice() {
            [file] => ArrivalProcess::Trace(read_trace(cx, &resolve(dir, file))?),
            _ => return cx.err("trace needs exactly one file"),
        },
        other => return cx.err(format!("unknown arrival process `{other}`")),
    };
    Ok(ArrivalSpec { queue: queue.to_string(), process, windows })
}

fn binding(cx: &Ctx, words: &[&str]) -> Result<BindingSpec, ScenarioFileError> {
    let [queue, rest @ ..] = words else {
        return cx.err("bind needs a queue");
    };
    let kv = pairs(cx, rest, &[])?;
    let get = |k: &str| kv.iter().find(|(key, _)| *key == k).and_then(|(_, v)| *v);
    for (k, _) in &kv {
        if !["input", "output", "drop", "quantum", "credit_cap", "forward"].contains(k) {
            return cx.err(format!("unknown bind option `{k}`"));
        }
    }
    let (Some(input), Some(output)) = (get("input"), get("output")) else {
        return cx.err("bind needs `input` and `output`");
    };
    let mut b = BindingSpec::new(queue, input, output);
    b.drop = get("drop").map(str::to_string);
    if get("quantum").is_some() {
        b.quantum_bits = num(cx, "quantum", get("quantum"))?;
    }
    if get("credit_cap").is_some() {
        b.credit_cap = Some(num(cx, "credit_cap", get("credit_cap"))?);
    }
    b.forward_to = get("forward").map(str::to_string);
    Ok(b)
}

/// Parses scenario text. `dir` anchors relative paths and `shown` labels
/// diagnostics.
pub fn parse_scenario(text: &str, dir: &Path, shown: &str) -> Result<Scenario, ScenarioFileError> {
    let mut sc = Scenario::new("scenario", chemkernel_core::ReactionNetwork::empty(), 0.0);
    let mut have_network = false;
    let mut have_duration = false;
    let mut patches: Vec<(f64, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let cx = Ctx { path: shown, line: n + 1 };
        let line = raw.split('#').next().unwrap_or("").trim();
        let words: Vec<&str> = line.split_whitespace().collect();
        let Some((&key, rest)) = words.split_first() else { continue };
        let one = || match rest {
            [v] => Ok(*v),
            _ => cx.err(format!("`{key}` takes one value")),
        };
        match key {
            "scenario" => sc.name = one()?.to_string(),
            "network" => {
                sc.network = crate::load_network(&resolve(dir, one()?))?;
                have_network = true;
            }
            "duration" => {
                sc.duration = num(&cx, key, Some(one()?))?;
                have_duration = true;
            }
            "seed" => sc.seed = num(&cx, key, Some(one()?))?,
            "window" => sc.window = num(&cx, key, Some(one()?))?,
            "hop" => sc.hop = num(&cx, key, Some(one()?))?,
            "tap" => sc.taps.extend(rest.iter().map(|s| s.to_string())),
            "queue" => {
                let capacity_bytes = match rest {
                    [_] => None,
                    [_, "capacity", c] => Some(num(&cx, "capacity", Some(c))?),
                    _ => return cx.err("expected `queue NAME [capacity BYTES]`"),
                };
                sc.queues.push(QueueSpec { name: rest[0].to_string(), capacity_bytes });
            }
            "bind" => sc.bindings.push(binding(&cx, rest)?),
            "arrival" => sc.arrivals.push(arrival(&cx, dir, rest)?),
            "patch" => match rest {
                [t, file] => patches.push((num(&cx, "patch time", Some(t))?, resolve(dir, file))),
                _ => return cx.err("expected `patch TIME FILE`"),
            },
            other => return cx.err(format!("unknown keyword `{other}`")),
        }
    }
    let end = Ctx { path: shown, line: text.lines().count() };
    if !have_network {
        return end.err("no `network` line");
    }
    if !have_duration {
        return end.err("no `duration` line");
    }
    sc.patches = crate::merge_patches(&sc.network, &[], &patches)?;
    Ok(sc)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioFileError> {
    let bytes = crate::read_file(path)?;
    let dir: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_scenario(&String::from_utf8_lossy(&bytes), &dir, &path.display().to_string())
}
