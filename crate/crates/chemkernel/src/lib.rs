//! File formats, scenario files, analysis harnesses and the command-line
//! front end on top of `chemkernel-core`.

pub mod cahw;
pub mod cli;
pub mod compare;
pub mod jsonl;
pub mod metrics;
pub mod scenario_file;
pub mod spectral;

use std::fmt::Write as _;
use std::path::Path;

use chemkernel_core::cadl;
use chemkernel_core::engine::{CarryOver, ScheduledPatch};
use chemkernel_core::hw;
use chemkernel_core::patch;
use chemkernel_core::{ReactionNetwork, ReconfigPatch};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// First 16 hex digits of the SHA-256 of the canonical `.cadl` text.
pub fn network_hash(net: &ReactionNetwork) -> String {
    let digest = Sha256::digest(cadl::serialize(net).as_bytes());
    let mut s = String::with_capacity(16);
    for b in digest.iter().take(8) {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{err}")]
    Parse { path: String, err: cadl::ParseError },
    #[error("{path}: {err}")]
    Cahw { path: String, err: cahw::CahwError },
    #[error("{path}: {err}")]
    Map { path: String, err: hw::HwError },
    #[error("unknown builtin network `{0}`")]
    UnknownBuiltin(String),
    #[error("{path}: {err}")]
    PatchConflict { path: String, err: chemkernel_core::patch::PatchError },
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, LoadError> {
    std::fs::read(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })
}

/// Loads a `.cadl` source, a `.cahw` register map or `builtin:<name>`.
pub fn load_network(spec: &str) -> Result<ReactionNetwork, LoadError> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return chemkernel_core::traffic::builtin_network(name).ok_or_else(|| LoadError::UnknownBuiltin(name.into()));
    }
    let path = Path::new(spec);
    let bytes = read_file(path)?;
    let shown = path.display().to_string();
    if path.extension().is_some_and(|e| e == "cahw") {
        let map = cahw::decode(&bytes).map_err(|err| LoadError::Cahw { path: shown.clone(), err })?;
        return hw::decompile(&map).map_err(|err| LoadError::Map { path: shown, err });
    }
    let text = String::from_utf8_lossy(&bytes);
    cadl::parse(&text).map(|d| d.network).map_err(|err| LoadError::Parse { path: shown, err })
}

/// Loads a patch file relative to the network it will be applied to. A
/// `.capatch` file is read as an edit list; anything else is loaded as a
/// network and turned into the edits that reach it. Returns the patch and
/// the network after it.
pub fn load_patch(spec: &str, current: &ReactionNetwork) -> Result<(ReconfigPatch, ReactionNetwork), LoadError> {
    let path = Path::new(spec);
    let shown = path.display().to_string();
    if path.extension().is_some_and(|e| e == "capatch") {
        let bytes = read_file(path)?;
        let text = String::from_utf8_lossy(&bytes);
        let p = cadl::parse_patch(&text).map_err(|err| LoadError::Parse { path: shown.clone(), err })?;
        let next = patch::apply(current, &p).map_err(|err| LoadError::PatchConflict { path: shown, err })?;
        return Ok((p, next));
    }
    let next = load_network(spec)?;
    Ok((patch::diff(current, &next), next))
}

/// Merges `extra` patch files into an existing schedule. Each file is
/// resolved against the network in force at its time.
pub fn merge_patches(
    base: &ReactionNetwork,
    existing: &[ScheduledPatch],
    extra: &[(f64, String)],
) -> Result<Vec<ScheduledPatch>, LoadError> {
    let mut extra: Vec<&(f64, String)> = extra.iter().collect();
    extra.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut net = base.clone();
    let (mut i, mut j) = (0, 0);
    while i < existing.len() || j < extra.len() {
        let take_existing = j == extra.len() || (i < existing.len() && existing[i].time <= extra[j].0);
        if take_existing {
            let sp = &existing[i];
            net = patch::apply(&net, &sp.patch)
                .map_err(|err| LoadError::PatchConflict { path: format!("patch at t={}", sp.time), err })?;
            out.push(sp.clone());
            i += 1;
        } else {
            let (t, file) = extra[j];
            let (p, next) = load_patch(file, &net)?;
            net = next;
            out.push(ScheduledPatch { time: *t, patch: p, policy: CarryOver::default() });
            j += 1;
        }
    }
    Ok(out)
}

/// Provenance attached to every output file.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub rng: &'static str,
    pub network_hash: String,
    pub engine: String,
}

impl Provenance {
    pub fn new(seed: u64, net: &ReactionNetwork, engine: &str) -> Self {
        Provenance {
            tool: "chemkernel",
            version: TOOL_VERSION,
            seed,
            rng: chemkernel_core::rng::RNG_ALGORITHM,
            network_hash: network_hash(net),
            engine: engine.to_string(),
        }
    }

    /// `# key=value ...` line for CSV files.
    pub fn comment_line(&self) -> String {
        format!(
            "# tool={} version={} seed={} rng={} network={} engine={}",
            self.tool, self.version, self.seed, self.rng, self.network_hash, self.engine
        )
    }
}
