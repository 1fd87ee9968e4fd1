//! Reconfiguration patches: diff two networks, apply edits to a network.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::network::{NetworkError, ReactionDef, ReactionNetwork};

/// One register-level or structural change. Entities are named, so patches
/// survive renumbering.
#[derive(Clone, Debug, PartialEq)]
pub enum Edit {
    SetK { reaction: String, k: f64 },
    SetConcentration { species: String, value: u64 },
    AddSpecies { name: String, initial: u64 },
    AddReaction(ReactionDef),
    RemoveReaction(String),
    RemoveSpecies(String),
    ReplaceNetwork(ReactionNetwork),
}

impl Edit {
    pub fn is_parametric(&self) -> bool {
        matches!(self, Edit::SetK { .. } | Edit::SetConcentration { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatchKind {
    Empty,
    Parametric,
    Structural,
}

impl PatchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PatchKind::Empty => "empty",
            PatchKind::Parametric => "parametric",
            PatchKind::Structural => "structural",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReconfigPatch {
    pub edits: Vec<Edit>,
}

impl ReconfigPatch {
    pub fn new(edits: Vec<Edit>) -> Self {
        ReconfigPatch { edits }
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn kind(&self) -> PatchKind {
        if self.edits.is_empty() {
            PatchKind::Empty
        } else if self.edits.iter().all(Edit::is_parametric) {
            PatchKind::Parametric
        } else {
            PatchKind::Structural
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PatchError {
    UnknownReaction(String),
    UnknownSpecies(String),
    DuplicateSpecies(String),
    DuplicateReaction(String),
    SpeciesInUse { species: String, reaction: String },
    Invalid(NetworkError),
}

impl fmt::Display for PatchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatchError::UnknownReaction(n) => write!(f, "patch references absent reaction `{n}`"),
            PatchError::UnknownSpecies(n) => write!(f, "patch references absent species `{n}`"),
            PatchError::DuplicateSpecies(n) => write!(f, "patch adds existing species `{n}`"),
            PatchError::DuplicateReaction(n) => write!(f, "patch adds existing reaction `{n}`"),
            PatchError::SpeciesInUse { species, reaction } => {
                write!(f, "cannot remove species `{species}`: used by reaction `{reaction}`")
            }
            PatchError::Invalid(e) => write!(f, "patched network is invalid: {e}"),
        }
    }
}

impl core::error::Error for PatchError {}

/// Name-based editable form of a network.
struct Draft {
    species: Vec<(String, u64)>,
    reactions: Vec<ReactionDef>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    drops: Vec<String>,
}

impl Draft {
    fn of(net: &ReactionNetwork) -> Self {
        let (inputs, outputs, drops) = net.role_names();
        Draft {
            species: net.species().iter().map(|s| (s.name.clone(), s.initial)).collect(),
            reactions: net.reaction_defs(),
            inputs,
            outputs,
            drops,
        }
    }

    fn build(self) -> Result<ReactionNetwork, PatchError> {
        ReactionNetwork::from_parts(self.species, self.reactions, self.inputs, self.outputs, self.drops)
            .map_err(PatchError::Invalid)
    }

    fn edit(&mut self, e: &Edit) -> Result<(), PatchError> {
        match e {
            Edit::SetK { reaction, k } => {
                let r = self
                    .reactions
                    .iter_mut()
                    .find(|r| &r.name == reaction)
                    .ok_or_else(|| PatchError::UnknownReaction(reaction.clone()))?;
                r.k = *k;
            }
            Edit::SetConcentration { species, value } => {
                let s = self
                    .species
                    .iter_mut()
                    .find(|s| &s.0 == species)
                    .ok_or_else(|| PatchError::UnknownSpecies(species.clone()))?;
                s.1 = *value;
            }
            Edit::AddSpecies { name, initial } => {
                if self.species.iter().any(|s| &s.0 == name) {
                    return Err(PatchError::DuplicateSpecies(name.clone()));
                }
                self.species.push((name.clone(), *initial));
            }
            Edit::AddReaction(def) => {
                if self.reactions.iter().any(|r| r.name == def.name) {
                    return Err(PatchError::DuplicateReaction(def.name.clone()));
                }
                for (n, _) in def.reactants.iter().chain(&def.products) {
                    if !self.species.iter().any(|s| &s.0 == n) {
                        return Err(PatchError::UnknownSpecies(n.clone()));
                    }
                }
                self.reactions.push(def.clone());
            }
            Edit::RemoveReaction(name) => {
                let i = self
                    .reactions
                    .iter()
                    .position(|r| &r.name == name)
                    .ok_or_else(|| PatchError::UnknownReaction(name.clone()))?;
                self.reactions.remove(i);
            }
            Edit::RemoveSpecies(name) => {
                let i = self
                    .species
                    .iter()
                    .position(|s| &s.0 == name)
                    .ok_or_else(|| PatchError::UnknownSpecies(name.clone()))?;
                if let Some(r) =
                    self.reactions.iter().find(|r| r.reactants.iter().chain(&r.products).any(|(n, _)| n == name))
                {
                    return Err(PatchError::SpeciesInUse { species: name.clone(), reaction: r.name.clone() });
                }
                self.species.remove(i);
                for roles in [&mut self.inputs, &mut self.outputs, &mut self.drops] {
                    roles.retain(|n| n != name);
                }
            }
            Edit::ReplaceNetwork(net) => *self = Draft::of(net),
        }
        Ok(())
    }
}

/// Applies edits in order. Added species and reactions are appended, so the
/// ids of surviving entities only shift when something before them is removed.
pub fn apply(net: &ReactionNetwork, patch: &ReconfigPatch) -> Result<ReactionNetwork, PatchError> {
    if patch.is_empty() {
        return Ok(net.clone());
    }
    let mut d = Draft::of(net);
    for e in &patch.edits {
        d.edit(e)?;
    }
    d.build()
}

fn same_shape(a: &ReactionDef, b: &ReactionDef) -> bool {
    fn canon(side: &[(String, u32)]) -> BTreeMap<&str, u32> {
        let mut m: BTreeMap<&str, u32> = BTreeMap::new();
        for (n, c) in side {
            *m.entry(n.as_str()).or_insert(0) += c;
        }
        m
    }
    canon(&a.reactants) == canon(&b.reactants) && canon(&a.products) == canon(&b.products)
}

/// Smallest patch under the edit vocabulary turning `old` into `new`
/// (structurally). Io-role changes cannot be expressed edit by edit and fall
/// back to a whole-network replacement, as does a pair sharing no names.
pub fn diff(old: &ReactionNetwork, new: &ReactionNetwork) -> ReconfigPatch {
    if old.structurally_eq(new) {
        return ReconfigPatch::default();
    }
    let shares_species = new.species().iter().any(|s| old.species_id(&s.name).is_some());
    let shares_reactions = new.reactions().iter().any(|r| old.reaction_id(&r.name).is_some());
    let roles_equal = {
        let sorted = |n: &ReactionNetwork| {
            let (mut a, mut b, mut c) = n.role_names();
            a.sort();
            b.sort();
            c.sort();
            (a, b, c)
        };
        sorted(old) == sorted(new)
    };
    if (!shares_species && !shares_reactions) || !roles_equal {
        return ReconfigPatch::new(alloc::vec![Edit::ReplaceNetwork(new.clone())]);
    }

    let old_defs = old.reaction_defs();
    let new_defs = new.reaction_defs();
    fn find(defs: &[ReactionDef], name: &str) -> Option<usize> {
        defs.iter().position(|d| d.name == name)
    }
    let mut edits = Vec::new();

    for od in &old_defs {
        match find(&new_defs, &od.name) {
            Some(j) if same_shape(od, &new_defs[j]) => {}
            _ => edits.push(Edit::RemoveReaction(od.name.clone())),
        }
    }
    for s in old.species() {
        if new.species_id(&s.name).is_none() {
            edits.push(Edit::RemoveSpecies(s.name.clone()));
        }
    }
    for s in new.species() {
        if old.species_id(&s.name).is_none() {
            edits.push(Edit::AddSpecies { name: s.name.clone(), initial: s.initial });
        }
    }
    for nd in &new_defs {
        match find(&old_defs, &nd.name) {
            Some(i) if same_shape(&old_defs[i], nd) => {}
            _ => edits.push(Edit::AddReaction(nd.clone())),
        }
    }
    for nd in &new_defs {
        if let Some(i) = find(&old_defs, &nd.name) {
            if same_shape(&old_defs[i], nd) && old_defs[i].k.to_bits() != nd.k.to_bits() {
                edits.push(Edit::SetK { reaction: nd.name.to_string(), k: nd.k });
            }
        }
    }
    for s in new.species() {
        if let Some(id) = old.species_id(&s.name) {
            if old.species_def(id).initial != s.initial {
                edits.push(Edit::SetConcentration { species: s.name.clone(), value: s.initial });
            }
        }
    }
    ReconfigPatch::new(edits)
}
