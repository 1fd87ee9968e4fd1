//! Reaction network model and its structural analyses.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Species handle. Ids start at 1 in declaration order; 0 is the constant
/// cell of the hardware model and never names a species.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpeciesId(pub u16);

impl SpeciesId {
    /// Position in concentration vectors.
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        SpeciesId((i + 1) as u16)
    }
}

/// Reaction handle, dense from 0 in declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReactionId(pub u16);

impl ReactionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpeciesDef {
    pub id: SpeciesId,
    pub name: String,
    pub initial: u64,
}

/// `count` molecules of `species` on one side of a reaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Term {
    pub species: SpeciesId,
    pub count: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reaction {
    pub id: ReactionId,
    pub name: String,
    /// Distinct reactant species in written order, each with its α.
    pub reactants: Vec<Term>,
    pub products: Vec<Term>,
    pub k: f64,
}

impl Reaction {
    /// Σα.
    pub fn order(&self) -> u32 {
        self.reactants.iter().map(|t| t.count).sum()
    }

    pub fn alpha(&self, s: SpeciesId) -> u32 {
        self.reactants.iter().find(|t| t.species == s).map_or(0, |t| t.count)
    }

    pub fn beta(&self, s: SpeciesId) -> u32 {
        self.products.iter().find(|t| t.species == s).map_or(0, |t| t.count)
    }

    /// Net change ξ of one species per firing.
    pub fn net(&self, s: SpeciesId) -> i64 {
        self.beta(s) as i64 - self.alpha(s) as i64
    }

    /// Sparse column of Ξ, ordered by species id, zero entries dropped.
    pub fn delta(&self) -> Vec<(SpeciesId, i64)> {
        let mut m: BTreeMap<SpeciesId, i64> = BTreeMap::new();
        for t in &self.reactants {
            *m.entry(t.species).or_insert(0) -= t.count as i64;
        }
        for t in &self.products {
            *m.entry(t.species).or_insert(0) += t.count as i64;
        }
        m.into_iter().filter(|&(_, d)| d != 0).collect()
    }
}

/// Input, output and drop species consumed by the queue harness.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IoRoles {
    pub inputs: Vec<SpeciesId>,
    pub outputs: Vec<SpeciesId>,
    pub drops: Vec<SpeciesId>,
}

/// Name-based reaction description, independent of species numbering.
/// Used by the builder, by patches and by the DSL.
#[derive(Clone, Debug, PartialEq)]
pub struct ReactionDef {
    pub name: String,
    pub reactants: Vec<(String, u32)>,
    pub products: Vec<(String, u32)>,
    pub k: f64,
}

impl ReactionDef {
    pub fn new(name: &str, reactants: &[(&str, u32)], products: &[(&str, u32)], k: f64) -> Self {
        let own = |side: &[(&str, u32)]| side.iter().map(|&(n, c)| (n.to_string(), c)).collect();
        ReactionDef { name: name.to_string(), reactants: own(reactants), products: own(products), k }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NetworkError {
    InvalidName(String),
    DuplicateSpecies(String),
    DuplicateReaction(String),
    UnknownSpecies { reaction: Option<String>, species: String },
    NonPositiveRate { reaction: String, k: f64 },
    EmptyReaction(String),
    ZeroMultiplicity { reaction: String, species: String },
    TooManySpecies(usize),
    TooManyReactions(usize),
}

impl fmt::Display for NetworkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkError::InvalidName(n) => write!(f, "invalid identifier `{n}`"),
            NetworkError::DuplicateSpecies(n) => write!(f, "duplicate species `{n}`"),
            NetworkError::DuplicateReaction(n) => write!(f, "duplicate reaction `{n}`"),
            NetworkError::UnknownSpecies { reaction: Some(r), species } => {
                write!(f, "reaction `{r}` references unknown species `{species}`")
            }
            NetworkError::UnknownSpecies { reaction: None, species } => {
                write!(f, "unknown species `{species}`")
            }
            NetworkError::NonPositiveRate { reaction, k } => {
                write!(f, "reaction `{reaction}`: k must be positive (got {k})")
            }
            NetworkError::EmptyReaction(r) => write!(f, "reaction `{r}` has no reactants and no products"),
            NetworkError::ZeroMultiplicity { reaction, species } => {
                write!(f, "reaction `{reaction}`: zero multiplicity for `{species}`")
            }
            NetworkError::TooManySpecies(n) => write!(f, "{n} species exceed the 65535 id space"),
            NetworkError::TooManyReactions(n) => write!(f, "{n} reactions exceed the 65536 id space"),
        }
    }
}

impl core::error::Error for NetworkError {}

pub fn is_identifier(s: &str) -> bool {
    let mut it = s.bytes();
    match it.next() {
        Some(b) if b.is_ascii_alphabetic() => {}
        _ => return false,
    }
    it.all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// Incremental, name-based network construction.
#[derive(Clone, Debug, Default)]
pub struct NetworkBuilder {
    species: Vec<(String, u64)>,
    reactions: Vec<ReactionDef>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    drops: Vec<String>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn species(mut self, name: &str, initial: u64) -> Self {
        self.species.push((name.to_string(), initial));
        self
    }

    pub fn reaction(mut self, name: &str, reactants: &[(&str, u32)], products: &[(&str, u32)], k: f64) -> Self {
        self.reactions.push(ReactionDef::new(name, reactants, products, k));
        self
    }

    pub fn reaction_def(mut self, def: ReactionDef) -> Self {
        self.reactions.push(def);
        self
    }

    pub fn input(mut self, name: &str) -> Self {
        self.inputs.push(name.to_string());
        self
    }

    pub fn output(mut self, name: &str) -> Self {
        self.outputs.push(name.to_string());
        self
    }

    pub fn drop_species(mut self, name: &str) -> Self {
        self.drops.push(name.to_string());
        self
    }

    pub fn build(self) -> Result<ReactionNetwork, NetworkError> {
        ReactionNetwork::from_parts(self.species, self.reactions, self.inputs, self.outputs, self.drops)
    }
}

/// A validated reaction network.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ReactionNetwork {
    species: Vec<SpeciesDef>,
    reactions: Vec<Reaction>,
    io: IoRoles,
}

impl ReactionNetwork {
    pub fn builder() -> NetworkBuilder {
        NetworkBuilder::new()
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds and validates a network from name-based parts. Duplicate
    /// species on one side of a reaction are merged.
    pub fn from_parts(
        species: Vec<(String, u64)>,
        reactions: Vec<ReactionDef>,
        inputs: Vec<String>,
        outputs: Vec<String>,
        drops: Vec<String>,
    ) -> Result<Self, NetworkError> {
        if species.len() > u16::MAX as usize {
            return Err(NetworkError::TooManySpecies(species.len()));
        }
        if reactions.len() > u16::MAX as usize + 1 {
            return Err(NetworkError::TooManyReactions(reactions.len()));
        }
        let mut by_name: BTreeMap<&str, SpeciesId> = BTreeMap::new();
        let mut defs = Vec::with_capacity(species.len());
        for (i, (name, init)) in species.iter().enumerate() {
            if !is_identifier(name) {
                return Err(NetworkError::InvalidName(name.clone()));
            }
            let id = SpeciesId::from_index(i);
            if by_name.insert(name.as_str(), id).is_some() {
                return Err(NetworkError::DuplicateSpecies(name.clone()));
            }
            defs.push(SpeciesDef { id, name: name.clone(), initial: *init });
        }
        let mut seen_rx: BTreeSet<&str> = BTreeSet::new();
        let mut rxs = Vec::with_capacity(reactions.len());
        for (i, def) in reactions.iter().enumerate() {
            if !is_identifier(&def.name) {
                return Err(NetworkError::InvalidName(def.name.clone()));
            }
            if !seen_rx.insert(def.name.as_str()) {
                return Err(NetworkError::DuplicateReaction(def.name.clone()));
            }
            if !(def.k.is_finite() && def.k > 0.0) {
                return Err(NetworkError::NonPositiveRate { reaction: def.name.clone(), k: def.k });
            }
            let side = |terms: &[(String, u32)]| -> Result<Vec<Term>, NetworkError> {
                let mut out: Vec<Term> = Vec::new();
                for (n, c) in terms {
                    let sid = *by_name.get(n.as_str()).ok_or_else(|| NetworkError::UnknownSpecies {
                        reaction: Some(def.name.clone()),
                        species: n.clone(),
                    })?;
                    if *c == 0 {
                        return Err(NetworkError::ZeroMultiplicity { reaction: def.name.clone(), species: n.clone() });
                    }
                    match out.iter_mut().find(|t| t.species == sid) {
                        Some(t) => t.count += c,
                        None => out.push(Term { species: sid, count: *c }),
                    }
                }
                Ok(out)
            };
            let reactants = side(&def.reactants)?;
            let products = side(&def.products)?;
            if reactants.is_empty() && products.is_empty() {
                return Err(NetworkError::EmptyReaction(def.name.clone()));
            }
            rxs.push(Reaction { id: ReactionId(i as u16), name: def.name.clone(), reactants, products, k: def.k });
        }
        let resolve = |names: &[String]| -> Result<Vec<SpeciesId>, NetworkError> {
            let mut v = Vec::new();
            for n in names {
                let id = *by_name
                    .get(n.as_str())
                    .ok_or_else(|| NetworkError::UnknownSpecies { reaction: None, species: n.clone() })?;
                if !v.contains(&id) {
                    v.push(id);
                }
            }
            Ok(v)
        };
        let io = IoRoles { inputs: resolve(&inputs)?, outputs: resolve(&outputs)?, drops: resolve(&drops)? };
        Ok(ReactionNetwork { species: defs, reactions: rxs, io })
    }

    pub fn species(&self) -> &[SpeciesDef] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn io(&self) -> &IoRoles {
        &self.io
    }

    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    pub fn reaction_count(&self) -> usize {
        self.reactions.len()
    }

    pub fn species_def(&self, id: SpeciesId) -> &SpeciesDef {
        &self.species[id.index()]
    }

    pub fn reaction(&self, id: ReactionId) -> &Reaction {
        &self.reactions[id.index()]
    }

    pub fn species_id(&self, name: &str) -> Option<SpeciesId> {
        self.species.iter().find(|s| s.name == name).map(|s| s.id)
    }

    pub fn reaction_id(&self, name: &str) -> Option<ReactionId> {
        self.reactions.iter().find(|r| r.name == name).map(|r| r.id)
    }

    pub fn species_name(&self, id: SpeciesId) -> &str {
        &self.species[id.index()].name
    }

    pub fn initial_concentrations(&self) -> Vec<u64> {
        self.species.iter().map(|s| s.initial).collect()
    }

    /// Name-based view of every reaction.
    pub fn reaction_defs(&self) -> Vec<ReactionDef> {
        self.reactions.iter().map(|r| self.reaction_def(r)).collect()
    }

    pub fn reaction_def(&self, r: &Reaction) -> ReactionDef {
        let side = |ts: &[Term]| ts.iter().map(|t| (self.species_name(t.species).to_string(), t.count)).collect();
        ReactionDef { name: r.name.clone(), reactants: side(&r.reactants), products: side(&r.products), k: r.k }
    }

    pub fn role_names(&self) -> (Vec<String>, Vec<String>, Vec<String>) {
        let names = |ids: &[SpeciesId]| ids.iter().map(|&s| self.species_name(s).to_string()).collect();
        (names(&self.io.inputs), names(&self.io.outputs), names(&self.io.drops))
    }

    /// Equality modulo species/reaction numbering: same species (name and
    /// initial value), same reactions by name with identical stoichiometry and
    /// k, same io roles.
    pub fn structurally_eq(&self, other: &ReactionNetwork) -> bool {
        let sp = |n: &ReactionNetwork| -> BTreeMap<String, u64> {
            n.species.iter().map(|s| (s.name.clone(), s.initial)).collect()
        };
        if sp(self) != sp(other) {
            return false;
        }
        type Canon = (Vec<(String, u32)>, Vec<(String, u32)>, u64);
        let rx = |n: &ReactionNetwork| -> BTreeMap<String, Canon> {
            n.reaction_defs()
                .into_iter()
                .map(|mut d| {
                    d.reactants.sort();
                    d.products.sort();
                    (d.name, (d.reactants, d.products, d.k.to_bits()))
                })
                .collect()
        };
        if rx(self) != rx(other) {
            return false;
        }
        let roles = |n: &ReactionNetwork| {
            let (mut a, mut b, mut c) = n.role_names();
            a.sort();
            b.sort();
            c.sort();
            (a, b, c)
        };
        roles(self) == roles(other)
    }

    /// Species that no reaction consumes (pure sinks such as output tokens).
    pub fn sink_species(&self) -> Vec<bool> {
        let mut sink = vec![true; self.species.len()];
        for r in &self.reactions {
            for t in &r.reactants {
                sink[t.species.index()] = false;
            }
        }
        sink
    }
}

/// Ξ together with the α and β tables it was built from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoichMatrix {
    rows: usize,
    cols: usize,
    net: Vec<i64>,
    alpha: Vec<u32>,
    beta: Vec<u32>,
}

impl StoichMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// ξ for species row `s` (0-based) and reaction column `r`.
    pub fn get(&self, s: usize, r: usize) -> i64 {
        self.net[s * self.cols + r]
    }

    pub fn alpha(&self, s: usize, r: usize) -> u32 {
        self.alpha[s * self.cols + r]
    }

    pub fn beta(&self, s: usize, r: usize) -> u32 {
        self.beta[s * self.cols + r]
    }

    pub fn column(&self, r: usize) -> Vec<i64> {
        (0..self.rows).map(|s| self.get(s, r)).collect()
    }
}

pub fn build_stoich_matrix(net: &ReactionNetwork) -> StoichMatrix {
    let rows = net.species_count();
    let cols = net.reaction_count();
    let mut m = StoichMatrix {
        rows,
        cols,
        net: vec![0; rows * cols],
        alpha: vec![0; rows * cols],
        beta: vec![0; rows * cols],
    };
    for r in net.reactions() {
        let c = r.id.index();
        for t in &r.reactants {
            m.alpha[t.species.index() * cols + c] += t.count;
        }
        for t in &r.products {
            m.beta[t.species.index() * cols + c] += t.count;
        }
    }
    for i in 0..rows * cols {
        m.net[i] = m.beta[i] as i64 - m.alpha[i] as i64;
    }
    m
}

/// Capacities of the register-mapped engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EngineLimits {
    /// |R|
    pub max_reactions: u16,
    /// |Ψ|, reactant (and product) slots per reaction
    pub max_slots: u16,
    /// |S|
    pub max_species: u16,
    /// |C|
    pub concentration_bits: u16,
    /// |α|
    pub max_reactant_order: u16,
    /// |β|
    pub max_product_order: u16,
    /// |k|
    pub k_bits: u16,
}

impl Default for EngineLimits {
    fn default() -> Self {
        EngineLimits {
            max_reactions: 8,
            max_slots: 8,
            max_species: 255,
            concentration_bits: 16,
            max_reactant_order: 8,
            max_product_order: 8,
            k_bits: 32,
        }
    }
}

impl EngineLimits {
    pub fn max_concentration(&self) -> u64 {
        if self.concentration_bits >= 64 {
            u64::MAX
        } else {
            (1u64 << self.concentration_bits) - 1
        }
    }

    /// Bits per address record: enough for cell 0 plus every species cell.
    pub fn address_bits(&self) -> u32 {
        let cells = self.max_species as u32 + 1;
        (32 - (cells - 1).leading_zeros()).max(1)
    }

    /// Returns the first field that is zero or unsupported.
    pub fn check(&self) -> Result<(), &'static str> {
        let fields = [
            (self.max_reactions, "reaction count"),
            (self.max_slots, "slot count"),
            (self.max_species, "species count"),
            (self.concentration_bits, "concentration width"),
            (self.max_reactant_order, "reactant order"),
            (self.max_product_order, "product order"),
            (self.k_bits, "coefficient width"),
        ];
        for (v, name) in fields {
            if v == 0 {
                return Err(name);
            }
        }
        if self.concentration_bits > 32 {
            return Err("concentration width");
        }
        if self.k_bits != 32 {
            return Err("coefficient width");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    InvalidLimits(&'static str),
    ReactionCount { count: usize, max: u16 },
    SpeciesCount { count: usize, max: u16 },
    ReactantOrder { reaction: String, species: String, order: u32, max: u16 },
    ProductOrder { reaction: String, species: String, order: u32, max: u16 },
    ReactantSlots { reaction: String, count: usize, max: u16 },
    ProductSlots { reaction: String, count: usize, max: u16 },
    InitialConcentration { species: String, value: u64, max: u64 },
}

impl Violation {
    /// Name of the violated bound.
    pub fn bound(&self) -> &'static str {
        match self {
            Violation::InvalidLimits(_) => "limits",
            Violation::ReactionCount { .. } => "reaction count",
            Violation::SpeciesCount { .. } => "species count",
            Violation::ReactantOrder { .. } => "reactant order",
            Violation::ProductOrder { .. } => "product order",
            Violation::ReactantSlots { .. } => "reactant slots",
            Violation::ProductSlots { .. } => "product slots",
            Violation::InitialConcentration { .. } => "initial concentration",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidLimits(what) => write!(f, "limits: unsupported {what}"),
            Violation::ReactionCount { count, max } => write!(f, "reaction count: {count} > {max}"),
            Violation::SpeciesCount { count, max } => write!(f, "species count: {count} > {max}"),
            Violation::ReactantOrder { reaction, species, order, max } => {
                write!(f, "reactant order: {order}·{species} in `{reaction}` > {max}")
            }
            Violation::ProductOrder { reaction, species, order, max } => {
                write!(f, "product order: {order}·{species} in `{reaction}` > {max}")
            }
            Violation::ReactantSlots { reaction, count, max } => {
                write!(f, "reactant slots: {count} distinct reactants in `{reaction}` > {max}")
            }
            Violation::ProductSlots { reaction, count, max } => {
                write!(f, "product slots: {count} distinct products in `{reaction}` > {max}")
            }
            Violation::InitialConcentration { species, value, max } => {
                write!(f, "initial concentration: {species}={value} > {max}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_against_limits(net: &ReactionNetwork, lim: &EngineLimits) -> ValidationReport {
    let mut v = Vec::new();
    if let Err(what) = lim.check() {
        v.push(Violation::InvalidLimits(what));
        return ValidationReport { violations: v };
    }
    if net.reaction_count() > lim.max_reactions as usize {
        v.push(Violation::ReactionCount { count: net.reaction_count(), max: lim.max_reactions });
    }
    if net.species_count() > lim.max_species as usize {
        v.push(Violation::SpeciesCount { count: net.species_count(), max: lim.max_species });
    }
    for r in net.reactions() {
        if r.reactants.len() > lim.max_slots as usize {
            v.push(Violation::ReactantSlots { reaction: r.name.clone(), count: r.reactants.len(), max: lim.max_slots });
        }
        if r.products.len() > lim.max_slots as usize {
            v.push(Violation::ProductSlots { reaction: r.name.clone(), count: r.products.len(), max: lim.max_slots });
        }
        for t in &r.reactants {
            if t.count > lim.max_reactant_order as u32 {
                v.push(Violation::ReactantOrder {
                    reaction: r.name.clone(),
                    species: net.species_name(t.species).to_string(),
                    order: t.count,
                    max: lim.max_reactant_order,
                });
            }
        }
        for t in &r.products {
            if t.count > lim.max_product_order as u32 {
                v.push(Violation::ProductOrder {
                    reaction: r.name.clone(),
                    species: net.species_name(t.species).to_string(),
                    order: t.count,
                    max: lim.max_product_order,
                });
            }
        }
    }
    let cmax = lim.max_concentration();
    for s in net.species() {
        if s.initial > cmax {
            v.push(Violation::InitialConcentration { species: s.name.clone(), value: s.initial, max: cmax });
        }
    }
    ValidationReport { violations: v }
}

/// For each reaction, the reactions to reschedule after it fires
/// (ascending ids, always including itself).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyGraph {
    deps: Vec<Vec<ReactionId>>,
}

impl DependencyGraph {
    pub fn dependents(&self, r: ReactionId) -> &[ReactionId] {
        &self.deps[r.index()]
    }

    pub fn len(&self) -> usize {
        self.deps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deps.is_empty()
    }
}

pub fn dependency_graph(net: &ReactionNetwork) -> DependencyGraph {
    let consumers = species_consumers(net);
    let mut deps = Vec::with_capacity(net.reaction_count());
    for r in net.reactions() {
        let mut set: BTreeSet<ReactionId> = BTreeSet::new();
        set.insert(r.id);
        for (s, _) in r.delta() {
            set.extend(consumers[s.index()].iter().copied());
        }
        deps.push(set.into_iter().collect());
    }
    DependencyGraph { deps }
}

/// Reactions that have each species as a reactant, ascending ids.
pub fn species_consumers(net: &ReactionNetwork) -> Vec<Vec<ReactionId>> {
    let mut v = vec![Vec::new(); net.species_count()];
    for r in net.reactions() {
        for t in &r.reactants {
            v[t.species.index()].push(r.id);
        }
    }
    v
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Moiety {
    /// One weight per species, in species order.
    pub weights: Vec<u32>,
    /// wᵀ·c(0).
    pub total: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnalysisError {
    SearchBoundExceeded { species: usize, max: usize },
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::SearchBoundExceeded { species, max } => {
                write!(f, "moiety search supports at most {max} species, network has {species}")
            }
        }
    }
}

impl core::error::Error for AnalysisError {}

pub const MOIETY_SEARCH_MAX_SPECIES: usize = 32;
const MOIETY_NODE_BUDGET: u64 = 4_000_000;

/// Non-negative integer weight vectors `w` with weights in {0,1,2} and
/// `wᵀ·Ξ = 0`, found by a pruned depth-first search. Only support-minimal,
/// primitive vectors are kept. The search stops after a fixed node budget, so
/// on large networks the result may be partial.
pub fn conserved_moieties(net: &ReactionNetwork) -> Result<Vec<Moiety>, AnalysisError> {
    let n = net.species_count();
    if n > MOIETY_SEARCH_MAX_SPECIES {
        return Err(AnalysisError::SearchBoundExceeded { species: n, max: MOIETY_SEARCH_MAX_SPECIES });
    }
    let xi = build_stoich_matrix(net);
    let cols: Vec<usize> = (0..xi.cols()).filter(|&r| (0..n).any(|s| xi.get(s, r) != 0)).collect();
    let mut search = MoietySearch {
        n,
        xi: &xi,
        cols,
        w: vec![0; n],
        sums: Vec::new(),
        found: Vec::new(),
        nodes: 0,
    };
    search.sums = vec![0; search.cols.len()];
    search.dfs(0);
    let found = search.found;

    let support = |w: &[u32]| -> u32 { w.iter().enumerate().filter(|(_, &x)| x != 0).fold(0u32, |m, (i, _)| m | (1 << i)) };
    let mut keep: Vec<Vec<u32>> = Vec::new();
    for w in &found {
        if w.iter().copied().filter(|&x| x != 0).fold(0, gcd) != 1 {
            continue;
        }
        let sw = support(w);
        let dominated = found.iter().any(|o| {
            let so = support(o);
            so != sw && so & sw == so
        });
        if !dominated {
            keep.push(w.clone());
        }
    }
    let c0 = net.initial_concentrations();
    Ok(keep
        .into_iter()
        .map(|w| {
            let total = w.iter().zip(&c0).map(|(&a, &b)| a as u64 * b).sum();
            Moiety { weights: w, total }
        })
        .collect())
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

struct MoietySearch<'a> {
    n: usize,
    xi: &'a StoichMatrix,
    cols: Vec<usize>,
    w: Vec<u32>,
    sums: Vec<i64>,
    found: Vec<Vec<u32>>,
    nodes: u64,
}

impl MoietySearch<'_> {
    fn feasible(&self, next: usize) -> bool {
        for (j, &r) in self.cols.iter().enumerate() {
            let (mut lo, mut hi) = (0i64, 0i64);
            for s in next..self.n {
                let x = self.xi.get(s, r);
                if x > 0 {
                    hi += 2 * x;
                } else {
                    lo += 2 * x;
                }
            }
            let sum = self.sums[j];
            if sum + lo > 0 || sum + hi < 0 {
                return false;
            }
        }
        true
    }

    fn dfs(&mut self, s: usize) {
        self.nodes += 1;
        if self.nodes > MOIETY_NODE_BUDGET {
            return;
        }
        if s == self.n {
            if self.w.iter().any(|&x| x != 0) {
                self.found.push(self.w.clone());
            }
            return;
        }
        for wv in 0..=2u32 {
            self.w[s] = wv;
            for (j, &r) in self.cols.iter().enumerate() {
                self.sums[j] += wv as i64 * self.xi.get(s, r);
            }
            if self.feasible(s + 1) {
                self.dfs(s + 1);
            }
            for (j, &r) in self.cols.iter().enumerate() {
                self.sums[j] -= wv as i64 * self.xi.get(s, r);
            }
        }
        self.w[s] = 0;
    }
}
