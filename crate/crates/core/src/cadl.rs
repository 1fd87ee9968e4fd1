//! `.cadl` network definitions and `.capatch` patch files.
//!
//! ```text
//! # enzymatic rate limiter
//! species S init 0
//! species E init 25000
//! species ES init 0
//! species P init 0
//! reaction r1: S + E -> ES @ k=1
//! reaction r2: ES -> E + P @ k=20
//! input S
//! output P
//! ```
//!
//! A term is `[<uint> ] <name>`; an empty side is `0`; `#` starts a comment.
//! Patch files hold one edit per line:
//!
//! ```text
//! set-k r2 10
//! set-concentration E 50000
//! add-species E init 25000
//! add-reaction r1: S + E -> ES @ k=1
//! remove-reaction r0
//! remove-species X
//! replace-network
//! species A init 1
//! end
//! ```

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::fmt::Write as _;

use crate::network::{is_identifier, ReactionDef, ReactionNetwork};
use crate::patch::{Edit, ReconfigPatch};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParseErrorKind {
    Syntax(String),
    Semantic(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn syntax(at: Span, msg: impl Into<String>) -> Self {
        ParseError { line: at.line, column: at.column, kind: ParseErrorKind::Syntax(msg.into()) }
    }

    fn semantic(at: Span, msg: impl Into<String>) -> Self {
        ParseError { line: at.line, column: at.column, kind: ParseErrorKind::Semantic(msg.into()) }
    }

    pub fn message(&self) -> &str {
        match &self.kind {
            ParseErrorKind::Syntax(m) | ParseErrorKind::Semantic(m) => m,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ParseErrorKind::Syntax(_) => "syntax error",
            ParseErrorKind::Semantic(_) => "error",
        };
        write!(f, "{}:{}: {}: {}", self.line, self.column, what, self.message())
    }
}

impl core::error::Error for ParseError {}

/// Parsed source with per-entity locations for diagnostics.
#[derive(Clone, Debug)]
pub struct SpecDocument {
    pub source: String,
    pub network: ReactionNetwork,
    pub species_spans: Vec<Span>,
    pub reaction_spans: Vec<Span>,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok<'a> {
    Ident(&'a str),
    Num(&'a str),
    Colon,
    Plus,
    Arrow,
    At,
    Eq,
}

#[derive(Clone, Debug)]
struct Token<'a> {
    tok: Tok<'a>,
    col: usize,
}

fn lex(line: &str, lineno: usize) -> Result<Vec<Token<'_>>, ParseError> {
    let b = line.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        let col = i + 1;
        if c == b'#' {
            break;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b':' => {
                i += 1;
                Tok::Colon
            }
            b'+' => {
                i += 1;
                Tok::Plus
            }
            b'@' => {
                i += 1;
                Tok::At
            }
            b'=' => {
                i += 1;
                Tok::Eq
            }
            b'-' if b.get(i + 1) == Some(&b'>') => {
                i += 2;
                Tok::Arrow
            }
            b'0'..=b'9' | b'.' | b'-' => {
                i += 1;
                while i < b.len() {
                    let d = b[i];
                    let exp_sign = (d == b'-' || d == b'+') && matches!(b[i - 1], b'e' | b'E');
                    if d.is_ascii_digit() || d == b'.' || d == b'e' || d == b'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                Tok::Num(&line[start..i])
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                Tok::Ident(&line[start..i])
            }
            _ => {
                let ch = line[i..].chars().next().unwrap_or('?');
                return Err(ParseError::syntax(Span { line: lineno, column: col }, format!("unexpected character `{ch}`")));
            }
        };
        out.push(Token { tok, col });
    }
    Ok(out)
}

struct Cursor<'t, 'a> {
    toks: &'t [Token<'a>],
    pos: usize,
    line: usize,
    eol: usize,
}

impl<'a> Cursor<'_, 'a> {
    fn span(&self) -> Span {
        let column = self.toks.get(self.pos).map_or(self.eol, |t| t.col);
        Span { line: self.line, column }
    }

    fn peek(&self) -> Option<&Tok<'a>> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<Tok<'a>> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn ident(&mut self, what: &str) -> Result<(&'a str, Span), ParseError> {
        let at = self.span();
        match self.next() {
            Some(Tok::Ident(s)) => Ok((s, at)),
            _ => Err(ParseError::syntax(at, format!("expected {what}"))),
        }
    }

    fn name(&mut self, what: &str) -> Result<(&'a str, Span), ParseError> {
        let (s, at) = self.ident(what)?;
        if !is_identifier(s) {
            return Err(ParseError::semantic(at, format!("invalid name `{s}`")));
        }
        Ok((s, at))
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let at = self.span();
        match self.next() {
            Some(Tok::Ident(s)) if s == kw => Ok(()),
            _ => Err(ParseError::syntax(at, format!("expected `{kw}`"))),
        }
    }

    fn expect(&mut self, t: Tok<'static>, what: &str) -> Result<(), ParseError> {
        let at = self.span();
        match self.next() {
            Some(ref got) if *got == t => Ok(()),
            _ => Err(ParseError::syntax(at, format!("expected `{what}`"))),
        }
    }

    fn uint(&mut self, what: &str) -> Result<u64, ParseError> {
        let at = self.span();
        match self.next() {
            Some(Tok::Num(s)) => s.parse::<u64>().map_err(|_| ParseError::syntax(at, format!("expected {what}"))),
            _ => Err(ParseError::syntax(at, format!("expected {what}"))),
        }
    }

    fn float(&mut self, what: &str) -> Result<(f64, Span), ParseError> {
        let at = self.span();
        match self.next() {
            Some(Tok::Num(s)) => {
                s.parse::<f64>().map(|v| (v, at)).map_err(|_| ParseError::syntax(at, format!("expected {what}")))
            }
            _ => Err(ParseError::syntax(at, format!("expected {what}"))),
        }
    }

    fn end(&self) -> Result<(), ParseError> {
        if self.pos < self.toks.len() {
            Err(ParseError::syntax(self.span(), "unexpected trailing input"))
        } else {
            Ok(())
        }
    }
}

type Side = Vec<(String, u32, Span)>;

fn side(c: &mut Cursor<'_, '_>) -> Result<Side, ParseError> {
    if let Some(Tok::Num("0")) = c.peek() {
        let after = c.toks.get(c.pos + 1).map(|t| &t.tok);
        if !matches!(after, Some(Tok::Ident(_))) {
            c.next();
            return Ok(Vec::new());
        }
    }
    let mut out = Vec::new();
    loop {
        let at = c.span();
        let mult = if let Some(Tok::Num(_)) = c.peek() {
            let v = c.uint("multiplicity")?;
            if v == 0 || v > u32::MAX as u64 {
                return Err(ParseError::semantic(at, "multiplicity must be a positive integer"));
            }
            v as u32
        } else {
            1
        };
        let (name, nat) = c.name("species name")?;
        out.push((name.to_string(), mult, nat));
        if let Some(Tok::Plus) = c.peek() {
            c.next();
        } else {
            return Ok(out);
        }
    }
}

/// `<name>: <side> -> <side> @ k=<float>` (after the leading keyword).
fn reaction_body(c: &mut Cursor<'_, '_>) -> Result<(ReactionDef, Span, Vec<(String, Span)>), ParseError> {
    let (name, at) = c.name("reaction name")?;
    c.expect(Tok::Colon, ":")?;
    let lhs = side(c)?;
    c.expect(Tok::Arrow, "->")?;
    let rhs = side(c)?;
    c.expect(Tok::At, "@")?;
    c.keyword("k")?;
    c.expect(Tok::Eq, "=")?;
    let (k, kat) = c.float("rate coefficient")?;
    c.end()?;
    if !(k.is_finite() && k > 0.0) {
        return Err(ParseError::semantic(kat, "k must be positive"));
    }
    if lhs.is_empty() && rhs.is_empty() {
        return Err(ParseError::semantic(at, "reaction needs at least one reactant or product"));
    }
    let refs = lhs.iter().chain(&rhs).map(|(n, _, s)| (n.clone(), *s)).collect();
    let strip = |v: Side| v.into_iter().map(|(n, m, _)| (n, m)).collect();
    Ok((ReactionDef { name: name.to_string(), reactants: strip(lhs), products: strip(rhs), k }, at, refs))
}

#[derive(Default)]
struct Collected {
    species: Vec<(String, u64, Span)>,
    reactions: Vec<(ReactionDef, Span, Vec<(String, Span)>)>,
    roles: [Vec<(String, Span)>; 3],
}

impl Collected {
    fn line(&mut self, c: &mut Cursor<'_, '_>) -> Result<(), ParseError> {
        let (kw, kat) = c.ident("a declaration")?;
        match kw {
            "species" => {
                let (name, at) = c.name("species name")?;
                c.keyword("init")?;
                let v = c.uint("initial concentration")?;
                c.end()?;
                self.species.push((name.to_string(), v, at));
            }
            "reaction" => self.reactions.push(reaction_body(c)?),
            "input" | "output" | "drop" => {
                let (name, at) = c.name("species name")?;
                c.end()?;
                let slot = match kw {
                    "input" => 0,
                    "output" => 1,
                    _ => 2,
                };
                self.roles[slot].push((name.to_string(), at));
            }
            other => return Err(ParseError::syntax(kat, format!("unknown declaration `{other}`"))),
        }
        Ok(())
    }

    fn finish(self, source: &str) -> Result<SpecDocument, ParseError> {
        for (i, (name, _, at)) in self.species.iter().enumerate() {
            if self.species[..i].iter().any(|s| &s.0 == name) {
                return Err(ParseError::semantic(*at, format!("duplicate species `{name}`")));
            }
        }
        let known = |n: &str| self.species.iter().any(|s| s.0 == n);
        for (i, (def, at, refs)) in self.reactions.iter().enumerate() {
            if self.reactions[..i].iter().any(|r| r.0.name == def.name) {
                return Err(ParseError::semantic(*at, format!("duplicate reaction `{}`", def.name)));
            }
            for (n, s) in refs {
                if !known(n) {
                    return Err(ParseError::semantic(*s, format!("unknown species `{n}`")));
                }
            }
        }
        for role in &self.roles {
            for (n, s) in role {
                if !known(n) {
                    return Err(ParseError::semantic(*s, format!("unknown species `{n}`")));
                }
            }
        }
        let species_spans = self.species.iter().map(|s| s.2).collect();
        let reaction_spans = self.reactions.iter().map(|r| r.1).collect();
        let [inputs, outputs, drops] = self.roles;
        let names = |v: Vec<(String, Span)>| v.into_iter().map(|x| x.0).collect();
        let network = ReactionNetwork::from_parts(
            self.species.into_iter().map(|(n, v, _)| (n, v)).collect(),
            self.reactions.into_iter().map(|r| r.0).collect(),
            names(inputs),
            names(outputs),
            names(drops),
        )
        .map_err(|e| ParseError::semantic(Span { line: 1, column: 1 }, e.to_string()))?;
        Ok(SpecDocument { source: source.to_string(), network, species_spans, reaction_spans })
    }
}

/// Parses a `.cadl` document.
pub fn parse(text: &str) -> Result<SpecDocument, ParseError> {
    let mut col = Collected::default();
    for (i, raw) in text.lines().enumerate() {
        let toks = lex(raw, i + 1)?;
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor { toks: &toks, pos: 0, line: i + 1, eol: raw.len() + 1 };
        col.line(&mut c)?;
    }
    col.finish(text)
}

fn write_side(out: &mut String, side: &[(String, u32)]) {
    if side.is_empty() {
        out.push('0');
        return;
    }
    for (i, (n, m)) in side.iter().enumerate() {
        if i > 0 {
            out.push_str(" + ");
        }
        if *m != 1 {
            let _ = write!(out, "{m} ");
        }
        out.push_str(n);
    }
}

fn write_reaction(out: &mut String, d: &ReactionDef) {
    let _ = write!(out, "{}: ", d.name);
    write_side(out, &d.reactants);
    out.push_str(" -> ");
    write_side(out, &d.products);
    let _ = write!(out, " @ k={}", d.k);
}

/// Canonical text: species by id, reactions by id, then io roles.
/// Coefficients use the shortest decimal that reads back to the same f64.
pub fn serialize(net: &ReactionNetwork) -> String {
    let mut out = String::new();
    for s in net.species() {
        let _ = writeln!(out, "species {} init {}", s.name, s.initial);
    }
    for d in net.reaction_defs() {
        out.push_str("reaction ");
        write_reaction(&mut out, &d);
        out.push('\n');
    }
    let (i, o, d) = net.role_names();
    for (kw, names) in [("input", i), ("output", o), ("drop", d)] {
        for n in names {
            let _ = writeln!(out, "{kw} {n}");
        }
    }
    out
}

/// Parses a `.capatch` document. Species and reaction references are only
/// resolved when the patch is applied.
pub fn parse_patch(text: &str) -> Result<ReconfigPatch, ParseError> {
    let mut edits = Vec::new();
    let mut lines = text.lines().enumerate();
    while let Some((i, raw)) = lines.next() {
        let code = raw.split('#').next().unwrap_or("");
        let Some(word) = code.split_whitespace().next() else {
            continue;
        };
        let kcol = code.len() - code.trim_start().len();
        let kat = Span { line: i + 1, column: kcol + 1 };
        let shift = kcol + word.len();
        let toks: Vec<Token<'_>> = lex(&raw[shift..], i + 1)?
            .into_iter()
            .map(|t| Token { tok: t.tok, col: t.col + shift })
            .collect();
        let mut c = Cursor { toks: &toks, pos: 0, line: i + 1, eol: raw.len() + 1 };
        let edit = match word {
            "set-k" => {
                let (r, _) = c.name("reaction name")?;
                let (k, at) = c.float("rate coefficient")?;
                c.end()?;
                if !(k.is_finite() && k > 0.0) {
                    return Err(ParseError::semantic(at, "k must be positive"));
                }
                Edit::SetK { reaction: r.to_string(), k }
            }
            "set-concentration" => {
                let (s, _) = c.name("species name")?;
                let v = c.uint("concentration")?;
                c.end()?;
                Edit::SetConcentration { species: s.to_string(), value: v }
            }
            "add-species" => {
                let (s, _) = c.name("species name")?;
                c.keyword("init")?;
                let v = c.uint("initial concentration")?;
                c.end()?;
                Edit::AddSpecies { name: s.to_string(), initial: v }
            }
            "add-reaction" => Edit::AddReaction(reaction_body(&mut c)?.0),
            "remove-reaction" => {
                let (r, _) = c.name("reaction name")?;
                c.end()?;
                Edit::RemoveReaction(r.to_string())
            }
            "remove-species" => {
                let (s, _) = c.name("species name")?;
                c.end()?;
                Edit::RemoveSpecies(s.to_string())
            }
            "replace-network" => {
                c.end()?;
                let mut body = String::new();
                let mut closed = false;
                for (_, l) in lines.by_ref() {
                    if l.split('#').next().unwrap_or("").trim() == "end" {
                        closed = true;
                        break;
                    }
                    body.push_str(l);
                    body.push('\n');
                }
                if !closed {
                    return Err(ParseError::syntax(kat, "`replace-network` block lacks `end`"));
                }
                let doc = parse(&body).map_err(|mut e| {
                    e.line += i + 1;
                    e
                })?;
                Edit::ReplaceNetwork(doc.network)
            }
            other => return Err(ParseError::syntax(kat, format!("unknown edit `{other}`"))),
        };
        edits.push(edit);
    }
    Ok(ReconfigPatch::new(edits))
}

pub fn serialize_patch(p: &ReconfigPatch) -> String {
    let mut out = String::new();
    for e in &p.edits {
        match e {
            Edit::SetK { reaction, k } => {
                let _ = writeln!(out, "set-k {reaction} {k}");
            }
            Edit::SetConcentration { species, value } => {
                let _ = writeln!(out, "set-concentration {species} {value}");
            }
            Edit::AddSpecies { name, initial } => {
                let _ = writeln!(out, "add-species {name} init {initial}");
            }
            Edit::AddReaction(d) => {
                out.push_str("add-reaction ");
                write_reaction(&mut out, d);
                out.push('\n');
            }
            Edit::RemoveReaction(r) => {
                let _ = writeln!(out, "remove-reaction {r}");
            }
            Edit::RemoveSpecies(s) => {
                let _ = writeln!(out, "remove-species {s}");
            }
            Edit::ReplaceNetwork(n) => {
                out.push_str("replace-network\n");
                out.push_str(&serialize(n));
                out.push_str("end\n");
            }
        }
    }
    out
}
