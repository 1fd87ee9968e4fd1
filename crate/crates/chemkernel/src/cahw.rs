//! CAHW register-map files.
//!
//! Little-endian. Header: `"CAHW"`, version `u16`, then `|R| |Ψ| |S| |C|
//! |α| |β|` as `u16`, then the live species and reaction counts as `u16`.
//! Body: `c_mem` (`|S|+1` cells of `⌈|C|/8⌉` bytes), `alpha_mem` and
//! `beta_mem` (address records of `⌈addr_bits/8⌉` bytes), `k_mem` (binary32).

use std::fmt::Write as _;

use chemkernel_core::hw::RegisterMap;
use chemkernel_core::{EngineLimits, ReactionNetwork};

pub const MAGIC: &[u8; 4] = b"CAHW";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CahwError {
    #[error("not a CAHW file")]
    BadMagic,
    #[error("unsupported CAHW version {0}")]
    Version(u16),
    #[error("file is truncated")]
    Truncated,
    #[error("{0} trailing bytes after k_mem")]
    Trailing(usize),
    #[error("invalid geometry: {0}")]
    Geometry(&'static str),
}

fn cell_bytes(bits: u32) -> usize {
    bits.div_ceil(8) as usize
}

fn put(out: &mut Vec<u8>, v: u64, n: usize) {
    out.extend_from_slice(&v.to_le_bytes()[..n]);
}

pub fn encode(m: &RegisterMap) -> Vec<u8> {
    let l = &m.limits;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        l.max_reactions,
        l.max_slots,
        l.max_species,
        l.concentration_bits,
        l.max_reactant_order,
        l.max_product_order,
        m.species_count,
        m.reaction_count,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let cb = cell_bytes(l.concentration_bits as u32);
    let ab = cell_bytes(l.address_bits());
    for &c in &m.c_mem {
        put(&mut out, c as u64, cb);
    }
    for &a in m.alpha_mem.iter().chain(&m.beta_mem) {
        put(&mut out, a as u64, ab);
    }
    for &k in &m.k_mem {
        out.extend_from_slice(&k.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    b: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CahwError> {
        let s = self.b.get(self.at..self.at + n).ok_or(CahwError::Truncated)?;
        self.at += n;
        Ok(s)
    }

    fn uint(&mut self, n: usize) -> Result<u64, CahwError> {
        let mut buf = [0u8; 8];
        buf[..n].copy_from_slice(self.take(n)?);
        Ok(u64::from_le_bytes(buf))
    }

    fn u16(&mut self) -> Result<u16, CahwError> {
        Ok(self.uint(2)? as u16)
    }
}

fn body_len(l: &EngineLimits, cb: usize, ab: usize) -> u64 {
    let (r, p) = (l.max_reactions as u64, l.max_slots as u64);
    let records = r * p * (l.max_reactant_order as u64 + l.max_product_order as u64);
    (l.max_species as u64 + 1) * cb as u64 + records * ab as u64 + 4 * r
}

pub fn decode(bytes: &[u8]) -> Result<RegisterMap, CahwError> {
    let mut r = Reader { b: bytes, at: 0 };
    if r.take(4).map_err(|_| CahwError::BadMagic)? != MAGIC {
        return Err(CahwError::BadMagic);
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(CahwError::Version(version));
    }
    let limits = EngineLimits {
        max_reactions: r.u16()?,
        max_slots: r.u16()?,
        max_species: r.u16()?,
        concentration_bits: r.u16()?,
        max_reactant_order: r.u16()?,
        max_product_order: r.u16()?,
        k_bits: 32,
    };
    limits.check().map_err(CahwError::Geometry)?;
    let species_count = r.u16()?;
    let reaction_count = r.u16()?;
    let cb = cell_bytes(limits.concentration_bits as u32);
    let ab = cell_bytes(limits.address_bits());
    let want = body_len(&limits, cb, ab);
    let have = (bytes.len() - r.at) as u64;
    if have < want {
        return Err(CahwError::Truncated);
    }
    if have > want {
        return Err(CahwError::Trailing((have - want) as usize));
    }
    let mut m = RegisterMap::blank(limits);
    m.species_count = species_count;
    m.reaction_count = reaction_count;
    for c in m.c_mem.iter_mut() {
        *c = r.uint(cb)? as u32;
    }
    for a in m.alpha_mem.iter_mut().chain(m.beta_mem.iter_mut()) {
        *a = r.uint(ab)? as u16;
    }
    for k in m.k_mem.iter_mut() {
        *k = f32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    }
    if r.at != bytes.len() {
        return Err(CahwError::Trailing(bytes.len() - r.at));
    }
    Ok(m)
}

/// Every populated cell, one per line, annotated with names from `net`.
pub fn listing(m: &RegisterMap, net: &ReactionNetwork) -> String {
    let mut s = String::new();
    let l = &m.limits;
    let _ = writeln!(
        s,
        "# |R|={} |Ψ|={} |S|={} |C|={} |α|={} |β|={} addr_bits={}",
        l.max_reactions,
        l.max_slots,
        l.max_species,
        l.concentration_bits,
        l.max_reactant_order,
        l.max_product_order,
        l.address_bits()
    );
    let _ = writeln!(s, "species_count={} reaction_count={}", m.species_count, m.reaction_count);
    let sname = |a: u16| if a == 0 { "1".to_string() } else { net.species_name(chemkernel_core::SpeciesId(a)).to_string() };
    let _ = writeln!(s, "c_mem[0]={} ; constant", m.c_mem[0]);
    for i in 1..=m.species_count as usize {
        let _ = writeln!(s, "c_mem[{i}]={} ; {}", m.c_mem[i], sname(i as u16));
    }
    for r in 0..m.reaction_count as usize {
        let rname = &net.reactions()[r].name;
        for slot in 0..l.max_slots as usize {
            for (rec, &a) in m.alpha_slot(r, slot).iter().enumerate() {
                if a != 0 {
                    let _ = writeln!(s, "alpha_mem[{r}][{slot}][{rec}]={a} ; {rname} consumes {}", sname(a));
                }
            }
        }
        for slot in 0..l.max_slots as usize {
            for (rec, &a) in m.beta_slot(r, slot).iter().enumerate() {
                if a != 0 {
                    let _ = writeln!(s, "beta_mem[{r}][{slot}][{rec}]={a} ; {rname} produces {}", sname(a));
                }
            }
        }
        let _ = writeln!(s, "k_mem[{r}]={:?} ; {rname}", m.k_mem[r]);
    }
    s
}
