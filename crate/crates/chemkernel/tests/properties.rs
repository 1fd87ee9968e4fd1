use chemkernel::cahw::{self, CahwError};
use chemkernel::network_hash;
use chemkernel::scenario_file::parse_rate;
use chemkernel_core::hw::RegisterMap;
use chemkernel_core::{cadl, EngineLimits, ReactionNetwork};
use proptest::prelude::*;

fn arb_limits() -> impl Strategy<Value = EngineLimits> {
    (1u16..6, 1u16..5, 1u16..600, 1u16..=32, 1u16..4, 1u16..4).prop_map(|(r, p, s, c, a, b)| EngineLimits {
        max_reactions: r,
        max_slots: p,
        max_species: s,
        concentration_bits: c,
        max_reactant_order: a,
        max_product_order: b,
        k_bits: 32,
    })
}

fn arb_map() -> impl Strategy<Value = RegisterMap> {
    (arb_limits(), any::<u64>()).prop_map(|(l, seed)| {
        let mut m = RegisterMap::blank(l);
        let mut x = seed | 1;
        let mut next = || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            x
        };
        let cmask = if l.concentration_bits == 32 { u32::MAX } else { (1u32 << l.concentration_bits) - 1 };
        for c in m.c_mem.iter_mut().skip(1) {
            *c = next() as u32 & cmask;
        }
        let cells = l.max_species as u64 + 1;
        for a in m.alpha_mem.iter_mut().chain(m.beta_mem.iter_mut()) {
            *a = (next() % cells) as u16;
        }
        for k in m.k_mem.iter_mut() {
            *k = (next() % 100_000) as f32 / 64.0;
        }
        m.species_count = (next() % cells) as u16;
        m.reaction_count = (next() % (l.max_reactions as u64 + 1)) as u16;
        m
    })
}

/// File length computed from the layout description alone.
fn expected_len(l: &EngineLimits) -> usize {
    let mut addr_bits = 1;
    while (1usize << addr_bits) < l.max_species as usize + 1 {
        addr_bits += 1;
    }
    let bytes = |bits: usize| bits.div_ceil(8);
    let header = 4 + 2 * 9;
    let c = (l.max_species as usize + 1) * bytes(l.concentration_bits as usize);
    let recs = l.max_reactions as usize * l.max_slots as usize * (l.max_reactant_order + l.max_product_order) as usize;
    header + c + recs * bytes(addr_bits) + 4 * l.max_reactions as usize
}

proptest! {
    #[test]
    fn cahw_round_trip(m in arb_map()) {
        let bytes = cahw::encode(&m);
        prop_assert_eq!(bytes.len(), expected_len(&m.limits));
        prop_assert_eq!(&bytes[..4], b"CAHW");
        prop_assert_eq!(cahw::decode(&bytes).unwrap(), m);
    }

    #[test]
    fn cahw_truncation_is_reported(m in arb_map(), cut in any::<prop::sample::Index>()) {
        let bytes = cahw::encode(&m);
        let n = cut.index(bytes.len());
        let err = cahw::decode(&bytes[..n]).unwrap_err();
        prop_assert!(matches!(err, CahwError::Truncated | CahwError::BadMagic), "{:?}", err);
    }

    #[test]
    fn cahw_trailing_bytes_rejected(m in arb_map(), extra in 1usize..16) {
        let mut bytes = cahw::encode(&m);
        bytes.extend(std::iter::repeat(0).take(extra));
        prop_assert_eq!(cahw::decode(&bytes).unwrap_err(), CahwError::Trailing(extra));
    }

    #[test]
    fn cahw_mutations_never_panic(m in arb_map(), edits in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..8)) {
        let mut bytes = cahw::encode(&m);
        for (i, v) in edits {
            let i = i.index(bytes.len());
            bytes[i] = v;
        }
        if let Ok(back) = cahw::decode(&bytes) {
            prop_assert_eq!(cahw::encode(&back).len(), bytes.len());
        }
    }

    #[test]
    fn rate_suffixes(x in 0.0f64..1e4) {
        let plain = format!("{x}");
        prop_assert_eq!(parse_rate(&plain), Some(x));
        for (suffix, scale) in [("k", 1e3), ("M", 1e6), ("G", 1e9)] {
            let got = parse_rate(&format!("{x}{suffix}")).unwrap();
            prop_assert!((got - x * scale).abs() <= 1e-9 * x * scale);
        }
    }

    #[test]
    fn hash_tracks_content(init in 0u64..1_000_000, k in 0.01f64..100.0) {
        let net = ReactionNetwork::builder()
            .species("A", init)
            .species("B", 0)
            .reaction("r", &[("A", 1)], &[("B", 1)], k)
            .build()
            .unwrap();
        let h = network_hash(&net);
        prop_assert_eq!(h.len(), 16);
        prop_assert!(h.bytes().all(|b| b.is_ascii_hexdigit()));
        let back = cadl::parse(&cadl::serialize(&net)).unwrap().network;
        prop_assert_eq!(network_hash(&back), h.clone());
        let other = ReactionNetwork::builder()
            .species("A", init + 1)
            .species("B", 0)
            .reaction("r", &[("A", 1)], &[("B", 1)], k)
            .build()
            .unwrap();
        prop_assert_ne!(network_hash(&other), h);
    }
}

#[test]
fn rejects_bad_rates() {
    for s in ["", "fast", "-3M", "1X", "M"] {
        assert_eq!(parse_rate(s), None, "{s}");
    }
}

#[test]
fn rejects_foreign_files() {
    assert_eq!(cahw::decode(b"ELF\x7f....").unwrap_err(), CahwError::BadMagic);
    let mut bytes = cahw::encode(&RegisterMap::blank(EngineLimits::default()));
    bytes[4] = 9;
    assert_eq!(cahw::decode(&bytes).unwrap_err(), CahwError::Version(9));
}
