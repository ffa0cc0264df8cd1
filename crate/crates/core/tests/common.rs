#![allow(dead_code)]

use krein::{Atom, KreinString};
use proptest::prelude::*;

/// Strings on `[0, 1]` with 1..=max atoms strictly inside, weights in
/// `[1e-2, 1e2]` on a log scale.
pub fn interior_string(max: usize) -> impl Strategy<Value = KreinString> {
    prop::collection::vec((0.001f64..0.999, -2.0f64..2.0), 1..=max).prop_map(|raw| {
        let mut atoms: Vec<Atom> = raw
            .into_iter()
            .map(|(p, lw)| Atom::new(p, 10f64.powf(lw)))
            .collect();
        atoms.sort_by(|a, b| a.pos.total_cmp(&b.pos));
        atoms.dedup_by(|a, b| a.pos == b.pos);
        KreinString::new(0.0, 1.0, atoms).unwrap()
    })
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
