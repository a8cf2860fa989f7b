//! Deterministic seed derivation, so that every random draw is keyed by what
//! it is for rather than by how many draws happened before it.

use crate::graph::Triple;

/// splitmix64 finaliser over `a` combined with `b`.
#[inline]
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn triple_seed(seed: u64, salt: u64, t: &Triple) -> u64 {
    let k = mix(seed, salt);
    let k = mix(k, t.head.0 as u64);
    let k = mix(k, t.relation.0 as u64);
    mix(k, t.tail.0 as u64)
}
