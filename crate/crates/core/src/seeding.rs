//! Deterministic seed derivation for independent random streams.

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `(a, b)` under `master`, e.g. `(epoch, sample)` or
/// `(0, trial)`. Distinct tuples give unrelated streams.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    mix(mix(mix(master) ^ a) ^ b.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}
