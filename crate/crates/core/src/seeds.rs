//! Deterministic seed derivation, so that every unit of work draws from its
//! own reproducible stream regardless of scheduling.

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Seed for a named unit of work (e.g. a site id) under a global seed.
pub fn derive_seed_str(global: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in tag.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    splitmix64(global ^ h.rotate_left(32))
}

/// Seed for the `k`-th replicate of a seeded experiment.
pub fn derive_seed_index(global: u64, k: u64) -> u64 {
    splitmix64(global ^ k.wrapping_mul(0x9e3779b97f4a7c15))
}
