//! Counter-based seed derivation.
//!
//! Every stochastic routine derives its RNG seed as
//! `derive_seed(master, stream, index)`: one splitmix64 round over the master
//! seed, xor the stream id, another round, xor the counter, and a final
//! round. Instances are therefore reproducible in isolation and independent
//! of execution order.

/// One splitmix64 round.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for (`stream`, `index`) from a master seed.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

/// Stream ids used inside this crate.
pub mod streams {
    pub const MAX_FREQUENCY: u64 = 0x4D46;
    pub const FEASIBLE_RESTART: u64 = 0x4652;
    pub const ENSEMBLE_GRAPH: u64 = 0x4747;
    pub const DISCORDANCE_SIGNALS: u64 = 0x4453;
}
