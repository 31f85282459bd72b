//! Deterministic random streams.
//!
//! Every game owns a 64-bit seed. The seed of game `i` in a batch is
//! `mix(master_seed, i)`, so the value a game sees never depends on which
//! worker ran it or in what order. Within a game, independent substreams
//! (deck, strategy, coupling) are separate ChaCha8 streams keyed by the
//! same seed.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as GameRng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `index`-th game (or sweep row) under `master`.
pub fn mix(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Named substreams of a single game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Deck = 0,
    Strategy = 1,
    Coupling = 2,
}

/// Independent generator for one substream of the game seeded by `seed`.
pub fn stream(seed: u64, which: Stream) -> GameRng {
    let mut rng = GameRng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
