//! Seeding conventions shared by every Monte Carlo routine.
//!
//! All randomness comes from ChaCha8 (`rand_chacha`). Independent
//! substreams are addressed by a `(seed, stream, index)` triple: the seed
//! and index are mixed with SplitMix64 into a 256-bit ChaCha key and the
//! stream selects the ChaCha stream id. A trial's generator therefore
//! depends only on its own coordinates, never on execution order or on the
//! number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name recorded in reports so traces can be regenerated elsewhere.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), key = SplitMix64(seed, index), stream id = purpose";

/// Stream ids, one per consumer of randomness.
pub mod stream {
    pub const FADING: u64 = 1;
    pub const SHADOWING: u64 = 2;
    pub const INTERFERENCE: u64 = 3;
    pub const DELIVERY: u64 = 4;
    pub const USER_TRACE: u64 = 5;
    pub const ACCESS: u64 = 6;
    pub const ALOHA_SATURATED: u64 = 7;
}

/// One step of SplitMix64.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and an index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut state = seed ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    splitmix64(&mut state)
}

/// Generator for the `(seed, stream, index)` substream.
pub fn substream(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    let mixed = derive_seed(seed, index);
    state ^= mixed;
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}
