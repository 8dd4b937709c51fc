//! Named, splittable random streams derived from one master seed.
//!
//! Each consumer asks for a stream by name; the ChaCha key is derived from
//! (master seed, name) so adding a new consumer never shifts the draws of an
//! existing one. Indexed sub-streams use ChaCha's stream id.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the 256-bit key for stream `name` under `master`.
pub fn stream_key(master: u64, name: &str) -> [u8; 32] {
    let mut state = master ^ fnv1a(name.as_bytes()).rotate_left(17);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Generator for the named stream.
pub fn stream(master: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(stream_key(master, name))
}

/// Generator for the `index`-th sub-stream of a named stream. Sub-streams
/// share a key and differ in ChaCha's 64-bit stream id, so they never overlap.
pub fn substream(master: u64, name: &str, index: u64) -> ChaCha8Rng {
    let mut rng = stream(master, name);
    rng.set_stream(index);
    rng
}

/// Derives a child master seed, used when a component owns a whole family of
/// named streams (for instance one ensemble inside a scenario).
pub fn child_seed(master: u64, name: &str) -> u64 {
    let mut state = master ^ fnv1a(name.as_bytes());
    splitmix64(&mut state)
}
