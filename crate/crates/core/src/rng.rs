//! Seed derivation. Every sampled object draws from its own ChaCha stream
//! identified by `(root seed, counter)`, so batches can be generated in any
//! order or in parallel without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Independent generator for object number `counter` under `root`.
pub fn substream(root: u64, counter: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(counter);
    rng
}

/// Mixes a tag into a seed (splitmix64 finalizer). Used to give named
/// sub-tasks of one experiment unrelated roots.
pub fn derive_seed(root: u64, tag: u64) -> u64 {
    let mut z = root ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
