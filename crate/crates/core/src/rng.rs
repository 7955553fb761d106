use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every seeded stream in the crate.
pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream from a base seed, so that e.g. parameter
/// initialization and negative sampling never share a sequence.
pub fn substream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
