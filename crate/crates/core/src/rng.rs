//! Reproducible random streams keyed by `(seed, stream index)`.
//!
//! ChaCha8 exposes 2⁶⁴ independent streams per key, so a chunked simulation
//! can hand chunk `i` the stream `i` and get the same draws no matter which
//! worker runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
