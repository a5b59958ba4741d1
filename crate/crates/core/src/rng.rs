//! Reproducible RNG streams.
//!
//! Every stochastic component draws from a ChaCha12 stream addressed by
//! (master seed, stream id). Streams are independent and counter-based, so a
//! batch of runs can execute on any number of workers and still produce
//! bit-identical results per run.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// RNG for stream `stream` under `master_seed`.
pub fn stream_rng(master_seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}
