//! Deterministic, parallelizable random streams.
//!
//! Every randomized experiment derives one independent stream per run from
//! `(master_seed, run_index)`. Streams never depend on execution order or on
//! thread scheduling, so a run is reproducible bit-for-bit whether trials
//! execute serially or on a worker pool.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The RNG used throughout.
pub type Stream = ChaCha12Rng;

/// Independent stream `index` of the generator family keyed by
/// `master_seed`.
pub fn derived_stream(master_seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}
