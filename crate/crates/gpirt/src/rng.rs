//! Deterministic random-stream derivation.
//!
//! Every stochastic step draws from its own ChaCha stream keyed by
//! (seed, phase, sweep, index). Streams are assigned by index, never by
//! execution order, so results are identical for any thread count or
//! scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Logical phases of the pipeline; each owns a disjoint stream space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPhase {
    InitTheta = 0,
    InitBeta = 1,
    InitLatent = 2,
    EllipticalSlice = 3,
    GridExtend = 4,
    ThetaDraw = 5,
    BetaWalk = 6,
    Synth = 7,
    Holdout = 8,
    Replay = 9,
    Generic = 10,
}

const INDEX_BITS: u64 = 20;
const PHASE_BITS: u64 = 4;

/// RNG for one (phase, sweep, index) cell of the stream space.
pub fn substream(seed: u64, phase: StreamPhase, sweep: u64, index: u64) -> ChaCha8Rng {
    debug_assert!(index < (1 << INDEX_BITS), "stream index too large");
    debug_assert!(sweep < (1 << (64 - INDEX_BITS - PHASE_BITS)), "sweep index too large");
    let stream = (sweep << (INDEX_BITS + PHASE_BITS)) | ((phase as u64) << INDEX_BITS) | index;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
