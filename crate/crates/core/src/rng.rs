//! Seeded random streams.
//!
//! Every stochastic choice in the crate draws from a ChaCha8 generator keyed
//! by an experiment seed and a fixed stream number, so independent consumers
//! (weight init, shuffles, mixing draws) never perturb each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Named stream numbers. Kept stable: changing one changes every result.
pub mod streams {
    pub const INIT: u64 = 0;
    pub const TARGET_ORDER: u64 = 1;
    pub const SOURCE_ORDER: u64 = 2;
    pub const MIXING: u64 = 3;
    pub const OOV: u64 = 4;
    pub const SYNTH: u64 = 5;
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
