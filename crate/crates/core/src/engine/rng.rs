//! Independent, reproducible random streams per (subsystem, node).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Subsystem {
    Placement = 1,
    Energy = 2,
    Mobility = 3,
    Mac = 4,
    Protocol = 5,
    HelloPhase = 6,
    Traffic = 7,
}

/// Placement, energy and mobility streams do not depend on the protocol, so
/// every protocol sees the same topology and trajectories for a given seed.
pub fn stream(seed: u64, subsystem: Subsystem, node: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((subsystem as u64) << 32) | u64::from(node));
    rng
}
