//! Stream derivation for reproducible runs.
//!
//! Every random decision is drawn from a stream keyed by
//! `(seed, entity kind, entity id, epoch, phase)`. Streams never share state,
//! so habitats can be advanced in any order or in parallel without changing
//! results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Entity {
    Habitat = 1,
    Sector = 2,
    Network = 3,
    Analysis = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Phase {
    Init = 1,
    Drift = 2,
    Request = 3,
    Evolve = 4,
    Migrate = 5,
    Topology = 6,
    SpeciesArea = 7,
    Reseed = 8,
}

// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the independent stream for one `(entity, epoch, phase)` tuple.
pub fn stream(seed: u64, entity: Entity, id: u64, epoch: u64, phase: Phase) -> SimRng {
    let mut key = [0u8; 32];
    let mut h = mix(seed);
    for (chunk, word) in key
        .chunks_exact_mut(8)
        .zip([entity as u64, id, epoch, phase as u64])
    {
        h = mix(h ^ word);
        chunk.copy_from_slice(&h.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Plain seeded stream for callers outside the simulation loop.
pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
