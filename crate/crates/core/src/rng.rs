//! Seeded random streams.
//!
//! One 64-bit seed drives the whole run. Each subsystem draws from its own
//! ChaCha stream, so adding or removing draws in one subsystem never shifts
//! the sequence another subsystem sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Home anchors, initial placement and every movement step.
    Mobility,
    /// Initial infected selection and transmission draws.
    Epidemic,
    /// Whether a user remembers who they met.
    Recognition,
    /// Ephemeral identifiers and upload pseudonyms.
    Issuance,
    /// Sniffer placement and shuffled controls.
    Adversary,
}

impl Stream {
    fn index(self) -> u64 {
        match self {
            Stream::Mobility => 1,
            Stream::Epidemic => 2,
            Stream::Recognition => 3,
            Stream::Issuance => 4,
            Stream::Adversary => 5,
        }
    }
}

/// Side-knowledge sampling uses one stream per target, starting here, so a
/// target's anchors never depend on how many anchors other targets drew.
const PER_TARGET_BASE: u64 = 1 << 32;

pub fn stream(seed: u64, which: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which.index());
    rng
}

pub fn target_stream(seed: u64, target: u32) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PER_TARGET_BASE + u64::from(target));
    rng
}
