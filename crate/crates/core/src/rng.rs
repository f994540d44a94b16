//! Reproducible per-replicate random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Each role gets its own ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    World = 0,
    Input = 1,
    Noise = 2,
    Probe = 3,
    Config = 4,
    Label = 5,
}

const ROLES: u64 = 8;

/// Stream `(index, role)` of the generator seeded by `master`.
///
/// Streams share the key and differ in the ChaCha stream id, so distinct
/// `(index, role)` pairs give independent sequences for `index < 2^61`.
pub fn seed_split(master: u64, index: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index.wrapping_mul(ROLES) + role as u64);
    rng
}
