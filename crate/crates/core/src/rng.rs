//! Deterministic random substreams.
//!
//! Every consumer of randomness gets its own ChaCha stream keyed by a seed and
//! a stream id, so results never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    TargetNoise,
    TrainMask,
    /// Trajectory sample number `n` in envelope prediction.
    Attempt(u64),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 0,
            Stream::TargetNoise => 1,
            Stream::TrainMask => 2,
            // attempt streams live in the upper half of the id space
            Stream::Attempt(n) => (1 << 63) | n,
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
