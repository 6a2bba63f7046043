//! Seeded random substreams.
//!
//! Each concern draws from its own ChaCha stream derived from the run seed,
//! so extra draws in one concern never shift another concern's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Node placement, cacheable-task selection and profile assignment.
    Placement = 1,
    Arrivals = 2,
    Sizes = 3,
    Fading = 4,
    /// Processing delays (`tau_LP`, `tau_EP`).
    Processing = 5,
    KMeans = 6,
    TrainingArrivals = 7,
    TrainingSizes = 8,
    TrainingFading = 9,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSource {
    seed: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream as u64);
        rng
    }
}
