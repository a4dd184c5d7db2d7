//! Exhaustive/sampled budgets and the record of which one was used.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    /// Largest number of elementary evaluations a check may spend exhaustively.
    pub exhaustive: u64,
    /// Number of seeded samples drawn when a check cannot be exhaustive.
    pub samples: u64,
    pub seed: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { exhaustive: 1_000_000_000, samples: 1_000_000, seed: 0 }
    }
}

impl Budget {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, samples: u64) -> Self {
        self.samples = samples;
        self
    }

    pub fn allows(&self, work: u128) -> bool {
        work <= self.exhaustive as u128
    }

    /// `allows` for a product of factors; an overflowing product is never allowed.
    pub fn allows_product(&self, factors: &[u128]) -> bool {
        factors.iter().try_fold(1u128, |acc, &f| acc.checked_mul(f)).is_some_and(|w| self.allows(w))
    }

    /// A reproducible stream for one named check.
    pub fn rng(&self, salt: &str) -> ChaCha8Rng {
        let h = salt.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        ChaCha8Rng::seed_from_u64(self.seed ^ h)
    }

    /// Sample count for checks whose single evaluation is itself expensive.
    pub fn heavy_samples(&self) -> u64 {
        self.samples.min(2_000)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Every instance of the quantifier was evaluated.
    Exhaustive,
    /// Exact, using additivity to restrict one variable to generators.
    Generators,
    Sampled { samples: u64, seed: u64 },
}

impl Mode {
    pub fn is_exact(&self) -> bool {
        !matches!(self, Mode::Sampled { .. })
    }

    pub fn combine(self, other: Mode) -> Mode {
        match (self, other) {
            (Mode::Sampled { samples: a, seed }, Mode::Sampled { samples: b, .. }) => {
                Mode::Sampled { samples: a.min(b), seed }
            }
            (s @ Mode::Sampled { .. }, _) | (_, s @ Mode::Sampled { .. }) => s,
            (Mode::Generators, _) | (_, Mode::Generators) => Mode::Generators,
            _ => Mode::Exhaustive,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Exhaustive => write!(f, "exhaustive"),
            Mode::Generators => write!(f, "exhaustive-generators"),
            Mode::Sampled { samples, seed } => write!(f, "sampled(n={samples},seed={seed})"),
        }
    }
}
