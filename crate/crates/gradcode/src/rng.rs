//! Deterministic, splittable random streams.
//!
//! Every sampling operation in this crate takes an explicit [`RngSpec`]
//! instead of an implicit thread-local generator. A spec names the
//! generator algorithm, a 64-bit seed, and a 64-bit stream id; equal specs
//! reproduce identical draws, and distinct stream ids yield independent
//! streams of the same seeded generator. Harnesses split work across
//! streams (one or two per trial), so results are identical no matter how
//! trials are scheduled onto threads.

use std::fmt;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Generator algorithm behind an [`RngSpec`].
///
/// ChaCha12 is a counter-based stream cipher RNG: the 64-bit stream id
/// selects one of 2^64 independent streams for a given seed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum RngAlgorithm {
    #[default]
    #[serde(rename = "chacha12")]
    ChaCha12,
}

impl RngAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            RngAlgorithm::ChaCha12 => "chacha12",
        }
    }
}

/// A reproducible source of randomness: (algorithm, seed, stream id).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub algorithm: RngAlgorithm,
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    /// Spec for `seed` on stream 0.
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        RngSpec {
            algorithm: RngAlgorithm::default(),
            seed,
            stream_id,
        }
    }

    /// Same seed, stream id offset by `offset` (wrapping).
    ///
    /// Callers that split substreams are responsible for spacing their
    /// offsets so distinct purposes never collide (the harnesses in this
    /// crate document their layouts).
    pub fn substream(&self, offset: u64) -> Self {
        RngSpec {
            algorithm: self.algorithm,
            seed: self.seed,
            stream_id: self.stream_id.wrapping_add(offset),
        }
    }

    /// Instantiate the generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        match self.algorithm {
            RngAlgorithm::ChaCha12 => {
                let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
                rng.set_stream(self.stream_id);
                rng
            }
        }
    }

    /// Compact `algorithm:seed:stream` label used in CSV output.
    pub fn label(&self) -> String {
        format!("{}:{}:{}", self.algorithm.name(), self.seed, self.stream_id)
    }
}

impl fmt::Display for RngSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn equal_specs_reproduce_draws() {
        let spec = RngSpec::with_stream(42, 7);
        let a: Vec<u64> = spec
            .rng()
            .sample_iter(rand::distributions::Standard)
            .take(8)
            .collect();
        let b: Vec<u64> = spec
            .rng()
            .sample_iter(rand::distributions::Standard)
            .take(8)
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let a: u64 = RngSpec::with_stream(42, 0).rng().gen();
        let b: u64 = RngSpec::with_stream(42, 1).rng().gen();
        assert_ne!(a, b);
    }

    #[test]
    fn label_round_trips_fields() {
        let spec = RngSpec::with_stream(3, 9);
        assert_eq!(spec.label(), "chacha12:3:9");
        assert_eq!(spec.substream(2).stream_id, 11);
    }
}
