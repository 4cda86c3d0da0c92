//! Named, independent random streams derived from one run seed.
//!
//! Each stream is a ChaCha8 generator keyed by SHA-256 of the seed and the
//! stream name, so adding or removing a stream never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::topology::{NodeId, Topology};

pub const ARRIVALS: &str = "arrivals";
pub const TIEBREAK: &str = "tiebreak";

/// Name of the Bernoulli push stream of computation node `node`.
pub fn push_stream_name(node: NodeId) -> String {
    format!("B:{node}")
}

/// Generator for `(seed, name)`.
pub fn stream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(name.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// All streams a run draws from.
#[derive(Debug, Clone)]
pub struct RngStreams {
    pub arrivals: ChaCha8Rng,
    /// One per computation site, in site order.
    pub push: Vec<ChaCha8Rng>,
    /// Reserved; no policy consumes it today.
    pub tiebreak: ChaCha8Rng,
}

pub fn rng_streams(seed: u64, topology: &Topology) -> RngStreams {
    rng_streams_with_prefix(seed, topology, "")
}

/// Same layout with every name prefixed, for a second, independent family.
pub fn rng_streams_with_prefix(seed: u64, topology: &Topology, prefix: &str) -> RngStreams {
    RngStreams {
        arrivals: stream(seed, &format!("{prefix}{ARRIVALS}")),
        push: topology
            .sites()
            .iter()
            .map(|s| stream(seed, &format!("{prefix}{}", push_stream_name(s.node))))
            .collect(),
        tiebreak: stream(seed, &format!("{prefix}{TIEBREAK}")),
    }
}
