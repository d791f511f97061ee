use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One step of a stream path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSegment {
    pub experiment: String,
    pub trial: u64,
    pub purpose: String,
}

/// Addressable random stream: `(master_seed, path)` names a generator.
///
/// Identical seeds and paths yield identical draws. Concurrent trials use
/// disjoint paths, so results do not depend on scheduling.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    master_seed: u64,
    path: Vec<PathSegment>,
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            path: Vec::new(),
        }
    }

    pub fn child(&self, experiment: &str, trial: u64, purpose: &str) -> Self {
        let mut path = self.path.clone();
        path.push(PathSegment {
            experiment: experiment.to_owned(),
            trial,
            purpose: purpose.to_owned(),
        });
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[PathSegment] {
        &self.path
    }

    fn seed_bytes(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"ridgeless-rng-v1");
        h.update(self.master_seed.to_le_bytes());
        for seg in &self.path {
            // Length prefixes keep distinct paths from colliding.
            h.update((seg.experiment.len() as u64).to_le_bytes());
            h.update(seg.experiment.as_bytes());
            h.update(seg.trial.to_le_bytes());
            h.update((seg.purpose.len() as u64).to_le_bytes());
            h.update(seg.purpose.as_bytes());
        }
        h.finalize().into()
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.seed_bytes())
    }
}

impl fmt::Display for RngStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.master_seed)?;
        for seg in &self.path {
            write!(f, "/{}:{}:{}", seg.experiment, seg.trial, seg.purpose)?;
        }
        Ok(())
    }
}
