use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distributions::RngStream;
use crate::error::Result;

/// Seeding handle for a single trial.
#[derive(Debug, Clone)]
pub struct TrialSeed {
    parent: RngStream,
    experiment: String,
    index: usize,
}

impl TrialSeed {
    pub fn new(parent: &RngStream, experiment: &str, index: usize) -> Self {
        Self {
            parent: parent.clone(),
            experiment: experiment.to_string(),
            index,
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn stream(&self, purpose: &str) -> RngStream {
        self.parent.child(&self.experiment, self.index as u64, purpose)
    }

    /// Generator for one purpose within the trial; distinct purposes give
    /// independent streams.
    pub fn rng(&self, purpose: &str) -> ChaCha8Rng {
        self.stream(purpose).rng()
    }
}

/// Runs `trials` independent trials on the current rayon pool and returns
/// their results in index order. The output does not depend on scheduling.
pub fn run_trials<T, F>(stream: &RngStream, experiment: &str, trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&TrialSeed) -> Result<T> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = TrialSeed::new(stream, experiment, i);
            f(&seed).map_err(|e| e.in_trial(format!("{experiment} trial {i}")))
        })
        .collect()
}
