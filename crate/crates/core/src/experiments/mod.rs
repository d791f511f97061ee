//! Monte Carlo harnesses, statistical tests, bound plug-ins and the
//! combinatorial utilities used to audit generalization bounds.

pub mod bounds;
pub mod combinatorics;
mod decay;
mod dilemma;
mod harness;
mod lemmas;
pub mod stats;
mod thresholds;

pub use bounds::{BoundFunction, BoundRegistry, FnBound};
pub use combinatorics::{
    binomial_central_mass_check, check_bounded_antimonotonic, strong_density, AntimonoReport,
    AntimonoViolation, CentralMass, DensityBin, DensityReport,
};
pub use decay::{run_benign_decay, DecayMode, DecayPoint, DecayReport};
pub use dilemma::{run_dilemma, DilemmaPoint, DilemmaRecord, DilemmaReport, ValidityArgument};
pub use harness::{run_trials, TrialSeed};
pub use lemmas::{
    run_lemma3, run_lemma3_on_support, run_lemma3_trial, run_lemma4_equivalence, run_poissonization,
    EquivalenceRecord, EquivalenceReport, Lemma3Report, Lemma3Trial, PoissonizationReport,
};
pub use thresholds::ThresholdConfig;
