//! The distribution family: the Gaussian base `D_n`, the discrete `Q_n`
//! built on a random support, and the label-averaged `P_n`, together with
//! Poissonized sampling and Poisson utilities.

mod params;
mod poisson;
mod rng;
mod samplers;
mod spectrum;

pub use params::{derive_dims, FamilyOptions, FamilyParams, ThetaStar};
pub use poisson::{
    binomial_pmf, poisson_pmf, poisson_sf, poisson_tail_bound, sample_binomial, sample_poisson,
    sample_zero_truncated_poisson, zero_truncated_poisson_pmf,
};
pub use rng::{PathSegment, RngStream};
pub use samplers::{
    draw_qn_support, draw_qn_support_shared, poissonized_balls_in_bins, sample_dn, sample_pn,
    sample_qn, sample_qn_indexed, sample_qn_poissonized, LabelMode, SupportSet,
};
pub use spectrum::{make_spectrum, Spectrum};

pub(crate) use spectrum::compensated_sum;
