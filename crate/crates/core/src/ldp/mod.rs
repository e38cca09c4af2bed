//! Monte Carlo estimates of large-deviation probabilities: tube and ball
//! probabilities against the rate functional, invariant-measure tails
//! against 2𝒮, and excursion-set frequencies.

pub mod excursion;
pub mod fit;
pub mod tails;
pub mod tube;

pub use excursion::{excursion_ensemble, excursion_statistics, ExcursionReport, ExcursionSpec};
pub use fit::{rate_slope_fit, weighted_line, wilson_interval, RatePoint, SlopeFit, Z95};
pub use tails::{invariant_tail_experiment, tail_table, write_tail_csv, TailOptions, TailRow, TailTable};
pub use tube::{
    mc_tube_probability, tube_distances, tube_infimum, write_tube_csv, LdpExperiment, TubeCandidate, TubeEstimate,
    TubeInfimum, TubeKind, TubeOptions, TubeReport,
};
