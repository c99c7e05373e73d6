//! Oracle-inequality constants, coverage experiments, the rate study and the
//! shrinking helper used to stay inside the regime.

pub mod coverage;
pub mod params;
pub mod rate;
pub mod shrink;

pub use coverage::{a_priori_bound, coverage_study, run_oracle_trial, APrioriBound, TrialOptions, TrialRecord, TrialStatus, VerificationReport};
pub use params::{compute_bound_parameters, BoundParameters, EpsBranch, Lambda0};
pub use rate::{analytic_rate_exponent, analytic_slope, rate_study, RateReport, RateRow, RateSpec};
pub use shrink::{shrinking_implication, shrink_toward, Shrunk};
