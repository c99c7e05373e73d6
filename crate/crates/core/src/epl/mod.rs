//! Empirical-process laboratory: Rademacher draws, constrained suprema, the
//! explicit bounds they are compared against, and Monte Carlo drivers.

pub mod base;
pub mod bounds;
pub mod draw;
pub mod feasible;
pub mod loss_process;
pub mod sup;

pub use base::{
    calibrate_lambda0, concentration_check, exact_mean_max_abs, LambdaCalibration, mc_max_finite_class, mc_mean_base, write_increment_csv, BaseProcess,
    ConcentrationRow, FiniteClassEstimate, IncrementEstimate,
};
pub use bounds::{
    increment_bound, hull_increment_bound, lambda_n0, threshold_and_tail, finite_class_bound,
    rademacher_range_constant, tail_from_lambda, TailBound,
};
pub use draw::{draw_xi, RademacherDraw};
pub use feasible::{project_l1, FeasibleSet, Geometry};
pub use loss_process::{
    symmetrization_check, tail_check, AscentOptions, LossProcess, LossSupEstimate, SymmetrizationCheck, TailCheck,
};
pub use sup::{brute_force_sup, sup_base_process, sup_base_process_with, SupMethod, SupOptions, SupSolution};
