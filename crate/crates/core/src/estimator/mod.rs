//! Loss models, the penalty and its variational form, and the penalized solver.

mod lad_ipm;
pub mod lasso;
pub mod loss;
pub mod penalty;
pub mod solve;

pub use lasso::{lasso_subproblem, LassoFit, LassoProblem};
pub use loss::{empirical_risk, population_risk, LossModel};
pub use solve::{solve_penalized, solve_penalized_problem, FitResult, LambdaGrid};
pub use penalty::{optimal_lambda, penalty, variational_constant, variational_exponent};
