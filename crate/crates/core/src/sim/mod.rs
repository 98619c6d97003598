//! Data generators and Monte Carlo harnesses for the two simulation families:
//! two-arm piecewise-exponential scenarios and joint longitudinal–survival
//! models.

pub mod joint;
pub mod mc;
pub mod metrics;
pub mod quadrature;
pub mod scenario;

pub use joint::{simulate_joint, tune_censoring, JointModelSpec, JointSample, SubjectHazard, Trajectory};
pub use mc::{replicate_seed, with_threads, JointDesign};
pub use metrics::{mc_metrics, MetricsReport};
pub use scenario::{simulate_scenario, true_crmstd, HrPiece, PiecewiseExponential, ScenarioSpec, TruthEstimate};
