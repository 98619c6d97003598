//! Dynamic restricted mean survival time analysis.
//!
//! Conditional RMST estimation through pseudo-observations, a two-sample
//! difference test, landmark super models with time-varying coefficients,
//! individual dynamic predictions and the Monte Carlo harnesses used to
//! validate them.

pub mod basis;
pub mod error;
pub mod gee;
pub mod io;
pub mod landmark;
pub mod linalg;
pub mod predict;
pub mod sim;
pub mod surv;

pub use basis::{BasisLayout, BasisTerm, CovariateBasis, SplineSpec};
pub use error::{Error, Result};
pub use gee::{CovarianceMode, DynamicModelFit, LandmarkModelFit, Link};
pub use landmark::{
    CovariateSpec, LandmarkRow, LongitudinalData, LongitudinalRecord, SuperDataset,
};
pub use predict::{EvalReport, PredictionResult};
pub use surv::{
    CRmstEstimate, CRmstdTestResult, PseudoObservationSet, StepSurvivalCurve, SubjectId,
    SurvivalRecord, SurvivalTable, TailPolicy,
};
