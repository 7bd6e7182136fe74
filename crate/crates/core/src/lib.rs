//! Precision limits for two-parameter quantum estimation: SLD, Nagaoka and
//! Holevo Cramér–Rao bounds, the Lu–Wang uncertainty relation and bound, and
//! the measurement statistics used to compare them.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acceptance;
pub mod bounds;
pub mod error;
pub mod linalg;
pub mod luwang;
pub mod measurement;
pub mod model;
pub mod randomgen;
pub mod scenarios;
mod solver;

pub use bounds::{
    envelope_from_weighted_bound, hcrb, hcrb_general, hcrb_qubit, nagaoka_curve_qubit, ncrb,
    ncrb_general, ncrb_qubit, rld_crb, sld_crb, BoundResult, Diagnostics, SolverOptions,
    UncertaintyCurve, WeightMatrix,
};
pub use error::{Error, Result};
pub use linalg::{CMatrix, EigenSystem, HermitianMatrix, C64};
pub use luwang::{lwb, lwur_slack, LwbResult, LwurSpec};
pub use measurement::{Povm, RegretReport};
pub use model::{DensityMatrix, EstimationProblem, QfiData};
pub use randomgen::SeededRng;
pub use scenarios::{ReferenceValues, RotationsConfig};
