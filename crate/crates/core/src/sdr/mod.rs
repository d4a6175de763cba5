//! Lifted (semidefinite) relaxation of the localization feasibility problem.

mod problem;
mod solver;

pub use problem::{
    assemble, ghat, ConstraintKind, ConstraintPair, DumpConstraint, FeasibilityProblem, GhatMatrix,
    LiftedMatrix, ProblemDump, ProblemParams, Sense, TraceConstraint, BASE_EPSILON, DEFAULT_EPSILON_SCALE,
    DEFAULT_STRICTNESS_MARGIN,
};
pub use solver::{check_feasibility, FeasibilityStatus, OracleOptions, OracleResult, PsdSplitting};

use crate::error::Result;

/// Anything that can decide whether a sub-network admits consistent positions.
pub trait FeasibilityOracle: Sync {
    fn check(&self, problem: &FeasibilityProblem) -> Result<OracleResult>;
}

/// The ADMM relaxation solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct SdrOracle {
    pub options: OracleOptions,
}

impl SdrOracle {
    pub fn new(options: OracleOptions) -> Self {
        SdrOracle { options }
    }
}

impl FeasibilityOracle for SdrOracle {
    fn check(&self, problem: &FeasibilityProblem) -> Result<OracleResult> {
        check_feasibility(problem, &self.options)
    }
}
