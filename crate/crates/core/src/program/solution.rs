use serde::{Deserialize, Serialize};

use super::{ConvexProgram, ProgramError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericFailure,
    IterationLimit,
    TimeLimit,
}

impl SolveStatus {
    pub fn is_optimal(self) -> bool {
        self == SolveStatus::Optimal
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericFailure => "numeric-failure",
            SolveStatus::IterationLimit => "iteration-limit",
            SolveStatus::TimeLimit => "time-limit",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: f64,
    pub iterations: u32,
    pub seconds: f64,
    /// The backend stopped at its relaxed tolerances.
    pub reduced_accuracy: bool,
}

/// Primal and dual values of one solve.
///
/// Duals follow the stationarity convention
/// `∇f + Σ_eq a·λ − Σ_≥ a·μ + Σ_≤ a·φ − ν_lo + ν_hi = 0`
/// so `μ, φ, ν ≥ 0` and an equality dual is the marginal cost of its rhs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub row_duals: Vec<f64>,
    pub lower_duals: Vec<f64>,
    pub upper_duals: Vec<f64>,
    pub report: SolveReport,
}

impl Solution {
    pub fn status(&self) -> SolveStatus {
        self.report.status
    }

    pub fn objective(&self) -> f64 {
        self.report.objective
    }

    pub fn value(
        &self,
        program: &ConvexProgram,
        block: &str,
        i: usize,
    ) -> Result<f64, ProgramError> {
        Ok(self.block(program, block)?[i])
    }

    pub fn block<'a>(
        &'a self,
        program: &ConvexProgram,
        block: &str,
    ) -> Result<&'a [f64], ProgramError> {
        program.block_values(block, &self.x)
    }

    pub fn dual(&self, row: super::RowId) -> f64 {
        self.row_duals[row.0]
    }

    /// Failed solve with no meaningful primal point.
    pub fn failed(n: usize, m: usize, report: SolveReport) -> Self {
        Self {
            x: vec![f64::NAN; n],
            row_duals: vec![f64::NAN; m],
            lower_duals: vec![f64::NAN; n],
            upper_duals: vec![f64::NAN; n],
            report,
        }
    }
}
