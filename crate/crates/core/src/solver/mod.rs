//! Solver backends for [`ConvexProgram`] and [`MixedIntegerProgram`].
//!
//! LPs and convex QPs go to the Clarabel interior-point method. Mixed-integer
//! programs produced by complementarity encoding are solved by a small
//! depth-first branch and bound over LP relaxations.

mod branch_bound;
mod clarabel_backend;

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{ConvexProgram, MixedIntegerProgram, Solution};

pub use branch_bound::{fixed_assignment_program, solve_mip, MipSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    Clarabel,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown solver backend `{0}` (available: clarabel)")]
pub struct UnknownBackend(pub String);

impl FromStr for Backend {
    type Err = UnknownBackend;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clarabel" | "" => Ok(Backend::Clarabel),
            other => Err(UnknownBackend(other.to_string())),
        }
    }
}

impl Backend {
    /// Backend named by `CARBAMM_SOLVER`, defaulting to Clarabel.
    pub fn from_env() -> Result<Self, UnknownBackend> {
        match std::env::var("CARBAMM_SOLVER") {
            Ok(v) => v.parse(),
            Err(_) => Ok(Backend::Clarabel),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub backend: Backend,
    /// Interior-point gap and feasibility tolerance.
    pub tolerance: f64,
    /// Primal feasibility tolerance used when classifying results.
    pub feasibility_tol: f64,
    pub complementarity_tol: f64,
    /// Relative MILP optimality gap.
    pub mip_gap: f64,
    pub max_iter: u32,
    pub time_limit_s: Option<f64>,
    pub node_limit: usize,
    /// Fallback big-M when bounds give no finite value.
    pub default_big_m: f64,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Clarabel,
            tolerance: 1e-9,
            feasibility_tol: 1e-7,
            complementarity_tol: 1e-6,
            mip_gap: 1e-6,
            max_iter: 400,
            time_limit_s: None,
            node_limit: 20_000,
            default_big_m: 1e6,
            verbose: false,
        }
    }
}

/// Solves an LP or convex QP.
pub fn solve(program: &ConvexProgram, options: &SolverOptions) -> Solution {
    match options.backend {
        Backend::Clarabel => clarabel_backend::solve(program, options),
    }
}

/// Solves a mixed-integer program, optionally starting the dive from a
/// preferred binary assignment.
pub fn solve_mixed_integer(
    mip: &MixedIntegerProgram,
    options: &SolverOptions,
    hint: Option<&[bool]>,
) -> MipSolution {
    solve_mip(mip, options, hint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{kkt_residuals, ProgramBuilder, Sense, SolveStatus};

    #[test]
    fn backend_names_parse() {
        assert_eq!("clarabel".parse::<Backend>().unwrap(), Backend::Clarabel);
        assert_eq!("Clarabel ".parse::<Backend>().unwrap(), Backend::Clarabel);
        assert!("gurobi".parse::<Backend>().is_err());
    }

    #[test]
    fn min_x_above_three() {
        let mut b = ProgramBuilder::new("lp");
        let x = b.block("x", 1, f64::NEG_INFINITY, f64::INFINITY, "");
        let v = b.var(x, 0);
        b.cost(v, 1.0);
        let r = b.row("floor", &[(v, 1.0)], Sense::Ge, 3.0);
        let p = b.build().unwrap();
        let s = solve(&p, &SolverOptions::default());
        assert_eq!(s.status(), SolveStatus::Optimal);
        assert!((s.x[0] - 3.0).abs() < 1e-7);
        assert!((s.objective() - 3.0).abs() < 1e-7);
        assert!((s.dual(r) - 1.0).abs() < 1e-7);
        assert!(kkt_residuals(&p, &s).unwrap().within(1e-6));
    }

    #[test]
    fn unbounded_ray_is_reported() {
        let mut b = ProgramBuilder::new("ray");
        let x = b.block("x", 1, f64::NEG_INFINITY, f64::INFINITY, "");
        let v = b.var(x, 0);
        b.cost(v, -1.0);
        b.row("floor", &[(v, 1.0)], Sense::Ge, 0.0);
        let s = solve(&b.build().unwrap(), &SolverOptions::default());
        assert_eq!(s.status(), SolveStatus::Unbounded);
    }

    #[test]
    fn unconstrained_parabola() {
        let mut b = ProgramBuilder::new("qp");
        let x = b.block("x", 1, f64::NEG_INFINITY, f64::INFINITY, "");
        let v = b.var(x, 0);
        b.quadratic(v, v, 1.0);
        b.cost(v, -2.0);
        let s = solve(&b.build().unwrap(), &SolverOptions::default());
        assert_eq!(s.status(), SolveStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-7);
        assert!((s.objective() + 1.0).abs() < 1e-7);
    }

    #[test]
    fn infeasible_rows_are_reported() {
        let mut b = ProgramBuilder::new("inf");
        let x = b.block("x", 1, 0.0, 1.0, "");
        let v = b.var(x, 0);
        b.row("floor", &[(v, 1.0)], Sense::Ge, 2.0);
        let s = solve(&b.build().unwrap(), &SolverOptions::default());
        assert_eq!(s.status(), SolveStatus::Infeasible);
    }

    #[test]
    fn bound_and_equality_duals_follow_convention() {
        // min 2a + b  s.t. a + b = 4, a ≤ 3 (bound), b ≥ 0.
        // Optimum at b = 4, a = 0: λ = −1 (b's cost), ν_lo(a) = 2 − 1 = 1.
        let mut b = ProgramBuilder::new("duals");
        let blk = b.block("x", 2, 0.0, 3.0, "");
        b.set_bounds(b.var(blk, 1), 0.0, f64::INFINITY);
        let (a, bb) = (b.var(blk, 0), b.var(blk, 1));
        b.cost(a, 2.0);
        b.cost(bb, 1.0);
        let r = b.row("sum", &[(a, 1.0), (bb, 1.0)], Sense::Eq, 4.0);
        let p = b.build().unwrap();
        let s = solve(&p, &SolverOptions::default());
        assert!((s.x[1] - 4.0).abs() < 1e-7);
        assert!((s.dual(r) + 1.0).abs() < 1e-7);
        assert!((s.lower_duals[0] - 1.0).abs() < 1e-7);
        assert!(kkt_residuals(&p, &s).unwrap().within(1e-6));
    }

    #[test]
    fn parameters_are_substituted_and_fixed_duals_recovered() {
        // min x + 3y with y a parameter fixed at 2 and x + y ≥ 5.
        let mut b = ProgramBuilder::new("param");
        let x = b.block("x", 1, f64::NEG_INFINITY, f64::INFINITY, "");
        let y = b.parameter("y", vec![2.0], "");
        let (xv, yv) = (b.var(x, 0), b.var(y, 0));
        b.cost(xv, 1.0);
        b.cost(yv, 3.0);
        b.row("cover", &[(xv, 1.0), (yv, 1.0)], Sense::Ge, 5.0);
        // A fixed decision variable: z ∈ [1, 1] with cost 4.
        let z = b.block("z", 1, 1.0, 1.0, "");
        let zv = b.var(z, 0);
        b.cost(zv, 4.0);
        let p = b.build().unwrap();
        let s = solve(&p, &SolverOptions::default());
        assert!((s.x[0] - 3.0).abs() < 1e-7);
        assert!((s.objective() - (3.0 + 6.0 + 4.0)).abs() < 1e-6);
        // Stationarity of z: 4 − ν_lo + ν_hi = 0 → ν_lo = 4.
        assert!((s.lower_duals[2] - 4.0).abs() < 1e-7);
        assert!(kkt_residuals(&p, &s).unwrap().within(1e-6));
    }

    #[test]
    fn repeated_solves_are_bit_identical() {
        let mut b = ProgramBuilder::new("det");
        let x = b.block("x", 3, 0.0, 10.0, "");
        let vs: Vec<_> = b.vars(x).collect();
        for (k, &v) in vs.iter().enumerate() {
            b.cost(v, -(k as f64) - 1.0);
            b.quadratic(v, v, 0.5);
        }
        b.row(
            "cap",
            &[(vs[0], 1.0), (vs[1], 1.0), (vs[2], 1.0)],
            Sense::Le,
            4.0,
        );
        let p = b.build().unwrap();
        let a = solve(&p, &SolverOptions::default());
        let c = solve(&p, &SolverOptions::default());
        assert_eq!(a.x, c.x);
        assert_eq!(a.objective().to_bits(), c.objective().to_bits());
    }
}
