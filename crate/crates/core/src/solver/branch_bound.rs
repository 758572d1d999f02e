use log::debug;
use serde::{Deserialize, Serialize};

use super::{solve, SolverOptions};
use crate::clock::Stopwatch;
use crate::program::{
    BigMDiagnostic, ConvexProgram, MixedIntegerProgram, Sense, Solution, SolveReport, SolveStatus,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MipSolution {
    /// Solution of the LP with every binary fixed at `assignment`, including
    /// its duals. Failed solves carry NaN values.
    pub solution: Solution,
    pub assignment: Vec<bool>,
    pub nodes: usize,
    pub big_m: Vec<BigMDiagnostic>,
}

impl MipSolution {
    pub fn status(&self) -> SolveStatus {
        self.solution.status()
    }
}

/// The LP obtained by fixing every binary. Pairs switched on turn their row
/// into an equality, pairs switched off pin their multiplier at zero.
pub fn fixed_assignment_program(mip: &MixedIntegerProgram, assignment: &[bool]) -> ConvexProgram {
    let partial: Vec<Option<bool>> = assignment.iter().map(|&v| Some(v)).collect();
    node_program(mip, &partial)
}

fn node_program(mip: &MixedIntegerProgram, fixed: &[Option<bool>]) -> ConvexProgram {
    let mut p = mip.program.clone();
    let pair_of: std::collections::HashMap<usize, usize> = mip
        .pairs
        .iter()
        .enumerate()
        .map(|(k, ps)| (ps.binary, k))
        .collect();
    for (k, &j) in mip.binaries.iter().enumerate() {
        let Some(v) = fixed[k] else { continue };
        let val = if v { 1.0 } else { 0.0 };
        p.set_var_bounds(j, val, val);
        if let Some(&pk) = pair_of.get(&j) {
            let ps = &mip.pairs[pk];
            if v {
                p.set_row_sense(ps.pair.row.0, Sense::Eq);
            } else {
                p.set_var_bounds(ps.pair.multiplier.0, 0.0, 0.0);
            }
        }
    }
    p
}

struct Node {
    fixed: Vec<Option<bool>>,
}

/// Depth-first branch and bound. With a hint, the fully fixed hinted
/// assignment is tried before the tree search starts.
pub fn solve_mip(
    mip: &MixedIntegerProgram,
    options: &SolverOptions,
    hint: Option<&[bool]>,
) -> MipSolution {
    let watch = Stopwatch::start();
    let nb = mip.binaries.len();
    let mut nodes = 0usize;
    let mut best: Option<(f64, Vec<bool>, Solution)> = None;
    let mut limit_hit: Option<SolveStatus> = None;
    let mut saw_unbounded = false;

    let gap_ok = |node_obj: f64, incumbent: f64| {
        node_obj >= incumbent - options.mip_gap * incumbent.abs().max(1.0)
    };

    if let Some(h) = hint.filter(|h| h.len() == nb) {
        nodes += 1;
        let sol = solve(&fixed_assignment_program(mip, h), options);
        if sol.status().is_optimal() {
            debug!("hinted assignment feasible, objective {}", sol.objective());
            best = Some((sol.objective(), h.to_vec(), sol));
        }
    }

    // Feasibility problems stop at the first integer point.
    let feasibility_only =
        mip.program.linear().iter().all(|&c| c == 0.0) && mip.program.quadratic().is_empty();
    let mut stack = vec![Node {
        fixed: vec![None; nb],
    }];
    while let Some(node) = stack.pop() {
        if feasibility_only && best.is_some() {
            break;
        }
        if nodes >= options.node_limit {
            limit_hit = Some(SolveStatus::IterationLimit);
            break;
        }
        if let Some(t) = options.time_limit_s {
            if watch.seconds() > t {
                limit_hit = Some(SolveStatus::TimeLimit);
                break;
            }
        }
        nodes += 1;
        let relaxed = solve(&node_program(mip, &node.fixed), options);
        match relaxed.status() {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => {
                saw_unbounded = true;
                continue;
            }
            _ => continue,
        }
        if let Some((inc, _, _)) = &best {
            if gap_ok(relaxed.objective(), *inc) {
                continue;
            }
        }
        // Most fractional free binary.
        let mut branch: Option<(usize, f64)> = None;
        for (k, &j) in mip.binaries.iter().enumerate() {
            if node.fixed[k].is_some() {
                continue;
            }
            let v = relaxed.x[j];
            let frac = (v - v.round()).abs();
            if frac > 1e-6 && branch.map_or(true, |(_, f)| frac > f) {
                branch = Some((k, frac));
            }
        }
        match branch {
            None => {
                let assignment: Vec<bool> = mip
                    .binaries
                    .iter()
                    .enumerate()
                    .map(|(k, &j)| node.fixed[k].unwrap_or(relaxed.x[j] > 0.5))
                    .collect();
                let sol = solve(&fixed_assignment_program(mip, &assignment), options);
                if sol.status().is_optimal()
                    && best
                        .as_ref()
                        .map_or(true, |(inc, _, _)| sol.objective() < *inc)
                {
                    best = Some((sol.objective(), assignment, sol));
                }
            }
            Some((k, _)) => {
                let j = mip.binaries[k];
                let preferred = hint
                    .and_then(|h| h.get(k).copied())
                    .unwrap_or(relaxed.x[j] > 0.5);
                for v in [!preferred, preferred] {
                    let mut fixed = node.fixed.clone();
                    fixed[k] = Some(v);
                    stack.push(Node { fixed });
                }
            }
        }
    }

    match best {
        Some((_, assignment, mut solution)) => {
            solution.report.seconds = watch.seconds();
            let big_m = mip.big_m_diagnostics(&solution.x);
            MipSolution {
                solution,
                assignment,
                nodes,
                big_m,
            }
        }
        None => {
            let status = limit_hit.unwrap_or(if saw_unbounded {
                SolveStatus::Unbounded
            } else {
                SolveStatus::Infeasible
            });
            let report = SolveReport {
                status,
                objective: f64::NAN,
                iterations: 0,
                seconds: watch.seconds(),
                reduced_accuracy: false,
            };
            MipSolution {
                solution: Solution::failed(mip.program.num_vars(), mip.program.num_rows(), report),
                assignment: vec![false; nb],
                nodes,
                big_m: Vec::new(),
            }
        }
    }
}
