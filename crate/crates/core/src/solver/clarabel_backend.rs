use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::SolverOptions;
use crate::clock::Stopwatch;
use crate::program::{BlockRole, ConvexProgram, Sense, Solution, SolveReport, SolveStatus};

/// Builds the reduced standard form `min ½x'Px + q'x, Ax + s = b, s ∈ K`
/// over the free decision variables and maps the result back.
pub(super) fn solve(program: &ConvexProgram, options: &SolverOptions) -> Solution {
    let watch = Stopwatch::start();
    let n = program.num_vars();
    let m = program.num_rows();
    let lo = program.lower_bounds();
    let hi = program.upper_bounds();

    // Parameters and decision variables with lo == hi are substituted out.
    let mut x = vec![0.0; n];
    let mut column = vec![usize::MAX; n];
    let mut free = Vec::new();
    let mut j = 0;
    for block in program.blocks() {
        for _ in 0..block.len() {
            if block.role == BlockRole::Parameter || lo[j] == hi[j] {
                x[j] = lo[j];
            } else {
                column[j] = free.len();
                free.push(j);
            }
            j += 1;
        }
    }
    let nf = free.len();

    let mut q = vec![0.0; nf];
    for (k, &j) in free.iter().enumerate() {
        q[k] = program.linear()[j];
    }
    let (mut pi, mut pj, mut pv) = (Vec::new(), Vec::new(), Vec::new());
    for &(i, j, v) in program.quadratic() {
        match (column[i] != usize::MAX, column[j] != usize::MAX) {
            (true, true) => {
                pi.push(column[i]);
                pj.push(column[j]);
                pv.push(v);
            }
            (true, false) => q[column[i]] += v * x[j],
            (false, true) => q[column[j]] += v * x[i],
            (false, false) => {}
        }
    }

    // Constraint rows: equalities first (zero cone), then inequalities and
    // finite bounds (nonnegative cone).
    let mut asm = Assembly::default();
    let mut row_slot = vec![None; m];
    let rows = program.rows();
    for (r, row) in rows.iter().enumerate() {
        if row.sense == Sense::Eq {
            row_slot[r] = asm.push(&row.terms, 1.0, row.rhs, &column, &x, true);
        }
    }
    let n_eq = asm.rhs.len();
    for (r, row) in rows.iter().enumerate() {
        match row.sense {
            Sense::Ge => row_slot[r] = asm.push(&row.terms, -1.0, row.rhs, &column, &x, false),
            Sense::Le => row_slot[r] = asm.push(&row.terms, 1.0, row.rhs, &column, &x, false),
            Sense::Eq => {}
        }
    }
    let mut lo_slot = vec![None; n];
    let mut hi_slot = vec![None; n];
    for &j in &free {
        if lo[j].is_finite() {
            lo_slot[j] = asm.push(&[(j, 1.0)], -1.0, lo[j], &column, &x, false);
        }
        if hi[j].is_finite() {
            hi_slot[j] = asm.push(&[(j, 1.0)], 1.0, hi[j], &column, &x, false);
        }
    }
    let Assembly {
        ai,
        aj,
        av,
        rhs,
        trivial_violation,
    } = asm;
    let n_rows = rhs.len();

    if trivial_violation > options.feasibility_tol {
        let report = SolveReport {
            status: SolveStatus::Infeasible,
            objective: f64::NAN,
            iterations: 0,
            seconds: watch.seconds(),
            reduced_accuracy: false,
        };
        return Solution::failed(n, m, report);
    }

    let (status, iterations, reduced, zsol) = if nf == 0 {
        (SolveStatus::Optimal, 0, false, vec![0.0; n_rows])
    } else {
        let p_mat = CscMatrix::new_from_triplets(nf, nf, pi, pj, pv);
        let a_mat = CscMatrix::new_from_triplets(n_rows, nf, ai, aj, av);
        let mut cones = Vec::new();
        if n_eq > 0 {
            cones.push(SupportedConeT::ZeroConeT(n_eq));
        }
        if n_rows > n_eq {
            cones.push(SupportedConeT::NonnegativeConeT(n_rows - n_eq));
        }
        let settings = DefaultSettings {
            max_iter: options.max_iter,
            time_limit: options.time_limit_s.unwrap_or(f64::INFINITY),
            verbose: options.verbose,
            tol_gap_abs: options.tolerance,
            tol_gap_rel: options.tolerance,
            tol_feas: options.tolerance,
            tol_ktratio: 1e-7,
            ..DefaultSettings::default()
        };
        let mut solver = match DefaultSolver::new(&p_mat, &q, &a_mat, &rhs, &cones, settings) {
            Ok(s) => s,
            Err(_) => {
                let report = SolveReport {
                    status: SolveStatus::NumericFailure,
                    objective: f64::NAN,
                    iterations: 0,
                    seconds: watch.seconds(),
                    reduced_accuracy: false,
                };
                return Solution::failed(n, m, report);
            }
        };
        solver.solve();
        let sol = &solver.solution;
        let (status, reduced) = match sol.status {
            SolverStatus::Solved => (SolveStatus::Optimal, false),
            SolverStatus::AlmostSolved => (SolveStatus::Optimal, true),
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                (SolveStatus::Infeasible, false)
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                (SolveStatus::Unbounded, false)
            }
            SolverStatus::MaxIterations => (SolveStatus::IterationLimit, false),
            SolverStatus::MaxTime => (SolveStatus::TimeLimit, false),
            _ => (SolveStatus::NumericFailure, false),
        };
        if status != SolveStatus::Optimal {
            let report = SolveReport {
                status,
                objective: f64::NAN,
                iterations: sol.iterations,
                seconds: watch.seconds(),
                reduced_accuracy: reduced,
            };
            return Solution::failed(n, m, report);
        }
        for (k, &j) in free.iter().enumerate() {
            x[j] = sol.x[k];
        }
        (status, sol.iterations, reduced, sol.z.clone())
    };

    let mut row_duals = vec![0.0; m];
    for (r, slot) in row_slot.iter().enumerate() {
        if let Some(k) = slot {
            row_duals[r] = zsol[*k];
        }
    }
    let mut lower_duals = vec![0.0; n];
    let mut upper_duals = vec![0.0; n];
    for &j in &free {
        if let Some(k) = lo_slot[j] {
            lower_duals[j] = zsol[k];
        }
        if let Some(k) = hi_slot[j] {
            upper_duals[j] = zsol[k];
        }
    }

    // Bound duals of substituted decision variables absorb the remaining
    // stationarity residual.
    let mut stat = program.gradient(&x);
    for (row, &y) in rows.iter().zip(&row_duals) {
        let sign = if row.sense == Sense::Ge { -1.0 } else { 1.0 };
        for &(j, a) in &row.terms {
            stat[j] += sign * a * y;
        }
    }
    let decision = program.decision_mask();
    for j in 0..n {
        if decision[j] && column[j] == usize::MAX {
            if stat[j] >= 0.0 {
                lower_duals[j] = stat[j];
            } else {
                upper_duals[j] = -stat[j];
            }
        }
    }

    let report = SolveReport {
        status,
        objective: program.objective_value(&x),
        iterations,
        seconds: watch.seconds(),
        reduced_accuracy: reduced,
    };
    Solution {
        x,
        row_duals,
        lower_duals,
        upper_duals,
        report,
    }
}

#[derive(Default)]
struct Assembly {
    ai: Vec<usize>,
    aj: Vec<usize>,
    av: Vec<f64>,
    rhs: Vec<f64>,
    trivial_violation: f64,
}

impl Assembly {
    /// Appends `sign·a'x (+ s) = sign·b` with fixed columns moved to the rhs.
    /// Rows without free columns are only checked for consistency.
    fn push(
        &mut self,
        terms: &[(usize, f64)],
        sign: f64,
        b: f64,
        column: &[usize],
        x: &[f64],
        equality: bool,
    ) -> Option<usize> {
        let r = self.rhs.len();
        let mut fixed = 0.0;
        let mut any = false;
        for &(j, a) in terms {
            if column[j] == usize::MAX {
                fixed += a * x[j];
            } else {
                self.ai.push(r);
                self.aj.push(column[j]);
                self.av.push(sign * a);
                any = true;
            }
        }
        let b_eff = sign * (b - fixed);
        if any {
            self.rhs.push(b_eff);
            Some(r)
        } else {
            let v = if equality { b_eff.abs() } else { -b_eff };
            self.trivial_violation = self.trivial_violation.max(v);
            None
        }
    }
}
