use serde::{Deserialize, Serialize};

use super::{BlockRole, ConvexProgram, ProgramError, Sense, Solution};

/// Max-norm KKT residuals of a primal-dual pair.
///
/// Each row of the stationarity system and each constraint is divided by
/// `max(1, largest coefficient magnitude in that row)`, so the numbers are
/// absolute for unit-scaled data.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_eq: f64,
    pub primal_ineq: f64,
    pub complementarity: f64,
    pub dual_sign: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_eq)
            .max(self.primal_ineq)
            .max(self.complementarity)
            .max(self.dual_sign)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }

    /// Entrywise maximum of two records.
    pub fn merge(self, other: Self) -> Self {
        Self {
            stationarity: self.stationarity.max(other.stationarity),
            primal_eq: self.primal_eq.max(other.primal_eq),
            primal_ineq: self.primal_ineq.max(other.primal_ineq),
            complementarity: self.complementarity.max(other.complementarity),
            dual_sign: self.dual_sign.max(other.dual_sign),
        }
    }
}

pub fn kkt_residuals(
    program: &ConvexProgram,
    sol: &Solution,
) -> Result<KktResiduals, ProgramError> {
    let n = program.num_vars();
    let m = program.num_rows();
    if sol.x.len() != n
        || sol.lower_duals.len() != n
        || sol.upper_duals.len() != n
        || sol.row_duals.len() != m
    {
        return Err(ProgramError::DimensionMismatch(format!(
            "solution has {} primals / {} row duals, program has {n} / {m}",
            sol.x.len(),
            sol.row_duals.len()
        )));
    }
    let x = &sol.x;
    let mut res = KktResiduals::default();

    // Stationarity: ∇f + Σ sign·a·y − ν_lo + ν_hi, with per-variable scale.
    let grad = program.gradient(x);
    let mut stat = grad.clone();
    let mut scale: Vec<f64> = grad.iter().map(|g| g.abs().max(1.0)).collect();
    for &(i, j, q) in program.quadratic() {
        scale[i] = scale[i].max(q.abs());
        scale[j] = scale[j].max(q.abs());
    }
    for (row, &y) in program.rows().iter().zip(&sol.row_duals) {
        let sign = if row.sense == Sense::Ge { -1.0 } else { 1.0 };
        for &(j, a) in &row.terms {
            stat[j] += sign * a * y;
            scale[j] = scale[j].max(a.abs());
        }
    }
    let mut j = 0;
    for block in program.blocks() {
        for _ in 0..block.len() {
            if block.role == BlockRole::Decision {
                let r = stat[j] - sol.lower_duals[j] + sol.upper_duals[j];
                res.stationarity = res.stationarity.max(r.abs() / scale[j]);
            }
            j += 1;
        }
    }

    for (row, &y) in program.rows().iter().zip(&sol.row_duals) {
        let s = row.scale();
        let slack = row.slack(x) / s;
        match row.sense {
            Sense::Eq => res.primal_eq = res.primal_eq.max(slack.abs()),
            Sense::Ge | Sense::Le => {
                res.primal_ineq = res.primal_ineq.max((-slack).max(0.0));
                res.dual_sign = res.dual_sign.max((-y).max(0.0));
                res.complementarity = res.complementarity.max((y * slack).abs());
            }
        }
    }

    let decision = program.decision_mask();
    let (lo, hi) = (program.lower_bounds(), program.upper_bounds());
    for j in 0..n {
        if !decision[j] {
            continue;
        }
        let (nl, nu) = (sol.lower_duals[j], sol.upper_duals[j]);
        res.dual_sign = res.dual_sign.max((-nl).max(0.0)).max((-nu).max(0.0));
        if lo[j].is_finite() {
            res.primal_ineq = res.primal_ineq.max(lo[j] - x[j]);
            res.complementarity = res.complementarity.max((nl * (x[j] - lo[j])).abs());
        } else {
            res.dual_sign = res.dual_sign.max(nl.abs());
        }
        if hi[j].is_finite() {
            res.primal_ineq = res.primal_ineq.max(x[j] - hi[j]);
            res.complementarity = res.complementarity.max((nu * (hi[j] - x[j])).abs());
        } else {
            res.dual_sign = res.dual_sign.max(nu.abs());
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{ProgramBuilder, SolveReport, SolveStatus};

    fn x_ge_one() -> ConvexProgram {
        let mut b = ProgramBuilder::new("p");
        let x = b.block("x", 1, f64::NEG_INFINITY, f64::INFINITY, "");
        let v = b.var(x, 0);
        b.cost(v, 1.0);
        b.row("floor", &[(v, 1.0)], Sense::Ge, 1.0);
        b.build().unwrap()
    }

    fn point(x: f64, mu: f64) -> Solution {
        Solution {
            x: vec![x],
            row_duals: vec![mu],
            lower_duals: vec![0.0],
            upper_duals: vec![0.0],
            report: SolveReport {
                status: SolveStatus::Optimal,
                objective: x,
                iterations: 0,
                seconds: 0.0,
                reduced_accuracy: false,
            },
        }
    }

    #[test]
    fn exact_optimum_has_zero_residuals() {
        let r = kkt_residuals(&x_ge_one(), &point(1.0, 1.0)).unwrap();
        assert_eq!(r.max(), 0.0);
    }

    #[test]
    fn interior_point_with_zero_multiplier_violates_stationarity_only() {
        let r = kkt_residuals(&x_ge_one(), &point(2.0, 0.0)).unwrap();
        assert_eq!(r.complementarity, 0.0);
        assert_eq!(r.stationarity, 1.0);
        assert_eq!(r.primal_ineq, 0.0);
    }

    #[test]
    fn negative_multiplier_is_a_sign_violation() {
        let r = kkt_residuals(&x_ge_one(), &point(1.0, -0.5)).unwrap();
        assert_eq!(r.dual_sign, 0.5);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let mut s = point(1.0, 1.0);
        s.row_duals.push(0.0);
        assert!(kkt_residuals(&x_ge_one(), &s).is_err());
    }
}
