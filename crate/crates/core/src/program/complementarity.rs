use serde::{Deserialize, Serialize};

use super::{ConvexProgram, ProgramBuilder, ProgramError, RowId, Sense, VarId};

/// `0 ≤ slack(row) ⟂ multiplier ≥ 0`, switched by one binary.
///
/// `z = 1` means the row is active (slack 0), `z = 0` means the multiplier is
/// zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityPair {
    pub row: RowId,
    pub multiplier: VarId,
    pub slack_big_m: f64,
    pub multiplier_big_m: f64,
    pub switch: String,
}

/// Encoded pair: indices into the mixed-integer program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStatus {
    pub pair: ComplementarityPair,
    pub binary: usize,
    pub slack_row: usize,
    pub multiplier_row: usize,
}

/// Saturated big-M found after a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigMDiagnostic {
    pub switch: String,
    pub which: String,
    pub value: f64,
    pub big_m: f64,
}

impl std::fmt::Display for BigMDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} of `{}` reached {:.6e} against big-M {:.3e}",
            self.which, self.switch, self.value, self.big_m
        )
    }
}

/// A program whose listed variables must take values in {0, 1}.
#[derive(Debug, Clone)]
pub struct MixedIntegerProgram {
    pub program: ConvexProgram,
    pub binaries: Vec<usize>,
    pub pairs: Vec<PairStatus>,
}

impl MixedIntegerProgram {
    /// Checks rows, bounds and integrality of `x` within `tol`.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        let p = &self.program;
        let (lo, hi) = (p.lower_bounds(), p.upper_bounds());
        let bounds = x
            .iter()
            .zip(lo.iter().zip(&hi))
            .all(|(&v, (&l, &u))| v >= l - tol && v <= u + tol);
        let rows = p.rows().iter().all(|r| match r.sense {
            Sense::Eq => r.slack(x).abs() <= tol,
            _ => r.slack(x) >= -tol,
        });
        let integral = self
            .binaries
            .iter()
            .all(|&j| (x[j] - x[j].round()).abs() <= tol);
        bounds && rows && integral
    }

    /// Flags multipliers at or above 99% of their big-M, and slacks at or
    /// above 99.9%. Slack bounds derived from variable ranges carry 1%
    /// headroom, so a slack at its true maximum is not reported.
    pub fn big_m_diagnostics(&self, x: &[f64]) -> Vec<BigMDiagnostic> {
        let rows = self.program.rows();
        let mut out = Vec::new();
        for ps in &self.pairs {
            let slack = rows[ps.pair.row.0].slack(x);
            if slack >= 0.999 * ps.pair.slack_big_m {
                out.push(BigMDiagnostic {
                    switch: ps.pair.switch.clone(),
                    which: "slack".into(),
                    value: slack,
                    big_m: ps.pair.slack_big_m,
                });
            }
            let mu = x[ps.pair.multiplier.0];
            if mu >= 0.99 * ps.pair.multiplier_big_m {
                out.push(BigMDiagnostic {
                    switch: ps.pair.switch.clone(),
                    which: "multiplier".into(),
                    value: mu,
                    big_m: ps.pair.multiplier_big_m,
                });
            }
        }
        out
    }
}

/// Appends a binary per pair plus the rows `slack ≤ M_s(1 − z)` and
/// `multiplier ≤ M_μ z`.
pub fn encode_complementarity(
    pairs: &[ComplementarityPair],
    program: &ConvexProgram,
) -> Result<MixedIntegerProgram, ProgramError> {
    for p in pairs {
        let row = program.rows().get(p.row.0).ok_or_else(|| {
            ProgramError::DimensionMismatch(format!(
                "pair `{}` references unknown row {}",
                p.switch, p.row.0
            ))
        })?;
        if row.sense == Sense::Eq {
            return Err(ProgramError::DimensionMismatch(format!(
                "pair `{}` references equality row {}",
                p.switch, p.row.0
            )));
        }
        if p.multiplier.0 >= program.num_vars() {
            return Err(ProgramError::DimensionMismatch(format!(
                "pair `{}` references unknown variable {}",
                p.switch, p.multiplier.0
            )));
        }
        for m in [p.slack_big_m, p.multiplier_big_m] {
            if !m.is_finite() || m <= 0.0 {
                return Err(ProgramError::NonFinite(format!(
                    "big-M of pair `{}`",
                    p.switch
                )));
            }
        }
    }

    let mut b: ProgramBuilder = program.to_builder();
    let base_rows = program.num_rows();
    let binary_block = if pairs.is_empty() {
        None
    } else {
        Some(b.block("complementarity.switch", pairs.len(), 0.0, 1.0, "binary"))
    };
    let mut statuses = Vec::with_capacity(pairs.len());
    let mut binaries = Vec::with_capacity(pairs.len());
    for (k, p) in pairs.iter().enumerate() {
        let z = b.var(binary_block.expect("non-empty"), k);
        let row = &program.rows()[p.row.0];
        // slack + M_s z ≤ M_s, with slack = ±(a'x − b).
        let sign = if row.sense == Sense::Ge { 1.0 } else { -1.0 };
        let mut terms: Vec<(VarId, f64)> = row
            .terms
            .iter()
            .map(|&(j, a)| (VarId(j), sign * a))
            .collect();
        terms.push((z, p.slack_big_m));
        let slack_row = b.row(
            "complementarity.slack",
            &terms,
            Sense::Le,
            p.slack_big_m + sign * row.rhs,
        );
        let multiplier_row = b.row(
            "complementarity.multiplier",
            &[(p.multiplier, 1.0), (z, -p.multiplier_big_m)],
            Sense::Le,
            0.0,
        );
        debug_assert!(slack_row.0 >= base_rows);
        binaries.push(z.0);
        statuses.push(PairStatus {
            pair: p.clone(),
            binary: z.0,
            slack_row: slack_row.0,
            multiplier_row: multiplier_row.0,
        });
    }
    Ok(MixedIntegerProgram {
        program: b.build()?,
        binaries,
        pairs: statuses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Variables (s, μ) with the row s ≥ 0 and the pair (s, μ), M = 10.
    fn toy() -> MixedIntegerProgram {
        let mut b = ProgramBuilder::new("toy");
        let blk = b.block("v", 2, 0.0, 100.0, "");
        let (s, mu) = (b.var(blk, 0), b.var(blk, 1));
        let row = b.row("s.nonneg", &[(s, 1.0)], Sense::Ge, 0.0);
        let p = b.build().unwrap();
        let pair = ComplementarityPair {
            row,
            multiplier: mu,
            slack_big_m: 10.0,
            multiplier_big_m: 10.0,
            switch: "toy".into(),
        };
        encode_complementarity(&[pair], &p).unwrap()
    }

    #[test]
    fn active_row_with_positive_multiplier_is_accepted() {
        assert!(toy().is_feasible(&[0.0, 3.0, 1.0], 1e-9));
    }

    #[test]
    fn both_positive_is_rejected_for_every_switch() {
        let mip = toy();
        assert!(!mip.is_feasible(&[2.0, 3.0, 0.0], 1e-9));
        assert!(!mip.is_feasible(&[2.0, 3.0, 1.0], 1e-9));
    }

    #[test]
    fn saturation_is_flagged() {
        let mip = toy();
        let d = mip.big_m_diagnostics(&[9.995, 0.0, 0.0]);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].which, "slack");
        assert!(mip.big_m_diagnostics(&[9.95, 0.0, 0.0]).is_empty());
    }

    #[test]
    fn infinite_big_m_is_rejected() {
        let mut b = ProgramBuilder::new("t");
        let blk = b.block("v", 2, 0.0, 1.0, "");
        let row = b.row("r", &[(b.var(blk, 0), 1.0)], Sense::Ge, 0.0);
        let p = b.build().unwrap();
        let pair = ComplementarityPair {
            row,
            multiplier: b_var(1),
            slack_big_m: f64::INFINITY,
            multiplier_big_m: 1.0,
            switch: "x".into(),
        };
        assert!(encode_complementarity(&[pair], &p).is_err());
    }

    #[test]
    fn unknown_row_is_rejected() {
        let mut b = ProgramBuilder::new("t");
        b.block("v", 1, 0.0, 1.0, "");
        let p = b.build().unwrap();
        let pair = ComplementarityPair {
            row: RowId(4),
            multiplier: b_var(0),
            slack_big_m: 1.0,
            multiplier_big_m: 1.0,
            switch: "x".into(),
        };
        assert!(encode_complementarity(&[pair], &p).is_err());
    }

    fn b_var(j: usize) -> VarId {
        VarId(j)
    }
}
