use serde::{Deserialize, Serialize};

use super::{EquilibriumError, EquilibriumResult};
use crate::program::{ProgramBuilder, Sense};
use crate::solver::{solve, SolverOptions};
use crate::units;

/// Secondary objective applied after the chain's carbon revenue is
/// maximised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieBreak {
    FavourRg,
    FavourHp,
    FavourRa,
}

impl TieBreak {
    pub const ALL: [TieBreak; 3] = [TieBreak::FavourRg, TieBreak::FavourHp, TieBreak::FavourRa];

    fn member(self) -> usize {
        match self {
            TieBreak::FavourRg => 0,
            TieBreak::FavourHp => 1,
            TieBreak::FavourRa => 2,
        }
    }
}

/// How the chain's allowance sales split among RG, HP and RA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    /// `(tie-break, [q_rg, q_hp, q_ra], q_all)` in t CO₂.
    pub splits: Vec<(TieBreak, [f64; 3], f64)>,
    /// Largest difference in total sales between tie-breaks, t.
    pub total_spread_t: f64,
    /// Largest distance between two optimal splits, t.
    pub split_spread_t: f64,
}

impl SplitReport {
    /// Whether at least two optimal splits differ by more than `tol_t`.
    pub fn split_is_indeterminate(&self, tol_t: f64) -> bool {
        self.split_spread_t > tol_t
    }
}

/// Re-solves the chain's carbon sales with the allowance split among its
/// three members: `max ρ·(q_rg + q_hp + q_ra)` subject to the incentive
/// allowance and clearing with the gray purchases, then lexicographically
/// each tie-break.
pub fn proposition1_check(
    result: &EquilibriumResult,
    q_rewa_t: f64,
    options: &SolverOptions,
) -> Result<SplitReport, EquilibriumError> {
    let price = units::carbon_price(result.outer.carbon_price_cny_per_t);
    let demand = units::co2(result.outer.traded_t);
    let cap = units::co2(q_rewa_t);

    let mut splits = Vec::new();
    for tb in TieBreak::ALL {
        let primary = split_lp(price, demand, cap, None)?;
        let s = solve(&primary, options);
        if !s.status().is_optimal() {
            return Err(EquilibriumError::BestResponse {
                player: "chain allowance split".into(),
                status: s.status(),
            });
        }
        let best = s.objective();
        let lp = split_lp(price, demand, cap, Some((tb, best)))?;
        let s = solve(&lp, options);
        if !s.status().is_optimal() {
            return Err(EquilibriumError::BestResponse {
                player: format!("chain allowance split ({tb:?})"),
                status: s.status(),
            });
        }
        let q = lp.block_values("split", &s.x)?;
        let q = [units::co2_t(q[0]), units::co2_t(q[1]), units::co2_t(q[2])];
        splits.push((tb, q, q.iter().sum()));
    }
    let totals: Vec<f64> = splits.iter().map(|s| s.2).collect();
    let total_spread_t = totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - totals.iter().cloned().fold(f64::INFINITY, f64::min);
    let split_spread_t = splits
        .iter()
        .flat_map(|a| splits.iter().map(move |b| (a.1, b.1)))
        .map(|(a, b)| {
            a.iter()
                .zip(&b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    Ok(SplitReport {
        splits,
        total_spread_t,
        split_spread_t,
    })
}

fn split_lp(
    price: f64,
    demand: f64,
    cap: f64,
    tie_break: Option<(TieBreak, f64)>,
) -> Result<crate::program::ConvexProgram, EquilibriumError> {
    let mut b = ProgramBuilder::new("allowance_split");
    let q = b.block("split", 3, 0.0, f64::INFINITY, "kt CO2");
    let vars: Vec<_> = b.vars(q).collect();
    let all: Vec<_> = vars.iter().map(|&v| (v, 1.0)).collect();
    b.row("split.reward_cap", &all, Sense::Le, cap);
    b.row("split.clearing", &all, Sense::Eq, demand);
    match tie_break {
        None => vars.iter().for_each(|&v| b.cost(v, -price)),
        Some((tb, best)) => {
            let revenue: Vec<_> = vars.iter().map(|&v| (v, -price)).collect();
            b.row(
                "split.optimal",
                &revenue,
                Sense::Le,
                best + 1e-9 * best.abs().max(1.0),
            );
            b.cost(vars[tb.member()], -1.0);
        }
    }
    Ok(b.build()?)
}
