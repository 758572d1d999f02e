use serde::{Deserialize, Serialize};

use super::EquilibriumError;
use crate::models::{build_hp, build_ra, build_rg, names, AmmoniaValuation, ResProfile};
use crate::program::{
    kkt_residuals, ConvexProgram, KktResiduals, ProgramBuilder, RowId, Sense, VarId,
};
use crate::scenario::Scenario;
use crate::solver::solve;
use crate::units;

/// Trade below this many per-unit counts as no trade.
const TRADE_EPS: f64 = 1e-7;

/// The three chain members of one week joined by their clearing rows.
pub(crate) struct WeeklyChain {
    pub program: ConvexProgram,
    pub rg: ConvexProgram,
    pub hp: ConvexProgram,
    pub ra: ConvexProgram,
    offsets: [usize; 3],
    clear_e_hp: Vec<RowId>,
    clear_e_ra: Vec<RowId>,
    clear_h2: Vec<RowId>,
}

/// Optimal weekly dispatch of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekDispatch {
    pub week: usize,
    /// Ammonia produced during the week, t.
    pub yield_t: f64,
    pub production_tph: Vec<f64>,
    pub electricity_hp_mw: Vec<f64>,
    pub electricity_ra_mw: Vec<f64>,
    pub hydrogen_nm3h: Vec<f64>,
    pub backup_mw: Vec<f64>,
    /// RG→HP electricity price per interval, CNY/MWh.
    pub price_electricity_hp: Vec<f64>,
    /// RG→RA electricity price per interval, CNY/MWh.
    pub price_electricity_ra: Vec<f64>,
    /// HP→RA hydrogen price per interval, CNY/Nm³.
    pub price_hydrogen: Vec<f64>,
    /// Intervals in which no energy changes hands and prices are duals of
    /// degenerate rows.
    pub degenerate_intervals: Vec<usize>,
    pub residuals: KktResiduals,
    #[serde(skip)]
    pub(crate) x: Vec<f64>,
}

impl WeekDispatch {
    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_intervals.is_empty()
    }
}

impl WeeklyChain {
    /// Chain program of `week` with ammonia valued at `valuation_cny_per_t`.
    pub fn build(
        scenario: &Scenario,
        profile: &ResProfile,
        week: usize,
        valuation_cny_per_t: f64,
    ) -> Result<Self, EquilibriumError> {
        let grid = &scenario.grid;
        let rg = build_rg(&scenario.rg, profile, grid, week)?;
        let hp = build_hp(&scenario.hp, grid)?;
        let ra = build_ra(
            &scenario.ra,
            grid,
            week,
            AmmoniaValuation {
                price_cny_per_t: valuation_cny_per_t,
            },
        )?;
        let mut b = ProgramBuilder::new(&format!("chain.week{week}"));
        let offsets = [
            b.absorb(&rg, "rg."),
            b.absorb(&hp, "hp."),
            b.absorb(&ra, "ra."),
        ];
        let col =
            |p: &ConvexProgram, off: usize, block: &str| -> Result<Vec<usize>, EquilibriumError> {
                Ok(p.block_range(block)?.map(|j| off + j).collect())
            };
        let sell_hp = col(&rg, offsets[0], names::RG_SELL_HP)?;
        let sell_ra = col(&rg, offsets[0], names::RG_SELL_RA)?;
        let hp_buy = col(&hp, offsets[1], names::HP_BUY)?;
        let hp_sell = col(&hp, offsets[1], names::HP_SELL)?;
        let ra_buy_e = col(&ra, offsets[2], names::RA_BUY_E)?;
        let ra_buy_h = col(&ra, offsets[2], names::RA_BUY_H2)?;

        let mut clear = |buy: &[usize], sell: &[usize], family: &str| -> Vec<RowId> {
            buy.iter()
                .zip(sell)
                .map(|(&i, &j)| b.row(family, &[(VarId(i), 1.0), (VarId(j), -1.0)], Sense::Eq, 0.0))
                .collect()
        };
        let clear_e_hp = clear(&hp_buy, &sell_hp, "clear.electricity_hp");
        let clear_e_ra = clear(&ra_buy_e, &sell_ra, "clear.electricity_ra");
        let clear_h2 = clear(&ra_buy_h, &hp_sell, "clear.hydrogen");
        let mut program = b.build()?;
        program.drop_parameter_terms();
        Ok(Self {
            program,
            rg,
            hp,
            ra,
            offsets,
            clear_e_hp,
            clear_e_ra,
            clear_h2,
        })
    }

    /// Solves the week and reads prices off the clearing duals.
    pub fn dispatch(
        &self,
        scenario: &Scenario,
        week: usize,
    ) -> Result<WeekDispatch, EquilibriumError> {
        let sol = solve(&self.program, &scenario.solver);
        if !sol.status().is_optimal() {
            return Err(EquilibriumError::WeekInfeasible {
                week,
                status: sol.status(),
            });
        }
        let dt = scenario.grid.step_h;
        let p = &self.program;
        let block =
            |name: &str| -> Result<Vec<f64>, EquilibriumError> { Ok(sol.block(p, name)?.to_vec()) };
        let production = block("ra.production")?;
        let e_hp = block("hp.buy_electricity")?;
        let e_ra = block("ra.buy_electricity")?;
        let h2 = block("ra.buy_hydrogen")?;
        let backup = block("ra.backup")?;
        let price = |rows: &[RowId], to_cny: fn(f64) -> f64| -> Vec<f64> {
            rows.iter().map(|&r| to_cny(sol.dual(r) / dt)).collect()
        };
        let degenerate_intervals = (0..e_hp.len())
            .filter(|&t| e_hp[t].max(e_ra[t]).max(h2[t]) < TRADE_EPS)
            .collect();
        Ok(WeekDispatch {
            week,
            yield_t: units::ammonia_t(production.iter().sum::<f64>() * dt),
            production_tph: production.iter().map(|&m| units::ammonia_t(m)).collect(),
            electricity_hp_mw: e_hp.iter().map(|&v| units::power_mw(v)).collect(),
            electricity_ra_mw: e_ra.iter().map(|&v| units::power_mw(v)).collect(),
            hydrogen_nm3h: h2.iter().map(|&v| units::hydrogen_nm3(v)).collect(),
            backup_mw: backup.iter().map(|&v| units::power_mw(v)).collect(),
            price_electricity_hp: price(&self.clear_e_hp, units::electricity_price_cny),
            price_electricity_ra: price(&self.clear_e_ra, units::electricity_price_cny),
            price_hydrogen: price(&self.clear_h2, units::hydrogen_price_cny),
            degenerate_intervals,
            residuals: kkt_residuals(p, &sol)?,
            x: sol.x,
        })
    }

    /// Revenues (CNY) of RG, HP and RA at the dispatch prices, each equal to
    /// minus its own objective evaluated at the chain solution.
    pub fn revenues(&self, d: &WeekDispatch) -> Result<[f64; 3], EquilibriumError> {
        let to_pu =
            |v: &[f64], f: fn(f64) -> f64| -> Vec<f64> { v.iter().map(|&c| f(c)).collect() };
        let e_hp = to_pu(&d.price_electricity_hp, units::electricity_price);
        let e_ra = to_pu(&d.price_electricity_ra, units::electricity_price);
        let h2 = to_pu(&d.price_hydrogen, units::hydrogen_price);

        let mut rg = self.rg.clone();
        rg.set_parameter(names::PRICE_E_HP, &e_hp)?;
        rg.set_parameter(names::PRICE_E_RA, &e_ra)?;
        let mut hp = self.hp.clone();
        hp.set_parameter(names::PRICE_E_HP, &e_hp)?;
        hp.set_parameter(names::PRICE_H2, &h2)?;
        let mut ra = self.ra.clone();
        ra.set_parameter(names::PRICE_E_RA, &e_ra)?;
        ra.set_parameter(names::PRICE_H2, &h2)?;

        let mut out = [0.0; 3];
        for (k, prog) in [&rg, &hp, &ra].into_iter().enumerate() {
            let local = self.local_point(prog, k, &d.x);
            out[k] = -units::money_cny(prog.objective_value(&local));
        }
        Ok(out)
    }

    /// Sub-vector of member `k` with its parameters at their current values.
    pub fn local_point(&self, prog: &ConvexProgram, k: usize, x: &[f64]) -> Vec<f64> {
        let off = self.offsets[k];
        prog.parameter_values()
            .into_iter()
            .enumerate()
            .map(|(j, p)| if p.is_nan() { x[off + j] } else { p })
            .collect()
    }
}

/// Dispatch of one week with ammonia valued at `valuation_cny_per_t`.
pub fn solve_week(
    scenario: &Scenario,
    profile: &ResProfile,
    week: usize,
    valuation_cny_per_t: f64,
) -> Result<WeekDispatch, EquilibriumError> {
    WeeklyChain::build(scenario, profile, week, valuation_cny_per_t)?.dispatch(scenario, week)
}
