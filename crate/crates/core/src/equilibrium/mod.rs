//! Hierarchical equilibrium: weekly chain dispatch, the annual
//! Cournot/carbon game and price recovery.
//!
//! [`Pipeline::new`] solves one dispatch per week with ammonia valued at the
//! reference price to obtain weekly yields. [`Pipeline::run`] then solves the
//! market game for a carbon mechanism and re-dispatches every week at its
//! ammonia price, reading electricity and hydrogen prices off the clearing
//! duals.

mod chain;
mod outer;
mod tiebreak;
mod verify;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Stopwatch;
use crate::game::{GameError, GameSolution};
use crate::market::{MarketError, Mechanism};
use crate::models::{ModelError, ResProfile};
use crate::program::{KktResiduals, ProgramError, SolveStatus};
use crate::scenario::{Scenario, ScenarioError};
use crate::units;

pub(crate) use chain::WeeklyChain;
pub use chain::{solve_week, WeekDispatch};
pub use outer::{GaOutcome, OuterEquilibrium, OuterProblem};
pub use tiebreak::{proposition1_check, SplitReport, TieBreak};
pub use verify::{verify_equilibrium, Deviation, GridScan, VerificationReport};

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error("week {week}: chain dispatch {status}")]
    WeekInfeasible { week: usize, status: SolveStatus },
    #[error("reference price must be positive, got {0}")]
    ReferencePrice(f64),
    #[error("result carries no dispatch schedules; re-run the pipeline")]
    MissingSchedules,
    #[error("best response of {player}: {status}")]
    BestResponse { player: String, status: SolveStatus },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Revenues in CNY. The chain's carbon sales are kept apart from the three
/// members until an allocation splits them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Revenues {
    pub rg: f64,
    pub hp: f64,
    pub ra: f64,
    pub carbon: f64,
    pub ga: Vec<f64>,
}

impl Revenues {
    /// RG + HP + RA + carbon sales.
    pub fn chain_total(&self) -> f64 {
        self.rg + self.hp + self.ra + self.carbon
    }

    pub fn ga_total(&self) -> f64 {
        self.ga.iter().sum()
    }

    /// Member revenues before carbon sales, in RG/HP/RA order.
    pub fn members(&self) -> [f64; 3] {
        [self.rg, self.hp, self.ra]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub weekly_yield_s: f64,
    pub outer_s: f64,
    pub inner_s: f64,
}

/// Output of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub outer: OuterEquilibrium,
    /// Chain dispatch of every week at its equilibrium ammonia price.
    pub weeks: Vec<WeekDispatch>,
    pub revenues: Revenues,
    /// Gray emissions, t CO₂.
    pub emissions_t: f64,
    /// Mean load of each gray producer over the year.
    pub ga_utilization: Vec<f64>,
    pub ra_utilization: f64,
    /// Largest relative gap between a week's re-dispatched yield and the
    /// yield the market game was built on.
    pub yield_gap: f64,
    pub degenerate: bool,
    pub inner_residuals: KktResiduals,
    pub timings: StageTimings,
}

impl EquilibriumResult {
    pub fn average_ammonia_price(&self) -> f64 {
        let p = &self.outer.ammonia_price_cny_per_t;
        p.iter().sum::<f64>() / p.len() as f64
    }

    pub fn yields_t(&self) -> Vec<f64> {
        self.weeks.iter().map(|w| w.yield_t).collect()
    }

    /// Largest of the market and dispatch residual norms.
    pub fn max_residual(&self) -> f64 {
        self.outer.residuals.max().max(self.inner_residuals.max())
    }
}

/// A pipeline run together with the market game it came from.
pub struct Solved {
    pub result: EquilibriumResult,
    pub problem: OuterProblem,
    pub game_solution: GameSolution,
}

/// Weekly yields of a scenario, reusable across mechanisms.
pub struct Pipeline {
    scenario: Scenario,
    profile: ResProfile,
    yields: Vec<WeekDispatch>,
    yield_seconds: f64,
}

impl Pipeline {
    pub fn new(scenario: &Scenario) -> Result<Self, EquilibriumError> {
        scenario.validate()?;
        let profile = scenario.profile()?;
        let watch = Stopwatch::start();
        let yields = weekly_yields(scenario, &profile, scenario.sp_reference_price_cny_per_t)?;
        Ok(Self {
            scenario: scenario.clone(),
            profile,
            yields,
            yield_seconds: watch.seconds(),
        })
    }

    /// Pipeline for a variant of this scenario. Yields are reused when the
    /// chain, weather and time grid are unchanged.
    pub fn rebase(&self, scenario: Scenario) -> Result<Self, EquilibriumError> {
        let same_chain = scenario.grid == self.scenario.grid
            && scenario.rg == self.scenario.rg
            && scenario.hp == self.scenario.hp
            && scenario.ra == self.scenario.ra
            && scenario.res == self.scenario.res
            && scenario.seed == self.scenario.seed
            && scenario.sp_reference_price_cny_per_t == self.scenario.sp_reference_price_cny_per_t
            && scenario.solver == self.scenario.solver;
        if !same_chain {
            return Self::new(&scenario);
        }
        scenario.validate()?;
        Ok(Self {
            scenario,
            profile: self.profile.clone(),
            yields: self.yields.clone(),
            yield_seconds: 0.0,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn profile(&self) -> &ResProfile {
        &self.profile
    }

    /// Reference-price dispatch of each week.
    pub fn weekly(&self) -> &[WeekDispatch] {
        &self.yields
    }

    pub fn run(&self, mechanism: Mechanism) -> Result<EquilibriumResult, EquilibriumError> {
        Ok(self.run_detailed(mechanism)?.result)
    }

    pub fn run_detailed(&self, mechanism: Mechanism) -> Result<Solved, EquilibriumError> {
        let scenario = &self.scenario;
        let ledger = scenario.ledger(mechanism)?;
        let yields: Vec<f64> = self.yields.iter().map(|w| w.yield_t).collect();

        let watch = Stopwatch::start();
        let problem = OuterProblem::new(scenario, &ledger, &yields)?;
        let (outer, game_solution) = problem.solve(scenario)?;
        let outer_s = watch.seconds();

        let watch = Stopwatch::start();
        let inner: Vec<(WeekDispatch, [f64; 3])> = (0..scenario.grid.weeks)
            .into_par_iter()
            .map(|w| {
                let price = outer.ammonia_price_cny_per_t[w];
                let chain = WeeklyChain::build(scenario, &self.profile, w, price)?;
                let d = chain.dispatch(scenario, w)?;
                let r = chain.revenues(&d)?;
                Ok((d, r))
            })
            .collect::<Result<_, EquilibriumError>>()?;
        let inner_s = watch.seconds();

        let ra_index = scenario.ga.len();
        let ra_sales_revenue = -units::money_cny(game_solution.players[ra_index].objective());
        let mut revenues = Revenues {
            rg: 0.0,
            hp: 0.0,
            ra: ra_sales_revenue,
            carbon: outer.traded_t * outer.carbon_price_cny_per_t,
            ga: (0..scenario.ga.len())
                .map(|i| -units::money_cny(game_solution.players[i].objective()))
                .collect(),
        };
        let mut yield_gap: f64 = 0.0;
        let mut residuals = KktResiduals::default();
        for (w, (d, r)) in inner.iter().enumerate() {
            revenues.rg += r[0];
            revenues.hp += r[1];
            // The weekly RA objective values production at the week's price;
            // only its costs belong to the RA's revenue.
            revenues.ra += r[2] - outer.ammonia_price_cny_per_t[w] * d.yield_t;
            yield_gap = yield_gap.max(relative_gap(d.yield_t, yields[w]));
            residuals = residuals.merge(d.residuals);
        }

        let hours = scenario.grid.hours_per_week() * scenario.grid.weeks as f64;
        let ga_utilization = scenario
            .ga
            .iter()
            .zip(&outer.ga)
            .map(|(p, o)| {
                let mean = o.production_tph.iter().sum::<f64>() / o.production_tph.len() as f64;
                mean / p.asy.capacity_tph
            })
            .collect();
        let produced: f64 = inner.iter().map(|(d, _)| d.yield_t).sum();
        let ra_utilization = produced / (scenario.ra.asy.capacity_tph * hours);
        let weeks: Vec<WeekDispatch> = inner.into_iter().map(|(d, _)| d).collect();
        let result = EquilibriumResult {
            emissions_t: outer.ga.iter().map(|g| g.emissions_t).sum(),
            degenerate: weeks.iter().any(WeekDispatch::is_degenerate),
            outer,
            weeks,
            revenues,
            ga_utilization,
            ra_utilization,
            yield_gap,
            inner_residuals: residuals,
            timings: StageTimings {
                weekly_yield_s: self.yield_seconds,
                outer_s,
                inner_s,
            },
        };
        Ok(Solved {
            result,
            problem,
            game_solution,
        })
    }
}

/// Dispatch of every week with ammonia valued at `reference_cny_per_t`.
pub fn weekly_yields(
    scenario: &Scenario,
    profile: &ResProfile,
    reference_cny_per_t: f64,
) -> Result<Vec<WeekDispatch>, EquilibriumError> {
    if !(reference_cny_per_t > 0.0) {
        return Err(EquilibriumError::ReferencePrice(reference_cny_per_t));
    }
    (0..scenario.grid.weeks)
        .into_par_iter()
        .map(|w| solve_week(scenario, profile, w, reference_cny_per_t))
        .collect()
}

/// Full pipeline for one mechanism.
pub fn run_pipeline(
    scenario: &Scenario,
    mechanism: Mechanism,
) -> Result<EquilibriumResult, EquilibriumError> {
    Pipeline::new(scenario)?.run(mechanism)
}

pub(crate) fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
