use serde::{Deserialize, Serialize};

use super::EquilibriumError;
use crate::game::{BlockRef, Game, GameSolution, Link, Market, Player};
use crate::market::{
    carbon_supplier_program, CarbonLedger, Mechanism, SUPPLY_BLOCK, SUPPLY_PRICE_BLOCK,
};
use crate::models::{build_ga, build_ra_trading, names, GaMarket, Resolution};
use crate::program::KktResiduals;
use crate::scenario::Scenario;
use crate::solver::SolverOptions;
use crate::units;

pub(crate) const RA_PLAYER: &str = "ra";
pub(crate) const SUPPLIER: &str = "carbon_supply";
pub(crate) const CARBON_MARKET: &str = "carbon";

/// Outcome of one gray producer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaOutcome {
    pub name: String,
    pub participates: bool,
    /// Initial allowance, t CO₂; `None` without a cap.
    pub allowance_t: Option<f64>,
    pub sales_t: Vec<f64>,
    /// Constant production rate of each week, t/h.
    pub production_tph: Vec<f64>,
    pub purchase_t: f64,
    pub emissions_t: f64,
}

/// Annual market equilibrium: ammonia and carbon prices, gray production
/// and the chain's sales and storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterEquilibrium {
    pub mechanism: Mechanism,
    pub ammonia_price_cny_per_t: Vec<f64>,
    pub carbon_price_cny_per_t: f64,
    pub ga: Vec<GaOutcome>,
    pub ra_sales_t: Vec<f64>,
    /// Tank level at the start of each week, t.
    pub ast_level_t: Vec<f64>,
    /// Weekly yields the trading problem was built on, t.
    pub yields_t: Vec<f64>,
    /// Allowances sold by the chain, t CO₂.
    pub traded_t: f64,
    pub assignment: Vec<bool>,
    pub residuals: KktResiduals,
    pub nodes: usize,
    pub binaries: usize,
    pub hinted: bool,
}

/// The stacked game of the gray producers, the chain's trading problem and
/// the allowance supply.
pub struct OuterProblem {
    pub(crate) game: Game,
    pub(crate) ledger: CarbonLedger,
    pub(crate) allowances_t: Vec<Option<f64>>,
    pub(crate) participants: Vec<bool>,
    pub(crate) yields_t: Vec<f64>,
    pub(crate) has_market: bool,
}

impl OuterProblem {
    pub fn new(
        scenario: &Scenario,
        ledger: &CarbonLedger,
        yields_t: &[f64],
    ) -> Result<Self, EquilibriumError> {
        let grid = &scenario.grid;
        let curve = &scenario.market;
        let shares = scenario.ga_shares();
        let participants: Vec<bool> = scenario
            .ga
            .iter()
            .map(|g| scenario.participates(&g.name))
            .collect();
        let participating_capacity: f64 = scenario
            .ga
            .iter()
            .zip(&participants)
            .filter(|(_, &p)| p)
            .map(|(g, _)| g.asy.capacity_tph)
            .sum();
        let has_market = ledger.mechanism.clears() && participants.iter().any(|&p| p);

        let mut players = Vec::new();
        let mut allowances_t = Vec::new();
        for (i, ga) in scenario.ga.iter().enumerate() {
            let reward_share = if participants[i] {
                ga.asy.capacity_tph / participating_capacity
            } else {
                0.0
            };
            let carbon =
                ledger.ga_terms(ledger.q_allo_t * shares[i], reward_share, participants[i]);
            allowances_t.push(carbon.cap_t);
            let program = build_ga(
                ga,
                grid,
                &GaMarket {
                    curve,
                    carbon,
                    resolution: Resolution::Weekly,
                },
            )?;
            let mut rivals: Vec<BlockRef> = scenario
                .ga
                .iter()
                .filter(|o| o.name != ga.name)
                .map(|o| BlockRef::new(&o.name, names::GA_SALES))
                .collect();
            rivals.push(BlockRef::new(RA_PLAYER, names::RA_SALES));
            let mut links = vec![(names::RIVAL_SALES.to_string(), Link::Sum(rivals))];
            if has_market && participants[i] {
                links.push((
                    names::CARBON_PRICE.to_string(),
                    Link::Price(CARBON_MARKET.into()),
                ));
            }
            players.push(Player {
                name: ga.name.clone(),
                program,
                links,
            });
        }

        let trading = build_ra_trading(&scenario.ra, grid, yields_t, curve)?;
        players.push(Player {
            name: RA_PLAYER.into(),
            program: trading,
            links: vec![(
                names::RIVAL_SALES.to_string(),
                Link::Sum(
                    scenario
                        .ga
                        .iter()
                        .map(|g| BlockRef::new(&g.name, names::GA_SALES))
                        .collect(),
                ),
            )],
        });

        let mut markets = Vec::new();
        if has_market {
            let supplier =
                carbon_supplier_program(ledger)?.expect("clearing mechanism has a supplier");
            players.push(Player {
                name: SUPPLIER.into(),
                program: supplier,
                links: vec![(
                    SUPPLY_PRICE_BLOCK.to_string(),
                    Link::Price(CARBON_MARKET.into()),
                )],
            });
            markets.push(Market {
                name: CARBON_MARKET.into(),
                len: 1,
                buyers: scenario
                    .ga
                    .iter()
                    .zip(&participants)
                    .filter(|(_, &p)| p)
                    .map(|(g, _)| BlockRef::new(&g.name, names::GA_PURCHASE))
                    .collect(),
                sellers: vec![BlockRef::new(SUPPLIER, SUPPLY_BLOCK)],
                free_disposal: false,
            });
        }
        Ok(Self {
            game: Game::new(players, markets)?,
            ledger: *ledger,
            allowances_t,
            participants,
            yields_t: yields_t.to_vec(),
            has_market,
        })
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn solve(
        &self,
        scenario: &Scenario,
    ) -> Result<(OuterEquilibrium, GameSolution), EquilibriumError> {
        let sol = self.game.solve(&scenario.solver)?;
        Ok((self.read(scenario, &sol)?, sol))
    }

    fn read(
        &self,
        scenario: &Scenario,
        sol: &GameSolution,
    ) -> Result<OuterEquilibrium, EquilibriumError> {
        let players = self.game.players();
        let block = |p: usize, name: &str| -> Result<Vec<f64>, EquilibriumError> {
            Ok(players[p]
                .program
                .block_values(name, &sol.players[p].x)?
                .to_vec())
        };
        let mut ga = Vec::new();
        let mut total = vec![0.0; scenario.grid.weeks];
        for (i, g) in scenario.ga.iter().enumerate() {
            let sales: Vec<f64> = block(i, names::GA_SALES)?
                .into_iter()
                .map(units::ammonia_t)
                .collect();
            total.iter_mut().zip(&sales).for_each(|(t, s)| *t += s);
            let production = block(i, names::GA_PRODUCTION)?
                .into_iter()
                .map(units::ammonia_t)
                .collect();
            let purchase = units::co2_t(block(i, names::GA_PURCHASE)?[0]);
            let emissions = units::co2_t(block(i, "emissions")?[0]);
            ga.push(GaOutcome {
                name: g.name.clone(),
                participates: self.participants[i],
                allowance_t: self.allowances_t[i],
                sales_t: sales,
                production_tph: production,
                purchase_t: purchase,
                emissions_t: emissions,
            });
        }
        let ra = players.len() - 1 - usize::from(self.has_market);
        let ra_sales: Vec<f64> = block(ra, names::RA_SALES)?
            .into_iter()
            .map(units::ammonia_t)
            .collect();
        let ast: Vec<f64> = block(ra, names::RA_AST)?
            .into_iter()
            .map(units::ammonia_t)
            .collect();
        total.iter_mut().zip(&ra_sales).for_each(|(t, s)| *t += s);

        let carbon_price = match self.ledger.mechanism {
            Mechanism::FixedPrice { price_cny_per_t } => price_cny_per_t,
            _ if self.has_market => units::carbon_price_cny(sol.prices[CARBON_MARKET][0]),
            _ => 0.0,
        };
        let traded = ga.iter().map(|g| g.purchase_t).sum();
        Ok(OuterEquilibrium {
            mechanism: self.ledger.mechanism,
            ammonia_price_cny_per_t: total.iter().map(|&d| scenario.market.price(d)).collect(),
            carbon_price_cny_per_t: carbon_price,
            ga,
            ra_sales_t: ra_sales,
            ast_level_t: ast,
            yields_t: self.yields_t.clone(),
            traded_t: traded,
            assignment: sol.assignment.clone(),
            residuals: sol
                .residuals
                .iter()
                .fold(KktResiduals::default(), |a, &r| a.merge(r)),
            nodes: sol.nodes,
            binaries: sol.binaries,
            hinted: sol.hinted,
        })
    }

    /// Range of a linear functional over equilibria sharing `sol`'s
    /// complementarity pattern. Terms name `(player, block)` entries.
    pub fn range(
        &self,
        sol: &GameSolution,
        terms: &[(&str, &str, f64)],
        options: &SolverOptions,
    ) -> Result<(f64, f64), EquilibriumError> {
        let mut cols = Vec::new();
        for &(player, block, coef) in terms {
            let p = self
                .game
                .players()
                .iter()
                .find(|p| p.name == player)
                .ok_or_else(|| crate::game::GameError::UnknownPlayer(player.to_string()))?;
            let len = p.program.block_range(block)?.len();
            for i in 0..len {
                cols.push((self.game.column_of(player, block, i)?, coef));
            }
        }
        Ok(self.game.objective_range(sol, &cols, options)?)
    }

    pub fn carbon_price_range(
        &self,
        sol: &GameSolution,
        options: &SolverOptions,
    ) -> Result<Option<(f64, f64)>, EquilibriumError> {
        if !self.has_market {
            return Ok(None);
        }
        let col = self.game.price_column(CARBON_MARKET, 0)?;
        let (lo, hi) = self.game.objective_range(sol, &[(col, 1.0)], options)?;
        Ok(Some((
            units::carbon_price_cny(lo),
            units::carbon_price_cny(hi),
        )))
    }
}
