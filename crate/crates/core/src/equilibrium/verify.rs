use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::outer::{RA_PLAYER, SUPPLIER};
use super::{EquilibriumError, EquilibriumResult, WeeklyChain};
use crate::market::{carbon_supplier_program, DemandCurve, SUPPLY_BLOCK, SUPPLY_PRICE_BLOCK};
use crate::models::{build_ga, build_ra_trading, names, GaMarket, Resolution};
use crate::program::{ConvexProgram, ProgramError, Solution};
use crate::scenario::Scenario;
use crate::solver::solve;
use crate::units;

/// Unilateral deviation of one stakeholder from the equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub stakeholder: String,
    /// Objective at the equilibrium point, CNY (cost form).
    pub equilibrium_cny: f64,
    /// Objective of the best response, CNY.
    pub best_cny: f64,
    /// `(equilibrium − best) / max(|equilibrium|, 1e4 CNY)`.
    pub improvement: f64,
}

/// Brute-force best response of a Cournot seller in one week, holding its
/// weekly marginal cost at the value implied by its best response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScan {
    pub player: String,
    pub week: usize,
    pub equilibrium_t: f64,
    pub best_t: f64,
    /// Profit gain of the best grid point over the equilibrium sales, CNY.
    pub gain_cny: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub deviations: Vec<Deviation>,
    pub scans: Vec<GridScan>,
    pub grid_step_t: f64,
}

impl VerificationReport {
    pub fn max_improvement(&self) -> f64 {
        self.deviations
            .iter()
            .map(|d| d.improvement)
            .fold(0.0, f64::max)
    }

    /// Largest distance between a grid best response and the equilibrium.
    pub fn max_scan_offset_t(&self) -> f64 {
        self.scans
            .iter()
            .map(|s| (s.best_t - s.equilibrium_t).abs())
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_improvement() <= tol && self.max_scan_offset_t() <= self.grid_step_t
    }
}

/// Re-solves every stakeholder's own program at the equilibrium prices and
/// rival quantities, and scans weekly Cournot sales on a 1 t grid.
pub fn verify_equilibrium(
    result: &EquilibriumResult,
    scenario: &Scenario,
) -> Result<VerificationReport, EquilibriumError> {
    if result.weeks.iter().any(|w| w.x.is_empty()) {
        return Err(EquilibriumError::MissingSchedules);
    }
    let outer = &result.outer;
    let grid = &scenario.grid;
    let curve = &scenario.market;
    let ledger = scenario.ledger(outer.mechanism)?;
    let opts = &scenario.solver;
    let tau = grid.intervals_per_week;
    let to_pu = |v: &[f64], f: fn(f64) -> f64| -> Vec<f64> { v.iter().map(|&c| f(c)).collect() };
    let has_market = ledger.mechanism.clears() && outer.ga.iter().any(|g| g.participates);

    let mut deviations = Vec::new();
    let mut scans = Vec::new();

    let participating_capacity: f64 = scenario
        .ga
        .iter()
        .zip(&outer.ga)
        .filter(|(_, o)| o.participates)
        .map(|(g, _)| g.asy.capacity_tph)
        .sum();
    let shares = scenario.ga_shares();
    for (i, (params, o)) in scenario.ga.iter().zip(&outer.ga).enumerate() {
        let reward_share = if o.participates {
            params.asy.capacity_tph / participating_capacity
        } else {
            0.0
        };
        let carbon = ledger.ga_terms(ledger.q_allo_t * shares[i], reward_share, o.participates);
        let mut prog = build_ga(
            params,
            grid,
            &GaMarket {
                curve,
                carbon,
                resolution: Resolution::Hourly,
            },
        )?;
        let rival = rival_sales(result, Some(i));
        prog.set_parameter(names::RIVAL_SALES, &to_pu(&rival, units::ammonia))?;
        if has_market && o.participates {
            prog.set_parameter(
                names::CARBON_PRICE,
                &[units::carbon_price(outer.carbon_price_cny_per_t)],
            )?;
        }
        let hourly: Vec<f64> = o
            .production_tph
            .iter()
            .flat_map(|&m| std::iter::repeat(units::ammonia(m)).take(tau))
            .collect();
        let point = fill(
            &prog,
            &[
                (names::GA_PRODUCTION, hourly),
                (names::GA_SALES, to_pu(&o.sales_t, units::ammonia)),
                ("emissions", vec![units::co2(o.emissions_t)]),
                (names::GA_PURCHASE, vec![units::co2(o.purchase_t)]),
            ],
        )?;
        let (dev, sol) = deviation(&o.name, &prog, &point, opts)?;
        deviations.push(dev);
        scans.extend(scan(
            &o.name,
            &prog,
            &sol,
            "ga.sales_link",
            &o.sales_t,
            &rival,
            curve,
        ));
    }

    let rival = rival_sales(result, None);
    let mut trading = build_ra_trading(&scenario.ra, grid, &outer.yields_t, curve)?;
    trading.set_parameter(names::RIVAL_SALES, &to_pu(&rival, units::ammonia))?;
    let point = fill(
        &trading,
        &[
            (names::RA_SALES, to_pu(&outer.ra_sales_t, units::ammonia)),
            (names::RA_AST, to_pu(&outer.ast_level_t, units::ammonia)),
        ],
    )?;
    let (dev, sol) = deviation(RA_PLAYER, &trading, &point, opts)?;
    deviations.push(dev);
    scans.extend(scan(
        RA_PLAYER,
        &trading,
        &sol,
        "ra.ast_balance",
        &outer.ra_sales_t,
        &rival,
        curve,
    ));

    if has_market {
        if let Some(mut supplier) = carbon_supplier_program(&ledger)? {
            supplier.set_parameter(
                SUPPLY_PRICE_BLOCK,
                &[units::carbon_price(outer.carbon_price_cny_per_t)],
            )?;
            let point = fill(
                &supplier,
                &[(SUPPLY_BLOCK, vec![units::co2(outer.traded_t)])],
            )?;
            deviations.push(deviation(SUPPLIER, &supplier, &point, opts)?.0);
        }
    }

    let profile = scenario.profile()?;
    let weekly: Vec<Vec<Deviation>> = result
        .weeks
        .par_iter()
        .map(|d| {
            let w = d.week;
            let chain =
                WeeklyChain::build(scenario, &profile, w, outer.ammonia_price_cny_per_t[w])?;
            let e_hp = to_pu(&d.price_electricity_hp, units::electricity_price);
            let e_ra = to_pu(&d.price_electricity_ra, units::electricity_price);
            let h2 = to_pu(&d.price_hydrogen, units::hydrogen_price);
            let mut out = Vec::new();
            for (k, (name, base, prices)) in [
                (
                    "rg",
                    &chain.rg,
                    [(names::PRICE_E_HP, &e_hp), (names::PRICE_E_RA, &e_ra)],
                ),
                (
                    "hp",
                    &chain.hp,
                    [(names::PRICE_E_HP, &e_hp), (names::PRICE_H2, &h2)],
                ),
                (
                    "ra",
                    &chain.ra,
                    [(names::PRICE_E_RA, &e_ra), (names::PRICE_H2, &h2)],
                ),
            ]
            .into_iter()
            .enumerate()
            {
                let mut prog = base.clone();
                for (block, values) in prices {
                    prog.set_parameter(block, values)?;
                }
                let point = chain.local_point(&prog, k, &d.x);
                out.push(deviation(&format!("{name}.week{w}"), &prog, &point, opts)?.0);
            }
            Ok(out)
        })
        .collect::<Result<_, EquilibriumError>>()?;
    deviations.extend(weekly.into_iter().flatten());

    Ok(VerificationReport {
        deviations,
        scans,
        grid_step_t: 1.0,
    })
}

/// Weekly sales of everyone except GA `skip` (`None` skips the chain).
fn rival_sales(result: &EquilibriumResult, skip: Option<usize>) -> Vec<f64> {
    let outer = &result.outer;
    let mut total = match skip {
        Some(_) => outer.ra_sales_t.clone(),
        None => vec![0.0; outer.ra_sales_t.len()],
    };
    for (i, g) in outer.ga.iter().enumerate() {
        if Some(i) != skip {
            total.iter_mut().zip(&g.sales_t).for_each(|(t, s)| *t += s);
        }
    }
    total
}

fn fill(prog: &ConvexProgram, blocks: &[(&str, Vec<f64>)]) -> Result<Vec<f64>, EquilibriumError> {
    let mut x = prog.parameter_values();
    for (name, values) in blocks {
        let range = prog.block_range(name)?;
        if range.len() != values.len() {
            return Err(ProgramError::DimensionMismatch(format!(
                "block `{name}` has {} entries, got {}",
                range.len(),
                values.len()
            ))
            .into());
        }
        x[range].copy_from_slice(values);
    }
    if let Some(j) = x.iter().position(|v| v.is_nan()) {
        return Err(ProgramError::DimensionMismatch(format!(
            "no equilibrium value for {}",
            prog.var_name(j)
        ))
        .into());
    }
    Ok(x)
}

fn deviation(
    name: &str,
    prog: &ConvexProgram,
    point: &[f64],
    opts: &crate::solver::SolverOptions,
) -> Result<(Deviation, Solution), EquilibriumError> {
    let sol = solve(prog, opts);
    if !sol.status().is_optimal() {
        return Err(EquilibriumError::BestResponse {
            player: name.to_string(),
            status: sol.status(),
        });
    }
    let at_equilibrium = prog.objective_value(point);
    let best = sol.objective();
    Ok((
        Deviation {
            stakeholder: name.to_string(),
            equilibrium_cny: units::money_cny(at_equilibrium),
            best_cny: units::money_cny(best),
            improvement: (at_equilibrium - best) / at_equilibrium.abs().max(1.0),
        },
        sol,
    ))
}

/// For each week, maximises `d·price(d + rival) − λ_w·d` over a 1 t grid,
/// where `λ_w` is the dual of the row tying week `w`'s sales to the rest of
/// the program.
fn scan(
    player: &str,
    prog: &ConvexProgram,
    sol: &Solution,
    family: &str,
    sales_t: &[f64],
    rival_t: &[f64],
    curve: &DemandCurve,
) -> Vec<GridScan> {
    let duals: Vec<f64> = prog
        .rows()
        .iter()
        .enumerate()
        .filter(|(_, row)| prog.family(row) == family)
        .map(|(r, _)| units::ammonia_price_cny(sol.row_duals[r]))
        .collect();
    duals
        .iter()
        .zip(sales_t.iter().zip(rival_t))
        .enumerate()
        .map(|(week, (&marginal, (&own, &rival)))| {
            let profit = |d: f64| d * curve.price(d + rival) - marginal * d;
            let top = (curve.saturation_t() - rival).max(0.0).floor() as usize;
            let (best_t, best) = (0..=top).map(|d| (d as f64, profit(d as f64))).fold(
                (0.0, f64::NEG_INFINITY),
                |acc, p| if p.1 > acc.1 { p } else { acc },
            );
            GridScan {
                player: player.to_string(),
                week,
                equilibrium_t: own,
                best_t,
                gain_cny: best - profit(own),
            }
        })
        .collect()
}
