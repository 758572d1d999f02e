use super::{add_ramps, add_tank, invalid, names, ModelError, RaParams, TimeGrid};
use crate::market::{add_cournot_revenue, add_sales_cap, DemandCurve};
use crate::program::{ConvexProgram, ProgramBuilder, Sense};
use crate::units;

/// Value placed on each tonne produced during the week.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmmoniaValuation {
    pub price_cny_per_t: f64,
}

/// Synthesis plant for week `week`: hydrogen and power purchases, backup
/// power, tank and the synthesis unit. Production is valued linearly.
///
/// Blocks: `buy_hydrogen` (1e4 Nm³/h), `buy_electricity` (100 MW),
/// `production` (100 t/h), parameter prices `price_hydrogen` and
/// `price_electricity_ra`.
pub fn build_ra(
    params: &RaParams,
    grid: &TimeGrid,
    week: usize,
    valuation: AmmoniaValuation,
) -> Result<ConvexProgram, ModelError> {
    grid.validate()?;
    params.validate(grid)?;
    let tau = grid.intervals_per_week;
    let dt = grid.step_h;
    let asy = &params.asy;
    let cap = units::ammonia(asy.capacity_tph);

    let mut b = ProgramBuilder::new("ra");
    let buy_h = b.block(names::RA_BUY_H2, tau, 0.0, f64::INFINITY, "1e4 Nm3/h");
    let buy_e = b.block(names::RA_BUY_E, tau, 0.0, f64::INFINITY, "100 MW");
    let backup = b.block(names::RA_BACKUP, tau, 0.0, f64::INFINITY, "100 MW");
    let prod = b.block(
        names::RA_PRODUCTION,
        tau,
        asy.load_min * cap,
        asy.load_max * cap,
        "100 t/h",
    );
    let h2_use = b.block("hydrogen_use", tau, 0.0, f64::INFINITY, "1e4 Nm3/h");
    let asy_power = b.block("asy_power", tau, 0.0, f64::INFINITY, "100 MW");
    let price_h = b.parameter(names::PRICE_H2, vec![0.0; tau], "1e4 CNY/1e4 Nm3");
    let price_e = b.parameter(names::PRICE_E_RA, vec![0.0; tau], "1e4 CNY/100 MWh");
    let hst = add_tank(&mut b, "hst", &params.hst, tau, dt);

    let h2a = units::synthesis_hydrogen_yield(params.h2a_t_per_nm3);
    let p2a = units::synthesis_power_yield(params.p2a_t_per_mwh);
    let value = units::ammonia_price(valuation.price_cny_per_t) * dt;
    let first = grid.week_range(week).start;

    let rates: Vec<_> = b.vars(prod).collect();
    for (t, &m) in rates.iter().enumerate() {
        let (fh, pe, pk) = (b.var(buy_h, t), b.var(buy_e, t), b.var(backup, t));
        let (fu, pa) = (b.var(h2_use, t), b.var(asy_power, t));
        b.quadratic(fh, b.var(price_h, t), dt);
        b.quadratic(pe, b.var(price_e, t), dt);
        b.cost(
            pk,
            units::electricity_price(params.backup_price_cny_per_mwh.at(first + t)) * dt,
        );
        b.cost(m, -value);
        b.row(
            "ra.hydrogen_balance",
            &[
                (fu, 1.0),
                (b.var(hst.inflow, t), 1.0),
                (b.var(hst.outflow, t), -1.0),
                (fh, -1.0),
            ],
            Sense::Eq,
            0.0,
        );
        b.row(
            "ra.power_balance",
            &[(pk, 1.0), (pe, 1.0), (pa, -1.0)],
            Sense::Eq,
            0.0,
        );
        b.row("ra.hydrogen_yield", &[(m, 1.0), (fu, -h2a)], Sense::Eq, 0.0);
        b.row("ra.power_yield", &[(m, 1.0), (pa, -p2a)], Sense::Eq, 0.0);
    }
    add_ramps(&mut b, "ra.ramp", &rates, asy);
    Ok(b.build()?)
}

/// Annual trading problem of the synthesis plant with weekly yields fixed:
/// sales `D_w`, storage `S_w` with `S_{w+1} = S_w + Y_w − D_w` cyclic over
/// the year and `0 ≤ S_w ≤ W_ast`, Cournot revenue against `rival_sales`.
pub fn build_ra_trading(
    params: &RaParams,
    grid: &TimeGrid,
    yields_t: &[f64],
    curve: &DemandCurve,
) -> Result<ConvexProgram, ModelError> {
    grid.validate()?;
    let weeks = grid.weeks;
    if yields_t.len() != weeks {
        return Err(ModelError::ProfileLength {
            expected: weeks,
            got: yields_t.len(),
        });
    }
    if let Some(y) = yields_t.iter().find(|y| !(**y >= 0.0)) {
        return Err(invalid("yields", format!("weekly yield {y} is negative")));
    }
    super::check_nonnegative("ra.ast_capacity_t", params.ast_capacity_t)?;

    let mut b = ProgramBuilder::new("ra.trading");
    let sales = b.block(names::RA_SALES, weeks, 0.0, f64::INFINITY, "100 t");
    let level = b.block(
        names::RA_AST,
        weeks,
        0.0,
        units::ammonia(params.ast_capacity_t),
        "100 t",
    );
    let rival = b.parameter(names::RIVAL_SALES, vec![0.0; weeks], "100 t");
    for (w, &yield_t) in yields_t.iter().enumerate() {
        let (d, s, r) = (b.var(sales, w), b.var(level, w), b.var(rival, w));
        let next = b.var(level, (w + 1) % weeks);
        let y = units::ammonia(yield_t);
        if next == s {
            b.row("ra.ast_balance", &[(d, 1.0)], Sense::Eq, y);
        } else {
            b.row(
                "ra.ast_balance",
                &[(next, 1.0), (s, -1.0), (d, 1.0)],
                Sense::Eq,
                y,
            );
        }
        add_cournot_revenue(&mut b, d, r, curve);
        add_sales_cap(&mut b, w, d, r, curve);
    }
    Ok(b.build()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Series, SynthesisParams, TankParams};
    use crate::solver::{solve, SolverOptions};

    pub(crate) fn params() -> RaParams {
        RaParams {
            asy: SynthesisParams {
                capacity_tph: 15.66,
                load_min: 0.0,
                load_max: 1.0,
                ramp_down: 0.2,
                ramp_up: 0.2,
            },
            h2a_t_per_nm3: 5.0556e-4,
            p2a_t_per_mwh: 1.6667,
            hst: TankParams {
                capacity_nm3: 2e5,
                level_min: 0.1,
                level_max: 0.9,
            },
            ast_capacity_t: 1000.0,
            backup_price_cny_per_mwh: Series::Flat(400.0),
        }
    }

    fn grid(weeks: usize, tau: usize) -> TimeGrid {
        TimeGrid {
            weeks,
            intervals_per_week: tau,
            step_h: 1.0,
        }
    }

    #[test]
    fn expensive_hydrogen_shuts_the_plant_jointly() {
        let g = grid(1, 3);
        let mut p = build_ra(
            &params(),
            &g,
            0,
            AmmoniaValuation {
                price_cny_per_t: 2500.0,
            },
        )
        .unwrap();
        p.set_parameter(names::PRICE_H2, &[units::hydrogen_price(100.0); 3])
            .unwrap();
        let s = solve(&p, &SolverOptions::default());
        assert!(s.status().is_optimal());
        for name in [names::RA_PRODUCTION, "hydrogen_use", "asy_power"] {
            assert!(s.block(&p, name).unwrap().iter().all(|v| v.abs() < 1e-7));
        }
    }

    #[test]
    fn conversion_identities_hold() {
        let g = grid(1, 4);
        let mut p = build_ra(
            &params(),
            &g,
            0,
            AmmoniaValuation {
                price_cny_per_t: 2500.0,
            },
        )
        .unwrap();
        p.set_parameter(names::PRICE_H2, &[units::hydrogen_price(0.5); 4])
            .unwrap();
        p.set_parameter(names::PRICE_E_RA, &[units::electricity_price(200.0); 4])
            .unwrap();
        let s = solve(&p, &SolverOptions::default());
        let m = s.block(&p, names::RA_PRODUCTION).unwrap();
        let fu = s.block(&p, "hydrogen_use").unwrap();
        let pa = s.block(&p, "asy_power").unwrap();
        for t in 0..4 {
            assert!((units::ammonia_t(m[t]) - 15.66).abs() < 1e-6);
            let from_h2 = units::hydrogen_nm3(fu[t]) * 5.0556e-4;
            let from_power = units::power_mw(pa[t]) * 1.6667;
            assert!((units::ammonia_t(m[t]) - from_h2).abs() < 1e-6);
            assert!((units::ammonia_t(m[t]) - from_power).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_yield_is_sold_as_produced_over_the_year() {
        // Telescoping the storage balance over a cyclic year: Σ D = Σ Y.
        let g = grid(4, 168);
        let curve = DemandCurve::new(2900.0, 35.0).unwrap();
        let y = 168.0 * 10.0;
        let p = build_ra_trading(&params(), &g, &[y; 4], &curve).unwrap();
        let s = solve(&p, &SolverOptions::default());
        let d = s.block(&p, names::RA_SALES).unwrap();
        let total: f64 = d.iter().map(|&v| units::ammonia_t(v)).sum();
        assert!((total - 4.0 * y).abs() < 1e-6);
        for v in d {
            assert!((units::ammonia_t(*v) - y).abs() < 1e-5);
        }
    }

    #[test]
    fn no_storage_sells_each_week_exactly() {
        let g = grid(3, 168);
        let curve = DemandCurve::new(2900.0, 35.0).unwrap();
        let mut pr = params();
        pr.ast_capacity_t = 0.0;
        let yields = [1000.0, 3000.0, 2000.0];
        let p = build_ra_trading(&pr, &g, &yields, &curve).unwrap();
        let s = solve(&p, &SolverOptions::default());
        let d = s.block(&p, names::RA_SALES).unwrap();
        for w in 0..3 {
            assert!((units::ammonia_t(d[w]) - yields[w]).abs() < 1e-6);
        }
    }
}
