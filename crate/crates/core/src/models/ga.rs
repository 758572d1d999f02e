use super::{add_ramps, names, GaParams, ModelError, TimeGrid};
use crate::market::{add_cournot_revenue, add_sales_cap, DemandCurve, GaCarbon, PurchaseRule};
use crate::program::{ConvexProgram, ProgramBuilder, Sense, VarId};
use crate::units;

/// Time resolution of the gray producer's production schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    /// One rate per interval, ramps enforced inside each week.
    Hourly,
    /// One constant rate per week.
    Weekly,
}

/// How the producer meets the ammonia and carbon markets.
#[derive(Debug, Clone, Copy)]
pub struct GaMarket<'a> {
    pub curve: &'a DemandCurve,
    pub carbon: GaCarbon,
    pub resolution: Resolution,
}

/// Gray producer: production cost, Cournot sales against the
/// `rival_sales` parameter, emissions and allowance purchase.
///
/// Blocks: `production` (t/h rates), `sales` (weekly t), `emissions`
/// (annual t CO₂), `purchase` (t CO₂), parameters `rival_sales` and
/// `carbon_price`.
pub fn build_ga(
    params: &GaParams,
    grid: &TimeGrid,
    market: &GaMarket,
) -> Result<ConvexProgram, ModelError> {
    grid.validate()?;
    params.asy.validate(&format!("ga.{}.asy", params.name))?;
    if !(params.emission_t_per_t > 0.0) {
        return Err(super::invalid(
            &format!("ga.{}.emission_t_per_t", params.name),
            "must be positive",
        ));
    }
    super::check_nonnegative(
        &format!("ga.{}.cost_cny_per_t", params.name),
        params.cost_cny_per_t,
    )?;

    let asy = &params.asy;
    let cap = units::ammonia(asy.capacity_tph);
    let dt = grid.step_h;
    let tau = grid.intervals_per_week;
    let weeks = grid.weeks;
    let (per_week, hours_per_var) = match market.resolution {
        Resolution::Hourly => (tau, dt),
        Resolution::Weekly => (1, grid.hours_per_week()),
    };

    let mut b = ProgramBuilder::new(&format!("ga.{}", params.name));
    let prod = b.block(
        names::GA_PRODUCTION,
        weeks * per_week,
        asy.load_min * cap,
        asy.load_max * cap,
        "100 t/h",
    );
    let sales = b.block(names::GA_SALES, weeks, 0.0, f64::INFINITY, "100 t");
    let emissions = b.block("emissions", 1, 0.0, f64::INFINITY, "kt CO2");
    let (lo, hi) = match market.carbon.purchase {
        PurchaseRule::Zero => (0.0, 0.0),
        PurchaseRule::Forced(v) => (units::co2(v), units::co2(v)),
        PurchaseRule::Market => (0.0, f64::INFINITY),
    };
    let purchase = b.block(names::GA_PURCHASE, 1, lo, hi, "kt CO2");
    let rival = b.parameter(names::RIVAL_SALES, vec![0.0; weeks], "100 t");
    let price = b.parameter(
        names::CARBON_PRICE,
        vec![units::carbon_price(market.carbon.price_cny_per_t)],
        "1e4 CNY/kt",
    );

    let unit_cost = units::ammonia_price(params.cost_cny_per_t) * hours_per_var;
    let factor = units::emission_factor(params.emission_t_per_t) * hours_per_var;
    let mut emission_terms: Vec<(VarId, f64)> = vec![(b.var(emissions, 0), 1.0)];

    for w in 0..weeks {
        let rates: Vec<VarId> = (0..per_week)
            .map(|i| b.var(prod, w * per_week + i))
            .collect();
        let d = b.var(sales, w);
        let mut link = vec![(d, 1.0)];
        for &m in &rates {
            b.cost(m, unit_cost);
            link.push((m, -hours_per_var));
            emission_terms.push((m, -factor));
        }
        b.row("ga.sales_link", &link, Sense::Eq, 0.0);
        if market.resolution == Resolution::Hourly {
            add_ramps(&mut b, "ga.ramp", &rates, asy);
        }
        let r = b.var(rival, w);
        add_cournot_revenue(&mut b, d, r, market.curve);
        add_sales_cap(&mut b, w, d, r, market.curve);
    }
    b.row("ga.emissions", &emission_terms, Sense::Eq, 0.0);

    let (q, p) = (b.var(purchase, 0), b.var(price, 0));
    b.quadratic(q, p, 1.0);
    if let Some(allowance_t) = market.carbon.cap_t {
        b.row(
            "ga.carbon_cap",
            &[(q, 1.0), (b.var(emissions, 0), -1.0)],
            Sense::Ge,
            -units::co2(allowance_t),
        );
    }
    Ok(b.build()?)
}
