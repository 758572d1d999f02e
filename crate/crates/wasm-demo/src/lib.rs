//! Browser bindings: cone approximation error, a small Cournot market with
//! allowance trading, and the revenue-split allocation.
//!
//! Every export takes and returns JSON so the page needs no glue types.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use carbamm::allocation::{allocate, allocate_pcam, AllocationInput, Member, Scheme};
use carbamm::game::{BlockRef, Game, Link, Player};
use carbamm::models::cone;
use carbamm::program::{ProgramBuilder, Sense};
use carbamm::solver::SolverOptions;

#[derive(Debug, Serialize)]
pub struct ConeReport {
    pub depth: usize,
    pub bound: f64,
    pub worst_sampled: f64,
    pub samples: usize,
}

/// Worst relative cone violation over random polyhedron points.
pub fn cone_report(depth: usize, samples: usize, seed: u64) -> ConeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let flow: f64 = rng.gen_range(-1.0..1.0);
        let p_n: f64 = rng.gen_range(0.0..1.0);
        let (xi, _) = cone::propagate(flow, p_n, depth);
        if xi[depth] > 0.0 {
            worst = worst.max(flow.hypot(p_n) / xi[depth] - 1.0);
        }
    }
    ConeReport {
        depth,
        bound: cone::cone_error(depth),
        worst_sampled: worst,
        samples,
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct Producer {
    pub name: String,
    /// CNY/t.
    pub cost: f64,
    pub capacity_kt: f64,
    pub emission_t_per_t: f64,
    pub allowance_kt: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct MarketInput {
    /// Price intercept, CNY/t.
    pub max_price: f64,
    /// Demand slope, t per CNY/t.
    pub slope_t_per_cny: f64,
    /// Renewable ammonia sold regardless of price, kt.
    pub green_sales_kt: f64,
    /// Allowances the renewable producer may sell, kt.
    pub incentive_allowance_kt: f64,
    pub trading: bool,
    pub producers: Vec<Producer>,
}

#[derive(Debug, Serialize)]
pub struct ProducerOutcome {
    pub name: String,
    pub output_kt: f64,
    pub purchase_kt: f64,
    pub emissions_kt: f64,
    /// Million CNY.
    pub profit_mcny: f64,
}

#[derive(Debug, Serialize)]
pub struct MarketOutcome {
    pub ammonia_price: f64,
    pub carbon_price: f64,
    pub allowances_sold_kt: f64,
    pub green_revenue_mcny: f64,
    pub producers: Vec<ProducerOutcome>,
}

const SUPPLIER: &str = "renewable";

/// Nash-Cournot equilibrium of the gray producers with an optional
/// allowance market fed by the renewable producer.
pub fn solve_market(input: &MarketInput) -> Result<MarketOutcome, String> {
    if input.producers.is_empty() {
        return Err("at least one producer is needed".into());
    }
    if !(input.slope_t_per_cny > 0.0) {
        return Err("the demand slope must be positive".into());
    }
    // Quantities in kt, prices in CNY/t, so objectives are in 1e3 CNY.
    let slope = 1000.0 / input.slope_t_per_cny;
    let intercept = input.max_price - slope * input.green_sales_kt;

    let mut players = Vec::new();
    for p in &input.producers {
        if !(p.capacity_kt >= 0.0 && p.emission_t_per_t >= 0.0 && p.allowance_kt >= 0.0) {
            return Err(format!("producer `{}` has a negative parameter", p.name));
        }
        let mut b = ProgramBuilder::new(&p.name);
        let q = b.block("output", 1, 0.0, p.capacity_kt, "kt");
        let max_purchase = if input.trading {
            p.emission_t_per_t * p.capacity_kt
        } else {
            0.0
        };
        let buy = b.block("purchase", 1, 0.0, max_purchase, "kt");
        let rival = b.parameter("rival", vec![0.0], "kt");
        let price = b.parameter("carbon_price", vec![0.0], "CNY/t");
        let (qv, bv, rv, pv) = (b.var(q, 0), b.var(buy, 0), b.var(rival, 0), b.var(price, 0));
        b.cost(qv, p.cost - intercept);
        b.quadratic(qv, qv, slope);
        b.quadratic(qv, rv, slope);
        b.quadratic(bv, pv, 1.0);
        b.row(
            "allowance",
            &[(qv, p.emission_t_per_t), (bv, -1.0)],
            Sense::Le,
            p.allowance_kt,
        );
        let mut links = vec![(
            "rival".to_string(),
            Link::Sum(
                input
                    .producers
                    .iter()
                    .filter(|o| o.name != p.name)
                    .map(|o| BlockRef::new(&o.name, "output"))
                    .collect(),
            ),
        )];
        if input.trading {
            links.push(("carbon_price".into(), Link::Price("carbon".into())));
        }
        players.push(Player {
            name: p.name.clone(),
            program: b.build().map_err(|e| e.to_string())?,
            links,
        });
    }
    let mut markets = Vec::new();
    if input.trading {
        let mut b = ProgramBuilder::new(SUPPLIER);
        let s = b.block(
            "supply",
            1,
            0.0,
            input.incentive_allowance_kt.max(0.0),
            "kt",
        );
        let price = b.parameter("carbon_price", vec![0.0], "CNY/t");
        let (sv, pv) = (b.var(s, 0), b.var(price, 0));
        b.quadratic(sv, pv, -1.0);
        players.push(Player {
            name: SUPPLIER.into(),
            program: b.build().map_err(|e| e.to_string())?,
            links: vec![("carbon_price".into(), Link::Price("carbon".into()))],
        });
        markets.push(carbamm::game::Market {
            name: "carbon".into(),
            len: 1,
            buyers: input
                .producers
                .iter()
                .map(|p| BlockRef::new(&p.name, "purchase"))
                .collect(),
            sellers: vec![BlockRef::new(SUPPLIER, "supply")],
            free_disposal: false,
        });
    }

    let game = Game::new(players, markets).map_err(|e| e.to_string())?;
    let sol = game
        .solve(&SolverOptions::default())
        .map_err(|e| e.to_string())?;
    let total: f64 = sol.players[..input.producers.len()]
        .iter()
        .map(|s| s.x[0])
        .sum();
    let ammonia_price = intercept - slope * total;
    let carbon_price = sol.prices.get("carbon").map_or(0.0, |p| p[0]);
    let producers = input
        .producers
        .iter()
        .zip(&sol.players)
        .map(|(p, s)| {
            let (q, b) = (s.x[0], s.x[1]);
            ProducerOutcome {
                name: p.name.clone(),
                output_kt: q,
                purchase_kt: b,
                emissions_kt: q * p.emission_t_per_t,
                profit_mcny: ((ammonia_price - p.cost) * q - carbon_price * b) / 1000.0,
            }
        })
        .collect();
    let sold = sol
        .players
        .get(input.producers.len())
        .map_or(0.0, |s| s.x[0]);
    Ok(MarketOutcome {
        ammonia_price,
        carbon_price,
        allowances_sold_kt: sold,
        green_revenue_mcny: (ammonia_price * input.green_sales_kt + carbon_price * sold) / 1000.0,
        producers,
    })
}

#[derive(Debug, Deserialize)]
pub struct SplitInput {
    /// Revenues without trading.
    pub baseline: [f64; 3],
    /// Revenues with trading, before the pool is shared.
    pub revenue: [f64; 3],
    pub pool: f64,
}

#[derive(Debug, Serialize)]
pub struct SplitRow {
    pub scheme: String,
    pub shares: [f64; 3],
    pub gains_pct: [f64; 3],
    pub willing: [bool; 3],
}

/// The proposed split next to the single-member and equal splits.
pub fn compare_splits(input: &SplitInput) -> Result<Vec<SplitRow>, String> {
    let alloc = AllocationInput {
        traded_t: 1.0,
        carbon_price_cny_per_t: input.pool,
        baseline_cny: input.baseline,
        revenue_cny: input.revenue,
    };
    let mut schemes = vec![Scheme::Pcam, Scheme::Cam2];
    schemes.extend(Member::ALL.map(Scheme::Cam1));
    schemes
        .into_iter()
        .map(|scheme| {
            let r = match scheme {
                Scheme::Pcam => allocate_pcam(&alloc, &SolverOptions::default()),
                other => allocate(&alloc, other),
            };
            r.map(|a| SplitRow {
                scheme: scheme.to_string(),
                shares: a.split_t,
                gains_pct: a.gains.map(|g| 100.0 * g),
                willing: a.individually_rational,
            })
            .map_err(|e| e.to_string())
        })
        .collect()
}

fn to_js<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

fn from_js<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, JsError> {
    serde_json::from_str(text).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = coneError)]
pub fn cone_error_js(depth: usize, samples: usize, seed: u64) -> Result<String, JsError> {
    if !(1..=20).contains(&depth) {
        return Err(JsError::new("depth must be between 1 and 20"));
    }
    to_js(&cone_report(depth, samples.min(1_000_000), seed))
}

#[wasm_bindgen(js_name = solveMarket)]
pub fn solve_market_js(input: &str) -> Result<String, JsError> {
    let input: MarketInput = from_js(input)?;
    to_js(&solve_market(&input).map_err(|e| JsError::new(&e))?)
}

#[wasm_bindgen(js_name = compareSplits)]
pub fn compare_splits_js(input: &str) -> Result<String, JsError> {
    let input: SplitInput = from_js(input)?;
    to_js(&compare_splits(&input).map_err(|e| JsError::new(&e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn producer(name: &str, allowance_kt: f64) -> Producer {
        Producer {
            name: name.into(),
            cost: 2000.0,
            capacity_kt: 20.0,
            emission_t_per_t: 3.0,
            allowance_kt,
        }
    }

    fn market(trading: bool, allowance_kt: f64) -> MarketInput {
        MarketInput {
            max_price: 2900.0,
            slope_t_per_cny: 35.0,
            green_sales_kt: 0.0,
            incentive_allowance_kt: 6.0,
            trading,
            producers: vec![producer("a", allowance_kt), producer("b", allowance_kt)],
        }
    }

    #[test]
    fn duopoly_matches_the_closed_form() {
        let out = solve_market(&market(false, 100.0)).unwrap();
        for p in &out.producers {
            assert!((p.output_kt - 10.5).abs() < 1e-6);
        }
        assert!((out.ammonia_price - 2300.0).abs() < 1e-4);
    }

    #[test]
    fn scarce_allowances_have_a_price() {
        let out = solve_market(&market(true, 24.0)).unwrap();
        assert!(out.carbon_price > 0.0);
        let emitted: f64 = out.producers.iter().map(|p| p.emissions_kt).sum();
        assert!(emitted <= 48.0 + 6.0 + 1e-6);
        assert!((out.allowances_sold_kt - 6.0).abs() < 1e-6);
    }

    #[test]
    fn splits_report_willingness() {
        let rows = compare_splits(&SplitInput {
            baseline: [2.67, 1.81, 0.11],
            revenue: [2.53, 1.73, 0.23],
            pool: 0.46,
        })
        .unwrap();
        assert!(rows[0].willing.iter().all(|&w| w));
        let to_ra = rows.iter().find(|r| r.scheme == "CAM1:ra").unwrap();
        assert_eq!(to_ra.willing, [false, false, true]);
    }

    #[test]
    fn sampled_cone_error_stays_under_the_bound() {
        let r = cone_report(4, 5_000, 1);
        assert!(r.worst_sampled <= r.bound + 1e-12);
    }
}
