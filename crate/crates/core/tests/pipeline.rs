use std::sync::OnceLock;

use carbamm::equilibrium::{proposition1_check, verify_equilibrium, EquilibriumResult, Pipeline};
use carbamm::market::Mechanism;
use carbamm::scenario::{Allowances, ExplicitCaps, Scenario};

fn short() -> Scenario {
    let mut s = Scenario::bundled_default();
    s.grid.weeks = 2;
    s
}

fn pipeline() -> &'static Pipeline {
    static P: OnceLock<Pipeline> = OnceLock::new();
    P.get_or_init(|| Pipeline::new(&short()).expect("short scenario solves"))
}

fn assert_certified(r: &EquilibriumResult, s: &Scenario) {
    assert!(
        r.max_residual() <= 1e-6,
        "{}: residual {}",
        r.outer.mechanism.label(),
        r.max_residual()
    );
    let v = verify_equilibrium(r, s).unwrap();
    assert!(
        v.passes(1e-6),
        "{}: deviation {:?}",
        r.outer.mechanism.label(),
        v.deviations
    );
}

#[test]
fn every_mechanism_is_certified() {
    let p = pipeline();
    for m in [
        Mechanism::NoCap,
        Mechanism::CapOnly,
        Mechanism::FixedPrice {
            price_cny_per_t: 40.0,
        },
        Mechanism::Pcim,
    ] {
        assert_certified(&p.run(m).unwrap(), p.scenario());
    }
}

#[test]
fn cap_lowers_emissions_and_trading_raises_chain_revenue() {
    let p = pipeline();
    let m1 = p.run(Mechanism::NoCap).unwrap();
    let m2 = p.run(Mechanism::CapOnly).unwrap();
    let pcim = p.run(Mechanism::Pcim).unwrap();
    let caps = p.scenario().caps().unwrap();
    assert!(m2.emissions_t <= caps.q_allo_t * (1.0 + 1e-9));
    assert!(m1.emissions_t > m2.emissions_t);
    assert!(pcim.emissions_t <= caps.total_t * (1.0 + 1e-9));
    assert!(pcim.revenues.chain_total() > m2.revenues.chain_total());
    assert!(pcim.outer.carbon_price_cny_per_t > 0.0);
}

#[test]
fn fixed_price_moves_only_the_transfer() {
    let p = pipeline();
    let lo = p
        .run(Mechanism::FixedPrice {
            price_cny_per_t: 20.0,
        })
        .unwrap();
    let hi = p
        .run(Mechanism::FixedPrice {
            price_cny_per_t: 70.0,
        })
        .unwrap();
    let q = lo.outer.traded_t;
    assert!((hi.outer.traded_t - q).abs() <= 1e-6 * q);
    let transfer = 50.0 * q;
    let chain = hi.revenues.chain_total() - lo.revenues.chain_total();
    let ga = hi.revenues.ga_total() - lo.revenues.ga_total();
    assert!((chain - transfer).abs() <= 1e-6 * lo.revenues.chain_total());
    assert!((ga + transfer).abs() <= 1e-6 * lo.revenues.chain_total());
}

#[test]
fn perturbed_carbon_price_is_caught() {
    let p = pipeline();
    let mut r = p.run(Mechanism::Pcim).unwrap();
    r.outer.carbon_price_cny_per_t *= 1.1;
    let v = verify_equilibrium(&r, p.scenario()).unwrap();
    assert!(!v.passes(1e-6), "a 10% price error went unnoticed");
}

#[test]
fn runs_are_deterministic() {
    let strip = |mut r: EquilibriumResult| {
        r.timings = Default::default();
        serde_json::to_string(&r).unwrap()
    };
    let a = Pipeline::new(&short())
        .unwrap()
        .run(Mechanism::Pcim)
        .unwrap();
    let b = pipeline().run(Mechanism::Pcim).unwrap();
    assert_eq!(strip(a), strip(b));
}

#[test]
fn sales_split_is_indeterminate() {
    let p = pipeline();
    let r = p.run(Mechanism::Pcim).unwrap();
    let caps = p.scenario().caps().unwrap();
    let report = proposition1_check(&r, caps.q_rewa_t, &p.scenario().solver).unwrap();
    assert!(report.total_spread_t <= 1e-6 * r.outer.traded_t.max(1.0));
    assert!(report.split_is_indeterminate(1.0));
}

#[test]
fn loose_cap_clears_at_zero() {
    let p = pipeline();
    let mut s = p.scenario().clone();
    let hours = s.grid.hours_per_week() * s.grid.weeks as f64;
    let at_capacity: f64 =
        s.ga.iter()
            .map(|g| g.emission_t_per_t * g.asy.capacity_tph * hours)
            .sum();
    s.carbon.allowances = Allowances::Explicit(ExplicitCaps {
        q_allo_t: 1.2 * at_capacity,
        q_rewa_t: 1_000.0,
    });
    let r = p.rebase(s).unwrap().run(Mechanism::Pcim).unwrap();
    assert!(r.outer.carbon_price_cny_per_t.abs() <= 1e-6);
}

#[test]
fn weekly_prices_are_finite_and_nonnegative() {
    let r = pipeline().run(Mechanism::CapOnly).unwrap();
    for w in &r.weeks {
        for series in [
            &w.price_electricity_hp,
            &w.price_electricity_ra,
            &w.price_hydrogen,
        ] {
            assert!(series.iter().all(|p| p.is_finite() && *p >= -1e-6));
        }
    }
    assert!((r.yield_gap).abs() < 1e-6);
}
