//! Competitive suppliers clearing against an inelastic buyer: the market
//! price must equal the cost of the marginal supplier.

use proptest::prelude::*;

use carbamm::game::{BlockRef, Game, Link, Market, Player};
use carbamm::program::ProgramBuilder;
use carbamm::solver::SolverOptions;

fn supplier(name: &str, cost: f64, capacity: f64) -> Player {
    let mut b = ProgramBuilder::new(name);
    let s = b.block("s", 1, 0.0, capacity, "");
    let p = b.parameter("price", vec![0.0], "");
    let (sv, pv) = (b.var(s, 0), b.var(p, 0));
    b.cost(sv, cost);
    b.quadratic(sv, pv, -1.0);
    Player {
        name: name.into(),
        program: b.build().unwrap(),
        links: vec![("price".into(), Link::Price("power".into()))],
    }
}

/// Buys up to `demand` at any price below `value`.
fn buyer(value: f64, demand: f64) -> Player {
    let mut b = ProgramBuilder::new("load");
    let d = b.block("d", 1, 0.0, demand, "");
    let p = b.parameter("price", vec![0.0], "");
    let (dv, pv) = (b.var(d, 0), b.var(p, 0));
    b.cost(dv, -value);
    b.quadratic(dv, pv, 1.0);
    Player {
        name: "load".into(),
        program: b.build().unwrap(),
        links: vec![("price".into(), Link::Price("power".into()))],
    }
}

fn clear(stack: &[(f64, f64)], value: f64, demand: f64) -> (f64, Vec<f64>) {
    let mut players: Vec<Player> = stack
        .iter()
        .enumerate()
        .map(|(i, &(c, cap))| supplier(&format!("g{i}"), c, cap))
        .collect();
    players.push(buyer(value, demand));
    let market = Market {
        name: "power".into(),
        len: 1,
        buyers: vec![BlockRef::new("load", "d")],
        sellers: (0..stack.len())
            .map(|i| BlockRef::new(&format!("g{i}"), "s"))
            .collect(),
        free_disposal: false,
    };
    let game = Game::new(players, vec![market]).unwrap();
    let sol = game.solve(&SolverOptions::default()).unwrap();
    assert!(sol.max_residual() < 1e-6);
    let output = sol.players[..stack.len()].iter().map(|p| p.x[0]).collect();
    (sol.prices["power"][0], output)
}

/// Price and dispatch by filling the cheapest capacity first.
fn merit_order(stack: &[(f64, f64)], demand: f64) -> (f64, Vec<f64>) {
    let mut order: Vec<usize> = (0..stack.len()).collect();
    order.sort_by(|&a, &b| stack[a].0.total_cmp(&stack[b].0));
    let mut left = demand;
    let mut dispatch = vec![0.0; stack.len()];
    let mut price = 0.0;
    for i in order {
        if left <= 0.0 {
            break;
        }
        let take = left.min(stack[i].1);
        dispatch[i] = take;
        left -= take;
        price = stack[i].0;
    }
    (price, dispatch)
}

#[test]
fn three_unit_stack() {
    let stack = [(30.0, 4.0), (10.0, 5.0), (20.0, 3.0)];
    let (price, out) = clear(&stack, 100.0, 7.0);
    assert!((price - 20.0).abs() < 1e-6);
    assert!((out[1] - 5.0).abs() < 1e-6 && (out[2] - 2.0).abs() < 1e-6 && out[0].abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn price_is_the_marginal_cost(
        units in prop::collection::vec((1.0..50.0f64, 1.0..10.0f64), 2..5),
        fill in 0.05..0.95f64,
    ) {
        let capacity: f64 = units.iter().map(|u| u.1).sum();
        let demand = fill * capacity;
        // Keep demand off the steps of the supply curve and costs distinct.
        let mut costs: Vec<f64> = units.iter().map(|u| u.0).collect();
        costs.sort_by(f64::total_cmp);
        prop_assume!(costs.windows(2).all(|w| w[1] - w[0] > 0.5));
        let mut order: Vec<&(f64, f64)> = units.iter().collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cum = 0.0;
        for u in &order {
            cum += u.1;
            prop_assume!((cum - demand).abs() > 1e-3);
        }
        let (price, out) = clear(&units, 100.0, demand);
        let (expected, dispatch) = merit_order(&units, demand);
        prop_assert!((price - expected).abs() < 1e-5, "price {} expected {}", price, expected);
        for (a, b) in out.iter().zip(&dispatch) {
            prop_assert!((a - b).abs() < 1e-5);
        }
    }
}
