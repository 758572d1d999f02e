//! End-to-end acceptance checks. Prints one line per criterion and exits
//! nonzero if any fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use carbamm::allocation::{
    allocate, allocate_pcam, deviation_sum, perturb_ir, AllocationInput, Member, Scheme,
};
use carbamm::equilibrium::{
    proposition1_check, verify_equilibrium, weekly_yields, EquilibriumResult, OuterProblem,
    Pipeline,
};
use carbamm::market::Mechanism;
use carbamm::models::cone::{cone_error, propagate, satisfies};
use carbamm::scenario::{grandfather_caps, Allowances, ExplicitCaps, GrandfatherSpec, Scenario};
use carbamm::solver::SolverOptions;

type Check = Result<String, String>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Context {
    scenario: Scenario,
    pipeline: Pipeline,
    runs: Vec<EquilibriumResult>,
}

impl Context {
    fn run(&self, mechanism: Mechanism) -> &EquilibriumResult {
        self.runs
            .iter()
            .find(|r| r.outer.mechanism == mechanism)
            .expect("mechanism was solved up front")
    }
}

const FIXED_PRICES: [f64; 3] = [25.0, 50.0, 80.0];

fn mechanisms() -> Vec<Mechanism> {
    let mut m = vec![Mechanism::NoCap, Mechanism::CapOnly, Mechanism::Pcim];
    m.extend(FIXED_PRICES.map(|p| Mechanism::FixedPrice { price_cny_per_t: p }));
    m
}

fn cone() -> Check {
    let z1 = cone_error(1);
    let z6 = cone_error(6);
    let exact1 = 2f64.sqrt() - 1.0;
    let exact6 = 1.0 / (std::f64::consts::PI / 128.0).cos() - 1.0;
    if (z1 - exact1).abs() > 1e-12 || (z6 - exact6).abs() > 1e-12 || (z6 - 3.013e-4).abs() > 5e-8 {
        return Err(format!("eps(1) = {z1:.15}, eps(6) = {z6:.6e}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let flow: f64 = rng.gen_range(-5.0..5.0);
        let p_n: f64 = rng.gen_range(0.0..5.0);
        let (xi, om) = propagate(flow, p_n, 6);
        // Any inlet pressure at or above the last ξ is admitted.
        let p_m = xi[6] * (1.0 + rng.gen_range(0.0..1e-3) * rng.gen_range(0.0..1.0f64).powi(8));
        if !satisfies(flow, p_n, p_m, &xi, &om, 1e-12) {
            return Err(format!("witness rejected at flow {flow}, p_n {p_n}"));
        }
        let norm = flow.hypot(p_n);
        if norm > 0.0 {
            worst = worst.max(norm / p_m - 1.0);
        }
    }
    ensure(
        worst <= z6 + 1e-9,
        format!("eps(1) = sqrt2 - 1, eps(6) = {z6:.6e}, worst sampled violation {worst:.6e}"),
    )
}

fn duopoly() -> Check {
    let mut s = Scenario::bundled_default();
    s.freeze_allowances().map_err(|e| e.to_string())?;
    let template = s.ga[0].clone();
    s.ga = ["GA1", "GA2"]
        .iter()
        .map(|name| {
            let mut g = template.clone();
            g.name = name.to_string();
            g
        })
        .collect();
    let weeks = s.grid.weeks;
    let ledger = s.ledger(Mechanism::NoCap).map_err(|e| e.to_string())?;
    let problem = OuterProblem::new(&s, &ledger, &vec![0.0; weeks]).map_err(|e| e.to_string())?;
    let (eq, _) = problem.solve(&s).map_err(|e| e.to_string())?;

    let (rho_max, k, cost) = (2900.0, 35.0, 2000.0);
    let q_closed = k * (rho_max - cost) / 3.0;
    let price_closed = rho_max - 2.0 * q_closed / k;
    let mut worst_q: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    for w in 0..weeks {
        for g in &eq.ga {
            worst_q = worst_q.max(rel(g.sales_t[w], q_closed));
        }
        worst_p = worst_p.max(rel(eq.ammonia_price_cny_per_t[w], price_closed));
    }
    if eq.ra_sales_t.iter().any(|&v| v.abs() > 1e-6) {
        return Err("chain sells ammonia without yields".into());
    }
    // Best response of GA1 to GA2's week-0 quantity over a 1 t grid.
    let rival = eq.ga[1].sales_t[0];
    let weekly_cap = template.asy.capacity_tph * s.grid.hours_per_week();
    let profit = |q: f64| (rho_max - (q + rival) / k - cost) * q;
    let best = (0..=weekly_cap.floor() as usize)
        .map(|q| q as f64)
        .max_by(|a, b| profit(*a).total_cmp(&profit(*b)))
        .unwrap_or(0.0);
    let offset = (best - eq.ga[0].sales_t[0]).abs();
    ensure(
        worst_q <= 1e-6 && worst_p <= 1e-6 && offset <= 1.0,
        format!(
            "q = {:.6} t (closed form {q_closed}), price = {:.6} CNY/t (closed form {price_closed}), grid best response {best} t",
            eq.ga[0].sales_t[0], eq.ammonia_price_cny_per_t[0]
        ),
    )
}

fn grandfathering() -> Check {
    let s = Scenario::bundled_default();
    let spec = GrandfatherSpec {
        emission_t_per_t: 3.0,
        utilization: 0.9,
        reduction_multiplier: 0.97,
        shares: Some([5.0, 1.0]),
    };
    let caps = grandfather_caps(&spec, &[78.3], 0.0, &s.grid).map_err(|e| e.to_string())?;
    let total = 3.0 * 78.3 * 168.0 * 12.0 * 0.9 * 0.97;
    let exact = [
        (caps.total_t, total),
        (caps.q_allo_t, total * 5.0 / 6.0),
        (caps.q_rewa_t, total / 6.0),
    ]
    .iter()
    .all(|(a, b)| rel(*a, *b) <= 1e-9);
    // The quoted split is of the total rounded to one decimal, and each
    // share is again quoted to one decimal.
    let round1 = |v: f64| (v * 10.0).round() / 10.0;
    let quoted_total = round1(caps.total_t);
    let printed = quoted_total == 413_416.5
        && round1(quoted_total * 5.0 / 6.0) == 344_513.8
        && round1(quoted_total / 6.0) == 68_902.8;
    ensure(
        exact && printed,
        format!(
            "total {:.4} t, gray {:.4} t, chain {:.4} t",
            caps.total_t, caps.q_allo_t, caps.q_rewa_t
        ),
    )
}

fn certification(ctx: &Context) -> Check {
    let mut worst_residual: f64 = 0.0;
    let mut worst_gain: f64 = 0.0;
    for r in &ctx.runs {
        let v = verify_equilibrium(r, &ctx.scenario)
            .map_err(|e| format!("{}: {e}", r.outer.mechanism.label()))?;
        worst_residual = worst_residual.max(r.max_residual());
        worst_gain = worst_gain.max(v.max_improvement());
    }
    ensure(
        worst_residual <= 1e-6 && worst_gain <= 1e-6,
        format!(
            "{} equilibria, max KKT residual {worst_residual:.2e}, max deviation gain {worst_gain:.2e}",
            ctx.runs.len()
        ),
    )
}

fn proposition1(ctx: &Context) -> Check {
    let caps = ctx.scenario.caps().map_err(|e| e.to_string())?;
    let r = ctx.run(Mechanism::Pcim);
    let report =
        proposition1_check(r, caps.q_rewa_t, &ctx.scenario.solver).map_err(|e| e.to_string())?;
    let total = report.splits[0].2;
    let spread = report.total_spread_t / total.max(1.0);
    let distinct = report.split_is_indeterminate(1.0);
    let splits: Vec<String> = report
        .splits
        .iter()
        .map(|(_, s, _)| format!("({:.1}, {:.1}, {:.1})", s[0], s[1], s[2]))
        .collect();
    ensure(
        spread <= 1e-6 && distinct,
        format!(
            "q_all = {total:.4} t, relative spread {spread:.2e}, splits {}",
            splits.join(" ")
        ),
    )
}

fn fixed_price_invariance(ctx: &Context) -> Check {
    let runs: Vec<&EquilibriumResult> = FIXED_PRICES
        .iter()
        .map(|&p| ctx.run(Mechanism::FixedPrice { price_cny_per_t: p }))
        .collect();
    let base = runs[0];
    let mut worst: f64 = 0.0;
    for r in &runs[1..] {
        for (a, b) in r.yields_t().iter().zip(base.yields_t()) {
            worst = worst.max(rel(*a, b));
        }
        for (a, b) in r
            .outer
            .ammonia_price_cny_per_t
            .iter()
            .zip(&base.outer.ammonia_price_cny_per_t)
        {
            worst = worst.max(rel(*a, *b));
        }
        worst = worst.max(rel(r.outer.traded_t, base.outer.traded_t));
        let dp = r.outer.carbon_price_cny_per_t - base.outer.carbon_price_cny_per_t;
        let transfer = dp * base.outer.traded_t;
        let chain = r.revenues.chain_total() - base.revenues.chain_total();
        let ga = r.revenues.ga_total() - base.revenues.ga_total();
        let scale = base.revenues.chain_total().abs();
        worst = worst
            .max((chain - transfer).abs() / scale)
            .max((ga + transfer).abs() / scale)
            .max((chain + ga).abs() / scale);
    }
    ensure(
        worst <= 1e-6,
        format!(
            "traded {:.4} t at every price, worst relative mismatch {worst:.2e}",
            base.outer.traded_t
        ),
    )
}

fn reference_price(ctx: &Context) -> Check {
    let profile = ctx.pipeline.profile();
    let mut worst: f64 = 0.0;
    let base: Vec<f64> = weekly_yields(&ctx.scenario, profile, 2000.0)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|w| w.yield_t)
        .collect();
    for price in [2300.0, 2600.0, 2900.0] {
        let ys: Vec<f64> = weekly_yields(&ctx.scenario, profile, price)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|w| w.yield_t)
            .collect();
        for (a, b) in ys.iter().zip(&base) {
            worst = worst.max((a - b).abs() / b);
        }
    }
    ensure(
        worst < 1e-3,
        format!(
            "largest weekly yield change {:.4}% over 2000..2900 CNY/t",
            100.0 * worst
        ),
    )
}

fn table5() -> Check {
    let pool = 0.46e7;
    let traded = 68_902.8;
    let input = AllocationInput {
        traded_t: traded,
        carbon_price_cny_per_t: pool / traded,
        baseline_cny: [2.67e7, 1.81e7, 0.11e7],
        revenue_cny: [2.53e7, 1.73e7, 0.23e7],
    };
    let pcam = allocate_pcam(&input, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let g = pcam.gains.map(|v| 100.0 * v);
    let expected = [5.4, 5.4, 109.1];
    let table_ok = g
        .iter()
        .zip(expected)
        .all(|(a, b)| (a - b).abs() <= 0.05 + 1e-9);
    // The table itself prints 5.2% and 5.5% for the first two; both round
    // from the common 5.36% within its two-digit revenue figures.
    let cam1 = allocate(&input, Scheme::Cam1(Member::Ra)).map_err(|e| e.to_string())?;
    let cam1_ok = !cam1.individually_rational[0]
        && !cam1.individually_rational[1]
        && cam1.individually_rational[2];

    let step: f64 = 1e-3;
    let n = (1.0 / step).round() as usize;
    let mut best = f64::INFINITY;
    for i in 0..=n {
        for j in 0..=(n - i) {
            let shares = [i as f64 * step, j as f64 * step, (n - i - j) as f64 * step];
            let gains = input.gains(&shares.map(|s| s * traded));
            if gains.iter().all(|&v| v >= 0.0) {
                best = best.min(deviation_sum(&gains));
            }
        }
    }
    // Moving one share by a grid step changes each gain by at most
    // step · pool / baseline, and each gain enters two gaps.
    let min_base = input
        .baseline_cny
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let one_step = 4.0 * step * pool / min_base;
    let grid_ok = pcam.deviation_sum <= best + 1e-9 && best - pcam.deviation_sum <= one_step;
    ensure(
        table_ok && cam1_ok && grid_ok,
        format!(
            "gains ({:.2}%, {:.2}%, {:.2}%), CAM1(ra) willing {:?}, objective {:.6} vs grid {:.6}",
            g[0], g[1], g[2], cam1.individually_rational, pcam.deviation_sum, best
        ),
    )
}

fn monotonicity(ctx: &Context) -> Check {
    let caps = ctx.scenario.caps().map_err(|e| e.to_string())?;
    // 69 kt is the rounded incentive allowance, which is the ceiling here.
    let volumes: Vec<f64> = (1..=7)
        .map(|k| (9_000.0 + 10_000.0 * (k - 1) as f64).min(caps.q_rewa_t))
        .collect();
    let report = perturb_ir(&ctx.pipeline, &volumes).map_err(|e| e.to_string())?;
    for row in &report.rows {
        if let Err(e) = row {
            return Err(e.clone());
        }
    }
    let flags = report.nondecreasing(1e-9).ok_or("a volume failed")?;
    let chain: Vec<String> = report
        .rows
        .iter()
        .flatten()
        .map(|r| format!("{:.4}", r.chain_total_cny / 1e7))
        .collect();
    ensure(
        flags.iter().all(|&f| f),
        format!(
            "chain revenue (1e7 CNY) {} over {:.0}..{:.1} t; nondecreasing {flags:?}",
            chain.join(" "),
            volumes[0],
            volumes[6]
        ),
    )
}

fn loose_cap(ctx: &Context) -> Check {
    let mut s = ctx.scenario.clone();
    let caps = s.caps().map_err(|e| e.to_string())?;
    let capacity_emissions: f64 = s
        .ga
        .iter()
        .map(|g| {
            g.emission_t_per_t * g.asy.capacity_tph * s.grid.hours_per_week() * s.grid.weeks as f64
        })
        .sum();
    s.carbon.allowances = Allowances::Explicit(ExplicitCaps {
        q_allo_t: capacity_emissions,
        q_rewa_t: caps.q_rewa_t,
    });
    let r = ctx
        .pipeline
        .rebase(s)
        .and_then(|p| p.run(Mechanism::Pcim))
        .map_err(|e| e.to_string())?;
    ensure(
        r.outer.carbon_price_cny_per_t.abs() <= 1e-6,
        format!(
            "gray allowance {capacity_emissions:.1} t, carbon price {:.3e} CNY/t, traded {:.3} t",
            r.outer.carbon_price_cny_per_t, r.outer.traded_t
        ),
    )
}

fn runtime_and_determinism() -> Check {
    let bin = env!("CARGO_BIN_EXE_carbamm");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    let mut slowest: f64 = 0.0;
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let start = Instant::now();
        let status = Command::new(bin)
            .args(["solve", "--mechanism", "pcim", "--seed", "42", "--out"])
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        if !status.success() {
            return Err(format!("run {run} exited with {status}"));
        }
        outputs.push(std::fs::read(out.join("summary.csv")).map_err(|e| e.to_string())?);
    }
    ensure(
        slowest < 600.0 && outputs[0] == outputs[1],
        format!(
            "slowest full run {slowest:.1} s, summary files identical: {}",
            outputs[0] == outputs[1]
        ),
    )
}

fn main() -> ExitCode {
    let _ = env_logger::builder().is_test(true).try_init();
    let mut failed = 0;
    let mut report = |n: usize, started: Instant, check: Check| {
        let secs = started.elapsed().as_secs_f64();
        let (tag, detail) = match check {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n:>2}: {tag} ({secs:.1} s) {detail}");
    };

    let t = Instant::now();
    let c1 = cone();
    let c1 = if t.elapsed().as_secs_f64() < 5.0 {
        c1
    } else {
        c1.and_then(|d| Err(format!("too slow: {d}")))
    };
    report(1, t, c1);
    let t = Instant::now();
    let c2 = duopoly();
    let c2 = if t.elapsed().as_secs_f64() < 10.0 {
        c2
    } else {
        c2.and_then(|d| Err(format!("too slow: {d}")))
    };
    report(2, t, c2);
    report(3, Instant::now(), grandfathering());

    let t = Instant::now();
    let scenario = Scenario::bundled_default();
    let ctx = Pipeline::new(&scenario).and_then(|pipeline| {
        let runs = mechanisms()
            .into_iter()
            .map(|m| pipeline.run(m))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Context {
            scenario,
            pipeline,
            runs,
        })
    });
    let ctx = match ctx {
        Ok(c) => c,
        Err(e) => {
            for n in [4, 5, 6, 7, 9, 10] {
                report(n, t, Err(format!("default scenario failed: {e}")));
            }
            report(8, Instant::now(), table5());
            report(11, Instant::now(), runtime_and_determinism());
            return ExitCode::FAILURE;
        }
    };
    report(4, t, certification(&ctx));
    report(5, Instant::now(), proposition1(&ctx));
    report(6, Instant::now(), fixed_price_invariance(&ctx));
    report(7, Instant::now(), reference_price(&ctx));
    report(8, Instant::now(), table5());
    report(9, Instant::now(), monotonicity(&ctx));
    report(10, Instant::now(), loose_cap(&ctx));
    report(11, Instant::now(), runtime_and_determinism());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
