use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use carbamm::allocation::perturb_ir;
use carbamm::allocation::{
    allocate as split_revenue, AllocationError, AllocationInput, Member, Scheme,
};
use carbamm::clock::Stopwatch;
use carbamm::equilibrium::{
    verify_equilibrium, EquilibriumError, EquilibriumResult, Pipeline, VerificationReport,
};
use carbamm::game::GameError;
use carbamm::market::Mechanism;
use carbamm::scenario::{Allowances, ExplicitCaps, Scenario};

use crate::report::{Cell, ReportTable, RunManifest};
use crate::{MechanismArg, ScenarioArgs, SweepParam};

pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_CERTIFICATION: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

/// Residual and deviation tolerance for a certified equilibrium.
const CERTIFY_TOL: f64 = 1e-6;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn io(e: std::io::Error) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<EquilibriumError> for Failure {
    fn from(e: EquilibriumError) -> Self {
        let code = match &e {
            EquilibriumError::WeekInfeasible { .. }
            | EquilibriumError::Game(GameError::Infeasible(_)) => EXIT_INFEASIBLE,
            EquilibriumError::Scenario(_) | EquilibriumError::ReferencePrice(_) => EXIT_USAGE,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<(), Failure>;

struct Loaded {
    scenario: Scenario,
    text: String,
}

fn load(common: &ScenarioArgs) -> Result<Loaded, Failure> {
    let (mut scenario, text) = match &common.scenario {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read `{}`: {e}", path.display())))?;
            let s = Scenario::from_json(&text, &path.display().to_string(), path.parent())
                .map_err(|e| Failure::usage(e.to_string()))?;
            (s, text)
        }
        None => (
            Scenario::bundled_default(),
            Scenario::bundled_default_json().to_string(),
        ),
    };
    if let Some(seed) = common.seed {
        scenario.seed = seed;
    }
    scenario
        .validate()
        .map_err(|e| Failure::usage(e.to_string()))?;
    fs::create_dir_all(&common.out).map_err(Failure::io)?;
    Ok(Loaded { scenario, text })
}

fn manifest(
    common: &ScenarioArgs,
    loaded: &Loaded,
    command: &str,
    mechanism: Option<String>,
) -> RunManifest {
    RunManifest::new(
        command,
        common.scenario.as_deref(),
        &loaded.text,
        mechanism,
        loaded.scenario.seed,
    )
}

fn mechanism(arg: MechanismArg, fixed_price: Option<f64>) -> Result<Mechanism, Failure> {
    match (arg, fixed_price) {
        (MechanismArg::M3, None) => Err(Failure::usage("--mechanism m3 requires --fixed-price")),
        (MechanismArg::M3, Some(p)) if !(p >= 0.0 && p.is_finite()) => Err(Failure::usage(
            format!("--fixed-price {p} must be a nonnegative number"),
        )),
        (MechanismArg::M3, Some(p)) => Ok(Mechanism::FixedPrice { price_cny_per_t: p }),
        (_, Some(_)) => Err(Failure::usage("--fixed-price only applies to m3")),
        (MechanismArg::M1, None) => Ok(Mechanism::NoCap),
        (MechanismArg::M2, None) => Ok(Mechanism::CapOnly),
        (MechanismArg::Pcim, None) => Ok(Mechanism::Pcim),
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(dir.join(name), text + "\n").map_err(Failure::io)
}

const SUMMARY_COLUMNS: [(&str, &str); 14] = [
    ("mechanism", ""),
    ("rg_revenue", "CNY"),
    ("hp_revenue", "CNY"),
    ("ra_revenue", "CNY"),
    ("carbon_revenue", "CNY"),
    ("chain_revenue", "CNY"),
    ("ga_revenue", "CNY"),
    ("ca_traded", "t"),
    ("ca_price", "CNY/t"),
    ("green_ammonia", "t"),
    ("avg_ammonia_price", "CNY/t"),
    ("emissions", "t CO2"),
    ("ga_utilization", "1"),
    ("ra_utilization", "1"),
];

fn summary_cells(r: &EquilibriumResult) -> Vec<Cell> {
    let util = r.ga_utilization.iter().sum::<f64>() / r.ga_utilization.len().max(1) as f64;
    vec![
        Cell::from(r.outer.mechanism.label()),
        r.revenues.rg.into(),
        r.revenues.hp.into(),
        r.revenues.ra.into(),
        r.revenues.carbon.into(),
        r.revenues.chain_total().into(),
        r.revenues.ga_total().into(),
        r.outer.traded_t.into(),
        r.outer.carbon_price_cny_per_t.into(),
        r.yields_t().iter().sum::<f64>().into(),
        r.average_ammonia_price().into(),
        r.emissions_t.into(),
        util.into(),
        r.ra_utilization.into(),
    ]
}

fn prices_table(r: &EquilibriumResult, step_h: f64) -> ReportTable {
    let mut t = ReportTable::new(&[
        ("week", ""),
        ("interval", ""),
        ("hour", "h"),
        ("electricity_rg_hp", "CNY/MWh"),
        ("electricity_rg_ra", "CNY/MWh"),
        ("hydrogen_hp_ra", "CNY/Nm3"),
        ("ammonia", "CNY/t"),
        ("degenerate", ""),
    ]);
    for w in &r.weeks {
        for i in 0..w.price_hydrogen.len() {
            t.push(vec![
                w.week.into(),
                i.into(),
                (i as f64 * step_h).into(),
                w.price_electricity_hp[i].into(),
                w.price_electricity_ra[i].into(),
                w.price_hydrogen[i].into(),
                r.outer.ammonia_price_cny_per_t[w.week].into(),
                w.degenerate_intervals.contains(&i).into(),
            ]);
        }
    }
    t
}

fn certified(r: &EquilibriumResult, v: &VerificationReport) -> Result<(), String> {
    if r.max_residual() > CERTIFY_TOL {
        return Err(format!(
            "KKT residual {:.3e} exceeds {CERTIFY_TOL:e}",
            r.max_residual()
        ));
    }
    if !v.passes(CERTIFY_TOL) {
        return Err(format!(
            "unilateral deviation gains {:.3e} (grid offset {} t)",
            v.max_improvement(),
            v.max_scan_offset_t()
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct EquilibriumFile<'a> {
    run_id: &'a str,
    result: &'a EquilibriumResult,
    verification: &'a VerificationReport,
}

pub fn solve(
    common: &ScenarioArgs,
    arg: MechanismArg,
    fixed_price: Option<f64>,
    command: &str,
) -> Outcome {
    let mech = mechanism(arg, fixed_price)?;
    let loaded = load(common)?;
    let mut m = manifest(common, &loaded, command, Some(mech.label()));
    let pipeline = Pipeline::new(&loaded.scenario)?;
    let result = pipeline.run(mech)?;
    let watch = Stopwatch::start();
    let verification = verify_equilibrium(&result, &loaded.scenario)?;
    m.time("weekly_yield", result.timings.weekly_yield_s);
    m.time("outer", result.timings.outer_s);
    m.time("inner", result.timings.inner_s);
    m.time("verify", watch.seconds());

    let dir = &common.out;
    write_json(
        dir,
        "equilibrium.json",
        &EquilibriumFile {
            run_id: &m.run_id,
            result: &result,
            verification: &verification,
        },
    )?;
    let mut summary = ReportTable::new(&SUMMARY_COLUMNS);
    summary.push(summary_cells(&result));
    summary
        .write(dir, "summary.csv", &m.run_id)
        .map_err(Failure::io)?;
    prices_table(&result, loaded.scenario.grid.step_h)
        .write(dir, "prices.csv", &m.run_id)
        .map_err(Failure::io)?;
    m.write(dir).map_err(Failure::io)?;
    if result.degenerate {
        log::warn!("some intervals carry no trade; their prices are duals of degenerate rows");
    }
    certified(&result, &verification).map_err(|message| Failure {
        code: EXIT_CERTIFICATION,
        message,
    })
}

/// `START:END:STEP` with the end included.
pub fn parse_range(spec: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || {
        Failure::usage(format!(
            "range `{spec}` must be START:END:STEP with STEP > 0 and START <= END"
        ))
    };
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let (start, end, step) = (v[0], v[1], v[2]);
    if !(step > 0.0) || !(start <= end) || !start.is_finite() || !end.is_finite() {
        return Err(bad());
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

struct Point {
    value: f64,
    participants: Option<usize>,
    scenario: Scenario,
    mechanism: Mechanism,
}

pub fn sweep(common: &ScenarioArgs, param: SweepParam, range: &str, command: &str) -> Outcome {
    let values = parse_range(range)?;
    let loaded = load(common)?;
    let base = &loaded.scenario;
    let mut m = manifest(common, &loaded, command, None);
    let watch = Stopwatch::start();
    let pipeline = Pipeline::new(base)?;
    m.time("weekly_yield", watch.seconds());

    let caps = base.caps().map_err(|e| Failure::usage(e.to_string()))?;
    let mut points = Vec::new();
    for &v in &values {
        match param {
            SweepParam::FixedCarbonPrice => {
                if v < 0.0 {
                    return Err(Failure::usage("fixed carbon prices must be nonnegative"));
                }
                points.push(Point {
                    value: v,
                    participants: None,
                    scenario: base.clone(),
                    mechanism: Mechanism::FixedPrice { price_cny_per_t: v },
                });
            }
            SweepParam::CarbonCap => {
                if !(v > 0.0) {
                    return Err(Failure::usage("cap multipliers must be positive"));
                }
                let mut s = base.clone();
                s.carbon.allowances = Allowances::Explicit(ExplicitCaps {
                    q_allo_t: caps.q_allo_t * v,
                    q_rewa_t: caps.q_rewa_t * v,
                });
                points.push(Point {
                    value: v,
                    participants: None,
                    scenario: s,
                    mechanism: Mechanism::Pcim,
                });
            }
            SweepParam::RaCapacityMult => {
                let mut s = base.clone();
                s.scale_chain(v)
                    .map_err(|e| Failure::usage(e.to_string()))?;
                points.push(Point {
                    value: v,
                    participants: None,
                    scenario: s,
                    mechanism: Mechanism::Pcim,
                });
            }
            SweepParam::GaCount => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Failure::usage(
                        "gray producer counts must be positive integers",
                    ));
                }
                let n = v as usize;
                let s = base
                    .with_ga_count(n)
                    .map_err(|e| Failure::usage(e.to_string()))?;
                for k in (0..=n).rev() {
                    let mut sk = s.clone();
                    sk.carbon.non_participants = s.ga[k..].iter().map(|g| g.name.clone()).collect();
                    points.push(Point {
                        value: v,
                        participants: Some(k),
                        scenario: sk,
                        mechanism: Mechanism::Pcim,
                    });
                }
            }
        }
    }

    let watch = Stopwatch::start();
    let outcomes: Vec<Result<EquilibriumResult, String>> = points
        .par_iter()
        .map(|p| {
            pipeline
                .rebase(p.scenario.clone())
                .and_then(|pl| pl.run(p.mechanism))
                .map_err(|e| e.to_string())
        })
        .collect();
    m.time("points", watch.seconds());
    let baseline = match param {
        SweepParam::FixedCarbonPrice => Some(pipeline.run(Mechanism::CapOnly)?),
        _ => None,
    };

    let max_ga = points
        .iter()
        .map(|p| p.scenario.ga.len())
        .max()
        .unwrap_or(0);
    let mut columns: Vec<(String, String)> = vec![
        (param_name(param).into(), param_unit(param).into()),
        ("participants".into(), "".into()),
        ("status".into(), "".into()),
    ];
    columns.extend(
        SUMMARY_COLUMNS[1..]
            .iter()
            .map(|(n, u)| (n.to_string(), u.to_string())),
    );
    columns.push(("mutually_beneficial".into(), "".into()));
    columns.extend((1..=max_ga).map(|i| (format!("ga{i}_revenue"), "CNY".to_string())));
    let col_refs: Vec<(&str, &str)> = columns
        .iter()
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    let mut table = ReportTable::new(&col_refs);
    let mut figure = figure_table(param);

    for (p, outcome) in points.iter().zip(&outcomes) {
        let mut row = vec![Cell::from(p.value), Cell::from(p.participants)];
        match outcome {
            Ok(r) => {
                row.push("ok".into());
                row.extend(summary_cells(r).into_iter().skip(1));
                row.push(match &baseline {
                    Some(b) => Cell::from(
                        r.revenues.chain_total() >= b.revenues.chain_total()
                            && r.revenues.ga_total() >= b.revenues.ga_total(),
                    ),
                    None => Cell::Empty,
                });
                row.extend((0..max_ga).map(|i| Cell::from(r.revenues.ga.get(i).copied())));
                if let Some(fig) = figure.as_mut() {
                    fig.1.push(figure_row(param, p.value, r));
                }
            }
            Err(e) => {
                log::warn!("{} = {}: {e}", param_name(param), p.value);
                row.push(Cell::from(format!("failed: {e}")));
                row.extend((0..SUMMARY_COLUMNS.len()).map(|_| Cell::Empty));
                row.extend((0..max_ga).map(|_| Cell::Empty));
            }
        }
        table.push(row);
    }
    let dir = &common.out;
    table
        .write(dir, "sweep.csv", &m.run_id)
        .map_err(Failure::io)?;
    if let Some((name, fig)) = figure {
        fig.write(dir, name, &m.run_id).map_err(Failure::io)?;
    }
    if let Some(b) = &baseline {
        if let Some(r) = outcomes.iter().flatten().next() {
            let (lo, hi) = mutual_benefit_interval(r, b);
            let mut t =
                ReportTable::new(&[("lower", "CNY/t"), ("upper", "CNY/t"), ("nonempty", "")]);
            t.push(vec![lo.into(), hi.into(), (lo <= hi).into()]);
            t.write(dir, "mutual_benefit.csv", &m.run_id)
                .map_err(Failure::io)?;
            println!("mutually beneficial fixed prices: [{lo:.4}, {hi:.4}] CNY/t");
        }
    }
    m.write(dir).map(drop).map_err(Failure::io)
}

/// Fixed prices at which both the chain and the gray producers do at least
/// as well as without trading. Outcomes other than the transfer do not
/// depend on the price, so one run fixes both ends.
pub fn mutual_benefit_interval(
    fixed: &EquilibriumResult,
    no_trading: &EquilibriumResult,
) -> (f64, f64) {
    let q = fixed.outer.traded_t;
    let price = fixed.outer.carbon_price_cny_per_t;
    let members: f64 = fixed.revenues.members().iter().sum();
    let ga_before_transfer = fixed.revenues.ga_total() + price * q;
    let chain_floor: f64 = no_trading.revenues.members().iter().sum();
    if q <= 0.0 {
        return (f64::NAN, f64::NAN);
    }
    (
        (chain_floor - members) / q,
        (ga_before_transfer - no_trading.revenues.ga_total()) / q,
    )
}

fn param_name(p: SweepParam) -> &'static str {
    match p {
        SweepParam::FixedCarbonPrice => "fixed_carbon_price",
        SweepParam::CarbonCap => "cap_multiplier",
        SweepParam::RaCapacityMult => "chain_capacity_multiplier",
        SweepParam::GaCount => "ga_count",
    }
}

fn param_unit(p: SweepParam) -> &'static str {
    match p {
        SweepParam::FixedCarbonPrice => "CNY/t",
        _ => "1",
    }
}

fn figure_table(p: SweepParam) -> Option<(&'static str, ReportTable)> {
    match p {
        SweepParam::FixedCarbonPrice => Some((
            "fig8.csv",
            ReportTable::new(&[
                ("fixed_carbon_price", "CNY/t"),
                ("chain_revenue", "CNY"),
                ("ga_revenue", "CNY"),
                ("total_revenue", "CNY"),
            ]),
        )),
        SweepParam::CarbonCap => Some((
            "fig12.csv",
            ReportTable::new(&[
                ("cap_multiplier", "1"),
                ("ca_price", "CNY/t"),
                ("ca_traded", "t"),
                ("emissions", "t CO2"),
                ("chain_revenue", "CNY"),
                ("ga_revenue", "CNY"),
            ]),
        )),
        SweepParam::RaCapacityMult => Some((
            "fig13.csv",
            ReportTable::new(&[
                ("chain_capacity_multiplier", "1"),
                ("green_ammonia", "t"),
                ("avg_ammonia_price", "CNY/t"),
                ("ca_price", "CNY/t"),
                ("chain_revenue", "CNY"),
                ("ga_revenue", "CNY"),
            ]),
        )),
        SweepParam::GaCount => None,
    }
}

fn figure_row(p: SweepParam, value: f64, r: &EquilibriumResult) -> Vec<Cell> {
    let chain = r.revenues.chain_total();
    let ga = r.revenues.ga_total();
    match p {
        SweepParam::FixedCarbonPrice => {
            vec![value.into(), chain.into(), ga.into(), (chain + ga).into()]
        }
        SweepParam::CarbonCap => vec![
            value.into(),
            r.outer.carbon_price_cny_per_t.into(),
            r.outer.traded_t.into(),
            r.emissions_t.into(),
            chain.into(),
            ga.into(),
        ],
        SweepParam::RaCapacityMult => vec![
            value.into(),
            r.yields_t().iter().sum::<f64>().into(),
            r.average_ammonia_price().into(),
            r.outer.carbon_price_cny_per_t.into(),
            chain.into(),
            ga.into(),
        ],
        SweepParam::GaCount => Vec::new(),
    }
}

pub fn allocate_cmd_input(
    trading: &EquilibriumResult,
    baseline: &EquilibriumResult,
) -> AllocationInput {
    AllocationInput {
        traded_t: trading.outer.traded_t,
        carbon_price_cny_per_t: trading.outer.carbon_price_cny_per_t,
        baseline_cny: baseline.revenues.members(),
        revenue_cny: trading.revenues.members(),
    }
}

pub fn allocate(common: &ScenarioArgs, cam: &str, command: &str) -> Outcome {
    let scheme: Scheme = cam
        .parse()
        .map_err(|e: AllocationError| Failure::usage(e.to_string()))?;
    let loaded = load(common)?;
    let mut m = manifest(common, &loaded, command, Some(format!("PCIM/{scheme}")));
    let watch = Stopwatch::start();
    let pipeline = Pipeline::new(&loaded.scenario)?;
    let baseline = pipeline.run(Mechanism::CapOnly)?;
    let trading = pipeline.run(Mechanism::Pcim)?;
    m.time("pipeline", watch.seconds());
    let input = allocate_cmd_input(&trading, &baseline);

    let mut columns = vec![("scheme", "")];
    for (rev, split, gain, ir) in [
        ("rg_revenue", "rg_allowance", "rg_gain", "rg_willing"),
        ("hp_revenue", "hp_allowance", "hp_gain", "hp_willing"),
        ("ra_revenue", "ra_allowance", "ra_gain", "ra_willing"),
    ] {
        columns.extend([(rev, "CNY"), (split, "t"), (gain, "%"), (ir, "")]);
    }
    columns.push(("deviation_sum", "1"));
    let mut table = ReportTable::new(&columns);
    let mut base_row = vec![Cell::from("M2")];
    for k in Member::ALL {
        base_row.extend([
            input.baseline_cny[k.index()].into(),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
        ]);
    }
    base_row.push(Cell::Empty);
    table.push(base_row);

    let dir = &common.out;
    let outcome = match split_revenue(&input, scheme) {
        Ok(a) => {
            let revenues = a.revenues_cny(&input);
            let mut row = vec![Cell::from(scheme.to_string())];
            for k in Member::ALL {
                let i = k.index();
                row.extend([
                    revenues[i].into(),
                    a.split_t[i].into(),
                    (100.0 * a.gains[i]).into(),
                    a.individually_rational[i].into(),
                ]);
            }
            row.push(a.deviation_sum.into());
            table.push(row);
            Ok(())
        }
        Err(e @ AllocationError::NotIndividuallyRational { .. }) => Err(Failure {
            code: EXIT_CERTIFICATION,
            message: e.to_string(),
        }),
        Err(e) => Err(Failure {
            code: 1,
            message: e.to_string(),
        }),
    };
    table
        .write(dir, "allocation.csv", &m.run_id)
        .map_err(Failure::io)?;
    m.write(dir).map_err(Failure::io)?;
    outcome
}

/// `a,b,c` or `START:END:STEP`.
pub fn parse_volumes(spec: &str) -> Result<Vec<f64>, Failure> {
    if spec.contains(':') {
        return parse_range(spec);
    }
    spec.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Failure::usage(format!("volume `{v}` is not a number")))
        })
        .collect()
}

pub fn perturb(common: &ScenarioArgs, volumes: &str, command: &str) -> Outcome {
    let volumes = parse_volumes(volumes)?;
    let loaded = load(common)?;
    let caps = loaded
        .scenario
        .caps()
        .map_err(|e| Failure::usage(e.to_string()))?;
    if let Some(v) = volumes
        .iter()
        .find(|&&v| !(0.0..=caps.q_rewa_t).contains(&v))
    {
        return Err(Failure::usage(format!(
            "volume {v} t outside [0, {}] t of incentive allowance",
            caps.q_rewa_t
        )));
    }
    let mut m = manifest(common, &loaded, command, Some("PCIM pinned".into()));
    let watch = Stopwatch::start();
    let pipeline = Pipeline::new(&loaded.scenario)?;
    let report = perturb_ir(&pipeline, &volumes)?;
    m.time("pipeline", watch.seconds());

    let mut table = ReportTable::new(&[
        ("volume", "t"),
        ("status", ""),
        ("ca_price", "CNY/t"),
        ("chain_revenue", "CNY"),
        ("rg_revenue", "CNY"),
        ("hp_revenue", "CNY"),
        ("ra_revenue", "CNY"),
        ("rg_gain", "%"),
        ("hp_gain", "%"),
        ("ra_gain", "%"),
    ]);
    let mut sorted = volumes.clone();
    sorted.sort_by(f64::total_cmp);
    for (v, row) in sorted.iter().zip(&report.rows) {
        match row {
            Ok(r) => table.push(vec![
                r.volume_t.into(),
                "ok".into(),
                r.carbon_price_cny_per_t.into(),
                r.chain_total_cny.into(),
                r.member_cny[0].into(),
                r.member_cny[1].into(),
                r.member_cny[2].into(),
                (100.0 * r.allocation.gains[0]).into(),
                (100.0 * r.allocation.gains[1]).into(),
                (100.0 * r.allocation.gains[2]).into(),
            ]),
            Err(e) => {
                let mut cells = vec![Cell::from(*v), Cell::from(format!("failed: {e}"))];
                cells.extend((0..8).map(|_| Cell::Empty));
                table.push(cells);
            }
        }
    }
    let mut verdicts = ReportTable::new(&[("column", ""), ("verdict", "")]);
    let flags = report.nondecreasing(1e-9);
    for (i, name) in ["chain_revenue", "rg_revenue", "hp_revenue", "ra_revenue"]
        .into_iter()
        .enumerate()
    {
        let verdict = match flags {
            Some(f) if f[i] => "nondecreasing",
            Some(_) => "not monotone",
            None => "undetermined",
        };
        verdicts.push(vec![name.into(), verdict.into()]);
    }
    let dir = &common.out;
    table
        .write(dir, "perturb_ir.csv", &m.run_id)
        .map_err(Failure::io)?;
    verdicts
        .write(dir, "monotonicity.csv", &m.run_id)
        .map_err(Failure::io)?;
    m.write(dir).map(drop).map_err(Failure::io)
}
