//! Builders for the gray producer and the three renewable-chain stakeholders.
//!
//! Every builder returns a standalone [`ConvexProgram`] in scaled units. Prices
//! paid or received by a stakeholder enter as parameter blocks multiplied by
//! its own trade variables, so the same program serves as an individual best
//! response (prices set) and as a block of the joint program (price terms
//! dropped and clearing rows added).

pub mod cone;
mod ga;
mod hp;
mod ra;
mod rg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{BlockId, ProgramBuilder, ProgramError, Sense, VarId};
use crate::units;

pub use cone::{cone_error, polyhedral_cone_rows, ConeVars};
pub use ga::{build_ga, GaMarket, Resolution};
pub use hp::build_hp;
pub use ra::{build_ra, build_ra_trading, AmmoniaValuation};
pub use rg::build_rg;

/// Block and parameter names shared between builders and the equilibrium engine.
pub mod names {
    pub const GA_PRODUCTION: &str = "production";
    pub const GA_SALES: &str = "sales";
    pub const GA_PURCHASE: &str = "purchase";
    pub const RIVAL_SALES: &str = "rival_sales";
    pub const CARBON_PRICE: &str = "carbon_price";

    pub const RG_SELL_HP: &str = "sell_hp";
    pub const RG_SELL_RA: &str = "sell_ra";
    pub const PRICE_E_HP: &str = "price_electricity_hp";
    pub const PRICE_E_RA: &str = "price_electricity_ra";
    pub const PRICE_H2: &str = "price_hydrogen";

    pub const HP_BUY: &str = "buy_electricity";
    pub const HP_SELL: &str = "sell_hydrogen";

    pub const RA_BUY_H2: &str = "buy_hydrogen";
    pub const RA_BUY_E: &str = "buy_electricity";
    pub const RA_BACKUP: &str = "backup";
    pub const RA_PRODUCTION: &str = "production";
    pub const RA_SALES: &str = "sales";
    pub const RA_AST: &str = "ast_level";
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("network is not radial: {0}")]
    NotRadial(String),
    #[error("profile has {got} intervals, expected {expected}")]
    ProfileLength { expected: usize, got: usize },
    #[error("profile value {value} MW at interval {interval} exceeds capacity {capacity} MW")]
    ProfileAboveCapacity {
        interval: usize,
        value: f64,
        capacity: f64,
    },
    #[error("unknown bus `{0}`")]
    UnknownBus(String),
    #[error("unknown pipeline node `{0}`")]
    UnknownNode(String),
    #[error(transparent)]
    Program(#[from] ProgramError),
}

pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn check_fraction(field: &str, v: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} outside [0, 1]")))
    }
}

fn check_positive(field: &str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} must be positive")))
    }
}

fn check_nonnegative(field: &str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} must be nonnegative")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub weeks: usize,
    pub intervals_per_week: usize,
    pub step_h: f64,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            weeks: 12,
            intervals_per_week: 168,
            step_h: 1.0,
        }
    }
}

impl TimeGrid {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.weeks == 0 {
            return Err(invalid("time.weeks", "must be at least 1"));
        }
        if self.intervals_per_week == 0 {
            return Err(invalid("time.intervals_per_week", "must be at least 1"));
        }
        check_positive("time.step_h", self.step_h)
    }

    pub fn intervals(&self) -> usize {
        self.weeks * self.intervals_per_week
    }

    pub fn hours_per_week(&self) -> f64 {
        self.intervals_per_week as f64 * self.step_h
    }

    /// Interval indices of week `w`.
    pub fn week_range(&self, w: usize) -> std::ops::Range<usize> {
        w * self.intervals_per_week..(w + 1) * self.intervals_per_week
    }
}

/// Ammonia synthesis unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisParams {
    pub capacity_tph: f64,
    pub load_min: f64,
    pub load_max: f64,
    pub ramp_down: f64,
    pub ramp_up: f64,
}

impl SynthesisParams {
    pub fn validate(&self, prefix: &str) -> Result<(), ModelError> {
        check_nonnegative(&format!("{prefix}.capacity_tph"), self.capacity_tph)?;
        check_fraction(&format!("{prefix}.load_min"), self.load_min)?;
        check_fraction(&format!("{prefix}.load_max"), self.load_max)?;
        if self.load_min > self.load_max {
            return Err(invalid(
                &format!("{prefix}.load_min"),
                format!("{} exceeds load_max {}", self.load_min, self.load_max),
            ));
        }
        check_positive(&format!("{prefix}.ramp_down"), self.ramp_down)?;
        check_positive(&format!("{prefix}.ramp_up"), self.ramp_up)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaParams {
    pub name: String,
    pub asy: SynthesisParams,
    pub cost_cny_per_t: f64,
    pub emission_t_per_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesParams {
    pub capacity_mwh: f64,
    pub charge_efficiency: f64,
    pub discharge_efficiency: f64,
    /// Fraction of stored energy lost per hour.
    pub self_discharge: f64,
    pub level_min: f64,
    pub level_max: f64,
    pub degradation_cny_per_mwh: f64,
}

impl BesParams {
    pub fn validate(&self, prefix: &str) -> Result<(), ModelError> {
        check_nonnegative(&format!("{prefix}.capacity_mwh"), self.capacity_mwh)?;
        for (f, v) in [
            ("charge_efficiency", self.charge_efficiency),
            ("discharge_efficiency", self.discharge_efficiency),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(
                    &format!("{prefix}.{f}"),
                    format!("{v} outside (0, 1]"),
                ));
            }
        }
        if !(0.0..1.0).contains(&self.self_discharge) {
            return Err(invalid(
                &format!("{prefix}.self_discharge"),
                format!("{} outside [0, 1)", self.self_discharge),
            ));
        }
        check_fraction(&format!("{prefix}.level_min"), self.level_min)?;
        check_fraction(&format!("{prefix}.level_max"), self.level_max)?;
        if self.level_min > self.level_max {
            return Err(invalid(&format!("{prefix}.level_min"), "exceeds level_max"));
        }
        check_positive(
            &format!("{prefix}.degradation_cny_per_mwh"),
            self.degradation_cny_per_mwh,
        )
    }
}

/// Hydrogen storage tank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TankParams {
    pub capacity_nm3: f64,
    pub level_min: f64,
    pub level_max: f64,
}

impl TankParams {
    pub fn validate(&self, prefix: &str) -> Result<(), ModelError> {
        check_nonnegative(&format!("{prefix}.capacity_nm3"), self.capacity_nm3)?;
        check_fraction(&format!("{prefix}.level_min"), self.level_min)?;
        check_fraction(&format!("{prefix}.level_max"), self.level_max)?;
        if self.level_min > self.level_max {
            return Err(invalid(&format!("{prefix}.level_min"), "exceeds level_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub name: String,
    /// Bounds on the squared voltage magnitude (p.u.).
    pub vsq_min: f64,
    pub vsq_max: f64,
    /// Reactive compensation limit (Mvar); zero disables it.
    #[serde(default)]
    pub var_comp_mvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub from: String,
    pub to: String,
    pub r_pu: f64,
    pub x_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialNetwork {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
}

impl RadialNetwork {
    pub fn bus_index(&self, name: &str) -> Result<usize, ModelError> {
        self.buses
            .iter()
            .position(|b| b.name == name)
            .ok_or_else(|| ModelError::UnknownBus(name.to_string()))
    }

    /// Checks the tree shape and returns the root bus index.
    pub fn validate(&self) -> Result<usize, ModelError> {
        let n = self.buses.len();
        if n == 0 {
            return Err(ModelError::NotRadial("no buses".into()));
        }
        for b in &self.buses {
            if !(b.vsq_min > 0.0 && b.vsq_min <= b.vsq_max) {
                return Err(invalid(
                    &format!("rg.network.buses.{}.vsq_min", b.name),
                    format!(
                        "bounds [{}, {}] must be positive and ordered",
                        b.vsq_min, b.vsq_max
                    ),
                ));
            }
            check_nonnegative(
                &format!("rg.network.buses.{}.var_comp_mvar", b.name),
                b.var_comp_mvar,
            )?;
        }
        if self.branches.len() + 1 != n {
            return Err(ModelError::NotRadial(format!(
                "{} buses need {} branches, found {}",
                n,
                n - 1,
                self.branches.len()
            )));
        }
        let mut parent = vec![None; n];
        for br in &self.branches {
            let (i, j) = (self.bus_index(&br.from)?, self.bus_index(&br.to)?);
            if i == j {
                return Err(ModelError::NotRadial(format!("self-loop at `{}`", br.from)));
            }
            if parent[j].replace(i).is_some() {
                return Err(ModelError::NotRadial(format!(
                    "bus `{}` has two parents",
                    br.to
                )));
            }
        }
        let roots: Vec<usize> = (0..n).filter(|&j| parent[j].is_none()).collect();
        if roots.len() != 1 {
            return Err(ModelError::NotRadial(format!("{} roots", roots.len())));
        }
        // Every bus must reach the root without revisiting a bus.
        for start in 0..n {
            let mut j = start;
            for _ in 0..=n {
                match parent[j] {
                    Some(p) => j = p,
                    None => break,
                }
            }
            if j != roots[0] {
                return Err(ModelError::NotRadial(format!(
                    "bus `{}` is on a cycle",
                    self.buses[start].name
                )));
            }
        }
        Ok(roots[0])
    }
}

/// Share of a renewable fleet connected at one bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attachment {
    pub bus: String,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewableFleet {
    pub capacity_mw: f64,
    pub attachments: Vec<Attachment>,
}

impl RenewableFleet {
    fn validate(&self, prefix: &str, net: &RadialNetwork) -> Result<(), ModelError> {
        check_nonnegative(&format!("{prefix}.capacity_mw"), self.capacity_mw)?;
        if self.attachments.is_empty() {
            return Err(invalid(&format!("{prefix}.attachments"), "empty"));
        }
        let mut total = 0.0;
        for a in &self.attachments {
            net.bus_index(&a.bus)?;
            check_fraction(&format!("{prefix}.attachments.share"), a.share)?;
            total += a.share;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(
                &format!("{prefix}.attachments"),
                format!("shares sum to {total}"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RgParams {
    pub network: RadialNetwork,
    pub wt: RenewableFleet,
    pub pv: RenewableFleet,
    pub bes: BesParams,
    pub bes_bus: String,
    pub hp_bus: String,
    pub ra_bus: String,
}

impl RgParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.network.validate()?;
        self.wt.validate("rg.wt", &self.network)?;
        self.pv.validate("rg.pv", &self.network)?;
        self.bes.validate("rg.bes")?;
        for bus in [&self.bes_bus, &self.hp_bus, &self.ra_bus] {
            self.network.bus_index(bus)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrolyzerParams {
    pub capacity_mw: f64,
    pub yield_nm3_per_mwh: f64,
    pub load_min: f64,
    pub load_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineNode {
    pub name: String,
    pub p_min_mpa: f64,
    pub p_max_mpa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pipe {
    pub from: String,
    pub to: String,
    /// Weymouth constant, Nm³/h per MPa.
    pub k_gf: f64,
    /// Linepack constant, Nm³ per MPa.
    pub k_lp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineNetwork {
    pub nodes: Vec<PipelineNode>,
    pub pipes: Vec<Pipe>,
    /// Polyhedral approximation depth.
    pub cone_depth: usize,
    pub pressure_penalty_cny_per_mpa_h: f64,
    /// Node where the electrolysis plant injects.
    pub source: String,
    /// Node where hydrogen is delivered to the synthesis plant.
    pub sink: String,
}

impl PipelineNetwork {
    pub fn node_index(&self, name: &str) -> Result<usize, ModelError> {
        self.nodes
            .iter()
            .position(|n| n.name == name)
            .ok_or_else(|| ModelError::UnknownNode(name.to_string()))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.cone_depth < 1 {
            return Err(invalid("hp.pipeline.cone_depth", "must be at least 1"));
        }
        check_positive(
            "hp.pipeline.pressure_penalty_cny_per_mpa_h",
            self.pressure_penalty_cny_per_mpa_h,
        )?;
        if self.nodes.is_empty() {
            return Err(invalid("hp.pipeline.nodes", "empty"));
        }
        for n in &self.nodes {
            if !(n.p_min_mpa > 0.0 && n.p_min_mpa <= n.p_max_mpa) {
                return Err(invalid(
                    &format!("hp.pipeline.nodes.{}.p_min_mpa", n.name),
                    "pressure bounds must be positive and ordered",
                ));
            }
        }
        for p in &self.pipes {
            self.node_index(&p.from)?;
            self.node_index(&p.to)?;
            check_positive("hp.pipeline.pipes.k_gf", p.k_gf)?;
            check_positive("hp.pipeline.pipes.k_lp", p.k_lp)?;
        }
        self.node_index(&self.source)?;
        self.node_index(&self.sink)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HpParams {
    pub ae: ElectrolyzerParams,
    /// Compressor load, MW per Nm³/h.
    pub comp_mw_per_nm3h: f64,
    pub hst: TankParams,
    pub bes: BesParams,
    pub pipeline: PipelineNetwork,
}

impl HpParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        check_nonnegative("hp.ae.capacity_mw", self.ae.capacity_mw)?;
        check_positive("hp.ae.yield_nm3_per_mwh", self.ae.yield_nm3_per_mwh)?;
        check_fraction("hp.ae.load_min", self.ae.load_min)?;
        check_fraction("hp.ae.load_max", self.ae.load_max)?;
        if self.ae.load_min > self.ae.load_max {
            return Err(invalid("hp.ae.load_min", "exceeds load_max"));
        }
        check_nonnegative("hp.comp_mw_per_nm3h", self.comp_mw_per_nm3h)?;
        self.hst.validate("hp.hst")?;
        self.bes.validate("hp.bes")?;
        self.pipeline.validate()
    }
}

/// A constant or per-interval series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Series {
    Flat(f64),
    PerInterval(Vec<f64>),
}

impl Series {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            Series::Flat(v) => *v,
            Series::PerInterval(v) => v[t],
        }
    }

    pub fn check_len(&self, field: &str, n: usize) -> Result<(), ModelError> {
        match self {
            Series::Flat(v) => check_nonnegative(field, *v),
            Series::PerInterval(v) if v.len() != n => Err(ModelError::ProfileLength {
                expected: n,
                got: v.len(),
            }),
            Series::PerInterval(v) => v.iter().try_for_each(|&x| check_nonnegative(field, x)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaParams {
    pub asy: SynthesisParams,
    /// t of ammonia per Nm³ of hydrogen.
    pub h2a_t_per_nm3: f64,
    /// t of ammonia per MWh.
    pub p2a_t_per_mwh: f64,
    pub hst: TankParams,
    pub ast_capacity_t: f64,
    pub backup_price_cny_per_mwh: Series,
}

impl RaParams {
    pub fn validate(&self, grid: &TimeGrid) -> Result<(), ModelError> {
        self.asy.validate("ra.asy")?;
        check_positive("ra.h2a_t_per_nm3", self.h2a_t_per_nm3)?;
        check_positive("ra.p2a_t_per_mwh", self.p2a_t_per_mwh)?;
        self.hst.validate("ra.hst")?;
        check_nonnegative("ra.ast_capacity_t", self.ast_capacity_t)?;
        self.backup_price_cny_per_mwh
            .check_len("ra.backup_price_cny_per_mwh", grid.intervals())
    }
}

/// Available renewable power per interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResProfile {
    pub wind_mw: Vec<f64>,
    pub solar_mw: Vec<f64>,
}

impl ResProfile {
    pub fn validate(
        &self,
        grid: &TimeGrid,
        wind_cap: f64,
        solar_cap: f64,
    ) -> Result<(), ModelError> {
        for (series, cap) in [(&self.wind_mw, wind_cap), (&self.solar_mw, solar_cap)] {
            if series.len() != grid.intervals() {
                return Err(ModelError::ProfileLength {
                    expected: grid.intervals(),
                    got: series.len(),
                });
            }
            for (t, &v) in series.iter().enumerate() {
                if !(v >= 0.0) {
                    return Err(invalid(
                        "profile",
                        format!("negative value {v} at interval {t}"),
                    ));
                }
                if v > cap * (1.0 + 1e-12) {
                    return Err(ModelError::ProfileAboveCapacity {
                        interval: t,
                        value: v,
                        capacity: cap,
                    });
                }
            }
        }
        Ok(())
    }
}

// Shared building blocks.

pub(crate) struct BatteryVars {
    pub charge: BlockId,
    pub discharge: BlockId,
    pub reactive: BlockId,
}

/// Battery with apparent-power limits, cyclic state within the week and
/// degradation cost on discharge.
pub(crate) fn add_battery(
    b: &mut ProgramBuilder,
    prefix: &str,
    p: &BesParams,
    tau: usize,
    dt: f64,
) -> BatteryVars {
    let cap = units::power(p.capacity_mwh);
    let charge = b.block(&format!("{prefix}.charge"), tau, 0.0, 0.5 * cap, "100 MW");
    let discharge = b.block(
        &format!("{prefix}.discharge"),
        tau,
        0.0,
        0.5 * cap,
        "100 MW",
    );
    let reactive = b.block(&format!("{prefix}.reactive"), tau, -cap, cap, "100 Mvar");
    let level = b.block(
        &format!("{prefix}.level"),
        tau,
        p.level_min * cap,
        p.level_max * cap,
        "100 MWh",
    );
    let deg = units::electricity_price(p.degradation_cny_per_mwh) * dt;
    let limit = std::f64::consts::SQRT_2 * cap;
    let retention = (1.0 - p.self_discharge).powf(dt);
    for t in 0..tau {
        let (c, d, q) = (b.var(charge, t), b.var(discharge, t), b.var(reactive, t));
        b.cost(d, deg);
        for flow in [c, d] {
            b.row(
                &format!("{prefix}.apparent"),
                &[(flow, 1.0), (q, 1.0)],
                Sense::Le,
                limit,
            );
            b.row(
                &format!("{prefix}.apparent"),
                &[(flow, 1.0), (q, -1.0)],
                Sense::Le,
                limit,
            );
        }
        let prev = b.var(level, (t + tau - 1) % tau);
        let now = b.var(level, t);
        let mut terms = vec![
            (now, 1.0),
            (c, -p.charge_efficiency * dt),
            (d, dt / p.discharge_efficiency),
        ];
        if prev == now {
            terms[0].1 -= retention;
        } else {
            terms.push((prev, -retention));
        }
        b.row(&format!("{prefix}.balance"), &terms, Sense::Eq, 0.0);
    }
    BatteryVars {
        charge,
        discharge,
        reactive,
    }
}

pub(crate) struct TankVars {
    pub inflow: BlockId,
    pub outflow: BlockId,
}

/// Hydrogen tank with cyclic level within the week.
pub(crate) fn add_tank(
    b: &mut ProgramBuilder,
    prefix: &str,
    p: &TankParams,
    tau: usize,
    dt: f64,
) -> TankVars {
    let cap = units::hydrogen(p.capacity_nm3);
    let inflow = b.block(
        &format!("{prefix}.inflow"),
        tau,
        0.0,
        0.5 * cap,
        "1e4 Nm3/h",
    );
    let outflow = b.block(
        &format!("{prefix}.outflow"),
        tau,
        0.0,
        0.5 * cap,
        "1e4 Nm3/h",
    );
    let level = b.block(
        &format!("{prefix}.level"),
        tau,
        p.level_min * cap,
        p.level_max * cap,
        "1e4 Nm3",
    );
    for t in 0..tau {
        let prev = b.var(level, (t + tau - 1) % tau);
        let now = b.var(level, t);
        let mut terms = vec![(now, 1.0), (b.var(inflow, t), -dt), (b.var(outflow, t), dt)];
        if prev != now {
            terms.push((prev, -1.0));
        } else {
            terms[0].1 = 0.0;
        }
        b.row(&format!("{prefix}.balance"), &terms, Sense::Eq, 0.0);
    }
    TankVars { inflow, outflow }
}

/// Ramp limits between consecutive intervals of one week.
pub(crate) fn add_ramps(
    b: &mut ProgramBuilder,
    family: &str,
    rate: &[VarId],
    asy: &SynthesisParams,
) {
    let cap = units::ammonia(asy.capacity_tph);
    for w in rate.windows(2) {
        b.row(
            family,
            &[(w[1], 1.0), (w[0], -1.0)],
            Sense::Le,
            asy.ramp_up * cap,
        );
        b.row(
            family,
            &[(w[0], 1.0), (w[1], -1.0)],
            Sense::Le,
            asy.ramp_down * cap,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(branches: &[(&str, &str)]) -> RadialNetwork {
        let mut names: Vec<&str> = branches.iter().flat_map(|&(a, b)| [a, b]).collect();
        names.sort();
        names.dedup();
        RadialNetwork {
            buses: names
                .iter()
                .map(|n| Bus {
                    name: n.to_string(),
                    vsq_min: 0.9,
                    vsq_max: 1.1,
                    var_comp_mvar: 0.0,
                })
                .collect(),
            branches: branches
                .iter()
                .map(|&(a, b)| Branch {
                    from: a.into(),
                    to: b.into(),
                    r_pu: 0.01,
                    x_pu: 0.02,
                })
                .collect(),
        }
    }

    #[test]
    fn tree_is_accepted_and_root_found() {
        let n = net(&[("a", "b"), ("b", "c"), ("b", "d")]);
        assert_eq!(n.validate().unwrap(), n.bus_index("a").unwrap());
    }

    #[test]
    fn two_parents_are_rejected() {
        let mut n = net(&[("a", "b"), ("c", "b")]);
        n.branches.push(Branch {
            from: "a".into(),
            to: "c".into(),
            r_pu: 0.0,
            x_pu: 0.0,
        });
        assert!(matches!(n.validate(), Err(ModelError::NotRadial(_))));
    }

    #[test]
    fn disconnected_cycle_is_rejected() {
        let n = net(&[("a", "b"), ("c", "d"), ("d", "c")]);
        assert!(matches!(n.validate(), Err(ModelError::NotRadial(_))));
    }

    #[test]
    fn inverted_load_range_is_named() {
        let s = SynthesisParams {
            capacity_tph: 10.0,
            load_min: 0.8,
            load_max: 0.5,
            ramp_down: 0.2,
            ramp_up: 0.2,
        };
        match s.validate("ga.asy") {
            Err(ModelError::InvalidParameter { field, .. }) => assert_eq!(field, "ga.asy.load_min"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn grid_counts() {
        let g = TimeGrid::default();
        assert_eq!(g.intervals(), 2016);
        assert_eq!(g.week_range(2), 336..504);
        assert!(TimeGrid { weeks: 0, ..g }.validate().is_err());
    }
}
