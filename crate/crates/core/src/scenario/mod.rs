//! Scenario files: parameters of every stakeholder, the markets and the
//! renewable availability, plus allowance arithmetic and synthetic profiles.

mod grandfather;
mod synth;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{CarbonLedger, DemandCurve, MarketError, Mechanism};
use crate::models::{GaParams, HpParams, ModelError, RaParams, ResProfile, RgParams, TimeGrid};
use crate::solver::SolverOptions;

pub use grandfather::{grandfather_caps, Caps, GrandfatherSpec};
pub use synth::{synth_res, SolarSpec, SynthSpec, WindSpec};

pub const SCHEMA_VERSION: u32 = 1;

const DEFAULT_JSON: &str = include_str!("../../data/default.scenario.json");

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("profile csv `{path}`: {message}")]
    Csv { path: PathBuf, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Market(#[from] MarketError),
}

impl ScenarioError {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

/// Explicit allowances (t CO₂).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitCaps {
    pub q_allo_t: f64,
    pub q_rewa_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allowances {
    Grandfather(GrandfatherSpec),
    Explicit(ExplicitCaps),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarbonSpec {
    pub allowances: Allowances,
    /// Gray producers that stay out of allowance trading.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub non_participants: Vec<String>,
}

/// Where the renewable availability comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResSource {
    Synthetic(SynthSpec),
    /// CSV with header `wt_mw,pv_mw`, one row per interval; relative paths
    /// are resolved against the scenario file.
    Csv {
        path: PathBuf,
    },
    Inline(ResProfile),
}

fn default_seed() -> u64 {
    42
}

fn default_reference_price() -> f64 {
    2500.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub grid: TimeGrid,
    pub market: DemandCurve,
    pub carbon: CarbonSpec,
    pub ga: Vec<GaParams>,
    pub rg: RgParams,
    pub hp: HpParams,
    pub ra: RaParams,
    pub res: ResSource,
    /// Ammonia value used when scheduling weekly production (CNY/t).
    #[serde(default = "default_reference_price")]
    pub sp_reference_price_cny_per_t: f64,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn parse_error(origin: &str, e: serde_json::Error) -> ScenarioError {
    ScenarioError::Parse {
        origin: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

impl Scenario {
    /// Parses and validates a scenario; CSV profiles are resolved against `base`.
    pub fn from_json(text: &str, origin: &str, base: Option<&Path>) -> Result<Self, ScenarioError> {
        let mut s: Scenario = serde_json::from_str(text).map_err(|e| parse_error(origin, e))?;
        if let ResSource::Csv { path } = &s.res {
            let full = match base {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path.clone(),
            };
            s.res = ResSource::Inline(load_profile_csv(&full)?);
        }
        s.validate()?;
        Ok(s)
    }

    /// The scenario shipped with the crate.
    pub fn bundled_default() -> Self {
        Self::from_json(DEFAULT_JSON, "default.scenario.json", None)
            .expect("bundled scenario is valid")
    }

    pub fn bundled_default_json() -> &'static str {
        DEFAULT_JSON
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::SchemaVersion(self.schema_version));
        }
        self.grid.validate()?;
        self.market.validate()?;
        if self.ga.is_empty() {
            return Err(ScenarioError::invalid(
                "ga",
                "at least one gray producer is required",
            ));
        }
        let mut seen = HashSet::new();
        for g in &self.ga {
            if !seen.insert(g.name.as_str()) {
                return Err(ScenarioError::invalid(
                    "ga.name",
                    format!("duplicate `{}`", g.name),
                ));
            }
            g.asy.validate(&format!("ga.{}.asy", g.name))?;
            if !(g.emission_t_per_t > 0.0) {
                return Err(ScenarioError::invalid(
                    &format!("ga.{}.emission_t_per_t", g.name),
                    "must be positive",
                ));
            }
        }
        for n in &self.carbon.non_participants {
            if !seen.contains(n.as_str()) {
                return Err(ScenarioError::invalid(
                    "carbon.non_participants",
                    format!("unknown producer `{n}`"),
                ));
            }
        }
        self.rg.validate()?;
        self.hp.validate()?;
        self.ra.validate(&self.grid)?;
        if !(self.sp_reference_price_cny_per_t > 0.0) {
            return Err(ScenarioError::invalid(
                "sp_reference_price_cny_per_t",
                "must be positive",
            ));
        }
        self.profile()?
            .validate(&self.grid, self.rg.wt.capacity_mw, self.rg.pv.capacity_mw)?;
        let caps = self.caps()?;
        CarbonLedger {
            q_allo_t: caps.q_allo_t,
            q_rewa_t: caps.q_rewa_t,
            mechanism: Mechanism::Pcim,
        }
        .validate()?;
        Ok(())
    }

    /// Renewable availability over the whole grid.
    pub fn profile(&self) -> Result<ResProfile, ScenarioError> {
        match &self.res {
            ResSource::Synthetic(spec) => synth_res(
                self.seed,
                &self.grid,
                self.rg.wt.capacity_mw,
                self.rg.pv.capacity_mw,
                spec,
            ),
            ResSource::Inline(p) => Ok(p.clone()),
            ResSource::Csv { path } => load_profile_csv(path),
        }
    }

    pub fn caps(&self) -> Result<Caps, ScenarioError> {
        match self.carbon.allowances {
            Allowances::Grandfather(spec) => {
                let gray: Vec<f64> = self.ga.iter().map(|g| g.asy.capacity_tph).collect();
                grandfather_caps(&spec, &gray, self.ra.asy.capacity_tph, &self.grid)
            }
            Allowances::Explicit(c) => {
                for (name, v) in [("q_allo_t", c.q_allo_t), ("q_rewa_t", c.q_rewa_t)] {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(ScenarioError::invalid(
                            &format!("carbon.allowances.explicit.{name}"),
                            "must be nonnegative",
                        ));
                    }
                }
                Ok(Caps {
                    total_t: c.q_allo_t + c.q_rewa_t,
                    q_allo_t: c.q_allo_t,
                    q_rewa_t: c.q_rewa_t,
                })
            }
        }
    }

    pub fn ledger(&self, mechanism: Mechanism) -> Result<CarbonLedger, ScenarioError> {
        let caps = self.caps()?;
        let ledger = CarbonLedger {
            q_allo_t: caps.q_allo_t,
            q_rewa_t: caps.q_rewa_t,
            mechanism,
        };
        ledger.validate()?;
        Ok(ledger)
    }

    /// Share of the gray allowance held by each producer, by capacity.
    pub fn ga_shares(&self) -> Vec<f64> {
        let total: f64 = self.ga.iter().map(|g| g.asy.capacity_tph).sum();
        self.ga.iter().map(|g| g.asy.capacity_tph / total).collect()
    }

    pub fn participates(&self, ga: &str) -> bool {
        !self.carbon.non_participants.iter().any(|n| n == ga)
    }

    /// Replaces grandfathered allowances by their current values.
    pub fn freeze_allowances(&mut self) -> Result<(), ScenarioError> {
        let c = self.caps()?;
        self.carbon.allowances = Allowances::Explicit(ExplicitCaps {
            q_allo_t: c.q_allo_t,
            q_rewa_t: c.q_rewa_t,
        });
        Ok(())
    }

    /// Scales every capacity of the renewable chain, keeping allowances.
    pub fn scale_chain(&mut self, factor: f64) -> Result<(), ScenarioError> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(ScenarioError::invalid(
                "ra-capacity-mult",
                format!("{factor} must be positive"),
            ));
        }
        self.freeze_allowances()?;
        self.rg.wt.capacity_mw *= factor;
        self.rg.pv.capacity_mw *= factor;
        self.rg.bes.capacity_mwh *= factor;
        for bus in &mut self.rg.network.buses {
            bus.var_comp_mvar *= factor;
        }
        for br in &mut self.rg.network.branches {
            br.r_pu /= factor;
            br.x_pu /= factor;
        }
        self.hp.ae.capacity_mw *= factor;
        self.hp.hst.capacity_nm3 *= factor;
        self.hp.bes.capacity_mwh *= factor;
        for pipe in &mut self.hp.pipeline.pipes {
            pipe.k_gf *= factor;
            pipe.k_lp *= factor;
        }
        self.ra.asy.capacity_tph *= factor;
        self.ra.hst.capacity_nm3 *= factor;
        self.ra.ast_capacity_t *= factor;
        if let ResSource::Inline(p) = &mut self.res {
            p.wind_mw
                .iter_mut()
                .chain(p.solar_mw.iter_mut())
                .for_each(|v| *v *= factor);
        }
        self.validate()
    }

    /// Splits the gray capacity evenly over `n` identical producers named
    /// `GA1`, `GA2`, ….
    pub fn with_ga_count(&self, n: usize) -> Result<Self, ScenarioError> {
        if n == 0 {
            return Err(ScenarioError::invalid("ga-count", "must be at least 1"));
        }
        let mut s = self.clone();
        s.freeze_allowances()?;
        let total: f64 = self.ga.iter().map(|g| g.asy.capacity_tph).sum();
        let template = self.ga[0].clone();
        s.ga = (1..=n)
            .map(|i| {
                let mut g = template.clone();
                g.name = format!("GA{i}");
                g.asy.capacity_tph = total / n as f64;
                g
            })
            .collect();
        s.carbon.non_participants.clear();
        s.validate()?;
        Ok(s)
    }
}

/// Loads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::from_json(&text, &path.display().to_string(), path.parent())
}

#[derive(Deserialize)]
struct ProfileRow {
    wt_mw: f64,
    pv_mw: f64,
}

/// Reads a two-column `wt_mw,pv_mw` profile.
pub fn load_profile_csv(path: &Path) -> Result<ResProfile, ScenarioError> {
    let fail = |message: String| ScenarioError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| fail(e.to_string()))?;
    let headers = reader.headers().map_err(|e| fail(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "wt_mw" || &headers[1] != "pv_mw" {
        return Err(fail(format!(
            "header must be `wt_mw,pv_mw`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut profile = ResProfile {
        wind_mw: Vec::new(),
        solar_mw: Vec::new(),
    };
    for (i, row) in reader.deserialize::<ProfileRow>().enumerate() {
        let row = row.map_err(|e| fail(format!("line {}: {e}", i + 2)))?;
        profile.wind_mw.push(row.wt_mw);
        profile.solar_mw.push(row.pv_mw);
    }
    Ok(profile)
}
