//! Allocation of the chain's carbon revenue among its three members.
//!
//! Gains are relative revenue changes against a no-trading baseline:
//! `gain_k = (R_k + q_k·ρ − C̃_k) / C̃_k`. The proposed scheme picks the
//! split that minimises the sum of pairwise gain differences while keeping
//! every gain nonnegative.

mod perturb;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{ProgramBuilder, ProgramError, Sense, SolveStatus};
use crate::solver::{solve, SolverOptions};

pub use perturb::{perturb_ir, PerturbationReport, PerturbationRow};

/// Member of the renewable chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Member {
    Rg,
    Hp,
    Ra,
}

impl Member {
    pub const ALL: [Member; 3] = [Member::Rg, Member::Hp, Member::Ra];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Member::Rg => "rg",
            Member::Hp => "hp",
            Member::Ra => "ra",
        }
    }
}

impl fmt::Display for Member {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Member {
    type Err = AllocationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Member::ALL
            .into_iter()
            .find(|m| m.label() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| AllocationError::UnknownScheme(s.to_string()))
    }
}

/// Allocation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Minimum pairwise gain deviation subject to individual rationality.
    Pcam,
    /// Everything to one member.
    Cam1(Member),
    /// Equal thirds.
    Cam2,
}

impl FromStr for Scheme {
    type Err = AllocationError;

    /// `pcam`, `cam2` or `cam1:<member>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "pcam" => Ok(Scheme::Pcam),
            "cam2" => Ok(Scheme::Cam2),
            _ => match lower.strip_prefix("cam1:") {
                Some(m) => Ok(Scheme::Cam1(m.parse()?)),
                None => Err(AllocationError::UnknownScheme(s.to_string())),
            },
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Pcam => f.write_str("PCAM"),
            Scheme::Cam1(m) => write!(f, "CAM1:{m}"),
            Scheme::Cam2 => f.write_str("CAM2"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("baseline revenue of {member} is {value} CNY; gains need a positive baseline")]
    NonPositiveBaseline { member: Member, value: f64 },
    #[error("invalid allocation input: {0}")]
    InvalidInput(String),
    #[error("no split leaves every member at least as well off; {member} falls short by {shortfall_cny:.6e} CNY")]
    NotIndividuallyRational { member: Member, shortfall_cny: f64 },
    #[error("unknown scheme `{0}` (expected pcam, cam2 or cam1:rg|hp|ra)")]
    UnknownScheme(String),
    #[error("allocation LP: {0}")]
    Solver(SolveStatus),
    #[error(transparent)]
    Program(#[from] ProgramError),
}

/// Revenues entering an allocation, in RG/HP/RA order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationInput {
    /// Allowances sold by the chain, t.
    pub traded_t: f64,
    pub carbon_price_cny_per_t: f64,
    /// Revenues without allowance trading, CNY.
    pub baseline_cny: [f64; 3],
    /// Revenues with trading before the carbon revenue is split, CNY.
    pub revenue_cny: [f64; 3],
}

impl AllocationInput {
    pub fn pool_cny(&self) -> f64 {
        self.traded_t * self.carbon_price_cny_per_t
    }

    pub fn validate(&self) -> Result<(), AllocationError> {
        for m in Member::ALL {
            let c = self.baseline_cny[m.index()];
            if !(c > 0.0 && c.is_finite()) {
                return Err(AllocationError::NonPositiveBaseline {
                    member: m,
                    value: c,
                });
            }
            if !self.revenue_cny[m.index()].is_finite() {
                return Err(AllocationError::InvalidInput(format!(
                    "revenue of {m} is not finite"
                )));
            }
        }
        if !(self.traded_t >= 0.0 && self.traded_t.is_finite()) {
            return Err(AllocationError::InvalidInput(format!(
                "traded volume {}",
                self.traded_t
            )));
        }
        if !(self.carbon_price_cny_per_t >= 0.0 && self.carbon_price_cny_per_t.is_finite()) {
            return Err(AllocationError::InvalidInput(format!(
                "carbon price {}",
                self.carbon_price_cny_per_t
            )));
        }
        Ok(())
    }

    /// Relative gain of every member under `split_t`.
    pub fn gains(&self, split_t: &[f64; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for k in 0..3 {
            let c = self.baseline_cny[k];
            g[k] = (self.revenue_cny[k] + split_t[k] * self.carbon_price_cny_per_t - c) / c;
        }
        g
    }
}

/// Sum of pairwise absolute gain differences.
pub fn deviation_sum(gains: &[f64; 3]) -> f64 {
    (gains[0] - gains[1]).abs() + (gains[1] - gains[2]).abs() + (gains[0] - gains[2]).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub scheme: Scheme,
    pub split_t: [f64; 3],
    pub gains: [f64; 3],
    pub deviation_sum: f64,
    pub individually_rational: [bool; 3],
}

impl AllocationResult {
    fn new(scheme: Scheme, input: &AllocationInput, split_t: [f64; 3]) -> Self {
        let gains = input.gains(&split_t);
        Self {
            scheme,
            split_t,
            gains,
            deviation_sum: deviation_sum(&gains),
            individually_rational: gains.map(|g| g >= -1e-9),
        }
    }

    /// Revenue of each member after allocation, CNY.
    pub fn revenues_cny(&self, input: &AllocationInput) -> [f64; 3] {
        let mut r = input.revenue_cny;
        for (k, v) in r.iter_mut().enumerate() {
            *v += self.split_t[k] * input.carbon_price_cny_per_t;
        }
        r
    }
}

pub fn allocate(
    input: &AllocationInput,
    scheme: Scheme,
) -> Result<AllocationResult, AllocationError> {
    match scheme {
        Scheme::Pcam => allocate_pcam(input, &SolverOptions::default()),
        other => allocate_baseline(input, other),
    }
}

/// CAM1 or CAM2; gains are reported without enforcing rationality.
pub fn allocate_baseline(
    input: &AllocationInput,
    scheme: Scheme,
) -> Result<AllocationResult, AllocationError> {
    input.validate()?;
    let q = input.traded_t;
    let split = match scheme {
        Scheme::Cam1(target) => {
            let mut s = [0.0; 3];
            s[target.index()] = q;
            s
        }
        Scheme::Cam2 => [q / 3.0; 3],
        Scheme::Pcam => return allocate_pcam(input, &SolverOptions::default()),
    };
    Ok(AllocationResult::new(scheme, input, split))
}

/// Proposed allocation: minimum pairwise deviation of gains with every gain
/// nonnegative; ties go to the split with the largest smallest gain.
pub fn allocate_pcam(
    input: &AllocationInput,
    options: &SolverOptions,
) -> Result<AllocationResult, AllocationError> {
    input.validate()?;
    let pool = input.pool_cny();
    // Each member needs at least its shortfall from the pool.
    let shortfall: Vec<f64> = (0..3)
        .map(|k| (input.baseline_cny[k] - input.revenue_cny[k]).max(0.0))
        .collect();
    let needed: f64 = shortfall.iter().sum();
    if needed > pool * (1.0 + 1e-12) + 1e-9 {
        let worst = Member::ALL
            .into_iter()
            .max_by(|a, b| {
                let ra = shortfall[a.index()] / input.baseline_cny[a.index()];
                let rb = shortfall[b.index()] / input.baseline_cny[b.index()];
                ra.total_cmp(&rb)
            })
            .expect("three members");
        return Err(AllocationError::NotIndividuallyRational {
            member: worst,
            shortfall_cny: shortfall[worst.index()],
        });
    }
    if input.traded_t == 0.0 {
        return Ok(AllocationResult::new(Scheme::Pcam, input, [0.0; 3]));
    }

    // Variables are shares of the traded volume.
    let first = solve_share_lp(input, None, options)?;
    let best = first.1;
    let (shares, _) = solve_share_lp(input, Some(best), options)?;
    let split = shares.map(|s| s.max(0.0) * input.traded_t);
    Ok(AllocationResult::new(Scheme::Pcam, input, split))
}

/// With `bound = None` minimises the deviation sum; otherwise maximises the
/// smallest gain among splits within `bound` of that minimum.
fn solve_share_lp(
    input: &AllocationInput,
    bound: Option<f64>,
    options: &SolverOptions,
) -> Result<([f64; 3], f64), AllocationError> {
    let pool = input.pool_cny();
    let mut b = ProgramBuilder::new("pcam");
    let share = b.block("share", 3, 0.0, f64::INFINITY, "1");
    let gain = b.block("gain", 3, 0.0, f64::INFINITY, "1");
    let gap = b.block("gap", 3, 0.0, f64::INFINITY, "1");
    let s: Vec<_> = b.vars(share).collect();
    let g: Vec<_> = b.vars(gain).collect();
    let d: Vec<_> = b.vars(gap).collect();
    b.row(
        "pcam.budget",
        &[(s[0], 1.0), (s[1], 1.0), (s[2], 1.0)],
        Sense::Eq,
        1.0,
    );
    for k in 0..3 {
        // gain_k·C̃_k − share_k·pool = R_k − C̃_k
        let c = input.baseline_cny[k];
        let scale = c.abs().max(pool);
        b.row(
            "pcam.gain",
            &[(g[k], c / scale), (s[k], -pool / scale)],
            Sense::Eq,
            (input.revenue_cny[k] - c) / scale,
        );
    }
    for (p, (i, j)) in [(0, 1), (1, 2), (0, 2)].into_iter().enumerate() {
        b.row(
            "pcam.abs",
            &[(d[p], 1.0), (g[i], -1.0), (g[j], 1.0)],
            Sense::Ge,
            0.0,
        );
        b.row(
            "pcam.abs",
            &[(d[p], 1.0), (g[i], 1.0), (g[j], -1.0)],
            Sense::Ge,
            0.0,
        );
    }
    match bound {
        None => d.iter().for_each(|&v| b.cost(v, 1.0)),
        Some(best) => {
            let floor = b.block("floor", 1, f64::NEG_INFINITY, f64::INFINITY, "1");
            let z = b.var(floor, 0);
            b.row(
                "pcam.optimal",
                &[(d[0], 1.0), (d[1], 1.0), (d[2], 1.0)],
                Sense::Le,
                best + 1e-9,
            );
            for &gk in &g {
                b.row("pcam.floor", &[(z, 1.0), (gk, -1.0)], Sense::Le, 0.0);
            }
            b.cost(z, -1.0);
        }
    }
    let lp = b.build()?;
    let sol = solve(&lp, options);
    if !sol.status().is_optimal() {
        return Err(AllocationError::Solver(sol.status()));
    }
    let v = lp.block_values("share", &sol.x)?;
    let dev: f64 = lp.block_values("gap", &sol.x)?.iter().sum();
    Ok(([v[0], v[1], v[2]], dev))
}
