use std::fmt;

use serde::{Deserialize, Serialize};

use super::MarketError;
use crate::program::{ConvexProgram, ProgramBuilder, ProgramError};
use crate::units;

/// Block holding the chain's aggregated allowance supply.
pub const SUPPLY_BLOCK: &str = "supply";
/// Parameter block for the carbon price seen by the supplier.
pub const SUPPLY_PRICE_BLOCK: &str = "carbon_price";

/// Carbon market design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Mechanism {
    /// No cap on gray ammonia, no trading (M1).
    NoCap,
    /// Cap on gray ammonia without trading (M2).
    CapOnly,
    /// Cap plus transfer of the chain's allowances at a fixed price (M3).
    FixedPrice { price_cny_per_t: f64 },
    /// Cap plus trading at the clearing price.
    Pcim,
    /// Clearing-price trading with the supplied volume forced to `volume_t`.
    Pinned { volume_t: f64 },
}

impl Mechanism {
    /// Parses `m1`, `m2`, `m3` or `pcim`; `m3` needs `fixed_price`.
    pub fn parse(name: &str, fixed_price: Option<f64>) -> Result<Self, MarketError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "m1" => Ok(Mechanism::NoCap),
            "m2" => Ok(Mechanism::CapOnly),
            "m3" => fixed_price
                .map(|p| Mechanism::FixedPrice { price_cny_per_t: p })
                .ok_or(MarketError::MissingFixedPrice),
            "pcim" => Ok(Mechanism::Pcim),
            other => Err(MarketError::UnknownMechanism(other.to_string())),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Mechanism::NoCap => "M1".into(),
            Mechanism::CapOnly => "M2".into(),
            Mechanism::FixedPrice { price_cny_per_t } => format!("M3@{price_cny_per_t}"),
            Mechanism::Pcim => "PCIM".into(),
            Mechanism::Pinned { volume_t } => format!("PCIM@{volume_t}t"),
        }
    }

    /// Whether the carbon price is a market-clearing dual.
    pub fn clears(&self) -> bool {
        matches!(self, Mechanism::Pcim | Mechanism::Pinned { .. })
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Annual allowances and the market design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarbonLedger {
    /// Initial allowance of the gray producers, t CO₂.
    pub q_allo_t: f64,
    /// Incentive allowance of the renewable chain, t CO₂.
    pub q_rewa_t: f64,
    pub mechanism: Mechanism,
}

/// How a gray producer's allowance purchase is determined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PurchaseRule {
    /// Purchase fixed at zero.
    Zero,
    /// Purchase fixed at the given volume (t).
    Forced(f64),
    /// Purchase chosen against the clearing price; the volume is bounded
    /// only through clearing with the chain's supply.
    Market,
}

/// Carbon terms of one gray producer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaCarbon {
    /// Initial allowance (t); `None` drops the emission cap.
    pub cap_t: Option<f64>,
    pub purchase: PurchaseRule,
    /// Price used when the carbon price is not a clearing dual (CNY/t).
    pub price_cny_per_t: f64,
}

impl CarbonLedger {
    pub fn validate(&self) -> Result<(), MarketError> {
        for (name, v) in [("q_allo_t", self.q_allo_t), ("q_rewa_t", self.q_rewa_t)] {
            if !(v.is_finite() || v == f64::INFINITY) || v < 0.0 {
                return Err(MarketError::InvalidLedger(format!("{name} = {v}")));
            }
        }
        match self.mechanism {
            Mechanism::FixedPrice { price_cny_per_t } if !(price_cny_per_t >= 0.0) => Err(
                MarketError::InvalidLedger(format!("fixed price {price_cny_per_t} is negative")),
            ),
            Mechanism::Pinned { volume_t } if !(0.0..=self.q_rewa_t).contains(&volume_t) => {
                Err(MarketError::InvalidLedger(format!(
                    "pinned volume {volume_t} outside [0, {}]",
                    self.q_rewa_t
                )))
            }
            _ => Ok(()),
        }
    }

    /// Terms of a producer holding `allowance_t` of the initial allowance and
    /// `reward_share` of any forced transfer. Non-participants never buy.
    pub fn ga_terms(&self, allowance_t: f64, reward_share: f64, participates: bool) -> GaCarbon {
        let cap = Some(allowance_t);
        match self.mechanism {
            Mechanism::NoCap => GaCarbon {
                cap_t: None,
                purchase: PurchaseRule::Zero,
                price_cny_per_t: 0.0,
            },
            Mechanism::CapOnly => GaCarbon {
                cap_t: cap,
                purchase: PurchaseRule::Zero,
                price_cny_per_t: 0.0,
            },
            Mechanism::FixedPrice { price_cny_per_t } => GaCarbon {
                cap_t: cap,
                purchase: if participates {
                    PurchaseRule::Forced(self.q_rewa_t * reward_share)
                } else {
                    PurchaseRule::Zero
                },
                price_cny_per_t,
            },
            Mechanism::Pcim | Mechanism::Pinned { .. } => GaCarbon {
                cap_t: cap,
                purchase: if participates {
                    PurchaseRule::Market
                } else {
                    PurchaseRule::Zero
                },
                price_cny_per_t: 0.0,
            },
        }
    }
}

/// Price-taking allowance supply of the renewable chain:
/// `min −price·supply, 0 ≤ supply ≤ q_rewa` (pinned: `supply = volume`).
/// Returns `None` when the mechanism has no clearing market.
pub fn carbon_supplier_program(
    ledger: &CarbonLedger,
) -> Result<Option<ConvexProgram>, ProgramError> {
    let (lo, hi) = match ledger.mechanism {
        Mechanism::Pcim => (0.0, units::co2(ledger.q_rewa_t)),
        Mechanism::Pinned { volume_t } => (units::co2(volume_t), units::co2(volume_t)),
        _ => return Ok(None),
    };
    let mut b = ProgramBuilder::new("carbon_supplier");
    let supply = b.block(SUPPLY_BLOCK, 1, lo, hi, "kt CO2");
    let price = b.parameter(SUPPLY_PRICE_BLOCK, vec![0.0], "1e4 CNY/kt");
    let (s, p) = (b.var(supply, 0), b.var(price, 0));
    b.quadratic(s, p, -1.0);
    Ok(Some(b.build()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, SolverOptions};

    fn ledger(mechanism: Mechanism) -> CarbonLedger {
        CarbonLedger {
            q_allo_t: 344_513.736,
            q_rewa_t: 68_902.747_2,
            mechanism,
        }
    }

    #[test]
    fn mechanism_names_parse() {
        assert_eq!(Mechanism::parse("M1", None).unwrap(), Mechanism::NoCap);
        assert_eq!(Mechanism::parse("pcim", None).unwrap(), Mechanism::Pcim);
        assert_eq!(
            Mechanism::parse("m3", Some(50.0)).unwrap(),
            Mechanism::FixedPrice {
                price_cny_per_t: 50.0
            }
        );
        assert_eq!(
            Mechanism::parse("m3", None),
            Err(MarketError::MissingFixedPrice)
        );
        assert!(Mechanism::parse("m4", None).is_err());
    }

    #[test]
    fn no_cap_drops_the_emission_row() {
        let t = ledger(Mechanism::NoCap).ga_terms(344_513.736, 1.0, true);
        assert_eq!(t.cap_t, None);
        assert_eq!(t.purchase, PurchaseRule::Zero);
    }

    #[test]
    fn fixed_price_transfers_the_whole_reward() {
        let t = ledger(Mechanism::FixedPrice {
            price_cny_per_t: 50.0,
        })
        .ga_terms(344_513.736, 1.0, true);
        assert_eq!(t.purchase, PurchaseRule::Forced(68_902.747_2));
        assert_eq!(t.price_cny_per_t, 50.0);
    }

    #[test]
    fn non_participants_never_buy() {
        let t = ledger(Mechanism::Pcim).ga_terms(100.0, 0.5, false);
        assert_eq!(t.purchase, PurchaseRule::Zero);
        assert_eq!(t.cap_t, Some(100.0));
    }

    #[test]
    fn pinned_volume_must_lie_within_reward() {
        assert!(ledger(Mechanism::Pinned { volume_t: 9_000.0 })
            .validate()
            .is_ok());
        assert!(ledger(Mechanism::Pinned { volume_t: 1e6 })
            .validate()
            .is_err());
        assert!(ledger(Mechanism::FixedPrice {
            price_cny_per_t: -1.0
        })
        .validate()
        .is_err());
    }

    #[test]
    fn supplier_sells_everything_at_a_positive_price() {
        let mut p = carbon_supplier_program(&ledger(Mechanism::Pcim))
            .unwrap()
            .unwrap();
        p.set_parameter(SUPPLY_PRICE_BLOCK, &[units::carbon_price(67.1)])
            .unwrap();
        let s = solve(&p, &SolverOptions::default());
        assert!((units::co2_t(s.x[0]) - 68_902.747_2).abs() < 1e-3);
    }

    #[test]
    fn zero_reward_supplies_nothing() {
        let mut l = ledger(Mechanism::Pcim);
        l.q_rewa_t = 0.0;
        let p = carbon_supplier_program(&l).unwrap().unwrap();
        assert_eq!(p.upper_bounds()[0], 0.0);
        assert!(carbon_supplier_program(&ledger(Mechanism::CapOnly))
            .unwrap()
            .is_none());
    }
}
