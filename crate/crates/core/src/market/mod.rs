//! Ammonia demand curve, carbon ledger and mechanism configuration.

mod carbon;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::{ProgramBuilder, RowId, Sense, VarId};
use crate::units;

pub use carbon::{
    carbon_supplier_program, CarbonLedger, GaCarbon, Mechanism, PurchaseRule, SUPPLY_BLOCK,
    SUPPLY_PRICE_BLOCK,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("invalid demand curve: {0}")]
    InvalidCurve(String),
    #[error("negative quantity {0}")]
    NegativeQuantity(f64),
    #[error("mechanism m3 needs a fixed carbon price")]
    MissingFixedPrice,
    #[error("invalid carbon ledger: {0}")]
    InvalidLedger(String),
    #[error("unknown mechanism `{0}` (expected m1, m2, m3 or pcim)")]
    UnknownMechanism(String),
}

/// Weekly inverse demand `price = max_price − total / elasticity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandCurve {
    /// CNY/t at zero sales.
    pub rho_max: f64,
    /// t²/CNY: tonnes of weekly demand gained per CNY/t of price cut.
    pub k_am: f64,
}

impl DemandCurve {
    pub fn new(rho_max: f64, k_am: f64) -> Result<Self, MarketError> {
        let c = Self { rho_max, k_am };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        if !(self.rho_max.is_finite() && self.rho_max > 0.0) {
            return Err(MarketError::InvalidCurve(format!(
                "rho_max = {}",
                self.rho_max
            )));
        }
        if !(self.k_am.is_finite() && self.k_am > 0.0) {
            return Err(MarketError::InvalidCurve(format!("k_am = {}", self.k_am)));
        }
        Ok(())
    }

    /// CNY/t for a weekly total in t. Negative beyond saturation.
    pub fn price(&self, total_t: f64) -> f64 {
        self.rho_max - total_t / self.k_am
    }

    /// Weekly volume (t) at which the price reaches zero.
    pub fn saturation_t(&self) -> f64 {
        self.k_am * self.rho_max
    }

    /// Cost-form coefficients in physical units (CNY, t).
    pub fn revenue_terms(&self) -> RevenueTerms {
        RevenueTerms {
            own: -self.rho_max,
            own_squared: 1.0 / self.k_am,
            own_rival: 1.0 / self.k_am,
        }
    }

    /// Cost-form coefficients on scaled program units.
    pub fn scaled_terms(&self) -> RevenueTerms {
        // Prices and volumes share the ammonia base, so k keeps its value.
        RevenueTerms {
            own: -units::ammonia_price(self.rho_max),
            own_squared: 1.0 / self.k_am,
            own_rival: 1.0 / self.k_am,
        }
    }
}

/// `−(ρmax − (own + rival)/k)·own` expanded into
/// `own·d + own²·own_squared + own·rival·own_rival`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevenueTerms {
    pub own: f64,
    pub own_squared: f64,
    pub own_rival: f64,
}

impl RevenueTerms {
    /// Minimisation-form contribution at `(own, rival)`.
    pub fn cost(&self, own: f64, rival: f64) -> f64 {
        self.own * own + self.own_squared * own * own + self.own_rival * own * rival
    }

    /// Marginal revenue `ρmax − (2·own + rival)/k`.
    pub fn marginal_revenue(&self, own: f64, rival: f64) -> f64 {
        -(self.own + 2.0 * self.own_squared * own + self.own_rival * rival)
    }
}

/// Price in CNY/t after checking that both quantities are nonnegative.
pub fn inverse_demand(d_ga: f64, d_ra: f64, curve: &DemandCurve) -> Result<f64, MarketError> {
    for q in [d_ga, d_ra] {
        if q < 0.0 || q.is_nan() {
            return Err(MarketError::NegativeQuantity(q));
        }
    }
    Ok(curve.price(d_ga + d_ra))
}

/// Adds the Cournot revenue of `own` facing `rival` to a minimisation
/// objective (scaled units).
pub fn add_cournot_revenue(b: &mut ProgramBuilder, own: VarId, rival: VarId, curve: &DemandCurve) {
    let t = curve.scaled_terms();
    b.cost(own, t.own);
    b.quadratic(own, own, t.own_squared);
    b.quadratic(own, rival, t.own_rival);
}

/// Dual identity shared by every seller's sales-cap row of week `w`.
pub fn sales_cap_id(w: usize) -> String {
    format!("ammonia.sales_cap[{w}]")
}

/// `own + rival ≤ k·ρmax`, keeping the weekly price nonnegative.
pub fn add_sales_cap(
    b: &mut ProgramBuilder,
    week: usize,
    own: VarId,
    rival: VarId,
    curve: &DemandCurve,
) -> RowId {
    let cap = units::ammonia(curve.saturation_t());
    b.coupling_row(
        "ammonia.sales_cap",
        &sales_cap_id(week),
        &[(own, 1.0), (rival, 1.0)],
        Sense::Le,
        cap,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve() -> DemandCurve {
        DemandCurve::new(2900.0, 35.0).unwrap()
    }

    #[test]
    fn price_at_reference_points() {
        let c = curve();
        assert_eq!(inverse_demand(0.0, 0.0, &c).unwrap(), 2900.0);
        let p = inverse_demand(6500.0, 6500.0, &c).unwrap();
        assert!((p - (2900.0 - 13_000.0 / 35.0)).abs() < 1e-12);
        assert!((p - 2_528.571_428_571).abs() < 1e-6);
        assert!(inverse_demand(101_500.0, 0.0, &c).unwrap().abs() < 1e-9);
        assert_eq!(c.saturation_t(), 101_500.0);
    }

    #[test]
    fn negative_quantities_are_rejected() {
        assert!(matches!(
            inverse_demand(-1.0, 0.0, &curve()),
            Err(MarketError::NegativeQuantity(_))
        ));
    }

    #[test]
    fn invalid_curves_are_rejected() {
        assert!(DemandCurve::new(0.0, 35.0).is_err());
        assert!(DemandCurve::new(2900.0, -1.0).is_err());
    }

    #[test]
    fn expansion_without_rival() {
        let t = curve().revenue_terms();
        let d = 1234.0;
        assert!((t.cost(d, 0.0) - (-2900.0 * d + d * d / 35.0)).abs() < 1e-9);
    }

    #[test]
    fn symmetric_cournot_point_equates_marginal_revenue_and_cost() {
        let c = curve();
        let d = c.k_am * (c.rho_max - 2000.0) / 3.0;
        assert!((d - 10_500.0).abs() < 1e-9);
        let mr = c.revenue_terms().marginal_revenue(d, d);
        assert!((mr - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn scaled_terms_reproduce_physical_revenue() {
        let c = curve();
        let (own, rival) = (10_500.0, 3_000.0);
        let phys = c.revenue_terms().cost(own, rival);
        let scaled = c
            .scaled_terms()
            .cost(units::ammonia(own), units::ammonia(rival));
        assert!((units::money_cny(scaled) - phys).abs() < 1e-6 * phys.abs());
    }

    proptest! {
        #[test]
        fn expansion_equals_negative_price_times_own(own in 0.0..60_000.0f64, rival in 0.0..60_000.0f64) {
            let c = curve();
            let expected = -inverse_demand(own, rival, &c).unwrap() * own;
            let got = c.revenue_terms().cost(own, rival);
            prop_assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0));
        }

        #[test]
        fn marginal_revenue_matches_finite_difference(own in 1.0..50_000.0f64, rival in 0.0..50_000.0f64) {
            let t = curve().revenue_terms();
            let h = 1e-3;
            let fd = -(t.cost(own + h, rival) - t.cost(own - h, rival)) / (2.0 * h);
            prop_assert!((fd - t.marginal_revenue(own, rival)).abs() < 1e-4);
        }
    }
}
