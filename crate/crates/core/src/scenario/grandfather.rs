use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::models::TimeGrid;

/// Historical-output allowance rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrandfatherSpec {
    /// t CO₂ per t NH₃ of the gray producers.
    pub emission_t_per_t: f64,
    /// Benchmark utilization of gray capacity.
    pub utilization: f64,
    /// One minus the annual reduction rate.
    pub reduction_multiplier: f64,
    /// Historical production weights `[gray, green]`; defaults to the
    /// installed synthesis capacities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shares: Option<[f64; 2]>,
}

/// Annual allowances in t CO₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    pub total_t: f64,
    pub q_allo_t: f64,
    pub q_rewa_t: f64,
}

fn unit_interval(field: &str, v: f64) -> Result<(), ScenarioError> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(ScenarioError::invalid(field, format!("{v} outside (0, 1]")))
    }
}

/// `k_emis · Σ gray capacity · hours · utilization · reduction`, split between
/// the gray producers and the renewable chain by historical shares.
pub fn grandfather_caps(
    spec: &GrandfatherSpec,
    gray_capacities_tph: &[f64],
    green_capacity_tph: f64,
    grid: &TimeGrid,
) -> Result<Caps, ScenarioError> {
    unit_interval("carbon.grandfather.utilization", spec.utilization)?;
    unit_interval(
        "carbon.grandfather.reduction_multiplier",
        spec.reduction_multiplier,
    )?;
    if !(spec.emission_t_per_t > 0.0) {
        return Err(ScenarioError::invalid(
            "carbon.grandfather.emission_t_per_t",
            "must be positive",
        ));
    }
    let gray: f64 = gray_capacities_tph.iter().sum();
    if !(gray > 0.0) {
        return Err(ScenarioError::invalid(
            "ga.asy.capacity_tph",
            "total gray capacity is zero",
        ));
    }
    let hours = grid.intervals() as f64 * grid.step_h;
    let total_t =
        spec.emission_t_per_t * gray * hours * spec.utilization * spec.reduction_multiplier;
    let [w_gray, w_green] = spec.shares.unwrap_or([gray, green_capacity_tph]);
    if !(w_gray >= 0.0 && w_green >= 0.0 && w_gray + w_green > 0.0) {
        return Err(ScenarioError::invalid(
            "carbon.grandfather.shares",
            format!("[{w_gray}, {w_green}] must be nonnegative with a positive sum"),
        ));
    }
    let green_share = w_green / (w_gray + w_green);
    Ok(Caps {
        total_t,
        q_allo_t: total_t * (1.0 - green_share),
        q_rewa_t: total_t * green_share,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GrandfatherSpec {
        GrandfatherSpec {
            emission_t_per_t: 3.0,
            utilization: 0.9,
            reduction_multiplier: 0.97,
            shares: None,
        }
    }

    #[test]
    fn capacity_shares_split_five_to_one() {
        let c = grandfather_caps(&spec(), &[78.3], 15.66, &TimeGrid::default()).unwrap();
        let total = 3.0 * 78.3 * 168.0 * 12.0 * 0.9 * 0.97;
        assert!((c.total_t - total).abs() <= 1e-9 * total);
        assert!((c.q_allo_t - total * 5.0 / 6.0).abs() <= 1e-9 * total);
        assert!((c.q_allo_t + c.q_rewa_t - c.total_t).abs() <= 1e-9 * total);
    }

    #[test]
    fn zero_utilization_is_rejected() {
        let mut s = spec();
        s.utilization = 0.0;
        let err = grandfather_caps(&s, &[78.3], 15.66, &TimeGrid::default()).unwrap_err();
        assert!(err.to_string().contains("utilization"));
    }

    #[test]
    fn zero_capacity_is_rejected() {
        assert!(grandfather_caps(&spec(), &[0.0], 15.66, &TimeGrid::default()).is_err());
    }
}
