use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::models::{ResProfile, TimeGrid};

/// Bounded AR(1) wind availability as a fraction of capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindSpec {
    pub mean_fraction: f64,
    /// Stationary standard deviation of the fraction.
    pub volatility: f64,
    /// Lag-one autocorrelation.
    pub persistence: f64,
}

/// Half-sine daylight mask scaled by a daily clearness draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolarSpec {
    pub clearness_mean: f64,
    pub clearness_spread: f64,
    pub sunrise_h: f64,
    pub sunset_h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub wind: WindSpec,
    pub solar: SolarSpec,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let w = &self.wind;
        let s = &self.solar;
        let checks = [
            (
                "res.synthetic.wind.mean_fraction",
                (0.0..=1.0).contains(&w.mean_fraction),
            ),
            (
                "res.synthetic.wind.volatility",
                w.volatility >= 0.0 && w.volatility.is_finite(),
            ),
            (
                "res.synthetic.wind.persistence",
                (0.0..1.0).contains(&w.persistence),
            ),
            (
                "res.synthetic.solar.clearness_mean",
                (0.0..=1.0).contains(&s.clearness_mean),
            ),
            (
                "res.synthetic.solar.clearness_spread",
                s.clearness_spread >= 0.0,
            ),
            (
                "res.synthetic.solar.sunset_h",
                0.0 <= s.sunrise_h && s.sunrise_h < s.sunset_h && s.sunset_h <= 24.0,
            ),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((field, _)) => Err(ScenarioError::invalid(field, "out of range")),
            None => Ok(()),
        }
    }
}

/// Solar mask in [0, 1] at hour-of-day `h`.
fn daylight(h: f64, s: &SolarSpec) -> f64 {
    if h <= s.sunrise_h || h >= s.sunset_h {
        0.0
    } else {
        (PI * (h - s.sunrise_h) / (s.sunset_h - s.sunrise_h)).sin()
    }
}

/// Seeded wind and solar availability (MW) over the whole grid.
pub fn synth_res(
    seed: u64,
    grid: &TimeGrid,
    wind_capacity_mw: f64,
    solar_capacity_mw: f64,
    spec: &SynthSpec,
) -> Result<ResProfile, ScenarioError> {
    spec.validate()?;
    let n = grid.intervals();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = &spec.wind;
    let innovation = w.volatility * (1.0 - w.persistence * w.persistence).sqrt();
    let mut x = w.mean_fraction;
    let mut wind_mw = Vec::with_capacity(n);
    for _ in 0..n {
        wind_mw.push(wind_capacity_mw * x.clamp(0.0, 1.0));
        let z: f64 = rng.sample(StandardNormal);
        x = w.mean_fraction + w.persistence * (x - w.mean_fraction) + innovation * z;
    }

    let s = &spec.solar;
    let mut solar_mw = Vec::with_capacity(n);
    let mut day = usize::MAX;
    let mut clearness = 0.0;
    for t in 0..n {
        let hour = t as f64 * grid.step_h;
        let d = (hour / 24.0).floor() as usize;
        if d != day {
            day = d;
            let u: f64 = rng.gen_range(-1.0..=1.0);
            clearness = (s.clearness_mean + s.clearness_spread * u).clamp(0.0, 1.0);
        }
        let mask = daylight(hour % 24.0, s);
        solar_mw.push((solar_capacity_mw * mask * clearness).clamp(0.0, solar_capacity_mw));
    }
    Ok(ResProfile { wind_mw, solar_mw })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(volatility: f64) -> SynthSpec {
        SynthSpec {
            wind: WindSpec {
                mean_fraction: 0.4,
                volatility,
                persistence: 0.9,
            },
            solar: SolarSpec {
                clearness_mean: 0.7,
                clearness_spread: 0.2,
                sunrise_h: 6.0,
                sunset_h: 19.0,
            },
        }
    }

    #[test]
    fn same_seed_same_profile() {
        let g = TimeGrid::default();
        let a = synth_res(42, &g, 300.0, 100.0, &spec(0.2)).unwrap();
        let b = synth_res(42, &g, 300.0, 100.0, &spec(0.2)).unwrap();
        assert_eq!(a, b);
        let c = synth_res(43, &g, 300.0, 100.0, &spec(0.2)).unwrap();
        assert_ne!(a.wind_mw, c.wind_mw);
    }

    #[test]
    fn calm_wind_sits_at_its_mean() {
        let p = synth_res(7, &TimeGrid::default(), 300.0, 100.0, &spec(0.0)).unwrap();
        assert!(p.wind_mw.iter().all(|&v| (v - 120.0).abs() < 1e-12));
    }

    #[test]
    fn nights_are_dark() {
        let p = synth_res(7, &TimeGrid::default(), 300.0, 100.0, &spec(0.2)).unwrap();
        for (t, v) in p.solar_mw.iter().enumerate() {
            let h = t % 24;
            if h <= 6 || h >= 19 {
                assert_eq!(*v, 0.0, "hour {h}");
            }
        }
    }
}
