//! Per-unit scaling used inside every program.
//!
//! Programs are built on the bases below so that coefficients stay within a
//! few orders of magnitude of one. Scenario files and reports use physical
//! units; conversions happen only at the builder and report boundaries.

/// MW per unit of power.
pub const POWER_BASE_MW: f64 = 100.0;
/// Nm³ (or Nm³/h) per unit of hydrogen.
pub const HYDROGEN_BASE_NM3: f64 = 1e4;
/// t (or t/h) per unit of ammonia.
pub const AMMONIA_BASE_T: f64 = 100.0;
/// t CO₂ per unit of allowance.
pub const CO2_BASE_T: f64 = 1000.0;
/// CNY per unit of money.
pub const MONEY_BASE_CNY: f64 = 1e4;
/// MPa per unit of pressure.
pub const PRESSURE_BASE_MPA: f64 = 1.0;

pub fn power(mw: f64) -> f64 {
    mw / POWER_BASE_MW
}

pub fn power_mw(pu: f64) -> f64 {
    pu * POWER_BASE_MW
}

pub fn hydrogen(nm3: f64) -> f64 {
    nm3 / HYDROGEN_BASE_NM3
}

pub fn hydrogen_nm3(pu: f64) -> f64 {
    pu * HYDROGEN_BASE_NM3
}

pub fn ammonia(t: f64) -> f64 {
    t / AMMONIA_BASE_T
}

pub fn ammonia_t(pu: f64) -> f64 {
    pu * AMMONIA_BASE_T
}

pub fn co2(t: f64) -> f64 {
    t / CO2_BASE_T
}

pub fn co2_t(pu: f64) -> f64 {
    pu * CO2_BASE_T
}

pub fn money(cny: f64) -> f64 {
    cny / MONEY_BASE_CNY
}

pub fn money_cny(pu: f64) -> f64 {
    pu * MONEY_BASE_CNY
}

pub fn pressure(mpa: f64) -> f64 {
    mpa / PRESSURE_BASE_MPA
}

pub fn pressure_mpa(pu: f64) -> f64 {
    pu * PRESSURE_BASE_MPA
}

/// CNY/t of ammonia → money per ammonia unit.
pub fn ammonia_price(cny_per_t: f64) -> f64 {
    cny_per_t * AMMONIA_BASE_T / MONEY_BASE_CNY
}

pub fn ammonia_price_cny(pu: f64) -> f64 {
    pu * MONEY_BASE_CNY / AMMONIA_BASE_T
}

/// CNY/MWh → money per (power unit · h).
pub fn electricity_price(cny_per_mwh: f64) -> f64 {
    cny_per_mwh * POWER_BASE_MW / MONEY_BASE_CNY
}

pub fn electricity_price_cny(pu: f64) -> f64 {
    pu * MONEY_BASE_CNY / POWER_BASE_MW
}

/// CNY/Nm³ → money per hydrogen unit.
pub fn hydrogen_price(cny_per_nm3: f64) -> f64 {
    cny_per_nm3 * HYDROGEN_BASE_NM3 / MONEY_BASE_CNY
}

pub fn hydrogen_price_cny(pu: f64) -> f64 {
    pu * MONEY_BASE_CNY / HYDROGEN_BASE_NM3
}

/// CNY/t CO₂ → money per allowance unit.
pub fn carbon_price(cny_per_t: f64) -> f64 {
    cny_per_t * CO2_BASE_T / MONEY_BASE_CNY
}

pub fn carbon_price_cny(pu: f64) -> f64 {
    pu * MONEY_BASE_CNY / CO2_BASE_T
}

/// CNY per MPa·h → money per pressure unit·h.
pub fn pressure_penalty(cny_per_mpa_h: f64) -> f64 {
    cny_per_mpa_h * PRESSURE_BASE_MPA / MONEY_BASE_CNY
}

/// Nm³ of hydrogen per MWh → hydrogen units per (power unit · h).
pub fn electrolysis_yield(nm3_per_mwh: f64) -> f64 {
    nm3_per_mwh * POWER_BASE_MW / HYDROGEN_BASE_NM3
}

/// MW per Nm³/h → power units per hydrogen unit.
pub fn compression_load(mw_per_nm3h: f64) -> f64 {
    mw_per_nm3h * HYDROGEN_BASE_NM3 / POWER_BASE_MW
}

/// t of ammonia per Nm³ of hydrogen → ammonia units per hydrogen unit.
pub fn synthesis_hydrogen_yield(t_per_nm3: f64) -> f64 {
    t_per_nm3 * HYDROGEN_BASE_NM3 / AMMONIA_BASE_T
}

/// t of ammonia per MWh → ammonia units per (power unit · h).
pub fn synthesis_power_yield(t_per_mwh: f64) -> f64 {
    t_per_mwh * POWER_BASE_MW / AMMONIA_BASE_T
}

/// t CO₂ per t NH₃ → allowance units per ammonia unit.
pub fn emission_factor(t_per_t: f64) -> f64 {
    t_per_t * AMMONIA_BASE_T / CO2_BASE_T
}

/// Nm³ per MPa (Weymouth or linepack constant) → hydrogen units per pressure unit.
pub fn pipe_constant(nm3_per_mpa: f64) -> f64 {
    nm3_per_mpa * PRESSURE_BASE_MPA / HYDROGEN_BASE_NM3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn revenue_is_scale_invariant() {
        // 10,500 t at 2300 CNY/t is 24.15 million CNY.
        let pu = ammonia(10_500.0) * ammonia_price(2300.0);
        assert!((money_cny(pu) - 24_150_000.0).abs() < 1e-6);
        // 69 kt of allowances at 67.1 CNY/t.
        let pu = co2(69_000.0) * carbon_price(67.1);
        assert!((money_cny(pu) - 69_000.0 * 67.1).abs() < 1e-6);
        // 100 MW for one hour at 300 CNY/MWh.
        let pu = power(100.0) * electricity_price(300.0);
        assert!((money_cny(pu) - 30_000.0).abs() < 1e-9);
        // 20,000 Nm³ at 1.2 CNY/Nm³.
        let pu = hydrogen(20_000.0) * hydrogen_price(1.2);
        assert!((money_cny(pu) - 24_000.0).abs() < 1e-9);
    }

    #[test]
    fn conversion_coefficients_preserve_physical_products() {
        // 100 MW of electrolysis at 200 Nm³/MWh gives 20,000 Nm³/h.
        assert!((hydrogen_nm3(power(100.0) * electrolysis_yield(200.0)) - 20_000.0).abs() < 1e-9);
        // 20,000 Nm³/h through 0.0002 MW per Nm³/h needs 4 MW.
        assert!((power_mw(hydrogen(20_000.0) * compression_load(0.0002)) - 4.0).abs() < 1e-12);
        // 78.3 t/h emitting 3 t/t gives 234.9 t/h.
        assert!((co2_t(ammonia(78.3) * emission_factor(3.0)) - 234.9).abs() < 1e-9);
        // 1978 Nm³ of hydrogen make one tonne.
        let t = ammonia_t(hydrogen(1978.0) * synthesis_hydrogen_yield(1.0 / 1978.0));
        assert!((t - 1.0).abs() < 1e-12);
        // 0.6 MWh of synthesis power per tonne.
        let t = ammonia_t(power(0.6) * synthesis_power_yield(1.0 / 0.6));
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn price_round_trips() {
        for p in [0.0, 15.0, 67.1, 2528.6] {
            assert!((ammonia_price_cny(ammonia_price(p)) - p).abs() < 1e-9);
            assert!((carbon_price_cny(carbon_price(p)) - p).abs() < 1e-9);
            assert!((electricity_price_cny(electricity_price(p)) - p).abs() < 1e-9);
            assert!((hydrogen_price_cny(hydrogen_price(p)) - p).abs() < 1e-9);
        }
    }
}
