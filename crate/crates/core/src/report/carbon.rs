//! `kg CO2 = energy (kWh) × PUE × grid intensity (kg/kWh)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORTED_PUE: f64 = 1.3;
pub const REPORTED_INTENSITY_KG_PER_KWH: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarbonInput {
    pub energy_kwh: f64,
    pub pue: f64,
    pub intensity_kg_per_kwh: f64,
}

impl CarbonInput {
    pub fn from_gpus(gpu_count: f64, gpu_power_kw: f64, hours: f64, pue: f64, intensity_kg_per_kwh: f64) -> Result<Self> {
        for (name, v) in [("gpu_count", gpu_count), ("gpu_power_kw", gpu_power_kw), ("hours", hours)] {
            non_negative(name, v)?;
        }
        Ok(Self { energy_kwh: gpu_count * gpu_power_kw * hours, pue, intensity_kg_per_kwh })
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite and non-negative, got {v}")))
    }
}

pub fn carbon_estimate(input: &CarbonInput) -> Result<f64> {
    non_negative("energy_kwh", input.energy_kwh)?;
    non_negative("pue", input.pue)?;
    non_negative("intensity_kg_per_kwh", input.intensity_kg_per_kwh)?;
    Ok(input.energy_kwh * input.pue * input.intensity_kg_per_kwh)
}

/// Per-GPU draw (kW) that would make a run emit `total_kg`.
pub fn implied_gpu_power_kw(total_kg: f64, gpu_count: f64, hours: f64, pue: f64, intensity_kg_per_kwh: f64) -> Result<f64> {
    non_negative("total_kg", total_kg)?;
    let denom = gpu_count * hours * pue * intensity_kg_per_kwh;
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(Error::InvalidArgument("gpu_count, hours, pue and intensity must be positive".into()));
    }
    Ok(total_kg / denom)
}

/// A published training run: hardware, duration and reported emissions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportedRun {
    pub model: &'static str,
    pub gpus: u32,
    pub days: u32,
    pub reported_kg: f64,
}

impl ReportedRun {
    pub fn gpu_hours(&self) -> f64 {
        self.gpus as f64 * self.days as f64 * 24.0
    }

    pub fn implied_gpu_power_kw(&self) -> Result<f64> {
        implied_gpu_power_kw(
            self.reported_kg,
            self.gpus as f64,
            self.days as f64 * 24.0,
            REPORTED_PUE,
            REPORTED_INTENSITY_KG_PER_KWH,
        )
    }
}

pub const REPORTED_RUNS: [ReportedRun; 2] = [
    ReportedRun { model: "mGPT-XL", gpus: 256, days: 14, reported_kg: 15_934.0 },
    ReportedRun { model: "mGPT-13B", gpus: 512, days: 22, reported_kg: 47_524.0 },
];

#[cfg(test)]
mod tests {
    use super::*;

    fn input(e: f64, p: f64, i: f64) -> CarbonInput {
        CarbonInput { energy_kwh: e, pue: p, intensity_kg_per_kwh: i }
    }

    #[test]
    fn direct_product() {
        assert_eq!(carbon_estimate(&input(0.0, 1.3, 0.4)).unwrap(), 0.0);
        assert_eq!(carbon_estimate(&input(100.0, 1.3, 0.4)).unwrap(), 52.0);
    }

    #[test]
    fn negative_input_is_rejected() {
        assert!(carbon_estimate(&input(-1.0, 1.3, 0.4)).is_err());
        assert!(carbon_estimate(&input(1.0, -1.3, 0.4)).is_err());
        assert!(carbon_estimate(&input(1.0, 1.3, f64::NAN)).is_err());
    }

    #[test]
    fn back_solved_power_reproduces_totals() {
        let xl = REPORTED_RUNS[0];
        let w = xl.implied_gpu_power_kw().unwrap();
        assert!((w * 1000.0 - 356.0).abs() < 1.0);
        let back = carbon_estimate(
            &CarbonInput::from_gpus(256.0, w, xl.gpu_hours() / 256.0, REPORTED_PUE, REPORTED_INTENSITY_KG_PER_KWH).unwrap(),
        )
        .unwrap();
        assert!((back - 15_934.0).abs() < 1e-8);
        let big = REPORTED_RUNS[1].implied_gpu_power_kw().unwrap();
        assert!((big * 1000.0 - 338.0).abs() < 1.0);
    }
}
