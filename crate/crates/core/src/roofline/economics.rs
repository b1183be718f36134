use std::fmt::Write;

use serde::Serialize;

use super::DeviceSpec;
use crate::error::{Error, Result};

fn check_latency(latency_s: f64) -> Result<()> {
    if !(latency_s >= 0.0 && latency_s.is_finite()) {
        return Err(Error::Usage(format!(
            "latency must be a non-negative number of seconds, got {latency_s}"
        )));
    }
    Ok(())
}

/// Price of one epoch in USD: hourly list price times latency in hours.
/// `None` when the device has no list price.
pub fn cost_per_epoch(latency_s: f64, device: &DeviceSpec) -> Result<Option<f64>> {
    check_latency(latency_s)?;
    Ok(device.price.map(|p| p * latency_s / 3600.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Energy {
    pub joules: f64,
    pub kwh: f64,
}

/// Energy of one epoch as thermal design power times latency. This assumes
/// the device is 100% busy for the whole epoch, which overstates real draw.
pub fn energy_per_epoch(latency_s: f64, device: &DeviceSpec) -> Result<Energy> {
    check_latency(latency_s)?;
    let joules = device.tdp * latency_s;
    Ok(Energy {
        joules,
        kwh: joules / 3.6e6,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EconomicsRow {
    pub device: String,
    pub latency_s: f64,
    pub cost_usd: Option<f64>,
    pub energy: Energy,
}

pub fn economics_table(latencies: &[f64], devices: &[&DeviceSpec]) -> Result<Vec<EconomicsRow>> {
    let mut rows = Vec::new();
    for d in devices {
        for &lat in latencies {
            rows.push(EconomicsRow {
                device: d.name.clone(),
                latency_s: lat,
                cost_usd: cost_per_epoch(lat, d)?,
                energy: energy_per_epoch(lat, d)?,
            });
        }
    }
    Ok(rows)
}

pub fn render_economics(rows: &[EconomicsRow]) -> String {
    let mut s = format!(
        "  {:<12} {:>12} {:>12} {:>14} {:>10}\n",
        "device", "latency [s]", "cost [USD]", "energy [J]", "[kWh]"
    );
    for r in rows {
        let cost = r
            .cost_usd
            .map_or_else(|| "N/A".to_string(), |c| format!("{c:.2}"));
        let _ = writeln!(
            s,
            "  {:<12} {:>12.3} {:>12} {:>14.1} {:>10.4}",
            r.device, r.latency_s, cost, r.energy.joules, r.energy.kwh
        );
    }
    s
}

pub fn economics_csv(rows: &[EconomicsRow]) -> String {
    let mut s = String::from("device,latency_s,cost_usd,energy_j,energy_kwh\n");
    for r in rows {
        let cost = r.cost_usd.map_or_else(String::new, |c| format!("{c:e}"));
        let _ = writeln!(
            s,
            "{},{:e},{},{:e},{:e}",
            r.device, r.latency_s, cost, r.energy.joules, r.energy.kwh
        );
    }
    s
}
