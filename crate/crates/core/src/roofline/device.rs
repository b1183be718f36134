use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiler::MemLevel;

/// Sustained bandwidth per memory level in bytes/s; unknown levels are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbm: Option<f64>,
}

impl Bandwidth {
    pub fn get(&self, level: MemLevel) -> Option<f64> {
        match level {
            MemLevel::L1 => self.l1,
            MemLevel::L2 => self.l2,
            MemLevel::Hbm => self.hbm,
        }
    }

    /// Levels that carry a bandwidth, innermost first.
    pub fn levels(&self) -> Vec<MemLevel> {
        MemLevel::ALL
            .into_iter()
            .filter(|&l| self.get(l).is_some())
            .collect()
    }
}

/// An accelerator (or the host) as the analyzer models it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub architecture: Option<String>,
    #[serde(default = "one")]
    pub chips: u32,
    /// Peak rate in FLOP/s, summed over chips.
    pub peak_flops: f64,
    /// Free-text note on the precision the peak refers to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_gib: Option<f64>,
    #[serde(default)]
    pub bandwidth: Bandwidth,
    /// List price in USD per hour; `None` when not offered.
    pub price: Option<f64>,
    /// Thermal design power in watts, summed over chips.
    pub tdp: f64,
}

fn one() -> u32 {
    1
}

impl DeviceSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("device {}: {what}", self.name)));
        if !(self.peak_flops > 0.0 && self.peak_flops.is_finite()) {
            return bad("peak_flops must be positive");
        }
        for level in MemLevel::ALL {
            if let Some(bw) = self.bandwidth.get(level) {
                if !(bw > 0.0 && bw.is_finite()) {
                    return bad(&format!("{level} bandwidth must be positive"));
                }
            }
        }
        if let Some(p) = self.price {
            if !(p >= 0.0 && p.is_finite()) {
                return bad("price must be non-negative");
            }
        }
        if !(self.tdp > 0.0 && self.tdp.is_finite()) {
            return bad("tdp must be positive");
        }
        if self.chips == 0 {
            return bad("chips must be at least 1");
        }
        Ok(())
    }
}

/// The four accelerators of the published comparison. Only the V100 has a
/// published memory bandwidth (900 GB/s HBM2); the TPU peaks are stored as
/// listed, without a precision qualifier.
pub fn default_catalog() -> Vec<DeviceSpec> {
    vec![
        DeviceSpec {
            name: "V100".into(),
            architecture: Some("GPU Volta".into()),
            chips: 1,
            peak_flops: 14e12,
            precision: Some("fp32".into()),
            memory_gib: Some(16.0),
            bandwidth: Bandwidth {
                hbm: Some(900e9),
                ..Bandwidth::default()
            },
            price: Some(1.56),
            tdp: 250.0,
        },
        DeviceSpec {
            name: "A100".into(),
            architecture: Some("GPU Ampere".into()),
            chips: 1,
            peak_flops: 19.5e12,
            precision: Some("fp32".into()),
            memory_gib: Some(40.0),
            bandwidth: Bandwidth::default(),
            price: None,
            tdp: 250.0,
        },
        DeviceSpec {
            name: "TPU-v2-32".into(),
            architecture: Some("TPU v2".into()),
            chips: 32,
            peak_flops: 720e12,
            precision: Some("listed without precision; MXU computes in bfloat16".into()),
            memory_gib: Some(256.0),
            bandwidth: Bandwidth::default(),
            price: Some(15.33),
            tdp: 2400.0,
        },
        DeviceSpec {
            name: "TPU-v3-8".into(),
            architecture: Some("TPU v3".into()),
            chips: 8,
            peak_flops: 420e12,
            precision: Some("listed without precision; MXU computes in bfloat16".into()),
            memory_gib: Some(128.0),
            bandwidth: Bandwidth::default(),
            price: Some(8.0),
            tdp: 600.0,
        },
    ]
}

pub fn load_catalog(path: &Path) -> Result<Vec<DeviceSpec>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let devices: Vec<DeviceSpec> = serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    if devices.is_empty() {
        return Err(Error::Config(format!("{}: catalog is empty", path.display())));
    }
    for d in &devices {
        d.validate()?;
    }
    Ok(devices)
}

pub fn save_catalog(path: &Path, devices: &[DeviceSpec]) -> Result<()> {
    let text = serde_json::to_string_pretty(devices).expect("catalog serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Case-insensitive lookup; the error lists the available names.
pub fn find_device<'a>(catalog: &'a [DeviceSpec], name: &str) -> Result<&'a DeviceSpec> {
    catalog
        .iter()
        .find(|d| d.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| {
            let names: Vec<&str> = catalog.iter().map(|d| d.name.as_str()).collect();
            Error::Config(format!(
                "unknown device `{name}`; catalog has: {}",
                names.join(", ")
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_catalog_is_valid() {
        let cat = default_catalog();
        assert_eq!(cat.len(), 4);
        for d in &cat {
            d.validate().unwrap();
        }
    }

    #[test]
    fn unknown_device_lists_entries() {
        let cat = default_catalog();
        let msg = find_device(&cat, "H100").unwrap_err().to_string();
        assert!(msg.contains("V100") && msg.contains("TPU-v3-8"), "{msg}");
        assert_eq!(find_device(&cat, "v100").unwrap().name, "V100");
    }

    #[test]
    fn catalog_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("devices.json");
        save_catalog(&p, &default_catalog()).unwrap();
        assert_eq!(load_catalog(&p).unwrap(), default_catalog());
    }

    #[test]
    fn rejects_bad_specs() {
        let mut d = default_catalog().remove(0);
        d.tdp = 0.0;
        assert!(d.validate().is_err());
        let mut d = default_catalog().remove(0);
        d.bandwidth.l2 = Some(-1.0);
        assert!(d.validate().is_err());
    }
}
