use std::fmt::{self, Write};

use serde::Serialize;

use super::DeviceSpec;
use crate::error::{Error, Result};
use crate::profiler::{rank_kernels, MemLevel, OpRecord, RankGroup, Trace};

/// FLOPs per byte, or the marker for kernels that do no arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Intensity {
    ZeroAi,
    Value(f64),
}

pub fn intensity(flops: u64, bytes: u64) -> Result<Intensity> {
    if flops == 0 {
        return Ok(Intensity::ZeroAi);
    }
    if bytes == 0 {
        return Err(Error::Data(format!(
            "{flops} FLOPs recorded with zero bytes of traffic"
        )));
    }
    Ok(Intensity::Value(flops as f64 / bytes as f64))
}

pub fn arithmetic_intensity(record: &OpRecord, level: MemLevel) -> Result<Intensity> {
    intensity(record.flops, record.bytes.get(level))
}

fn bandwidth(device: &DeviceSpec, level: MemLevel) -> Result<f64> {
    device.bandwidth.get(level).ok_or_else(|| {
        Error::Config(format!(
            "device {} has no {} bandwidth",
            device.name, level
        ))
    })
}

/// Intensity at which the bandwidth slope meets the compute ceiling.
pub fn ridge_point(device: &DeviceSpec, level: MemLevel) -> Result<f64> {
    Ok(device.peak_flops / bandwidth(device, level)?)
}

/// `min(peak, ai * bandwidth)`.
pub fn attainable(device: &DeviceSpec, level: MemLevel, ai: f64) -> Result<f64> {
    Ok(device.peak_flops.min(ai * bandwidth(device, level)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BoundClass {
    MemoryBound,
    ComputeBound,
    ZeroAi,
}

impl BoundClass {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundClass::MemoryBound => "memory-bound",
            BoundClass::ComputeBound => "compute-bound",
            BoundClass::ZeroAi => "zero-ai",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [BoundClass::MemoryBound, BoundClass::ComputeBound, BoundClass::ZeroAi]
            .into_iter()
            .find(|c| c.as_str() == s)
    }
}

impl fmt::Display for BoundClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Below the ridge point a kernel is memory-bound, at or above it compute-bound.
pub fn classify(ai: Intensity, device: &DeviceSpec, level: MemLevel) -> Result<BoundClass> {
    match ai {
        Intensity::ZeroAi => Ok(BoundClass::ZeroAi),
        Intensity::Value(v) if v < ridge_point(device, level)? => Ok(BoundClass::MemoryBound),
        Intensity::Value(_) => Ok(BoundClass::ComputeBound),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RooflinePoint {
    pub kernel: String,
    pub level: MemLevel,
    pub ai: f64,
    pub achieved: f64,
    pub attainable: f64,
    pub class: BoundClass,
    pub rank_group: RankGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroAiKernel {
    pub kernel: String,
    pub rank_group: RankGroup,
    pub duration_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RooflineReport {
    pub device: DeviceSpec,
    pub points: Vec<RooflinePoint>,
    /// Kernels left off the plot because they do no arithmetic.
    pub zero_ai: Vec<ZeroAiKernel>,
    /// Points whose achieved rate exceeds the modeled roof, i.e. the device
    /// spec does not describe the host that produced the trace.
    pub flagged: Vec<(String, MemLevel)>,
    pub curves: Vec<(MemLevel, Vec<(f64, f64)>)>,
}

pub const CSV_HEADER: &str = "kernel,level,ai_flops_per_byte,achieved_flops,attainable_flops,class,rank_group";

/// Builds one point per kernel and memory level with a known bandwidth, plus
/// sampled roof curves. Rank groups follow the kernel duration ranking.
pub fn emit_roofline(
    trace: &Trace,
    device: &DeviceSpec,
    bounds: (usize, usize),
) -> Result<RooflineReport> {
    if device.bandwidth.hbm.is_none() {
        return Err(Error::Config(format!(
            "device {} has no HBM bandwidth; a roofline needs at least that level",
            device.name
        )));
    }
    let ranking = rank_kernels(trace)?;
    let levels = device.bandwidth.levels();
    let mut points = Vec::new();
    let mut zero_ai = Vec::new();
    let mut flagged = Vec::new();
    for (rank, k) in ranking.kernels.iter().enumerate() {
        let group = RankGroup::for_rank(rank, bounds);
        if k.flops == 0 {
            zero_ai.push(ZeroAiKernel {
                kernel: k.name.clone(),
                rank_group: group,
                duration_share: k.duration_share,
            });
            continue;
        }
        let achieved = k.flops as f64 / k.duration_s;
        for &level in &levels {
            let Intensity::Value(ai) = intensity(k.flops, k.bytes.get(level))? else {
                unreachable!("non-zero flops")
            };
            let roof = attainable(device, level, ai)?;
            if achieved > roof {
                flagged.push((k.name.clone(), level));
            }
            points.push(RooflinePoint {
                kernel: k.name.clone(),
                level,
                ai,
                achieved,
                attainable: roof,
                class: classify(Intensity::Value(ai), device, level)?,
                rank_group: group,
            });
        }
    }
    let curves = levels
        .iter()
        .map(|&l| Ok((l, roof_samples(device, l, &points)?)))
        .collect::<Result<_>>()?;
    Ok(RooflineReport {
        device: device.clone(),
        points,
        zero_ai,
        flagged,
        curves,
    })
}

/// Log-spaced samples of the roof spanning the observed intensities and the
/// ridge point, which is always included exactly.
fn roof_samples(device: &DeviceSpec, level: MemLevel, points: &[RooflinePoint]) -> Result<Vec<(f64, f64)>> {
    let ridge = ridge_point(device, level)?;
    let ais = points.iter().filter(|p| p.level == level).map(|p| p.ai);
    let lo = ais.clone().fold(ridge / 100.0, f64::min).log10().floor();
    let hi = ais.fold(ridge * 10.0, f64::max).log10().ceil();
    const N: usize = 48;
    let mut xs: Vec<f64> = (0..=N)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / N as f64))
        .collect();
    xs.push(ridge);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.into_iter()
        .map(|x| Ok((x, attainable(device, level, x)?)))
        .collect()
}

impl RooflineReport {
    pub fn to_csv(&self) -> String {
        points_to_csv(&self.points)
    }

    pub fn curves_csv(&self) -> String {
        let mut s = String::from("level,ai_flops_per_byte,attainable_flops\n");
        for (level, samples) in &self.curves {
            for (x, y) in samples {
                let _ = writeln!(s, "{level},{x:e},{y:e}");
            }
        }
        s
    }
}

/// Canonical CSV: shortest round-trip exponent formatting for every number.
pub fn points_to_csv(points: &[RooflinePoint]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{:e},{:e},{:e},{},{}",
            p.kernel,
            p.level,
            p.ai,
            p.achieved,
            p.attainable,
            p.class,
            p.rank_group.as_str()
        );
    }
    s
}

pub fn parse_points_csv(text: &str) -> Result<Vec<RooflinePoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Data("roofline CSV header mismatch".into()));
    }
    let bad = |n: usize, what: &str| Error::Data(format!("roofline CSV line {}: {what}", n + 2));
    lines
        .enumerate()
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let [kernel, level, ai, achieved, roof, class, group] = f[..] else {
                return Err(bad(n, "expected 7 fields"));
            };
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad(n, "bad number"));
            Ok(RooflinePoint {
                kernel: kernel.to_string(),
                level: MemLevel::ALL
                    .into_iter()
                    .find(|l| l.as_str() == level)
                    .ok_or_else(|| bad(n, "bad level"))?,
                ai: num(ai)?,
                achieved: num(achieved)?,
                attainable: num(roof)?,
                class: BoundClass::parse(class).ok_or_else(|| bad(n, "bad class"))?,
                rank_group: [RankGroup::Top5, RankGroup::Top6To20, RankGroup::Rest]
                    .into_iter()
                    .find(|g| g.as_str() == group)
                    .ok_or_else(|| bad(n, "bad rank group"))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiler::{Category, LevelBytes, OpKind};
    use crate::roofline::default_catalog;

    fn v100() -> DeviceSpec {
        default_catalog().remove(0)
    }

    fn rec(op: &str, flops: u64, bytes: u64, dur: f64) -> OpRecord {
        OpRecord {
            op: op.into(),
            category: Category::forward(OpKind::MatMul),
            flops,
            bytes: LevelBytes { l1: bytes, l2: bytes, hbm: bytes },
            duration_s: dur,
            step: 0,
            replica: 0,
        }
    }

    #[test]
    fn zero_bytes_with_flops_is_data_error() {
        assert!(matches!(intensity(5, 0), Err(Error::Data(_))));
        assert_eq!(intensity(0, 0).unwrap(), Intensity::ZeroAi);
    }

    #[test]
    fn missing_level_is_config_error() {
        assert!(matches!(ridge_point(&v100(), MemLevel::L1), Err(Error::Config(_))));
        let tpu = default_catalog().remove(3);
        let t = Trace::from_records(vec![rec("mm", 1, 1, 1.0)]);
        assert!(matches!(emit_roofline(&t, &tpu, (5, 20)), Err(Error::Config(_))));
    }

    #[test]
    fn single_kernel_is_top5() {
        let t = Trace::from_records(vec![rec("mm", 100, 10, 1.0)]);
        let r = emit_roofline(&t, &v100(), (5, 20)).unwrap();
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.points[0].rank_group, RankGroup::Top5);
    }

    #[test]
    fn curve_contains_ridge_and_is_continuous_there() {
        let d = v100();
        let t = Trace::from_records(vec![rec("mm", 100, 10, 1.0)]);
        let r = emit_roofline(&t, &d, (5, 20)).unwrap();
        let ridge = ridge_point(&d, MemLevel::Hbm).unwrap();
        let (_, samples) = &r.curves[0];
        let at = samples.iter().find(|(x, _)| *x == ridge).unwrap();
        assert!((at.1 - d.peak_flops).abs() / d.peak_flops < 1e-12);
    }
}
