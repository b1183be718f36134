use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{RunManifest, CATALOG_ENV};
use crate::error::{Error, Result};
use crate::profiler::{flop_utilization, percent, rank_kernels, time_breakdown, zero_ai_report, MemLevel, Trace};
use crate::roofline::{
    default_catalog, economics_csv, economics_table, emit_roofline, find_device, load_catalog, render_economics,
    render_svg, ridge_point, BoundClass, DeviceSpec,
};

/// Rank boundaries of the top and second roofline marker groups.
pub const RANK_BOUNDS: (usize, usize) = (5, 20);

#[derive(Debug, clap::Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Catalog device name, or `all`.
    #[arg(long, default_value = "V100")]
    pub device: String,
    /// Device catalog file; the built-in catalog when unset.
    #[arg(long, env = CATALOG_ENV)]
    pub catalog: Option<PathBuf>,
    #[arg(long, default_value = "analysis")]
    pub out: PathBuf,
    /// Epoch latencies in seconds to price; the trace's own epoch times when omitted.
    #[arg(long)]
    pub latency: Vec<f64>,
    /// Kernels listed in the text report.
    #[arg(long, default_value_t = 20)]
    pub top: usize,
}

fn slug(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' }).collect()
}

fn write(path: &Path, text: &str, outputs: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    outputs.push(path.to_path_buf());
    Ok(())
}

pub fn run(a: &AnalyzeArgs, argv: &[String]) -> Result<String> {
    let trace = Trace::load(&a.trace)?;
    let catalog = match &a.catalog {
        Some(p) => load_catalog(p)?,
        None => default_catalog(),
    };
    let devices: Vec<&DeviceSpec> = if a.device.eq_ignore_ascii_case("all") {
        catalog.iter().collect()
    } else {
        vec![find_device(&catalog, &a.device)?]
    };
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let ranking = rank_kernels(&trace)?;
    let breakdown = time_breakdown(&trace)?;
    let zero = zero_ai_report(&trace)?;
    let mut outputs = Vec::new();
    let mut r = String::new();

    for d in &devices {
        let _ = write!(r, "device {}: peak {:e} FLOP/s", d.name, d.peak_flops);
        for level in d.bandwidth.levels() {
            let _ = write!(r, ", ridge point ({level}) {:.3} FLOPs/byte", ridge_point(d, level)?);
        }
        if d.bandwidth.levels().is_empty() {
            r.push_str(", no bandwidth listed");
        }
        r.push('\n');
    }
    let _ = writeln!(
        r,
        "trace: {} records, {} kernels, {:e} FLOPs, {:.6e} s busy\n",
        trace.records.len(),
        ranking.kernels.len(),
        ranking.total_flops as f64,
        ranking.total_duration_s
    );

    let _ = writeln!(r, "== kernels by total duration ==\n{}", ranking.render(a.top));
    let _ = writeln!(r, "== time by category ==\n{}", breakdown.render());
    r.push_str("== FLOP utilization ==\n");
    for d in &devices {
        let u = flop_utilization(&trace, d)?;
        let note = if u > 1.0 { "  (exceeds peak: the device spec does not describe the traced host)" } else { "" };
        let _ = writeln!(r, "{:<12} {}{note}", d.name, percent(u));
    }
    let _ = writeln!(r, "\n== zero-AI kernels ==\n{}", zero.render());

    r.push_str("== roofline ==\n");
    for d in &devices {
        if d.bandwidth.hbm.is_none() {
            let _ = writeln!(r, "{}: skipped, no HBM bandwidth in the catalog", d.name);
            continue;
        }
        let report = emit_roofline(&trace, d, RANK_BOUNDS)?;
        let base = slug(&d.name);
        write(&a.out.join(format!("roofline_{base}.csv")), &report.to_csv(), &mut outputs)?;
        write(&a.out.join(format!("roofline_{base}_curve.csv")), &report.curves_csv(), &mut outputs)?;
        for level in d.bandwidth.levels() {
            let svg = render_svg(&report, level)?;
            write(&a.out.join(format!("roofline_{base}_{level}.svg")), &svg, &mut outputs)?;
            let count = |c: BoundClass| report.points.iter().filter(|p| p.level == level && p.class == c).count();
            let _ = writeln!(
                r,
                "{} {level}: {} memory-bound, {} compute-bound, {} zero-AI kernels off the plot",
                d.name,
                count(BoundClass::MemoryBound),
                count(BoundClass::ComputeBound),
                report.zero_ai.len()
            );
        }
        for (kernel, level) in &report.flagged {
            let _ = writeln!(r, "  above the {level} roof: {kernel}");
        }
    }

    let latencies = if a.latency.is_empty() { trace.meta.epoch_seconds.clone() } else { a.latency.clone() };
    r.push_str("\n== cost and energy per epoch ==\n");
    if latencies.is_empty() {
        r.push_str("no epoch latencies: pass --latency or analyze a trace written by `train`\n");
    } else {
        let rows = economics_table(&latencies, &devices)?;
        r.push_str(&render_economics(&rows));
        r.push_str("energy assumes the device draws its full TDP for the whole epoch\n");
        write(&a.out.join("economics.csv"), &economics_csv(&rows), &mut outputs)?;
    }

    write(&a.out.join("kernels.csv"), &ranking.to_csv(), &mut outputs)?;
    let mut bd = String::from("category,fraction\n");
    for (c, f) in breakdown.with_idle() {
        let _ = writeln!(bd, "{c},{f:e}");
    }
    write(&a.out.join("breakdown.csv"), &bd, &mut outputs)?;
    let mut z = String::from("level,byte_share\n");
    for level in MemLevel::ALL {
        let _ = writeln!(z, "{level},{:e}", zero.byte_share.get(&level).copied().unwrap_or(0.0));
    }
    write(&a.out.join("zero_ai.csv"), &z, &mut outputs)?;
    write(&a.out.join("report.txt"), &r, &mut outputs)?;
    print!("{r}");

    let config = serde_json::json!({
        "device": a.device,
        "devices": devices,
        "latencies": latencies,
        "top": a.top,
        "rank_bounds": RANK_BOUNDS,
    });
    let mut m = RunManifest::new("analyze", argv, trace.meta.seed, config);
    m.input(&a.trace);
    if let Some(c) = &a.catalog {
        m.input(c);
    }
    for p in &outputs {
        m.output(p, false)?;
    }
    m.save(&a.out.join("run_manifest.json"))?;
    Ok(r)
}
