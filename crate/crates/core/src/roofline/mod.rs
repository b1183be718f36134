//! Device catalog, roofline mathematics per memory level, boundedness
//! classification, and per-epoch cost and energy.
//!
//! Achieved rates come from host-measured durations, so absolute positions
//! differ from accelerator measurements; the classification methodology is
//! what carries over.

mod device;
mod economics;
mod host;
mod model;
mod svg;

pub use device::{default_catalog, find_device, load_catalog, save_catalog, Bandwidth, DeviceSpec};
pub use economics::{
    cost_per_epoch, economics_csv, economics_table, energy_per_epoch, render_economics,
    EconomicsRow, Energy,
};
pub use host::calibrate_host;
pub use model::{
    arithmetic_intensity, attainable, classify, emit_roofline, intensity, parse_points_csv,
    points_to_csv, ridge_point, BoundClass, Intensity, RooflinePoint, RooflineReport,
    ZeroAiKernel, CSV_HEADER,
};
pub use svg::render_svg;
