//! Figure-shaped SVG charts and the training carbon estimate.

mod carbon;
mod chart;

pub use carbon::{
    carbon_estimate, implied_gpu_power_kw, CarbonInput, ReportedRun, REPORTED_INTENSITY_KG_PER_KWH,
    REPORTED_PUE, REPORTED_RUNS,
};
pub use chart::{emit_bar_chart, ChartOptions, SortOrder};
