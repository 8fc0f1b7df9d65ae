//! Correlation statistics and fusion calibration.

pub mod fit;
pub mod grid;
pub mod lodo;
pub mod optimize;
pub mod stats;
pub mod sweep;

pub use fit::{calibrate_records, fit_fusion, fit_points, fused_correlation, Calibration, FitPoint, FitResult};
pub use grid::{sensitivity_grid, CoefPair, SensitivityGrid};
pub use lodo::{leave_one_out, LodoOptions, LodoSplit};
pub use stats::{
    correlation_report, mid_ranks, pearson, pearson_or_undefined, spearman, spearman_exact_p, spearman_p_approx,
    CorrelationReport,
};
pub use sweep::{component_sweep, k_sensitivity_sweep, ComponentSweep, FitSettings, KSweepEntry};
