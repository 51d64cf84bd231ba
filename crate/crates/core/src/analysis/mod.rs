//! Quantitative studies: the universal allocation function, two-type sweeps,
//! the investigation-region width law and the N-type convergence study.

pub mod convergence;
pub mod region_width;
pub mod twotype;
pub mod universal;

pub use convergence::{
    convergence_study, outer_study, sup_distance, uniform_instance, ConvergenceLevel, ConvergenceStudy, OuterStudy,
};
pub use region_width::{
    cost_scaling, log_log_slope, region_width, scan_region, RegionStudy, RegionWidth, DEFAULT_RESOLUTION,
};
pub use twotype::{twotype_config, twotype_solve, welfare_grid, SweepCell, TwoTypeParams};
pub use universal::{
    discretized_revenue, eta_continuum, eta_grid, logistic, logistic_gap, normalized_k, revenue_functional,
    revenue_integrand, w_universal, LogisticGap,
};
