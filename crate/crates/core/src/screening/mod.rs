//! The N-type screening problem with costly experiments.

pub mod dual;
pub mod feasibility;
pub mod instance;
pub mod iron;
pub mod myerson;
pub mod primal;

pub use dual::{
    corner_actions, dual_pieces, dual_value, envelope_rents, myerson_multipliers, report_coefficients,
    report_mfunction, solve_inner, solve_inner_with, solve_report, MechanismSolution, MultiplierVector, Region,
    ReportCoefficients, ReportSolution, TransferMargin,
};
pub use feasibility::{check_primal, check_primal_tol, lagrangian, FeasibilityReport};
pub use instance::{CostWeighting, Distribution, InstanceConfig, ScreeningInstance};
pub use iron::iron;
pub use myerson::{myerson_benchmark, virtual_surplus_schedule, MyersonBenchmark};
pub use primal::{recover_primal, PrimalRecovery, RecoveryOptions};
