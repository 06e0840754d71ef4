//! Optimal VM placement onto federated fog cells connected by a WDM-PON,
//! minimizing server plus ONU power under CPU, memory, ONU-rate, and
//! wavelength constraints, with a random-placement baseline for comparison.
//!
//! Modules:
//! - [`model`]: topology, workload, traffic, and placement types with
//!   validation and derived quantities.
//! - [`power`]: power and traffic-aggregate evaluation for a placement.
//! - [`milp`]: the solver-agnostic MILP formulation, LP export, and the
//!   placement feasibility checker.
//! - [`solver`]: exact branch-and-bound optimization and the brute-force
//!   verification oracle.
//! - [`scenario`]: seeded scenario generation and the random baseline.
//! - [`experiment`]: the sweep harness with CSV/JSON reporting.

pub mod experiment;
pub mod milp;
pub mod model;
pub mod power;
pub mod scenario;
pub mod solver;

pub use milp::{build_milp, check_feasibility, extract_placement, write_lp, MilpInstance};
pub use model::{validate_scenario, Placement, Scenario, Topology};
pub use power::{total_power, PowerBreakdown};
pub use scenario::{baseline_place, default_topology, generate_scenario, GeneratorParams};
pub use solver::{brute_force_oracle, solve_exact, SolveResult, SolveStatus, SolverConfig};
