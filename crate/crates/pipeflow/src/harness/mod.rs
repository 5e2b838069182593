//! Scenario configuration, the run loop with CSV emission, the convergence
//! study and the quadrature oracle backing the closed-form moment tests.

pub mod config;
pub mod convergence;
pub mod oracle;
pub mod output;
pub mod scenario;

pub use config::{InitialCondition, Scenario};
pub use scenario::{
    builtin, dryflood_scenario, expansion_scenario, hammer_scenario, initial_states,
    order_study_scenario, piezometric_head, pressure_level, run_from, run_scenario,
    wiggert_scenario, RunOutput,
};
