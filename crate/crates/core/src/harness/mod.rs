//! Scenario configs, experiments, rate fits and artifacts.

pub mod config;
pub mod fit;
pub mod plot;
pub mod report;
pub mod runner;

pub use config::{Experiment, InitialSpec, Scenario};
pub use fit::{fit_exponential, fit_polynomial_envelope, RateKind, RateReport};
pub use plot::{emit_plot, Scale, Series};
pub use runner::{run_scenario, Check, Outcome, SummaryRow};
