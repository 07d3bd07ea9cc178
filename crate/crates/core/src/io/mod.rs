//! Scenario files, trace files, comparison metrics and built-in scenarios.

pub mod builders;
pub mod config;
pub mod metric;
pub mod trace;
pub mod units;

pub use config::{load_scenario, parse_scenario, save_scenario, scenario_to_json, ScenarioFile};
pub use metric::{compare, epsilon, ComparisonReport, LinkComparison};
pub use trace::{Quantity, TraceRow, TraceSet};
