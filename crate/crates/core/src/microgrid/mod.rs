//! Time-domain microgrid: scenarios, the simulation engine, recorded series
//! and post-run metrics.

pub mod discrete;
pub mod engine;
pub mod metrics;
pub mod scenario;
pub mod series;

pub use engine::{breaker_logic, pcc_solve, simulate, sink_current, PccLoad, PowerBalance, SimError, SimState, Simulation};
pub use metrics::{metrics, MetricsError, Report};
pub use scenario::{build_scenario, load_scenario, parse_config, Scenario, ScenarioConfig};
pub use series::TimeSeries;
