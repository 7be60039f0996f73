//! Cell-level simulator of TCP over ATM ABR with ERICA and ERICA+ explicit
//! rate switches sharing a bottleneck with ON-OFF VBR background traffic.

pub mod abr;
pub mod config;
pub mod engine;
pub mod erica;
pub mod metrics;
pub mod sim;
pub mod switch;
pub mod tables;
pub mod tcp;
pub mod time;
pub mod vbr;

pub use config::{parse_scenario, BufferSize, ConfigError, ScenarioConfig, Traffic};
pub use erica::{EricaParams, Scheme, ZAveraging};
pub use metrics::{Divergence, RunMetrics, TraceRecord};
pub use sim::{run_scenario, RunOutput, Simulation};
pub use time::SimTime;
pub use vbr::VbrParams;
