//! Discrete-event simulator of a WiMAX point-to-multipoint uplink carrying
//! UGS constant-bit-rate flows, with a loss-driven QoE rate controller and a
//! fixed-rate baseline for comparison.
//!
//! Module map:
//!
//! * [`kernel`]: virtual clock and time-ordered event queue
//! * [`traffic`]: CBR sources and packets
//! * [`mac`]: drop-tail connection queues and per-frame grant allocation
//! * [`controller`]: per-user rate adaptation
//! * [`metrics`]: throughput, loss, delay and jitter per flow
//! * [`config`] and [`scenario`]: configuration, single runs and sweeps

pub mod config;
pub mod controller;
pub mod error;
pub mod kernel;
pub mod mac;
pub mod metrics;
pub mod scenario;
pub mod traffic;

pub use config::{load_config, parse_config, ScenarioConfig, Scheduler};
pub use error::{Error, Result};
pub use kernel::SimTime;
pub use scenario::{run_scenario, run_sweep, write_outputs, RunOutput, Variant};
