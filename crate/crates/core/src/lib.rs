//! Discrete-event simulator for SDN-controlled fog deployments.
//!
//! A central controller with a global view places IoT jobs on fog servers
//! under a cooperative (redirect on saturation) or non-cooperative (wait at
//! the nearest server) policy. Runs report processing time, response time
//! and average fleet power, replicated over independent seeds.

pub mod chart;
pub mod config;
pub mod engine;
pub mod fog;
pub mod metrics;
pub mod policy;
pub mod power;
pub mod report;
pub mod sim;
pub mod workload;

pub use engine::{Event, EventKind, SimTime, Timeline};
pub use fog::{DeviceId, JobId, Location, ServerId, Topology};
pub use metrics::{compare, replicate, ComparisonReport, ReplicationReport, RunSummary};
pub use policy::PolicyKind;
pub use sim::{run_once, Experiment, RunOptions, RunOutput, SimError};
