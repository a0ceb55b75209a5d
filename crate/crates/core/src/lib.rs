//! Placement of services that must be refreshed periodically at edge servers,
//! with requests offloaded to neighbours or the cloud.
//!
//! The crate provides the cost model, an exact dynamic program with a
//! brute-force oracle, the discounted value approximation (DVA), comparison
//! baselines, workload generators and analytic bounds.

pub mod baselines;
pub mod bounds;
pub mod dva;
pub mod error;
pub mod model;
pub mod optimal;
pub mod schedule;
pub mod units;
pub mod workload;

pub use error::{Error, Result};
pub use model::{Instance, Placement, RequestMatrix, ServiceSpec, SystemState, Target, Topology};
pub use schedule::{run_policy, SlotPolicy, SolverRun};
pub use units::{Coefficient, Cost, Volume};
