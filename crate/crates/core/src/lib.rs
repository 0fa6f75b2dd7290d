//! Availability-aware placement of master/slave virtual network functions.
//!
//! An instance describes clusters of servers, VNF types, an access network and
//! client requests. A solution places master VNF instances on servers, assigns
//! (possibly fragmented) requests to them and adds slave replicas that protect
//! each master. Solutions are ranked by the minimum availability over all
//! requests.
//!
//! Modules, roughly bottom-up:
//!
//! - [`model`]: instance types, validation and canonical JSON.
//! - [`availability`]: closed-form availability of fragments and configurations,
//!   plus a Monte Carlo estimator that samples component failures directly.
//! - [`placement`]: mutable solution state with resource ledgers and a
//!   from-scratch constraint checker.
//! - [`greedy`], [`vns`], [`exact`]: the solvers.
//! - [`instgen`], [`harness`]: random instances and experiment campaigns.
//! - [`solve`]: a single entry point dispatching to any solver.

pub mod availability;
pub mod error;
pub mod exact;
pub mod greedy;
pub mod harness;
pub mod instgen;
pub mod model;
pub mod placement;
pub mod solve;
pub mod vns;

pub use error::{Error, Result};
pub use model::{AccessPointId, ClusterId, ProblemInstance, RequestId, ServerId, VnfTypeId};
pub use placement::{Placement, SolveReport};

/// Absolute tolerance on resource quantities.
pub const EPS_CAP: f64 = 1e-9;
/// Two availabilities closer than this are considered tied.
pub const EPS_AVAIL: f64 = 1e-12;
/// Tolerance on the sum of a request's fractions.
pub const EPS_FRACTION: f64 = 1e-9;
