//! Discrete-time simulator for in-network computation over a
//! backpressure-routed network, plus the LP bound on the sustainable
//! query rate.
//!
//! Queries arrive at a central point and each spawns two raw packets, one
//! at each source. The two packets travel to a computation node, are
//! combined there into one processed packet, and the result travels on to
//! the destination.

pub mod arrivals;
pub mod capacity;
pub mod error;
pub mod policy;
pub mod presets;
pub mod queueing;
pub mod rng;
pub mod routing;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod topology;

pub use error::{ConstraintViolation, LpError, ScenarioError, SimError};
pub use scenario::Scenario;
pub use topology::{ComputeSite, Edge, NodeId, Topology};
