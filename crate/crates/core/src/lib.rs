//! Tonemap-driven analysis and simulation of HomePlug AV power-line networks.
//!
//! - [`tonemap`]: tonemaps and the closed-form link metrics (PHY rate,
//!   expected throughput, asymmetry, spectrum fraction)
//! - [`trace`] and [`generator`]: the PLCTM v1 trace format and seeded
//!   synthetic deployments
//! - [`sharing`]: central-coordinator spectrum-sharing decisions
//! - [`mac`]: CSMA/CA simulation with deferral counters and spectrum sharing
//! - [`metrics`]: fairness indices and run comparisons
//! - [`routing`]: offline multi-hop route planning over link rates

pub mod generator;
pub mod mac;
pub mod metrics;
pub mod rng;
pub mod routing;
pub mod sharing;
pub mod tonemap;
pub mod trace;

pub use generator::{generate_deployment, GeneratorProfile, ProfileKind};
pub use mac::{normalized_throughput, run_simulation, MacParams, SimInput, SimReportRaw};
pub use sharing::{build_decision_table, SsDecisionTable, SsPolicy};
pub use tonemap::{DirectedLink, PhyParams, Tonemap};
pub use trace::{parse_trace, serialize_trace, Deployment};
