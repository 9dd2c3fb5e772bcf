//! Discrete-event simulator for flexible-grid (elastic) optical networks.
//!
//! The crate models how the spectrum slot width interacts with the bandwidth
//! demand distribution. A run feeds a Poisson stream of lightpath requests
//! through shortest-path routing and first-fit spectrum assignment on a fixed
//! topology, and reports blocking probability, bandwidth blocking probability
//! and spectrum efficiency. The [`experiment`] module sweeps those runs over
//! slot-width/load/distribution grids and writes CSV.
//!
//! Closed-form pieces (slot arithmetic, the Erlang B oracle, metric ratios,
//! offered load) are generic over [`Scalar`]; the event engine itself runs on
//! [`Real`].

pub mod engine;
pub mod experiment;
pub mod metrics;
pub mod num;
pub mod rsa;
pub mod spectrum;
pub mod topology;
pub mod traffic;

pub use engine::{erlang_b, run, EngineError, MetricsReport, SimConfig};
pub use experiment::{derive_seed, itu_grid, run_sweep, SweepSpec};
pub use num::Scalar;
pub use rsa::{admit, AdmissionResult};
pub use spectrum::{first_fit, slot_count, slots_required, SlotDemand, SlotGrid, SlotMask};
pub use topology::{builtin_topology, load_topology, Path, RoutingMetric, Topology};
pub use traffic::{DistributionSpec, Request, RngStream, TrafficParams};

/// Scalar used by the simulation engine and the experiment layer.
pub type Real = f64;
/// Demand bandwidth in Gbps.
pub type Gbps = Real;
/// Spectrum width in GHz. One Gbps of demand occupies one GHz of spectrum.
pub type Ghz = Real;
/// Simulated time in seconds.
pub type Seconds = Real;
/// Connection identifier; equals the id of the request that created it.
pub type ConnId = u64;
/// Node index in a [`Topology`].
pub type NodeId = usize;
/// Link index in [`Topology::links`].
pub type LinkId = usize;
