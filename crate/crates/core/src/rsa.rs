//! Routing and spectrum assignment: fixed shortest-path routing, then
//! first-fit over the slots free on every link of the route.

use thiserror::Error;

use crate::spectrum::{self, first_fit, path_free_mask, slots_required, SlotDemand, SlotGrid, SpectrumError};
use crate::topology::{Path, RoutingMetric, Topology, TopologyError};
use crate::traffic::Request;
use crate::Ghz;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RsaError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockReason {
    NoContiguousRun,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdmissionResult {
    Accepted { path: Path, start_slot: usize, demand: SlotDemand },
    Blocked { reason: BlockReason, demand: SlotDemand },
}

impl AdmissionResult {
    pub fn is_blocked(&self) -> bool {
        matches!(self, AdmissionResult::Blocked { .. })
    }
}

/// Static route table: one shortest path per ordered node pair.
#[derive(Debug, Clone)]
pub struct Router {
    node_count: usize,
    metric: RoutingMetric,
    paths: Vec<Option<Path>>,
}

impl Router {
    pub fn new(topology: &Topology, metric: RoutingMetric) -> Result<Self, TopologyError> {
        Ok(Router { node_count: topology.node_count, metric, paths: topology.all_shortest_paths(metric)? })
    }

    pub fn metric(&self) -> RoutingMetric {
        self.metric
    }

    pub fn route(&self, src: usize, dst: usize) -> Result<&Path, TopologyError> {
        if src >= self.node_count || dst >= self.node_count {
            return Err(TopologyError::InvalidEndpoints { src, dst });
        }
        self.paths[src * self.node_count + dst].as_ref().ok_or(TopologyError::InvalidEndpoints { src, dst })
    }
}

/// Decides one request and, on acceptance, allocates its slots.
///
/// A blocked request leaves `grids` untouched.
pub fn admit(
    router: &Router,
    grids: &mut [SlotGrid],
    request: &Request,
    slot_width_ghz: Ghz,
    guard_ghz: Ghz,
) -> Result<AdmissionResult, RsaError> {
    let path = router.route(request.src, request.dst)?;
    let demand = slots_required(request.b_req_gbps, slot_width_ghz, guard_ghz)?;
    let free = path_free_mask(grids, &path.links)?;
    match first_fit(&free, demand.total()) {
        Some(start_slot) => {
            spectrum::allocate(grids, path, start_slot, demand, request.id)?;
            Ok(AdmissionResult::Accepted { path: path.clone(), start_slot, demand })
        }
        None => Ok(AdmissionResult::Blocked { reason: BlockReason::NoContiguousRun, demand }),
    }
}
