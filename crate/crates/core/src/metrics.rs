//! Blocking probability, bandwidth blocking probability and spectrum
//! efficiency. Undefined ratios are `None`, never zero.

use crate::num::Scalar;
use crate::{Gbps, Ghz, Seconds};

/// Blocked over arrived connections.
pub fn blocking_probability<T: Scalar>(blocked: u64, arrived: u64) -> Option<T> {
    (arrived > 0).then(|| T::of(blocked as f64) / T::of(arrived as f64))
}

/// Blocked over requested bandwidth.
pub fn bandwidth_blocking_probability<T: Scalar>(blocked_gbps_sum: T, requested_gbps_sum: T) -> Option<T> {
    (requested_gbps_sum > T::zero()).then(|| blocked_gbps_sum / requested_gbps_sum)
}

/// Carried bandwidth-time over allocated data-slot bandwidth-time. Guard slots
/// are excluded from both sides.
pub fn spectrum_efficiency<T: Scalar>(used_bw_time: T, allocated_data_bw_time: T) -> Option<T> {
    (allocated_data_bw_time > T::zero()).then(|| used_bw_time / allocated_data_bw_time)
}

/// Efficiency of one connection: `b / (ceil(b / W) * W)`.
pub fn connection_efficiency<T: Scalar>(b_req_gbps: T, slot_width_ghz: T) -> T {
    b_req_gbps / ((b_req_gbps / slot_width_ghz).ceil() * slot_width_ghz)
}

/// Results of one simulation run over its measurement window.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Arrivals at or after the warmup boundary.
    pub arrived: u64,
    pub blocked: u64,
    pub requested_gbps_sum: Gbps,
    pub blocked_gbps_sum: Gbps,
    /// Sum of `b_req * holding` over accepted measured connections (Gbps s).
    pub used_bw_time_integral: f64,
    /// Sum of `data_slots * W * holding` over the same connections (GHz s).
    pub allocated_data_bw_time_integral: f64,
    pub bp: Option<f64>,
    pub bbp: Option<f64>,
    pub spectrum_efficiency: Option<f64>,
    /// Warmup boundary and time of the last measured departure.
    pub measured_window: (Seconds, Seconds),
    /// Simulated time at which the event queue drained.
    pub sim_seconds_modeled: Seconds,
    /// All generated arrivals, warmup included.
    pub total_generated: u64,
    pub events_processed: u64,
}

/// Run-local counters; turned into a [`MetricsReport`] at the end of a run.
#[derive(Debug, Clone, Default)]
pub struct MetricsCollector {
    arrived: u64,
    blocked: u64,
    requested_gbps_sum: f64,
    blocked_gbps_sum: f64,
    used_bw_time: f64,
    allocated_bw_time: f64,
}

impl MetricsCollector {
    pub fn record_arrival(&mut self, b_req_gbps: Gbps, blocked: bool) {
        self.arrived += 1;
        self.requested_gbps_sum += b_req_gbps;
        if blocked {
            self.blocked += 1;
            self.blocked_gbps_sum += b_req_gbps;
        }
    }

    /// Adds a finished connection's occupancy over `duration`.
    pub fn record_occupancy(&mut self, b_req_gbps: Gbps, data_slots: usize, slot_width_ghz: Ghz, duration: Seconds) {
        self.used_bw_time += b_req_gbps * duration;
        self.allocated_bw_time += data_slots as f64 * slot_width_ghz * duration;
    }

    pub fn finish(
        &self,
        measured_window: (Seconds, Seconds),
        sim_seconds_modeled: Seconds,
        total_generated: u64,
        events_processed: u64,
    ) -> MetricsReport {
        MetricsReport {
            arrived: self.arrived,
            blocked: self.blocked,
            requested_gbps_sum: self.requested_gbps_sum,
            blocked_gbps_sum: self.blocked_gbps_sum,
            used_bw_time_integral: self.used_bw_time,
            allocated_data_bw_time_integral: self.allocated_bw_time,
            bp: blocking_probability(self.blocked, self.arrived),
            bbp: bandwidth_blocking_probability(self.blocked_gbps_sum, self.requested_gbps_sum),
            spectrum_efficiency: spectrum_efficiency(self.used_bw_time, self.allocated_bw_time),
            measured_window,
            sim_seconds_modeled,
            total_generated,
            events_processed,
        }
    }
}
