//! Parameter sweeps: expand a grid into runs, execute them in parallel, and
//! emit one CSV row per run in grid order.

mod aggregate;
mod config;

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

pub use self::aggregate::{aggregate_csv, AggregateError};
pub use self::config::{parse_sweep_config, preset, ConfigError, PRESETS};
pub use crate::traffic::derive_seed;

use crate::engine::{
    self, MetricsReport, SimConfig, DEFAULT_GUARD_GHZ, DEFAULT_TOTAL_REQUESTS, DEFAULT_WARMUP_MULTIPLIER,
};
use crate::num::Scalar;
use crate::topology::{RoutingMetric, Topology, DEFAULT_LINK_BANDWIDTH_GHZ};
use crate::traffic::{DistributionSpec, TrafficParams};

/// Mean holding time of 1000 s.
pub const DEFAULT_MU: f64 = 0.001;

/// Exact CSV header of sweep output.
pub const CSV_COLUMNS: [&str; 18] = [
    "topology",
    "slot_width_ghz",
    "load_erlang_per_node",
    "dist",
    "dist_param1",
    "dist_param2",
    "guard_ghz",
    "link_bandwidth_ghz",
    "total_requests",
    "seed",
    "arrived_measured",
    "blocked",
    "bp",
    "bbp",
    "spectrum_efficiency",
    "sim_seconds_modeled",
    "wall_ms",
    "status",
];

/// Slot widths `6.25 * y` for `y = 1, 2, ...` up to `max_ghz`.
pub fn itu_grid<T: Scalar>(max_ghz: T) -> Vec<T> {
    let step = T::of(6.25);
    (1..).map(|y| step * T::of_usize(y)).take_while(|&w| w <= max_ghz).collect()
}

/// `min, min + step, ...` up to `max`. Terms are computed as `min + k * step`.
pub fn arith_grid<T: Scalar>(min: T, max: T, step: T) -> Vec<T> {
    (0..).map(|k| min + step * T::of_usize(k)).take_while(|&w| w <= max).collect()
}

/// Parameters shared by every run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedParams {
    pub link_bandwidth_ghz: f64,
    pub guard_ghz: f64,
    pub total_requests: u64,
    pub warmup_multiplier: f64,
    pub mu: f64,
    pub routing_metric: RoutingMetric,
}

impl Default for FixedParams {
    fn default() -> Self {
        FixedParams {
            link_bandwidth_ghz: DEFAULT_LINK_BANDWIDTH_GHZ,
            guard_ghz: DEFAULT_GUARD_GHZ,
            total_requests: DEFAULT_TOTAL_REQUESTS,
            warmup_multiplier: DEFAULT_WARMUP_MULTIPLIER,
            mu: DEFAULT_MU,
            routing_metric: RoutingMetric::Hops,
        }
    }
}

/// A cartesian grid of runs.
///
/// Runs sharing a seed draw the same random stream
/// (`derive_seed(master_seed, seed)`), so grid points are compared under
/// common random numbers.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub topologies: Vec<Arc<Topology>>,
    pub slot_widths_ghz: Vec<f64>,
    pub loads_erlang: Vec<f64>,
    pub dist_variants: Vec<DistributionSpec>,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub fixed: FixedParams,
    /// Consistency-check interval handed to every run.
    pub check_interval: Option<u64>,
}

/// One point of the grid.
#[derive(Debug, Clone)]
pub struct RunPoint {
    pub topology: Arc<Topology>,
    pub slot_width_ghz: f64,
    pub load_erlang: f64,
    pub dist: DistributionSpec,
    pub seed: u64,
}

impl SweepSpec {
    pub fn run_count(&self) -> usize {
        self.topologies.len()
            * self.slot_widths_ghz.len()
            * self.loads_erlang.len()
            * self.dist_variants.len()
            * self.seeds.len()
    }

    /// Grid points in output order: topology, slot width, load, distribution,
    /// seed (outermost first).
    pub fn points(&self) -> Vec<RunPoint> {
        let mut out = Vec::with_capacity(self.run_count());
        for topology in &self.topologies {
            for &slot_width_ghz in &self.slot_widths_ghz {
                for &load_erlang in &self.loads_erlang {
                    for &dist in &self.dist_variants {
                        for &seed in &self.seeds {
                            out.push(RunPoint { topology: topology.clone(), slot_width_ghz, load_erlang, dist, seed });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn sim_config(&self, p: &RunPoint) -> Result<SimConfig, engine::EngineError> {
        let f = &self.fixed;
        Ok(SimConfig {
            topology: p.topology.clone(),
            slot_width_ghz: p.slot_width_ghz,
            link_bandwidth_ghz: f.link_bandwidth_ghz,
            guard_ghz: f.guard_ghz,
            dist: p.dist,
            traffic: TrafficParams::from_load(p.load_erlang, f.mu, p.topology.node_count)?,
            total_requests: f.total_requests,
            warmup_multiplier: f.warmup_multiplier,
            master_seed: self.master_seed,
            run_index: p.seed,
            routing_metric: f.routing_metric,
            check_interval: self.check_interval,
        })
    }
}

/// One CSV record.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub topology: String,
    pub slot_width_ghz: f64,
    pub load_erlang_per_node: f64,
    pub dist: &'static str,
    pub dist_param1: f64,
    pub dist_param2: Option<f64>,
    pub guard_ghz: f64,
    pub link_bandwidth_ghz: f64,
    pub total_requests: u64,
    pub seed: u64,
    pub outcome: Result<MetricsReport, String>,
    pub wall_ms: Option<u128>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ResultRow {
    pub fn is_error(&self) -> bool {
        self.outcome.is_err()
    }

    pub fn record(&self) -> Vec<String> {
        let report = self.outcome.as_ref().ok();
        vec![
            self.topology.clone(),
            self.slot_width_ghz.to_string(),
            self.load_erlang_per_node.to_string(),
            self.dist.to_string(),
            self.dist_param1.to_string(),
            opt(self.dist_param2),
            self.guard_ghz.to_string(),
            self.link_bandwidth_ghz.to_string(),
            self.total_requests.to_string(),
            self.seed.to_string(),
            report.map(|r| r.arrived.to_string()).unwrap_or_default(),
            report.map(|r| r.blocked.to_string()).unwrap_or_default(),
            opt(report.and_then(|r| r.bp)),
            opt(report.and_then(|r| r.bbp)),
            opt(report.and_then(|r| r.spectrum_efficiency)),
            opt(report.map(|r| r.sim_seconds_modeled)),
            self.wall_ms.map(|w| w.to_string()).unwrap_or_else(|| "0".into()),
            match &self.outcome {
                Ok(_) => "ok".to_string(),
                Err(msg) => format!("error: {msg}"),
            },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub parallelism: usize,
    /// When false, `wall_ms` is written as 0 so output is byte-reproducible.
    pub record_wall_time: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { parallelism: 1, record_wall_time: true }
    }
}

/// Runs one grid point. Failures become error rows.
pub fn run_point(spec: &SweepSpec, p: &RunPoint, record_wall_time: bool) -> ResultRow {
    let started = Instant::now();
    let outcome = spec.sim_config(p).and_then(|c| engine::run(&c)).map_err(|e| e.to_string());
    let (dist_param1, dist_param2) = p.dist.params();
    ResultRow {
        topology: p.topology.name.clone(),
        slot_width_ghz: p.slot_width_ghz,
        load_erlang_per_node: p.load_erlang,
        dist: p.dist.kind(),
        dist_param1,
        dist_param2,
        guard_ghz: spec.fixed.guard_ghz,
        link_bandwidth_ghz: spec.fixed.link_bandwidth_ghz,
        total_requests: spec.fixed.total_requests,
        seed: p.seed,
        outcome,
        wall_ms: record_wall_time.then(|| started.elapsed().as_millis()),
    }
}

/// Executes every grid point on up to `options.parallelism` threads and
/// returns rows in grid order.
pub fn run_rows(spec: &SweepSpec, options: SweepOptions) -> Vec<ResultRow> {
    let points = spec.points();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(options.parallelism.max(1)).build().expect("thread pool");
    pool.install(|| points.par_iter().map(|p| run_point(spec, p, options.record_wall_time)).collect())
}

/// Output of [`run_sweep`].
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub csv: String,
    pub rows: Vec<ResultRow>,
}

impl SweepOutput {
    pub fn error_count(&self) -> usize {
        self.rows.iter().filter(|r| r.is_error()).count()
    }
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for row in rows {
        w.write_record(row.record()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

/// Runs the whole sweep and renders it as CSV.
pub fn run_sweep(spec: &SweepSpec, options: SweepOptions) -> SweepOutput {
    let rows = run_rows(spec, options);
    SweepOutput { csv: rows_to_csv(&rows), rows }
}
