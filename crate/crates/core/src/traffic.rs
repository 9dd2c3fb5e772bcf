//! Request stream: Poisson arrivals, exponential holding times, uniformly
//! chosen endpoints and per-request bandwidth from one of three laws.

use std::fmt;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::num::{to_count, Scalar};
use crate::{Gbps, Ghz, NodeId, Seconds};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrafficError {
    #[error("invalid traffic parameter: {0}")]
    InvalidParam(String),
    #[error("average bandwidth {b_avg_gbps} Gbps is less than one granule of {granule_ghz} GHz")]
    TooFewGranules { b_avg_gbps: f64, granule_ghz: f64 },
}

/// Per-request bandwidth law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionSpec {
    /// Continuous uniform on `[b_min_gbps, b_max_gbps]`.
    Uniform { b_min_gbps: Gbps, b_max_gbps: Gbps },
    /// `k * granule` with `k ~ Poisson(b_avg / granule)`.
    PoissonBw { b_avg_gbps: Gbps, granule_ghz: Ghz },
    /// Every request asks for exactly `b_gbps`.
    Constant { b_gbps: Gbps },
}

/// Lower bound used when only `b_max` is given for a uniform law.
pub const DEFAULT_B_MIN_GBPS: Gbps = 1.0;

impl DistributionSpec {
    pub fn validate(&self) -> Result<(), TrafficError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(TrafficError::InvalidParam(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            DistributionSpec::Uniform { b_min_gbps, b_max_gbps } => {
                positive("b_min_gbps", b_min_gbps)?;
                positive("b_max_gbps", b_max_gbps)?;
                if b_min_gbps > b_max_gbps {
                    return Err(TrafficError::InvalidParam(format!(
                        "b_min_gbps {b_min_gbps} exceeds b_max_gbps {b_max_gbps}"
                    )));
                }
                Ok(())
            }
            DistributionSpec::PoissonBw { b_avg_gbps, granule_ghz } => {
                positive("b_avg_gbps", b_avg_gbps)?;
                positive("granule", granule_ghz)?;
                granules(b_avg_gbps, granule_ghz).map(|_| ())
            }
            DistributionSpec::Constant { b_gbps } => positive("b_gbps", b_gbps),
        }
    }

    /// Short name used in config files and CSV output.
    pub fn kind(&self) -> &'static str {
        match self {
            DistributionSpec::Uniform { .. } => "uniform",
            DistributionSpec::PoissonBw { .. } => "poisson",
            DistributionSpec::Constant { .. } => "constant",
        }
    }

    /// The two CSV parameter columns: uniform `(b_min, b_max)`, poisson
    /// `(b_avg, granule in MHz)`, constant `(b, -)`.
    pub fn params(&self) -> (f64, Option<f64>) {
        match *self {
            DistributionSpec::Uniform { b_min_gbps, b_max_gbps } => (b_min_gbps, Some(b_max_gbps)),
            DistributionSpec::PoissonBw { b_avg_gbps, granule_ghz } => (b_avg_gbps, Some(granule_ghz * 1000.0)),
            DistributionSpec::Constant { b_gbps } => (b_gbps, None),
        }
    }

    /// Mean demand in Gbps (the Poisson law is conditioned on k >= 1, which
    /// only matters for tiny granule counts).
    pub fn mean_gbps(&self) -> Gbps {
        match *self {
            DistributionSpec::Uniform { b_min_gbps, b_max_gbps } => 0.5 * (b_min_gbps + b_max_gbps),
            DistributionSpec::PoissonBw { b_avg_gbps, .. } => b_avg_gbps,
            DistributionSpec::Constant { b_gbps } => b_gbps,
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DistributionSpec::Uniform { b_min_gbps, b_max_gbps } => {
                write!(f, "uniform({b_min_gbps}..{b_max_gbps} Gbps)")
            }
            DistributionSpec::PoissonBw { b_avg_gbps, granule_ghz } => {
                write!(f, "poisson(avg {b_avg_gbps} Gbps, granule {} MHz)", granule_ghz * 1000.0)
            }
            DistributionSpec::Constant { b_gbps } => write!(f, "constant({b_gbps} Gbps)"),
        }
    }
}

/// Arrival and holding-time parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficParams<T: Scalar = f64> {
    /// Arrivals per second generated at each node.
    pub lambda_per_node: T,
    /// Reciprocal of the mean holding time.
    pub mu: T,
    pub node_count: usize,
}

impl<T: Scalar> TrafficParams<T> {
    pub fn new(lambda_per_node: T, mu: T, node_count: usize) -> Result<Self, TrafficError> {
        if !(lambda_per_node > T::zero() && lambda_per_node.is_finite()) {
            return Err(TrafficError::InvalidParam(format!("lambda must be positive, got {lambda_per_node}")));
        }
        if !(mu > T::zero() && mu.is_finite()) {
            return Err(TrafficError::InvalidParam(format!("mu must be positive, got {mu}")));
        }
        if node_count < 2 {
            return Err(TrafficError::InvalidParam(format!("need at least 2 nodes, got {node_count}")));
        }
        Ok(TrafficParams { lambda_per_node, mu, node_count })
    }

    /// Parameters giving `load_erlang` per node at the given `mu`.
    pub fn from_load(load_erlang: T, mu: T, node_count: usize) -> Result<Self, TrafficError> {
        Self::new(load_erlang * mu, mu, node_count)
    }

    /// Offered load per node in Erlang.
    pub fn offered_load(&self) -> T {
        offered_load(self.lambda_per_node, self.mu)
    }

    /// Rate of the merged arrival process over all nodes.
    pub fn total_rate(&self) -> T {
        self.lambda_per_node * T::of_usize(self.node_count)
    }
}

/// `lambda / mu`.
pub fn offered_load<T: Scalar>(lambda: T, mu: T) -> T {
    lambda / mu
}

/// Average bandwidth expressed in granules, rounded to the nearest integer.
pub fn granules<T: Scalar>(b_avg_gbps: T, granule_ghz: T) -> Result<u64, TrafficError> {
    let count = to_count((b_avg_gbps / granule_ghz).round()).map(|c| c as u64);
    match count {
        Some(c) if c >= 1 => Ok(c),
        _ => Err(TrafficError::TooFewGranules {
            b_avg_gbps: b_avg_gbps.to_f64().unwrap_or(f64::NAN),
            granule_ghz: granule_ghz.to_f64().unwrap_or(f64::NAN),
        }),
    }
}

/// Inverse CDF of the exponential law: `-ln(u) / rate`.
pub fn exp_inverse_cdf<T: Scalar>(u: T, rate: T) -> T {
    -u.ln() / rate
}

/// Reproducible random stream for one run.
///
/// Backed by ChaCha12, whose output is fixed by the seed on every platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, run_index: u64) -> Self {
        Self::from_seed(derive_seed(master_seed, run_index))
    }

    pub fn from_seed(seed: u64) -> Self {
        RngStream { rng: ChaCha12Rng::seed_from_u64(seed) }
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn open01(&mut self) -> f64 {
        self.rng.sample(Open01)
    }

    pub fn rng(&mut self) -> &mut ChaCha12Rng {
        &mut self.rng
    }
}

/// Per-run seed from a master seed and a run index.
///
/// SplitMix64 finalizer applied to the master seed, XORed with the run index
/// times the 64-bit golden ratio, finalized again. Every step is a bijection,
/// so distinct run indices under one master seed never collide.
pub fn derive_seed(master_seed: u64, run_index: u64) -> u64 {
    mix64(mix64(master_seed) ^ run_index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Exponential interarrival of the merged process with rate `total_rate`.
pub fn next_interarrival(rng: &mut RngStream, total_rate: f64) -> Seconds {
    exp_inverse_cdf(rng.open01(), total_rate)
}

/// Exponential holding time with mean `1 / mu`.
pub fn sample_holding(rng: &mut RngStream, mu: f64) -> Seconds {
    exp_inverse_cdf(rng.open01(), mu)
}

/// Uniform source, then uniform destination among the other nodes.
pub fn sample_endpoints(rng: &mut RngStream, node_count: usize) -> (NodeId, NodeId) {
    debug_assert!(node_count >= 2);
    let src = rng.rng().random_range(0..node_count);
    let mut dst = rng.rng().random_range(0..node_count - 1);
    if dst >= src {
        dst += 1;
    }
    (src, dst)
}

/// Prepared bandwidth sampler; builds the Poisson table once per run.
#[derive(Debug, Clone)]
pub struct BandwidthSampler {
    spec: DistributionSpec,
    poisson: Option<Poisson<f64>>,
}

impl BandwidthSampler {
    pub fn new(spec: DistributionSpec) -> Result<Self, TrafficError> {
        spec.validate()?;
        let poisson = match spec {
            DistributionSpec::PoissonBw { b_avg_gbps, granule_ghz } => {
                let mean = granules(b_avg_gbps, granule_ghz)? as f64;
                Some(Poisson::new(mean).map_err(|e| TrafficError::InvalidParam(e.to_string()))?)
            }
            _ => None,
        };
        Ok(BandwidthSampler { spec, poisson })
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn sample(&self, rng: &mut RngStream) -> Gbps {
        match self.spec {
            DistributionSpec::Uniform { b_min_gbps, b_max_gbps } => rng.rng().random_range(b_min_gbps..=b_max_gbps),
            DistributionSpec::PoissonBw { granule_ghz, .. } => {
                let poisson = self.poisson.as_ref().expect("built in new");
                loop {
                    let k = poisson.sample(rng.rng());
                    if k >= 1.0 {
                        break k * granule_ghz;
                    }
                }
            }
            DistributionSpec::Constant { b_gbps } => b_gbps,
        }
    }
}

/// One-shot form of [`BandwidthSampler::sample`].
pub fn sample_bandwidth(rng: &mut RngStream, spec: &DistributionSpec) -> Result<Gbps, TrafficError> {
    Ok(BandwidthSampler::new(*spec)?.sample(rng))
}

/// A lightpath demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub b_req_gbps: Gbps,
    pub arrival_s: Seconds,
    pub holding_s: Seconds,
}

impl Request {
    pub fn departure_s(&self) -> Seconds {
        self.arrival_s + self.holding_s
    }
}

/// Infinite request stream. Each request consumes, in order: one
/// interarrival draw, the endpoint draws, the bandwidth draw(s), one holding
/// draw. Consumption never depends on admission outcomes, so runs that share
/// a seed see the same demand sequence.
#[derive(Debug, Clone)]
pub struct RequestGenerator {
    rng: RngStream,
    params: TrafficParams<f64>,
    sampler: BandwidthSampler,
    clock: Seconds,
    next_id: u64,
}

impl RequestGenerator {
    pub fn new(rng: RngStream, params: TrafficParams<f64>, dist: DistributionSpec) -> Result<Self, TrafficError> {
        Ok(RequestGenerator { rng, params, sampler: BandwidthSampler::new(dist)?, clock: 0.0, next_id: 0 })
    }
}

impl Iterator for RequestGenerator {
    type Item = Request;

    fn next(&mut self) -> Option<Request> {
        self.clock += next_interarrival(&mut self.rng, self.params.total_rate());
        let (src, dst) = sample_endpoints(&mut self.rng, self.params.node_count);
        let b_req_gbps = self.sampler.sample(&mut self.rng);
        let holding_s = sample_holding(&mut self.rng, self.params.mu);
        let id = self.next_id;
        self.next_id += 1;
        Some(Request { id, src, dst, b_req_gbps, arrival_s: self.clock, holding_s })
    }
}
