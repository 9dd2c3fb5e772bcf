//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.
//!
//! Run with `cargo test -p flexgrid-sim --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use rand::Rng;

use flexgrid_sim::engine::{erlang_b, run, SimConfig};
use flexgrid_sim::experiment::{arith_grid, itu_grid, run_sweep, FixedParams, ResultRow, SweepOptions, SweepSpec};
use flexgrid_sim::rsa::{admit, AdmissionResult, Router};
use flexgrid_sim::spectrum::{self, first_fit, owned_runs, ActiveConnection, SlotGrid, SlotMask};
use flexgrid_sim::topology::{builtin_topology, BuiltinTopology, RoutingMetric, Topology};
use flexgrid_sim::traffic::{BandwidthSampler, DistributionSpec, Request, RngStream};

mod common;

use common::{brute_first_fit, erlang_b_truncated_poisson, moments};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const MASTER_SEED: u64 = 1;

fn report(name: &str, ok: bool, detail: &str) {
    println!("{name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name} failed: {detail}");
}

fn topology(t: BuiltinTopology) -> Arc<Topology> {
    Arc::new(builtin_topology(t))
}

fn uniform() -> DistributionSpec {
    DistributionSpec::Uniform { b_min_gbps: 1.0, b_max_gbps: 100.0 }
}

fn constant() -> DistributionSpec {
    DistributionSpec::Constant { b_gbps: 100.0 }
}

fn sweep(topology: Arc<Topology>, widths: Vec<f64>, loads: Vec<f64>, dist: DistributionSpec) -> SweepSpec {
    SweepSpec {
        topologies: vec![topology],
        slot_widths_ghz: widths,
        loads_erlang: loads,
        dist_variants: vec![dist],
        seeds: SEEDS.to_vec(),
        master_seed: MASTER_SEED,
        fixed: FixedParams::default(),
        check_interval: None,
    }
}

fn run_ok(spec: &SweepSpec) -> Vec<ResultRow> {
    let out = run_sweep(spec, SweepOptions { parallelism: 1, record_wall_time: false });
    assert_eq!(out.error_count(), 0, "sweep had failing runs");
    out.rows
}

/// Mean of a metric over seeds, keyed by slot width.
fn mean_by_width(rows: &[ResultRow], load: f64, metric: impl Fn(&ResultRow) -> f64) -> BTreeMap<u64, f64> {
    let mut acc: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.load_erlang_per_node == load) {
        let e = acc.entry(r.slot_width_ghz.to_bits()).or_default();
        e.0 += metric(r);
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn bp(r: &ResultRow) -> f64 {
    r.outcome.as_ref().unwrap().bp.expect("arrivals measured")
}

fn efficiency(r: &ResultRow) -> f64 {
    r.outcome.as_ref().unwrap().spectrum_efficiency.expect("connections carried")
}

fn at(map: &BTreeMap<u64, f64>, w: f64) -> f64 {
    map[&w.to_bits()]
}

#[test]
fn erlang_b_oracle() {
    // Frozen from an independent 50-digit evaluation.
    const FROZEN: [(f64, f64); 2] = [(20.0, 6.859251505146932e-4), (25.0, 1.164582392867921e-2)];
    let demand = spectrum::slots_required(100.0, 12.5, 10.0).unwrap();
    let slots = spectrum::slot_count(4000.0, 12.5).unwrap();
    assert_eq!((demand.data_slots, demand.guard_slots), (8, 1));
    let servers = slots / demand.total();
    assert_eq!(servers, 35);

    let link = topology(BuiltinTopology::SingleLink);
    let mut lines = Vec::new();
    let mut ok = true;
    for (link_load, frozen) in FROZEN {
        let oracle = erlang_b(servers, link_load);
        assert!((oracle - frozen).abs() < 1e-15 * frozen.max(1.0));
        assert!((erlang_b_truncated_poisson(servers, link_load) - frozen).abs() < 1e-12);

        // Both endpoints generate traffic onto the one link.
        let per_node = link_load / 2.0;
        let mut samples = Vec::new();
        let mut slowest = Duration::ZERO;
        for seed in SEEDS {
            let mut config = SimConfig::new(link.clone(), 12.5, constant(), per_node, 0.001).unwrap();
            config.total_requests = 200_200;
            config.master_seed = MASTER_SEED;
            config.run_index = seed;
            config.check_interval = None;
            let started = Instant::now();
            let report = run(&config).unwrap();
            slowest = slowest.max(started.elapsed());
            assert!(report.arrived >= 200_000, "only {} measured arrivals", report.arrived);
            samples.push(report.bp.unwrap());
        }
        let (mean, var) = moments(&samples);
        let se = (var / samples.len() as f64).sqrt();
        let within = (mean - oracle).abs() <= 3.0 * se;
        let fast = slowest < Duration::from_secs(30);
        ok &= within && fast;
        lines.push(format!(
            "rho={link_load}: mean bp {mean:.4e} vs {oracle:.4e}, se {se:.2e}, z {:.2}, slowest run {:.2}s",
            (mean - oracle) / se,
            slowest.as_secs_f64()
        ));
    }
    report("erlang_b_oracle", ok, &lines.join("; "));
}

#[test]
fn full_efficiency_anchors() {
    let link = topology(BuiltinTopology::SingleLink);
    let mut ok = true;
    let mut lines = Vec::new();
    for (w, expected, tol) in [
        (6.25, 1.0, 1e-9),
        (12.5, 1.0, 1e-9),
        (25.0, 1.0, 1e-9),
        (50.0, 1.0, 1e-9),
        (100.0, 1.0, 1e-9),
        (37.5, 100.0 / 112.5, 1e-6),
    ] {
        let mut config = SimConfig::new(link.clone(), w, constant(), 2.5, 0.001).unwrap();
        config.master_seed = MASTER_SEED;
        config.check_interval = None;
        let r = run(&config).unwrap();
        let eff = r.spectrum_efficiency.unwrap();
        ok &= (eff - expected).abs() <= tol;
        lines.push(format!("W={w}: {eff} (bp {})", r.bp.unwrap()));
    }
    report("full_efficiency_anchors", ok, &lines.join("; "));
}

/// NSFNET, Constant{100}, 20 E over the ITU grid merged with the 2 GHz grid.
fn constant_sweep() -> &'static Vec<ResultRow> {
    static ROWS: OnceLock<Vec<ResultRow>> = OnceLock::new();
    ROWS.get_or_init(|| {
        let mut widths: Vec<f64> = itu_grid(100.0);
        widths.extend(arith_grid(2.0, 100.0, 2.0));
        widths.sort_by(f64::total_cmp);
        widths.dedup();
        assert_eq!(widths.len(), 64);
        run_ok(&sweep(topology(BuiltinTopology::Nsfnet), widths, vec![20.0], constant()))
    })
}

#[test]
fn constant_bbp_equals_bp() {
    let mut rows: Vec<&ResultRow> = constant_sweep().iter().collect();
    let small = run_ok(&sweep(topology(BuiltinTopology::Usnet), vec![12.5, 37.5], vec![15.0, 30.0], constant()));
    rows.extend(small.iter());
    let mut blocked_runs = 0;
    let ok = rows.iter().all(|r| {
        let m = r.outcome.as_ref().unwrap();
        blocked_runs += usize::from(m.blocked > 0);
        m.bp.map(f64::to_bits) == m.bbp.map(f64::to_bits)
    });
    report("constant_bbp_equals_bp", ok, &format!("{} runs, {blocked_runs} with blocking", rows.len()));
}

#[test]
fn uniform_small_widths_outperform() {
    let rows = run_ok(&sweep(topology(BuiltinTopology::Nsfnet), itu_grid(100.0), vec![20.0], uniform()));
    let bps = mean_by_width(&rows, 20.0, bp);
    let effs = mean_by_width(&rows, 20.0, efficiency);
    let wide: Vec<f64> = itu_grid(100.0).into_iter().filter(|&w| w >= 50.0).collect();
    let lowest_wide_bp = wide.iter().map(|&w| at(&bps, w)).fold(f64::INFINITY, f64::min);
    let best_wide_eff = wide.iter().map(|&w| at(&effs, w)).fold(0.0, f64::max);
    let ok = at(&bps, 6.25) <= lowest_wide_bp && at(&bps, 12.5) <= lowest_wide_bp && at(&effs, 12.5) >= best_wide_eff;
    report(
        "uniform_small_widths_outperform",
        ok,
        &format!(
            "bp 6.25={:.4} 12.5={:.4} min(W>=50)={lowest_wide_bp:.4}; eff 12.5={:.4} max(W>=50)={best_wide_eff:.4}",
            at(&bps, 6.25),
            at(&bps, 12.5),
            at(&effs, 12.5)
        ),
    );
}

#[test]
fn blocking_grows_with_load() {
    let rows = run_ok(&sweep(topology(BuiltinTopology::Nsfnet), vec![12.5], vec![15.0, 20.0, 25.0], uniform()));
    let means: Vec<f64> = [15.0, 20.0, 25.0].iter().map(|&l| at(&mean_by_width(&rows, l, bp), 12.5)).collect();
    let ok = means.windows(2).all(|p| p[0] <= p[1]);
    report("blocking_grows_with_load", ok, &format!("mean bp at 15/20/25 E: {means:?}"));
}

#[test]
fn constant_minima_at_divisors() {
    let bps = mean_by_width(constant_sweep(), 20.0, bp);
    let mut ok = true;
    let mut lines = Vec::new();
    for w in [25.0, 50.0, 100.0] {
        let here = at(&bps, w);
        for n in [w - 6.25, w + 6.25] {
            // 106.25 lies past the end of the grid.
            if let Some(&other) = bps.get(&n.to_bits()) {
                ok &= here <= other;
                lines.push(format!("bp({w})={here:.4} vs bp({n})={other:.4}"));
            }
        }
    }
    report("constant_minima_at_divisors", ok, &lines.join("; "));
}

#[test]
fn property_suites() {
    let mut rng = RngStream::new(7, 0);
    let rng = rng.rng();
    let mut details = Vec::new();

    // First-fit against an exhaustive scan.
    let mut mismatches = 0;
    for _ in 0..100_000 {
        let len = rng.random_range(1..=64);
        let bits: u64 = rng.random();
        let need = rng.random_range(1..=64);
        let free = SlotMask::from_indices(len, (0..len).filter(|i| bits >> i & 1 == 1));
        mismatches += usize::from(first_fit(&free, need) != brute_first_fit(&free, need));
    }
    details.push(format!("first_fit mismatches {mismatches}/100000"));
    let mut ok = mismatches == 0;

    // Random admissions and departures on NSFNET: conservation, owner-map
    // contiguity/continuity, blocked immutability, round trip.
    let nsfnet = builtin_topology(BuiltinTopology::Nsfnet);
    let router = Router::new(&nsfnet, RoutingMetric::Hops).unwrap();
    let empty: Vec<SlotGrid> = nsfnet.links.iter().map(|l| SlotGrid::new(l.bandwidth_ghz, 25.0).unwrap()).collect();
    let mut grids = empty.clone();
    let mut active: Vec<ActiveConnection> = Vec::new();
    let (mut blocked, mut state_violations) = (0, 0);
    for id in 0..20_000u64 {
        if !active.is_empty() && rng.random_bool(0.45) {
            let conn = active.swap_remove(rng.random_range(0..active.len()));
            spectrum::release(&mut grids, &conn).unwrap();
        } else {
            let src = rng.random_range(0..nsfnet.node_count);
            let dst = (src + rng.random_range(1..nsfnet.node_count)) % nsfnet.node_count;
            let req =
                Request { id, src, dst, b_req_gbps: rng.random_range(1.0..400.0), arrival_s: 0.0, holding_s: 1.0 };
            let before = grids.clone();
            match admit(&router, &mut grids, &req, 25.0, 10.0).unwrap() {
                AdmissionResult::Accepted { path, start_slot, demand } => {
                    active.push(ActiveConnection::new(req, path, start_slot, demand));
                }
                AdmissionResult::Blocked { .. } => {
                    blocked += 1;
                    state_violations += usize::from(grids != before);
                }
            }
        }
        if id % 97 == 0 {
            spectrum::check_consistency(&grids, &active).unwrap();
            let runs = owned_runs(&grids).unwrap();
            for c in &active {
                let r = &runs[&c.id()];
                let mut links = c.path.links.clone();
                links.sort_unstable();
                state_violations +=
                    usize::from(r.start != c.start_slot || r.len != c.demand.total() || r.links != links);
            }
            for (l, g) in grids.iter().enumerate() {
                let used: usize = active.iter().filter(|c| c.path.links.contains(&l)).map(|c| c.demand.total()).sum();
                state_violations += usize::from(g.occupied_count() != used);
            }
        }
    }
    for conn in active.drain(..) {
        spectrum::release(&mut grids, &conn).unwrap();
    }
    let round_trip = grids == empty;
    details.push(format!("{blocked} blocked admissions, {state_violations} state violations, round trip {round_trip}"));
    ok &= state_violations == 0 && round_trip && blocked > 0;

    // Engine with a full consistency sweep after every event.
    let mut config = SimConfig::new(topology(BuiltinTopology::Nsfnet), 12.5, uniform(), 25.0, 0.01).unwrap();
    config.total_requests = 5_000;
    config.check_interval = Some(1);
    let checked = run(&config).unwrap();
    config.check_interval = None;
    ok &= run(&config).unwrap() == checked;
    details.push(format!("checked engine run blocked {}/{}", checked.blocked, checked.arrived));

    // Same sweep, different thread counts: identical bytes.
    let mut spec = sweep(topology(BuiltinTopology::Nsfnet), vec![6.25, 12.5, 50.0], vec![20.0], uniform());
    spec.fixed.total_requests = 20_000;
    spec.dist_variants.push(constant());
    let serial = run_sweep(&spec, SweepOptions { parallelism: 1, record_wall_time: false }).csv;
    let parallel = run_sweep(&spec, SweepOptions { parallelism: 4, record_wall_time: false }).csv;
    let again = run_sweep(&spec, SweepOptions { parallelism: 1, record_wall_time: false }).csv;
    let identical = serial == parallel && serial == again;
    ok &= identical;
    details.push(format!("CSV byte-identical across runs and parallelism: {identical}"));

    report("property_suites", ok, &details.join("; "));
}

#[test]
fn bandwidth_moments() {
    const N: usize = 1_000_000;
    let draw = |spec: DistributionSpec, seed: u64| -> Vec<f64> {
        let sampler = BandwidthSampler::new(spec).unwrap();
        let mut rng = RngStream::new(seed, 0);
        (0..N).map(|_| sampler.sample(&mut rng)).collect()
    };
    let n = N as f64;

    let xs = draw(uniform(), 21);
    let (mean, _) = moments(&xs);
    let sd = 99.0 / 12f64.sqrt();
    let support = xs.iter().all(|&x| (1.0..=100.0).contains(&x));
    let uniform_ok = support && (mean - 50.5).abs() <= 5.0 * sd / n.sqrt();

    let granule = 0.001;
    let xs = draw(DistributionSpec::PoissonBw { b_avg_gbps: 100.0, granule_ghz: granule }, 22);
    let (pmean, pvar) = moments(&xs);
    let var = 100.0 * granule;
    let poisson_ok =
        (pmean - 100.0).abs() <= 5.0 * (var / n).sqrt() && (pvar - var).abs() <= 5.0 * var * (2.0 / n).sqrt();

    report(
        "bandwidth_moments",
        uniform_ok && poisson_ok,
        &format!("uniform mean {mean:.4}, support {support}; poisson mean {pmean:.5} var {pvar:.5}"),
    );
}
