//! Sweep configuration files.
//!
//! Flat `key = value` lines grouped under `[section]` headers; `#` starts a
//! comment and list values are comma separated. Sections:
//!
//! * `[sweep]`: `topologies`, `slot_widths_ghz`, `itu_max_ghz`,
//!   `arith_min_ghz`/`arith_max_ghz`/`arith_step_ghz`, `loads_erlang`,
//!   `seeds`, `master_seed`.
//! * `[fixed]`: `link_bandwidth_ghz`, `guard_ghz`, `total_requests`,
//!   `warmup_multiplier`, `mu`, `routing_metric`.
//! * `[dist]` (repeatable): `dist = uniform|poisson|constant` plus
//!   `b_min_gbps`, `b_max_gbps`, `b_avg_gbps`, `granule_mhz`, `b_gbps`. Every
//!   parameter may be a list; a section expands to the product of its lists.
//!
//! A topology entry is a preset name or `file:<path>` (relative paths resolve
//! against the config file's directory).

use std::collections::BTreeMap;
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use super::{arith_grid, itu_grid, FixedParams, SweepSpec};
use crate::topology::{builtin_topology, load_topology, BuiltinTopology, RoutingMetric, Topology};
use crate::traffic::{DistributionSpec, DEFAULT_B_MIN_GBPS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("[{section}] {key}: {msg}")]
    Value { section: String, key: String, msg: String },
    #[error("missing required key `{key}` in [{section}]")]
    Missing { section: String, key: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Raw section: key -> (line, value), in file order.
type Section = BTreeMap<String, (usize, String)>;

struct RawConfig {
    sweep: Section,
    fixed: Section,
    dists: Vec<Section>,
}

fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    let mut raw = RawConfig { sweep: Section::new(), fixed: Section::new(), dists: Vec::new() };
    let mut current: Option<&'static str> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(match name.trim() {
                "sweep" => "sweep",
                "fixed" => "fixed",
                "dist" => {
                    raw.dists.push(Section::new());
                    "dist"
                }
                other => return Err(ConfigError::Syntax { line: line_no, msg: format!("unknown section [{other}]") }),
            });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: line_no, msg: format!("expected `key = value`, found `{line}`") });
        };
        let section = match current {
            Some("sweep") => &mut raw.sweep,
            Some("fixed") => &mut raw.fixed,
            Some(_) => raw.dists.last_mut().expect("pushed on header"),
            None => return Err(ConfigError::Syntax { line: line_no, msg: "key outside of any section".into() }),
        };
        let key = key.trim().to_string();
        if section.insert(key.clone(), (line_no, value.trim().to_string())).is_some() {
            return Err(ConfigError::Syntax { line: line_no, msg: format!("duplicate key `{key}`") });
        }
    }
    Ok(raw)
}

struct Reader<'a> {
    name: &'static str,
    section: &'a Section,
    used: Vec<&'static str>,
}

impl<'a> Reader<'a> {
    fn new(name: &'static str, section: &'a Section) -> Self {
        Reader { name, section, used: Vec::new() }
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Value { section: self.name.into(), key: key.into(), msg: msg.into() }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a str> {
        self.used.push(key);
        self.section.get(key).map(|(_, v)| v.as_str())
    }

    fn list<T: std::str::FromStr>(&mut self, key: &'static str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let items: Result<Vec<T>, _> = v.split(',').map(|s| s.trim().parse::<T>()).collect();
        match items {
            Ok(items) if !items.is_empty() => Ok(Some(items)),
            _ => Err(self.err(key, format!("cannot parse `{v}` as a list"))),
        }
    }

    fn one<T: std::str::FromStr>(&mut self, key: &'static str) -> Result<Option<T>, ConfigError> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.parse().map(Some).map_err(|_| self.err(key, format!("cannot parse `{v}`")))
    }

    fn required_list<T: std::str::FromStr>(&mut self, key: &'static str) -> Result<Vec<T>, ConfigError> {
        self.list(key)?.ok_or_else(|| ConfigError::Missing { section: self.name.into(), key: key.into() })
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.section.iter().find(|(k, _)| !self.used.contains(&k.as_str())) {
            Some((k, (line, _))) => {
                Err(ConfigError::Syntax { line: *line, msg: format!("unknown key `{k}` in [{}]", self.name) })
            }
            None => Ok(()),
        }
    }
}

fn positive(r: &Reader, key: &str, values: &[f64]) -> Result<(), ConfigError> {
    match values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        Some(v) => Err(r.err(key, format!("value {v} must be positive"))),
        None => Ok(()),
    }
}

/// Parses a sweep config. `base_dir` anchors relative `file:` topologies.
pub fn parse_sweep_config(text: &str, base_dir: Option<&FsPath>) -> Result<SweepSpec, ConfigError> {
    let raw = parse_raw(text)?;

    let mut s = Reader::new("sweep", &raw.sweep);
    let topology_names: Vec<String> = s.required_list("topologies")?;
    let mut topologies = Vec::new();
    for name in &topology_names {
        topologies.push(Arc::new(resolve_topology(name, base_dir)?));
    }

    let mut widths: Vec<f64> = s.list("slot_widths_ghz")?.unwrap_or_default();
    if let Some(max) = s.one::<f64>("itu_max_ghz")? {
        if max < 6.25 {
            return Err(s.err("itu_max_ghz", "must be at least 6.25"));
        }
        widths.extend(itu_grid(max));
    }
    let arith_min = s.one::<f64>("arith_min_ghz")?;
    let arith_step = s.one::<f64>("arith_step_ghz")?;
    if let Some(max) = s.one::<f64>("arith_max_ghz")? {
        let (min, step) = (arith_min.unwrap_or(2.0), arith_step.unwrap_or(2.0));
        positive(&s, "arith_*", &[min, max, step])?;
        widths.extend(arith_grid(min, max, step));
    } else if arith_min.is_some() || arith_step.is_some() {
        return Err(ConfigError::Missing { section: "sweep".into(), key: "arith_max_ghz".into() });
    }
    if widths.is_empty() {
        return Err(ConfigError::Missing { section: "sweep".into(), key: "slot_widths_ghz".into() });
    }
    positive(&s, "slot_widths_ghz", &widths)?;
    widths.sort_by(f64::total_cmp);
    widths.dedup();

    let loads: Vec<f64> = s.required_list("loads_erlang")?;
    positive(&s, "loads_erlang", &loads)?;
    let seeds: Vec<u64> = s.list("seeds")?.unwrap_or_else(|| (0..5).collect());
    let master_seed: u64 = s.one("master_seed")?.unwrap_or(0);
    s.finish()?;

    let mut f = Reader::new("fixed", &raw.fixed);
    let defaults = FixedParams::default();
    let fixed = FixedParams {
        link_bandwidth_ghz: f.one("link_bandwidth_ghz")?.unwrap_or(defaults.link_bandwidth_ghz),
        guard_ghz: f.one("guard_ghz")?.unwrap_or(defaults.guard_ghz),
        total_requests: f.one("total_requests")?.unwrap_or(defaults.total_requests),
        warmup_multiplier: f.one("warmup_multiplier")?.unwrap_or(defaults.warmup_multiplier),
        mu: f.one("mu")?.unwrap_or(defaults.mu),
        routing_metric: match f.raw("routing_metric") {
            None => defaults.routing_metric,
            Some(v) => v.parse::<RoutingMetric>().map_err(|e| f.err("routing_metric", e))?,
        },
    };
    positive(&f, "link_bandwidth_ghz", &[fixed.link_bandwidth_ghz])?;
    positive(&f, "mu", &[fixed.mu])?;
    if !(fixed.guard_ghz >= 0.0) {
        return Err(f.err("guard_ghz", "must be nonnegative"));
    }
    if !(fixed.warmup_multiplier >= 0.0) {
        return Err(f.err("warmup_multiplier", "must be nonnegative"));
    }
    if fixed.total_requests == 0 {
        return Err(f.err("total_requests", "must be at least 1"));
    }
    f.finish()?;

    if let Some(w) = widths.iter().find(|&&w| w > fixed.link_bandwidth_ghz) {
        return Err(ConfigError::Invalid(format!(
            "slot width {w} GHz exceeds link bandwidth {} GHz",
            fixed.link_bandwidth_ghz
        )));
    }

    if raw.dists.is_empty() {
        return Err(ConfigError::Missing { section: "dist".into(), key: "dist".into() });
    }
    let mut dist_variants = Vec::new();
    for section in &raw.dists {
        dist_variants.extend(parse_dist_section(section)?);
    }

    Ok(SweepSpec {
        topologies,
        slot_widths_ghz: widths,
        loads_erlang: loads,
        dist_variants,
        seeds,
        master_seed,
        fixed,
        check_interval: None,
    })
}

fn parse_dist_section(section: &Section) -> Result<Vec<DistributionSpec>, ConfigError> {
    let mut r = Reader::new("dist", section);
    let kind: String = r.one("dist")?.ok_or(ConfigError::Missing { section: "dist".into(), key: "dist".into() })?;
    let mut out = Vec::new();
    match kind.as_str() {
        "uniform" => {
            let mins = r.list::<f64>("b_min_gbps")?.unwrap_or_else(|| vec![DEFAULT_B_MIN_GBPS]);
            let maxs = r.required_list::<f64>("b_max_gbps")?;
            for &b_max_gbps in &maxs {
                for &b_min_gbps in &mins {
                    out.push(DistributionSpec::Uniform { b_min_gbps, b_max_gbps });
                }
            }
        }
        "poisson" => {
            let avgs = r.required_list::<f64>("b_avg_gbps")?;
            let granules = r.list::<f64>("granule_mhz")?.unwrap_or_else(|| vec![1.0]);
            for &b_avg_gbps in &avgs {
                for &g in &granules {
                    out.push(DistributionSpec::PoissonBw { b_avg_gbps, granule_ghz: g / 1000.0 });
                }
            }
        }
        "constant" => {
            for b_gbps in r.required_list::<f64>("b_gbps")? {
                out.push(DistributionSpec::Constant { b_gbps });
            }
        }
        other => return Err(r.err("dist", format!("unknown distribution `{other}`"))),
    }
    for d in &out {
        d.validate().map_err(|e| r.err("dist", e.to_string()))?;
    }
    r.finish()?;
    Ok(out)
}

fn resolve_topology(entry: &str, base_dir: Option<&FsPath>) -> Result<Topology, ConfigError> {
    if let Some(path) = entry.strip_prefix("file:") {
        let mut full = PathBuf::from(path.trim());
        if full.is_relative() {
            if let Some(base) = base_dir {
                full = base.join(full);
            }
        }
        let text = std::fs::read_to_string(&full).map_err(|source| ConfigError::Io { path: full.clone(), source })?;
        let name = full.file_stem().and_then(|s| s.to_str()).unwrap_or("custom");
        return load_topology(name, &text)
            .map_err(|e| ConfigError::Invalid(format!("topology {}: {e}", full.display())));
    }
    let preset: BuiltinTopology = entry.parse().map_err(|e: crate::topology::TopologyError| ConfigError::Value {
        section: "sweep".into(),
        key: "topologies".into(),
        msg: e.to_string(),
    })?;
    Ok(builtin_topology(preset))
}

/// Bundled experiment presets: `(name, config text)`.
pub const PRESETS: &[(&str, &str)] = &[
    ("uniform-topologies", include_str!("../../presets/uniform-topologies.conf")),
    ("uniform-loads", include_str!("../../presets/uniform-loads.conf")),
    ("uniform-bmax", include_str!("../../presets/uniform-bmax.conf")),
    ("poisson-topologies", include_str!("../../presets/poisson-topologies.conf")),
    ("poisson-loads", include_str!("../../presets/poisson-loads.conf")),
    ("poisson-bavg", include_str!("../../presets/poisson-bavg.conf")),
    ("constant-topologies", include_str!("../../presets/constant-topologies.conf")),
    ("constant-loads", include_str!("../../presets/constant-loads.conf")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
[sweep]
topologies = single_link
slot_widths_ghz = 12.5
loads_erlang = 20
seeds = 3

[dist]
dist = constant
b_gbps = 100
";

    #[test]
    fn minimal_config() {
        let spec = parse_sweep_config(MINIMAL, None).unwrap();
        assert_eq!(spec.run_count(), 1);
        assert_eq!(spec.seeds, vec![3]);
        assert_eq!(spec.fixed, FixedParams::default());
        assert_eq!(spec.dist_variants, vec![DistributionSpec::Constant { b_gbps: 100.0 }]);
    }

    #[test]
    fn all_presets_parse() {
        for (name, text) in PRESETS {
            let spec = parse_sweep_config(text, None).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(spec.run_count() > 0);
            assert_eq!(spec.fixed.total_requests, 200_000, "{name}");
        }
    }

    #[test]
    fn uniform_topologies_preset_size() {
        let spec = parse_sweep_config(preset("uniform-topologies").unwrap(), None).unwrap();
        assert_eq!(spec.slot_widths_ghz.len(), 16);
        assert_eq!(spec.run_count(), 240);
    }

    #[test]
    fn constant_preset_merges_grids() {
        let spec = parse_sweep_config(preset("constant-topologies").unwrap(), None).unwrap();
        // 16 ITU widths + 50 even widths, sharing 50 and 100.
        assert_eq!(spec.slot_widths_ghz.len(), 64);
        assert!(spec.slot_widths_ghz.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn list_expansion() {
        let text = "[sweep]\ntopologies = nsfnet\nslot_widths_ghz = 12.5\nloads_erlang = 20\n\
                    [dist]\ndist = uniform\nb_max_gbps = 50, 100\n[dist]\ndist = poisson\nb_avg_gbps = 100\n";
        let spec = parse_sweep_config(text, None).unwrap();
        assert_eq!(spec.dist_variants.len(), 3);
        assert_eq!(spec.dist_variants[1], DistributionSpec::Uniform { b_min_gbps: 1.0, b_max_gbps: 100.0 });
        assert_eq!(spec.dist_variants[2], DistributionSpec::PoissonBw { b_avg_gbps: 100.0, granule_ghz: 0.001 });
        assert_eq!(spec.run_count(), 15);
    }

    #[test]
    fn errors_are_reported() {
        let bad_key = MINIMAL.replace("seeds = 3", "sedes = 3");
        assert!(matches!(parse_sweep_config(&bad_key, None), Err(ConfigError::Syntax { .. })));
        let bad_topo = MINIMAL.replace("single_link", "ring");
        assert!(matches!(parse_sweep_config(&bad_topo, None), Err(ConfigError::Value { .. })));
        let bad_width = MINIMAL.replace("12.5", "5000");
        assert!(matches!(parse_sweep_config(&bad_width, None), Err(ConfigError::Invalid(_))));
        let no_dist = MINIMAL.replace("[dist]\ndist = constant\nb_gbps = 100\n", "");
        assert!(matches!(parse_sweep_config(&no_dist, None), Err(ConfigError::Missing { .. })));
        assert!(matches!(parse_sweep_config("x = 1", None), Err(ConfigError::Syntax { line: 1, .. })));
        let neg = MINIMAL.replace("loads_erlang = 20", "loads_erlang = -1");
        assert!(parse_sweep_config(&neg, None).is_err());
    }

    #[test]
    fn file_topology() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("chain.txt"), "3\n0 1 10\n1 2 10\n").unwrap();
        let text = MINIMAL.replace("single_link", "file:chain.txt");
        let spec = parse_sweep_config(&text, Some(dir.path())).unwrap();
        assert_eq!(spec.topologies[0].name, "chain");
        assert_eq!(spec.topologies[0].node_count, 3);
    }
}
