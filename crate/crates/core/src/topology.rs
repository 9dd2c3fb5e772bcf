//! Optical network graph: loading, validation, presets and shortest paths.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::num::Scalar;
use crate::{Ghz, LinkId, NodeId};

/// Cost, node sequence and link sequence of a tentative path.
type Label = (f64, Vec<NodeId>, Vec<LinkId>);

/// Link bandwidth applied when a topology is loaded (4 THz per fiber).
pub const DEFAULT_LINK_BANDWIDTH_GHZ: Ghz = 4000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: NodeId },
    #[error("line {line}: node index {node} out of range for {node_count} nodes")]
    BadIndex { line: usize, node: NodeId, node_count: usize },
    #[error("line {line}: duplicate link between {a} and {b}")]
    DuplicateLink { line: usize, a: NodeId, b: NodeId },
    #[error("line {line}: link length must be positive, got {length}")]
    NonPositiveLength { line: usize, length: f64 },
    #[error("topology is disconnected: node {node} is unreachable from node 0")]
    Disconnected { node: NodeId },
    #[error("link bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("unknown topology preset `{0}` (expected nsfnet, usnet or single_link)")]
    UnknownPreset(String),
    #[error("invalid endpoints {src} -> {dst}")]
    InvalidEndpoints { src: NodeId, dst: NodeId },
    #[error("no path from {src} to {dst}")]
    NoPath { src: NodeId, dst: NodeId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: LinkId,
    /// Endpoints, smaller index first.
    pub endpoints: (NodeId, NodeId),
    pub length_km: f64,
    pub bandwidth_ghz: Ghz,
}

impl Link {
    /// The endpoint opposite `node`.
    pub fn other(&self, node: NodeId) -> NodeId {
        if self.endpoints.0 == node {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }
}

/// Route carrier: `links[i]` joins `nodes[i]` and `nodes[i + 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
}

impl Path {
    pub fn src(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn dst(&self) -> NodeId {
        *self.nodes.last().expect("path has at least one node")
    }

    pub fn hops(&self) -> usize {
        self.links.len()
    }

    /// Sum of per-link costs under `metric`.
    pub fn cost(&self, topology: &Topology, metric: RoutingMetric) -> f64 {
        self.links.iter().map(|&l| metric.link_cost(&topology.links[l])).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RoutingMetric {
    #[default]
    Hops,
    Km,
}

impl RoutingMetric {
    pub fn link_cost(self, link: &Link) -> f64 {
        match self {
            RoutingMetric::Hops => 1.0,
            RoutingMetric::Km => link.length_km,
        }
    }
}

impl FromStr for RoutingMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "hops" => Ok(RoutingMetric::Hops),
            "km" => Ok(RoutingMetric::Km),
            other => Err(format!("unknown routing metric `{other}` (expected hops or km)")),
        }
    }
}

impl fmt::Display for RoutingMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoutingMetric::Hops => "hops",
            RoutingMetric::Km => "km",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinTopology {
    Nsfnet,
    Usnet,
    SingleLink,
}

impl BuiltinTopology {
    pub const ALL: [BuiltinTopology; 3] =
        [BuiltinTopology::Nsfnet, BuiltinTopology::Usnet, BuiltinTopology::SingleLink];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinTopology::Nsfnet => "nsfnet",
            BuiltinTopology::Usnet => "usnet",
            BuiltinTopology::SingleLink => "single_link",
        }
    }

    /// Bundled topology file contents.
    pub fn source(self) -> &'static str {
        match self {
            BuiltinTopology::Nsfnet => include_str!("../data/nsfnet.txt"),
            BuiltinTopology::Usnet => include_str!("../data/usnet.txt"),
            BuiltinTopology::SingleLink => include_str!("../data/single_link.txt"),
        }
    }
}

impl FromStr for BuiltinTopology {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "nsfnet" => Ok(BuiltinTopology::Nsfnet),
            "usnet" => Ok(BuiltinTopology::Usnet),
            "single_link" => Ok(BuiltinTopology::SingleLink),
            other => Err(TopologyError::UnknownPreset(other.to_string())),
        }
    }
}

/// Undirected optical network. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub name: String,
    pub node_count: usize,
    pub links: Vec<Link>,
    /// `adjacency[n]` lists `(neighbor, link)` sorted by neighbor.
    adjacency: Vec<Vec<(NodeId, LinkId)>>,
}

/// Parses and validates a topology file.
///
/// Format: `#` starts a comment; the first remaining line is the node count,
/// every following line is `u v length_km` with 0-based node indices. Link ids
/// follow file order. Every link gets [`DEFAULT_LINK_BANDWIDTH_GHZ`].
pub fn load_topology(name: &str, source: &str) -> Result<Topology, TopologyError> {
    let mut lines = source
        .lines()
        .enumerate()
        .map(|(i, raw)| (i + 1, raw.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (first_line, header) =
        lines.next().ok_or(TopologyError::Parse { line: 1, msg: "missing node count".into() })?;
    let node_count: usize = header.parse().map_err(|_| TopologyError::Parse {
        line: first_line,
        msg: format!("expected node count, found `{header}`"),
    })?;
    if node_count == 0 {
        return Err(TopologyError::Parse { line: first_line, msg: "node count must be positive".into() });
    }

    let mut links: Vec<Link> = Vec::new();
    for (line, text) in lines {
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(TopologyError::Parse { line, msg: format!("expected `u v length_km`, found `{text}`") });
        }
        let node = |s: &str| -> Result<NodeId, TopologyError> {
            s.parse().map_err(|_| TopologyError::Parse { line, msg: format!("bad node index `{s}`") })
        };
        let (u, v) = (node(fields[0])?, node(fields[1])?);
        let length_km: f64 =
            fields[2].parse().map_err(|_| TopologyError::Parse { line, msg: format!("bad length `{}`", fields[2]) })?;

        for n in [u, v] {
            if n >= node_count {
                return Err(TopologyError::BadIndex { line, node: n, node_count });
            }
        }
        if u == v {
            return Err(TopologyError::SelfLoop { line, node: u });
        }
        if !(length_km > 0.0 && length_km.is_finite()) {
            return Err(TopologyError::NonPositiveLength { line, length: length_km });
        }
        let endpoints = (u.min(v), u.max(v));
        if links.iter().any(|l| l.endpoints == endpoints) {
            return Err(TopologyError::DuplicateLink { line, a: endpoints.0, b: endpoints.1 });
        }
        links.push(Link { id: links.len(), endpoints, length_km, bandwidth_ghz: DEFAULT_LINK_BANDWIDTH_GHZ });
    }

    Topology::new(name, node_count, links)
}

/// One of the bundled presets.
pub fn builtin_topology(preset: BuiltinTopology) -> Topology {
    load_topology(preset.name(), preset.source()).expect("bundled topology files are valid")
}

impl Topology {
    /// Builds a topology from an already-indexed link list, checking every
    /// structural invariant.
    pub fn new(name: &str, node_count: usize, links: Vec<Link>) -> Result<Topology, TopologyError> {
        let mut adjacency = vec![Vec::new(); node_count];
        for (idx, link) in links.iter().enumerate() {
            debug_assert_eq!(link.id, idx);
            let (a, b) = link.endpoints;
            adjacency[a].push((b, link.id));
            adjacency[b].push((a, link.id));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        let topology = Topology { name: name.to_string(), node_count, links, adjacency };

        let mut seen = vec![false; node_count];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &(m, _) in &topology.adjacency[n] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        if let Some(node) = seen.iter().position(|s| !s) {
            return Err(TopologyError::Disconnected { node });
        }
        Ok(topology)
    }

    /// Copy of this topology with every link set to `bandwidth_ghz`.
    pub fn with_link_bandwidth(&self, bandwidth_ghz: Ghz) -> Result<Topology, TopologyError> {
        if !(bandwidth_ghz > 0.0 && bandwidth_ghz.is_finite()) {
            return Err(TopologyError::NonPositiveBandwidth(bandwidth_ghz));
        }
        let mut t = self.clone();
        for link in &mut t.links {
            link.bandwidth_ghz = bandwidth_ghz;
        }
        Ok(t)
    }

    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, LinkId)] {
        &self.adjacency[node]
    }

    /// Average nodal degree `2E / V`.
    pub fn average_nodal_degree<T: Scalar>(&self) -> T {
        T::of_usize(2 * self.links.len()) / T::of_usize(self.node_count)
    }

    /// Minimum-cost simple path from `src` to `dst`.
    ///
    /// Among equal-cost paths the lexicographically smallest node sequence wins,
    /// so the result depends only on the topology and the arguments.
    pub fn shortest_path(&self, src: NodeId, dst: NodeId, metric: RoutingMetric) -> Result<Path, TopologyError> {
        if src == dst || src >= self.node_count || dst >= self.node_count {
            return Err(TopologyError::InvalidEndpoints { src, dst });
        }

        // Dense Dijkstra over (cost, node sequence) labels. Prefixes of the
        // lexicographically smallest shortest path are themselves the smallest
        // shortest paths to their end node, so settled labels are final.
        let mut best: Vec<Option<Label>> = vec![None; self.node_count];
        let mut settled = vec![false; self.node_count];
        best[src] = Some((0.0, vec![src], Vec::new()));

        loop {
            let mut pick: Option<NodeId> = None;
            for n in 0..self.node_count {
                if settled[n] {
                    continue;
                }
                if let Some(label) = &best[n] {
                    let better = match pick {
                        None => true,
                        Some(p) => {
                            let cur = best[p].as_ref().unwrap();
                            compare_labels((label.0, &label.1), (cur.0, &cur.1)) == Ordering::Less
                        }
                    };
                    if better {
                        pick = Some(n);
                    }
                }
            }
            let Some(n) = pick else {
                return Err(TopologyError::NoPath { src, dst });
            };
            settled[n] = true;
            let (cost, nodes, links) = best[n].clone().unwrap();
            if n == dst {
                return Ok(Path { nodes, links });
            }
            for &(m, l) in &self.adjacency[n] {
                if settled[m] {
                    continue;
                }
                let cand_cost = cost + metric.link_cost(&self.links[l]);
                let mut cand_nodes = nodes.clone();
                cand_nodes.push(m);
                let improves = match &best[m] {
                    None => true,
                    Some((c, ns, _)) => compare_labels((cand_cost, &cand_nodes), (*c, ns)) == Ordering::Less,
                };
                if improves {
                    let mut cand_links = links.clone();
                    cand_links.push(l);
                    best[m] = Some((cand_cost, cand_nodes, cand_links));
                }
            }
        }
    }

    /// Shortest paths for every ordered node pair, indexed `[src * N + dst]`.
    /// Diagonal entries are `None`.
    pub fn all_shortest_paths(&self, metric: RoutingMetric) -> Result<Vec<Option<Path>>, TopologyError> {
        let n = self.node_count;
        let mut table = Vec::with_capacity(n * n);
        for s in 0..n {
            for d in 0..n {
                table.push(if s == d { None } else { Some(self.shortest_path(s, d, metric)?) });
            }
        }
        Ok(table)
    }
}

fn compare_labels(a: (f64, &[NodeId]), b: (f64, &[NodeId])) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1))
}
