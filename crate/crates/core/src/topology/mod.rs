//! Repeater network topologies.
//!
//! A topology is a simple, connected, undirected graph with two designated
//! consumer nodes (alice and bob). Repeater nodes carry a swap success
//! probability `q`; consumers never swap. Nodes may carry integer 2D
//! coordinates, which the distance metrics other than hop count require.

mod document;

pub use document::{load_topology, to_document};

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a node within a [`Topology`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct NodeId(pub usize);

/// Index of an undirected edge within a [`Topology`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

/// Node distance metric used for routing decisions.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Straight-line distance between node coordinates.
    Euclidean,
    /// Shortest path length in edges.
    Hop,
    /// Coordinate-wise L1 distance.
    Manhattan,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Hop => "hop",
            Metric::Manhattan => "manhattan",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "hop" => Ok(Metric::Hop),
            "manhattan" => Ok(Metric::Manhattan),
            other => Err(Error::InvalidParameter(format!(
                "unknown metric {other:?} (expected euclidean, hop, or manhattan)"
            ))),
        }
    }
}

/// Description of one node used when building a [`Topology`].
#[derive(Clone, Debug)]
pub struct NodeSpec {
    pub name: String,
    pub coord: Option<(i64, i64)>,
    /// Swap success probability; `None` falls back to the topology default.
    pub q: Option<f64>,
}

impl NodeSpec {
    pub fn new(name: impl Into<String>) -> Self {
        NodeSpec {
            name: name.into(),
            coord: None,
            q: None,
        }
    }

    pub fn at(name: impl Into<String>, x: i64, y: i64) -> Self {
        NodeSpec {
            name: name.into(),
            coord: Some((x, y)),
            q: None,
        }
    }
}

/// A simple, connected, undirected repeater network with two consumers.
#[derive(Clone, Debug)]
pub struct Topology {
    names: Vec<String>,
    coords: Vec<Option<(i64, i64)>>,
    swap_prob: Vec<f64>,
    edges: Vec<(NodeId, NodeId)>,
    adjacency: Vec<Vec<(NodeId, EdgeId)>>,
    alice: NodeId,
    bob: NodeId,
    default_q: f64,
}

impl Topology {
    /// Builds and validates a topology.
    ///
    /// Rejects duplicate node names, self-loops, duplicate edges (in either
    /// orientation), references to unknown nodes, probabilities outside
    /// `[0, 1]`, and disconnected graphs.
    pub fn new(
        nodes: Vec<NodeSpec>,
        edges: &[(String, String)],
        alice: &str,
        bob: &str,
        default_q: f64,
    ) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidTopology(format!(
                "need at least 2 nodes, got {}",
                nodes.len()
            )));
        }
        check_probability("default_q", default_q)?;

        let mut index = HashMap::new();
        for (i, spec) in nodes.iter().enumerate() {
            if index.insert(spec.name.clone(), NodeId(i)).is_some() {
                return Err(Error::InvalidTopology(format!(
                    "duplicate node id {:?} (node entry {})",
                    spec.name,
                    i + 1
                )));
            }
            if let Some(q) = spec.q {
                check_probability(&format!("q of node {:?}", spec.name), q)?;
            }
        }

        let lookup = |name: &str, what: &str| -> Result<NodeId> {
            index.get(name).copied().ok_or_else(|| {
                Error::InvalidTopology(format!("{what} references unknown node {name:?}"))
            })
        };

        let alice = lookup(alice, "alice")?;
        let bob = lookup(bob, "bob")?;
        if alice == bob {
            return Err(Error::InvalidTopology(
                "alice and bob must be distinct nodes".into(),
            ));
        }

        let mut canonical = Vec::with_capacity(edges.len());
        let mut seen = HashSet::new();
        for (i, (a, b)) in edges.iter().enumerate() {
            let what = format!("edge entry {}", i + 1);
            let u = lookup(a, &what)?;
            let v = lookup(b, &what)?;
            if u == v {
                return Err(Error::InvalidTopology(format!(
                    "{what} is a self-loop on {a:?}"
                )));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(Error::InvalidTopology(format!(
                    "{what} duplicates edge ({a:?}, {b:?})"
                )));
            }
            canonical.push(key);
        }

        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, &(u, v)) in canonical.iter().enumerate() {
            adjacency[u.0].push((v, EdgeId(i)));
            adjacency[v.0].push((u, EdgeId(i)));
        }
        for list in &mut adjacency {
            list.sort();
        }

        let topo = Topology {
            coords: nodes.iter().map(|n| n.coord).collect(),
            swap_prob: nodes.iter().map(|n| n.q.unwrap_or(default_q)).collect(),
            names: nodes.into_iter().map(|n| n.name).collect(),
            edges: canonical,
            adjacency,
            alice,
            bob,
            default_q,
        };

        let reached = topo
            .bfs_hops(topo.alice, None)
            .iter()
            .filter(|d| d.is_some())
            .count();
        if reached != topo.names.len() {
            return Err(Error::InvalidTopology(format!(
                "graph is disconnected: {} of {} nodes reachable from alice",
                reached,
                topo.names.len()
            )));
        }
        Ok(topo)
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.names.len()).map(NodeId)
    }

    pub fn alice(&self) -> NodeId {
        self.alice
    }

    pub fn bob(&self) -> NodeId {
        self.bob
    }

    pub fn is_consumer(&self, n: NodeId) -> bool {
        n == self.alice || n == self.bob
    }

    pub fn name(&self, n: NodeId) -> &str {
        &self.names[n.0]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name).map(NodeId)
    }

    pub fn coord(&self, n: NodeId) -> Option<(i64, i64)> {
        self.coords[n.0]
    }

    /// Swap success probability of a repeater node. Consumers never swap, so
    /// their value is never consulted.
    pub fn q(&self, n: NodeId) -> f64 {
        self.swap_prob[n.0]
    }

    pub fn default_q(&self) -> f64 {
        self.default_q
    }

    /// True when every repeater carries the same swap probability.
    pub fn uniform_q(&self) -> Option<f64> {
        let mut qs = self
            .nodes()
            .filter(|&n| !self.is_consumer(n))
            .map(|n| self.swap_prob[n.0]);
        let first = qs.next()?;
        qs.all(|q| q == first).then_some(first)
    }

    /// Copy of this topology with every repeater's swap probability set to `q`.
    pub fn with_uniform_q(&self, q: f64) -> Result<Self> {
        check_probability("q", q)?;
        let mut out = self.clone();
        for n in 0..out.swap_prob.len() {
            if !out.is_consumer(NodeId(n)) {
                out.swap_prob[n] = q;
            }
        }
        out.default_q = q;
        Ok(out)
    }

    /// Neighbors of `n` with the connecting edge, sorted by neighbor index.
    pub fn neighbors(&self, n: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adjacency[n.0]
    }

    pub fn degree(&self, n: NodeId) -> usize {
        self.adjacency[n.0].len()
    }

    /// Edge endpoints in canonical (low index, high index) order.
    pub fn edge_endpoints(&self, e: EdgeId) -> (NodeId, NodeId) {
        self.edges[e.0]
    }

    pub fn edge_between(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        self.adjacency[u.0]
            .iter()
            .find(|&&(n, _)| n == v)
            .map(|&(_, e)| e)
    }

    /// Human-readable `"u-v"` label for an edge.
    pub fn edge_label(&self, e: EdgeId) -> String {
        let (u, v) = self.edges[e.0];
        format!("{}-{}", self.names[u.0], self.names[v.0])
    }

    /// Hop distances from `from` to every node, optionally restricted to the
    /// edges enabled in `usable`. Unreachable nodes map to `None`.
    pub(crate) fn bfs_hops(&self, from: NodeId, usable: Option<&[bool]>) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.names.len()];
        dist[from.0] = Some(0);
        let mut queue = VecDeque::from([from]);
        while let Some(cur) = queue.pop_front() {
            let d = dist[cur.0].unwrap();
            for &(nb, e) in &self.adjacency[cur.0] {
                if usable.map_or(true, |u| u[e.0]) && dist[nb.0].is_none() {
                    dist[nb.0] = Some(d + 1);
                    queue.push_back(nb);
                }
            }
        }
        dist
    }
}

fn check_probability(what: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{what} must lie in [0, 1], got {value}"
        )))
    }
}

/// Distance between two nodes under the given metric.
///
/// Euclidean and manhattan distances require coordinates on both nodes.
pub fn distance(topology: &Topology, metric: Metric, u: NodeId, v: NodeId) -> Result<f64> {
    match metric {
        Metric::Hop => {
            let d = topology.bfs_hops(u, None)[v.0]
                .expect("connected topology has no unreachable nodes");
            Ok(f64::from(d))
        }
        Metric::Euclidean | Metric::Manhattan => {
            let need = |n: NodeId| {
                topology.coord(n).ok_or_else(|| {
                    Error::MetricUnavailable(format!(
                        "{} distance needs coordinates, node {:?} has none",
                        metric.name(),
                        topology.name(n)
                    ))
                })
            };
            let (ux, uy) = need(u)?;
            let (vx, vy) = need(v)?;
            let (dx, dy) = (ux - vx, uy - vy);
            Ok(match metric {
                Metric::Euclidean => ((dx * dx + dy * dy) as f64).sqrt(),
                Metric::Manhattan => (dx.abs() + dy.abs()) as f64,
                Metric::Hop => unreachable!(),
            })
        }
    }
}

/// Distances from every node to each consumer, precomputed for one metric.
///
/// Routing consults these tables in its hot loop; hop distances come from two
/// breadth-first searches, coordinate metrics from the node positions.
#[derive(Clone, Debug)]
pub struct DistanceTables {
    pub to_alice: Vec<f64>,
    pub to_bob: Vec<f64>,
}

impl DistanceTables {
    pub fn new(topology: &Topology, metric: Metric) -> Result<Self> {
        let compute = |target: NodeId| -> Result<Vec<f64>> {
            match metric {
                Metric::Hop => Ok(topology
                    .bfs_hops(target, None)
                    .into_iter()
                    .map(|d| f64::from(d.expect("connected")))
                    .collect()),
                _ => topology
                    .nodes()
                    .map(|n| distance(topology, metric, n, target))
                    .collect(),
            }
        };
        Ok(DistanceTables {
            to_alice: compute(topology.alice())?,
            to_bob: compute(topology.bob())?,
        })
    }
}

/// Edge-disjoint alice-bob paths, sorted by nondecreasing length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSet {
    paths: Vec<Vec<NodeId>>,
}

impl PathSet {
    /// Node sequences, each running from alice to bob.
    pub fn paths(&self) -> &[Vec<NodeId>] {
        &self.paths
    }

    /// Path lengths in edges, nondecreasing.
    pub fn lengths(&self) -> Vec<usize> {
        self.paths.iter().map(|p| p.len() - 1).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }
}

/// Repeatedly extracts a shortest alice-bob path and removes its edges,
/// collecting at most `min(deg(alice), deg(bob))` edge-disjoint paths.
///
/// Ties between equally short paths resolve to the lexicographically smallest
/// node index sequence, so the result is deterministic.
pub fn greedy_edge_disjoint_paths(topology: &Topology) -> PathSet {
    let cap = topology
        .degree(topology.alice())
        .min(topology.degree(topology.bob()));
    let mut usable = vec![true; topology.edge_count()];
    let mut paths = Vec::new();

    while paths.len() < cap {
        let dist_bob = topology.bfs_hops(topology.bob(), Some(&usable));
        if dist_bob[topology.alice().0].is_none() {
            break;
        }
        let mut path = vec![topology.alice()];
        let mut cur = topology.alice();
        while cur != topology.bob() {
            let d = dist_bob[cur.0].unwrap();
            // Neighbor lists are sorted by index, so the first step that makes
            // progress is the lexicographically smallest one.
            let (next, edge) = topology
                .neighbors(cur)
                .iter()
                .copied()
                .find(|&(nb, e)| usable[e.0] && dist_bob[nb.0] == Some(d - 1))
                .expect("a node on a shortest path has a next hop");
            usable[edge.0] = false;
            path.push(next);
            cur = next;
        }
        paths.push(path);
    }

    debug_assert!(paths.windows(2).all(|w| w[0].len() <= w[1].len()));
    PathSet { paths }
}

/// Rectangular lattice with 4-neighbor connectivity.
///
/// Nodes are named `"x,y"` and placed at integer coordinates; consumers sit at
/// the given positions. The grid has `width * height` nodes and
/// `width * (height - 1) + height * (width - 1)` edges.
pub fn grid_topology(
    width: usize,
    height: usize,
    alice: (usize, usize),
    bob: (usize, usize),
) -> Result<Topology> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid needs width and height of at least 2, got {width}x{height}"
        )));
    }
    for (what, (x, y)) in [("alice", alice), ("bob", bob)] {
        if x >= width || y >= height {
            return Err(Error::InvalidParameter(format!(
                "{what} position ({x},{y}) is outside the {width}x{height} grid"
            )));
        }
    }
    if alice == bob {
        return Err(Error::InvalidParameter(
            "alice and bob must occupy distinct grid positions".into(),
        ));
    }

    let name = |x: usize, y: usize| format!("{x},{y}");
    let mut nodes = Vec::with_capacity(width * height);
    let mut edges = Vec::new();
    for y in 0..height {
        for x in 0..width {
            nodes.push(NodeSpec::at(name(x, y), x as i64, y as i64));
            if x + 1 < width {
                edges.push((name(x, y), name(x + 1, y)));
            }
            if y + 1 < height {
                edges.push((name(x, y), name(x, y + 1)));
            }
        }
    }
    Topology::new(
        nodes,
        &edges,
        &name(alice.0, alice.1),
        &name(bob.0, bob.1),
        1.0,
    )
}

/// Linear chain of `d` edges: alice, `d - 1` repeaters, bob.
pub fn chain_topology(d: usize) -> Result<Topology> {
    if d < 1 {
        return Err(Error::InvalidParameter(
            "chain needs at least 1 edge".into(),
        ));
    }
    let name = |i: usize| {
        if i == 0 {
            "A".to_string()
        } else if i == d {
            "B".to_string()
        } else {
            format!("r{i}")
        }
    };
    let nodes = (0..=d).map(|i| NodeSpec::at(name(i), i as i64, 0)).collect();
    let edges: Vec<_> = (0..d).map(|i| (name(i), name(i + 1))).collect();
    Topology::new(nodes, &edges, "A", "B", 1.0)
}

/// Variants of the six-node two-arm network used in the topology comparisons.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SixNode {
    /// Both three-hop arms plus the 2-3 rung between them.
    Base,
    /// The 2-3 rung removed.
    No23,
    /// The alice-3 link removed.
    NoA3,
}

impl SixNode {
    pub fn name(self) -> &'static str {
        match self {
            SixNode::Base => "sixnode-base",
            SixNode::No23 => "sixnode-no23",
            SixNode::NoA3 => "sixnode-noA3",
        }
    }
}

/// Six-node network: arms A-2-1-B and A-3-4-B with an optional 2-3 rung.
///
/// The graph carries no coordinates, so only the hop metric applies.
pub fn six_node_topology(variant: SixNode) -> Topology {
    let nodes = ["A", "1", "2", "3", "4", "B"]
        .into_iter()
        .map(NodeSpec::new)
        .collect();
    let all = [
        ("A", "2"),
        ("2", "1"),
        ("1", "B"),
        ("A", "3"),
        ("3", "4"),
        ("4", "B"),
        ("2", "3"),
    ];
    let edges: Vec<(String, String)> = all
        .into_iter()
        .filter(|&e| match variant {
            SixNode::Base => true,
            SixNode::No23 => e != ("2", "3"),
            SixNode::NoA3 => e != ("A", "3"),
        })
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    Topology::new(nodes, &edges, "A", "B", 1.0).expect("six-node network is valid")
}
