//! Internal-phase routing: swap decisions at repeaters and chain extraction.
//!
//! After link generation, every repeater pairs up the link endpoints it holds
//! (each pairing is one Bell-state measurement). Pairings splice links into
//! chains; a chain whose free ends sit at alice and bob delivers end-to-end
//! entanglement. The dynamic protocol decides pairings from purely local
//! information plus static node-to-consumer distances; the static protocol
//! pairs links along a precomputed set of edge-disjoint paths.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linkgen::Snapshot;
use crate::topology::{DistanceTables, EdgeId, Metric, NodeId, PathSet, Topology};

/// Index of one surviving link within a [`LinkTable`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct LinkId(pub usize);

/// Flat enumeration of a snapshot's surviving links.
///
/// Link ids are assigned in edge order, then slot order, so two tables built
/// from the same snapshot and topology are identical.
#[derive(Clone, Debug)]
pub struct LinkTable {
    edge: Vec<EdgeId>,
    slot: Vec<u32>,
    ends: Vec<(NodeId, NodeId)>,
    by_edge: Vec<Vec<LinkId>>,
}

impl LinkTable {
    pub fn new(snapshot: &Snapshot, topology: &Topology) -> Self {
        let mut table = LinkTable {
            edge: Vec::new(),
            slot: Vec::new(),
            ends: Vec::new(),
            by_edge: vec![Vec::new(); topology.edge_count()],
        };
        for e in 0..topology.edge_count() {
            for &t in snapshot.links(EdgeId(e)) {
                let id = LinkId(table.edge.len());
                table.edge.push(EdgeId(e));
                table.slot.push(t);
                table.ends.push(topology.edge_endpoints(EdgeId(e)));
                table.by_edge[e].push(id);
            }
        }
        table
    }

    pub fn len(&self) -> usize {
        self.edge.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge.is_empty()
    }

    pub fn edge(&self, l: LinkId) -> EdgeId {
        self.edge[l.0]
    }

    pub fn slot(&self, l: LinkId) -> u32 {
        self.slot[l.0]
    }

    /// Endpoint nodes in canonical edge order.
    pub fn ends(&self, l: LinkId) -> (NodeId, NodeId) {
        self.ends[l.0]
    }

    /// Links on one edge, in increasing slot order.
    pub fn on_edge(&self, e: EdgeId) -> &[LinkId] {
        &self.by_edge[e.0]
    }
}

/// One Bell-state measurement: two link endpoints joined at a node.
pub type Pairing = (LinkId, LinkId);

/// Pairings chosen at every repeater. Indexed by node; consumers never pair.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SwapPlan {
    pairs: Vec<Vec<Pairing>>,
}

impl SwapPlan {
    fn new(node_count: usize) -> Self {
        SwapPlan {
            pairs: vec![Vec::new(); node_count],
        }
    }

    pub fn pairs_at(&self, n: NodeId) -> &[Pairing] {
        &self.pairs[n.0]
    }

    pub fn total_pairs(&self) -> usize {
        self.pairs.iter().map(Vec::len).sum()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.pairs.len()).map(NodeId)
    }
}

/// Tolerance for comparing sums of coordinate distances. Exactly equal sums
/// (same square roots on both sides) compare bitwise equal; the epsilon only
/// guards against last-ulp noise when algebraically equal sums are assembled
/// from different radicals.
const DIST_EPS: f64 = 1e-9;

/// Local swap decisions, one repeater at a time.
///
/// Each repeater repeatedly takes `v`, the linked neighbor closest to alice,
/// and `w`, the linked neighbor closest to bob, and pairs their most recent
/// links. When `v = w`, the runner-up neighbors `v'` and `w'` compete: the
/// side with the smaller combined detour pairs first; on a tie, the
/// straight-path rule (when enabled) prefers the pairing whose reverse reading
/// is longest, keeping chains from doubling back. A repeater whose links all
/// point at one neighbor splices two of them together (a self-connection)
/// rather than leaving holes.
///
/// `straight_path` toggles the straightness refinement for symmetric layouts.
/// With it on, distance ties between candidate neighbors resolve toward the
/// neighbor farthest from the *other* consumer (then to the smaller node
/// index), and the runner-up tie falls to the pairing whose reverse reading is
/// longer. A neighbor that is near alice and far from bob anchors the alice
/// side of a chain squarely; picking a sideways neighbor equally near both
/// consumers bends chains into each other's lanes, which on off-diagonal grid
/// placements can strand most of the snapshot. With the flag off, ties resolve
/// to the smaller node index outright.
///
/// Decisions depend only on the repeater's own links, so the outcome does not
/// depend on the order nodes are processed in.
pub fn dynamic_internal_phase(
    snapshot: &Snapshot,
    topology: &Topology,
    metric: Metric,
    straight_path: bool,
) -> Result<SwapPlan> {
    let tables = DistanceTables::new(topology, metric)?;
    Ok(dynamic_internal_phase_with_tables(
        snapshot,
        topology,
        &tables,
        straight_path,
    ))
}

/// [`dynamic_internal_phase`] with precomputed distance tables, for callers
/// that run many snapshots over one topology.
pub fn dynamic_internal_phase_with_tables(
    snapshot: &Snapshot,
    topology: &Topology,
    tables: &DistanceTables,
    straight_path: bool,
) -> SwapPlan {
    let links = LinkTable::new(snapshot, topology);
    let mut plan = SwapPlan::new(topology.node_count());

    for r in topology.nodes() {
        if topology.is_consumer(r) {
            continue;
        }
        // Unpaired link endpoints held at r, bucketed by neighbor; buckets
        // keep increasing slot order so popping from the back takes the most
        // recent link first.
        let mut buckets: Vec<(NodeId, Vec<LinkId>)> = topology
            .neighbors(r)
            .iter()
            .map(|&(nb, e)| (nb, links.on_edge(e).to_vec()))
            .collect();

        loop {
            let held: usize = buckets.iter().map(|(_, b)| b.len()).sum();
            if held < 2 {
                break;
            }
            // Prefer the smaller primary distance; break ties by the larger
            // secondary distance (to the other consumer) when straightening,
            // then the smaller node index. Single distances over integer
            // coordinates compare exactly, so no epsilon is needed here.
            let prefer = |nb: NodeId, over: NodeId, primary: &[f64], secondary: &[f64]| {
                let (p, po) = (primary[nb.0], primary[over.0]);
                let (s, so) = (secondary[nb.0], secondary[over.0]);
                if p != po {
                    return p < po;
                }
                if straight_path && s != so {
                    return s > so;
                }
                nb < over
            };
            let nearest = |primary: &[f64], secondary: &[f64]| -> usize {
                let mut best: Option<usize> = None;
                for (i, (nb, bucket)) in buckets.iter().enumerate() {
                    if bucket.is_empty() {
                        continue;
                    }
                    match best {
                        None => best = Some(i),
                        Some(b) => {
                            if prefer(*nb, buckets[b].0, primary, secondary) {
                                best = Some(i);
                            }
                        }
                    }
                }
                best.expect("a nonempty bucket exists")
            };
            let v = nearest(&tables.to_alice, &tables.to_bob);
            let w = nearest(&tables.to_bob, &tables.to_alice);

            let (a_side, b_side) = if v != w {
                (v, w)
            } else {
                let runner_up = |primary: &[f64], secondary: &[f64]| -> Option<usize> {
                    let mut best: Option<usize> = None;
                    for (i, (nb, bucket)) in buckets.iter().enumerate() {
                        if i == v || bucket.is_empty() {
                            continue;
                        }
                        match best {
                            None => best = Some(i),
                            Some(b) => {
                                if prefer(*nb, buckets[b].0, primary, secondary) {
                                    best = Some(i);
                                }
                            }
                        }
                    }
                    best
                };
                match (
                    runner_up(&tables.to_alice, &tables.to_bob),
                    runner_up(&tables.to_bob, &tables.to_alice),
                ) {
                    (None, _) | (_, None) => (v, v), // self-connection
                    (Some(v2), Some(w2)) => {
                        let da = |i: usize| tables.to_alice[buckets[i].0 .0];
                        let db = |i: usize| tables.to_bob[buckets[i].0 .0];
                        let shift_a = da(v2) + db(w); // replace the alice side by v'
                        let shift_b = da(v) + db(w2); // replace the bob side by w'
                        if shift_a < shift_b - DIST_EPS {
                            (v2, w)
                        } else if shift_a > shift_b + DIST_EPS {
                            (v, w2)
                        } else if straight_path && db(v2) + da(w) > db(v) + da(w2) + DIST_EPS {
                            // Tie on forward detour: prefer the pairing that
                            // reads as the longer reverse detour, which keeps
                            // the chain running straight through r.
                            (v2, w)
                        } else {
                            (v, w2)
                        }
                    }
                }
            };

            let first = buckets[a_side].1.pop().expect("chosen bucket is nonempty");
            let second = buckets[b_side].1.pop().expect("chosen bucket is nonempty");
            plan.pairs[r.0].push((first, second));
        }
    }
    plan
}

/// Swap decisions along a fixed set of edge-disjoint paths.
///
/// Each path supports as many chains as its scarcest edge has links. The j-th
/// chain pairs, at every internal node, the j-th most recent link of the
/// incoming edge with the j-th most recent link of the outgoing edge. Links
/// off the paths, and links beyond the scarcest count, stay unpaired.
pub fn static_internal_phase(
    snapshot: &Snapshot,
    topology: &Topology,
    path_set: &PathSet,
) -> Result<SwapPlan> {
    let links = LinkTable::new(snapshot, topology);
    let mut plan = SwapPlan::new(topology.node_count());

    for path in path_set.paths() {
        let edges: Vec<EdgeId> = path
            .windows(2)
            .map(|pair| {
                topology.edge_between(pair[0], pair[1]).ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "path step {}-{} is not an edge of this topology",
                        topology.name(pair[0]),
                        topology.name(pair[1])
                    ))
                })
            })
            .collect::<Result<_>>()?;
        let count = edges
            .iter()
            .map(|&e| links.on_edge(e).len())
            .min()
            .unwrap_or(0);
        for j in 1..=count {
            // j-th most recent link on each edge of the path.
            let pick = |e: EdgeId| {
                let on = links.on_edge(e);
                on[on.len() - j]
            };
            for (i, pair) in path.windows(2).enumerate().skip(1) {
                let node = pair[0];
                plan.pairs[node.0].push((pick(edges[i - 1]), pick(edges[i])));
            }
        }
    }
    Ok(plan)
}

/// One alice-bob chain: its links in order and the node of every swap.
#[derive(Clone, Debug)]
pub struct Chain {
    /// Links from the alice end to the bob end.
    pub links: Vec<LinkId>,
    /// Node performing each Bell-state measurement; `links.len() - 1` entries.
    /// Self-connections can repeat a node.
    pub swaps: Vec<NodeId>,
}

impl Chain {
    pub fn bsm_count(&self) -> usize {
        self.swaps.len()
    }
}

/// Chains spliced out of a swap plan, plus the links that went unused.
#[derive(Clone, Debug)]
pub struct ChainSet {
    /// Link-disjoint chains with one free end at alice and one at bob.
    pub chains: Vec<Chain>,
    /// Surviving links not part of any counted chain (dangling segments,
    /// consumer-to-same-consumer chains, and cycles).
    pub leftover_links: usize,
}

/// Splices pairings into chains and keeps those running from alice to bob.
///
/// Chains ending anywhere else, and closed cycles (which self-connections can
/// produce), are discarded and their links counted as leftover. The plan must
/// have been built from this same snapshot and topology.
pub fn trace_chains(plan: &SwapPlan, snapshot: &Snapshot, topology: &Topology) -> ChainSet {
    let links = LinkTable::new(snapshot, topology);
    // partner[l][end] = the (link, end) joined to endpoint `end` of link `l`.
    let mut partner: Vec<[Option<(LinkId, usize)>; 2]> = vec![[None, None]; links.len()];

    for node in plan.nodes() {
        for &(a, b) in plan.pairs_at(node) {
            let end_at = |l: LinkId| -> usize {
                let (lo, hi) = links.ends(l);
                if lo == node {
                    0
                } else {
                    assert_eq!(hi, node, "pairing at a node not on the link");
                    1
                }
            };
            let (ea, eb) = (end_at(a), end_at(b));
            assert!(
                partner[a.0][ea].is_none() && partner[b.0][eb].is_none(),
                "each link endpoint pairs at most once"
            );
            partner[a.0][ea] = Some((b, eb));
            partner[b.0][eb] = Some((a, ea));
        }
    }

    let mut visited = vec![false; links.len()];
    let mut chains = Vec::new();
    let mut counted_links = 0;

    for start in 0..links.len() {
        if visited[start] {
            continue;
        }
        // Probe from one end of `start` to a free endpoint; a revisited link
        // means this component is a cycle.
        let mut probe = (LinkId(start), 0usize); // (link, exit end)
        let mut seen = vec![false; links.len()];
        let free = loop {
            seen[probe.0 .0] = true;
            match partner[probe.0 .0][probe.1] {
                None => break Some(probe),
                Some((next, entry)) => {
                    if seen[next.0] {
                        break None;
                    }
                    probe = (next, 1 - entry);
                }
            }
        };

        let Some((head, head_end)) = free else {
            // Cycle: mark every link in it visited.
            for (l, s) in seen.iter().enumerate() {
                if *s {
                    visited[l] = true;
                }
            }
            continue;
        };

        // Walk the whole component from its free end.
        let mut chain = Chain {
            links: vec![head],
            swaps: Vec::new(),
        };
        visited[head.0] = true;
        let first_node = end_node(&links, head, head_end);
        let mut cur = (head, 1 - head_end);
        let last_node = loop {
            match partner[cur.0 .0][cur.1] {
                None => break end_node(&links, cur.0, cur.1),
                Some((next, entry)) => {
                    chain.swaps.push(end_node(&links, cur.0, cur.1));
                    chain.links.push(next);
                    visited[next.0] = true;
                    cur = (next, 1 - entry);
                }
            }
        };

        let (alice, bob) = (topology.alice(), topology.bob());
        if (first_node, last_node) == (alice, bob) || (first_node, last_node) == (bob, alice) {
            if first_node == bob {
                chain.links.reverse();
                chain.swaps.reverse();
            }
            counted_links += chain.links.len();
            chains.push(chain);
        }
    }

    ChainSet {
        chains,
        leftover_links: links.len() - counted_links,
    }
}

fn end_node(links: &LinkTable, l: LinkId, end: usize) -> NodeId {
    let (lo, hi) = links.ends(l);
    if end == 0 {
        lo
    } else {
        hi
    }
}

/// Expected entanglement delivered by a chain set: the sum over chains of the
/// product of swap probabilities at every Bell-state measurement.
///
/// A node appearing twice in one chain (self-connection) contributes its `q`
/// twice. Chain contributions are summed in value order so that plans which
/// produce the same multiset of chains yield bitwise-identical totals.
pub fn snapshot_yield(chain_set: &ChainSet, topology: &Topology) -> f64 {
    let mut terms: Vec<f64> = chain_set
        .chains
        .iter()
        .map(|chain| {
            chain
                .swaps
                .iter()
                .map(|&n| {
                    debug_assert!(!topology.is_consumer(n), "consumers never swap");
                    topology.q(n)
                })
                .product::<f64>()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Restricts a snapshot to the single most recent link on every edge.
///
/// Models hardware that can hold only one entangled pair per channel: the
/// newest success on an edge overwrites the ones before it.
pub fn single_success_filter(snapshot: &Snapshot) -> Snapshot {
    snapshot.retain_last_slot()
}

/// A link named by its edge label and creation slot, for readable reports.
#[derive(Clone, Debug, Serialize)]
pub struct LinkRef {
    pub edge: String,
    pub slot: u32,
}

/// One pairing of a plan, with everything resolved to names.
#[derive(Clone, Debug, Serialize)]
pub struct PairingView {
    pub node: String,
    pub first: LinkRef,
    pub second: LinkRef,
}

/// One traced chain with its node walk and contribution to the yield.
#[derive(Clone, Debug, Serialize)]
pub struct ChainView {
    /// Alice, each swapping node in order, bob.
    pub nodes: Vec<String>,
    pub links: Vec<LinkRef>,
    pub bsm_count: usize,
    #[serde(rename = "yield")]
    pub yield_value: f64,
}

/// Serializable summary of a traced snapshot.
#[derive(Clone, Debug, Serialize)]
pub struct ChainSetView {
    pub chains: Vec<ChainView>,
    pub leftover_links: usize,
    #[serde(rename = "yield")]
    pub yield_value: f64,
}

/// Name-resolved view of every pairing in a plan, in node order.
pub fn plan_view(plan: &SwapPlan, snapshot: &Snapshot, topology: &Topology) -> Vec<PairingView> {
    let links = LinkTable::new(snapshot, topology);
    let link_ref = |l: LinkId| LinkRef {
        edge: topology.edge_label(links.edge(l)),
        slot: links.slot(l),
    };
    plan.nodes()
        .flat_map(|node| {
            plan.pairs_at(node).iter().map(move |&(a, b)| PairingView {
                node: topology.name(node).to_string(),
                first: link_ref(a),
                second: link_ref(b),
            })
        })
        .collect()
}

/// Name-resolved view of a traced chain set.
pub fn chain_set_view(
    chain_set: &ChainSet,
    snapshot: &Snapshot,
    topology: &Topology,
) -> ChainSetView {
    let links = LinkTable::new(snapshot, topology);
    let chains: Vec<ChainView> = chain_set
        .chains
        .iter()
        .map(|chain| {
            let mut nodes = Vec::with_capacity(chain.swaps.len() + 2);
            nodes.push(topology.name(topology.alice()).to_string());
            nodes.extend(chain.swaps.iter().map(|&n| topology.name(n).to_string()));
            nodes.push(topology.name(topology.bob()).to_string());
            ChainView {
                nodes,
                links: chain
                    .links
                    .iter()
                    .map(|&l| LinkRef {
                        edge: topology.edge_label(links.edge(l)),
                        slot: links.slot(l),
                    })
                    .collect(),
                bsm_count: chain.bsm_count(),
                yield_value: chain.swaps.iter().map(|&n| topology.q(n)).product(),
            }
        })
        .collect();
    ChainSetView {
        chains,
        leftover_links: chain_set.leftover_links,
        yield_value: snapshot_yield(chain_set, topology),
    }
}
