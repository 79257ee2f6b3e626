//! Per-snapshot capacity references.
//!
//! The routing protocols act on local information; these functions compute
//! what a global planner could extract from the same snapshot. A snapshot's
//! capacity is the best achievable expected yield over sets of link-disjoint
//! alice-bob paths: each path delivers the product of the swap probabilities
//! of its internal nodes, and each surviving link can carry at most one path.
//!
//! `snapshot_capacity_exact` searches all packings (guarded by instance
//! size); `snapshot_capacity_greedy` is the repeated-shortest-path heuristic.
//! Exhaustive enumeration over all possible snapshots turns either into an
//! average rate for small networks.

use crate::error::{Error, Result};
use crate::linkgen::{DecoherenceMode, Snapshot, SnapshotParams};
use crate::topology::{EdgeId, NodeId, NodeSpec, Topology};

/// Default ceiling on surviving links for the exhaustive capacity search, and
/// on `edges * k` for snapshot enumeration.
pub const DEFAULT_MAX_LINKS: usize = 24;

/// Maximum expected yield over link-disjoint path packings, searched
/// exhaustively with the default size guard of [`DEFAULT_MAX_LINKS`] links.
pub fn snapshot_capacity_exact(snapshot: &Snapshot, topology: &Topology) -> Result<f64> {
    snapshot_capacity_exact_with_limit(snapshot, topology, DEFAULT_MAX_LINKS)
}

/// [`snapshot_capacity_exact`] with an explicit size guard.
///
/// Multiple links on one edge act as parallel channels: a path may be packed
/// as many times as its scarcest edge has links left. Packings of simple
/// paths suffice for the optimum, since any walk revisiting a node can be
/// shortcut without lowering its yield or freeing fewer links.
pub fn snapshot_capacity_exact_with_limit(
    snapshot: &Snapshot,
    topology: &Topology,
    max_links: usize,
) -> Result<f64> {
    let total = snapshot.total_links();
    if total > max_links {
        return Err(Error::TooLarge {
            what: "surviving links",
            actual: total,
            limit: max_links,
        });
    }

    let paths = enumerate_simple_paths(snapshot, topology);
    if paths.is_empty() {
        return Ok(0.0);
    }

    // Per-link upper bound over the remaining paths, for pruning.
    let mut suffix_rate = vec![0.0f64; paths.len() + 1];
    for i in (0..paths.len()).rev() {
        let rate = paths[i].yield_value / paths[i].edges.len() as f64;
        suffix_rate[i] = suffix_rate[i + 1].max(rate);
    }

    let mut caps: Vec<usize> = (0..topology.edge_count())
        .map(|e| snapshot.link_count(EdgeId(e)))
        .collect();
    let mut best = snapshot_capacity_greedy(snapshot, topology);
    let remaining: usize = caps.iter().sum();
    pack(&paths, &suffix_rate, &mut caps, remaining, 0, 0.0, &mut best);
    Ok(best)
}

struct PathInfo {
    edges: Vec<EdgeId>,
    yield_value: f64,
}

/// All simple alice-bob paths over edges that still carry links, in
/// deterministic (lexicographic) order.
fn enumerate_simple_paths(snapshot: &Snapshot, topology: &Topology) -> Vec<PathInfo> {
    let mut paths = Vec::new();
    let mut on_path = vec![false; topology.node_count()];
    let mut edges = Vec::new();
    let mut yields = vec![1.0f64];
    on_path[topology.alice().0] = true;
    walk(
        topology,
        snapshot,
        topology.alice(),
        &mut on_path,
        &mut edges,
        &mut yields,
        &mut paths,
    );
    paths
}

fn walk(
    topology: &Topology,
    snapshot: &Snapshot,
    at: NodeId,
    on_path: &mut Vec<bool>,
    edges: &mut Vec<EdgeId>,
    yields: &mut Vec<f64>,
    out: &mut Vec<PathInfo>,
) {
    for &(nb, e) in topology.neighbors(at) {
        if snapshot.link_count(e) == 0 || on_path[nb.0] {
            continue;
        }
        if nb == topology.bob() {
            let mut path_edges = edges.clone();
            path_edges.push(e);
            out.push(PathInfo {
                edges: path_edges,
                yield_value: *yields.last().unwrap(),
            });
            continue;
        }
        on_path[nb.0] = true;
        edges.push(e);
        yields.push(yields.last().unwrap() * topology.q(nb));
        walk(topology, snapshot, nb, on_path, edges, yields, out);
        yields.pop();
        edges.pop();
        on_path[nb.0] = false;
    }
}

fn pack(
    paths: &[PathInfo],
    suffix_rate: &[f64],
    caps: &mut Vec<usize>,
    remaining: usize,
    i: usize,
    acc: f64,
    best: &mut f64,
) {
    if acc > *best {
        *best = acc;
    }
    if i == paths.len() || acc + remaining as f64 * suffix_rate[i] <= *best {
        return;
    }
    let path = &paths[i];
    let max_mult = path
        .edges
        .iter()
        .map(|&e| caps[e.0])
        .min()
        .unwrap_or(0);
    for mult in (0..=max_mult).rev() {
        for &e in &path.edges {
            caps[e.0] -= mult;
        }
        pack(
            paths,
            suffix_rate,
            caps,
            remaining - mult * path.edges.len(),
            i + 1,
            acc + mult as f64 * path.yield_value,
            best,
        );
        for &e in &path.edges {
            caps[e.0] += mult;
        }
    }
}

/// Repeated-shortest-path heuristic: take the hop-shortest alice-bob path
/// over edges with links left (lexicographically smallest on ties), bank its
/// yield, consume one link per edge, repeat until disconnected.
pub fn snapshot_capacity_greedy(snapshot: &Snapshot, topology: &Topology) -> f64 {
    let mut caps: Vec<usize> = (0..topology.edge_count())
        .map(|e| snapshot.link_count(EdgeId(e)))
        .collect();
    let mut total = 0.0;
    loop {
        let usable: Vec<bool> = caps.iter().map(|&c| c > 0).collect();
        let dist_bob = topology.bfs_hops(topology.bob(), Some(&usable));
        if dist_bob[topology.alice().0].is_none() {
            return total;
        }
        let mut cur = topology.alice();
        let mut yield_value = 1.0;
        while cur != topology.bob() {
            let d = dist_bob[cur.0].unwrap();
            let (next, edge) = topology
                .neighbors(cur)
                .iter()
                .copied()
                .find(|&(nb, e)| usable[e.0] && caps[e.0] > 0 && dist_bob[nb.0] == Some(d - 1))
                .expect("shortest path has a next hop");
            caps[edge.0] -= 1;
            if next != topology.bob() {
                yield_value *= topology.q(next);
            }
            cur = next;
        }
        total += yield_value;
    }
}

/// Rewrites multi-link edges into unit-capacity form: every surviving link
/// becomes a two-edge detour through a fresh pass-through node with `q = 1`.
///
/// The original edges stay in the returned topology (they keep it connected)
/// but carry no links, so capacities are unchanged; the returned snapshot has
/// `k = 1` with one link on each detour edge.
pub fn multigraph_transform(snapshot: &Snapshot, topology: &Topology) -> (Topology, Snapshot) {
    let mut nodes: Vec<NodeSpec> = topology
        .nodes()
        .map(|n| NodeSpec {
            name: topology.name(n).to_string(),
            coord: topology.coord(n),
            q: Some(topology.q(n)),
        })
        .collect();
    let mut edges: Vec<(String, String)> = (0..topology.edge_count())
        .map(|e| {
            let (u, v) = topology.edge_endpoints(EdgeId(e));
            (topology.name(u).to_string(), topology.name(v).to_string())
        })
        .collect();

    for e in 0..topology.edge_count() {
        let (u, v) = topology.edge_endpoints(EdgeId(e));
        for &t in snapshot.links(EdgeId(e)) {
            let hub = format!("{}~{}~t{}", topology.name(u), topology.name(v), t);
            nodes.push(NodeSpec {
                name: hub.clone(),
                coord: None,
                q: Some(1.0),
            });
            edges.push((topology.name(u).to_string(), hub.clone()));
            edges.push((hub, topology.name(v).to_string()));
        }
    }

    let expanded = Topology::new(
        nodes,
        &edges,
        topology.name(topology.alice()),
        topology.name(topology.bob()),
        topology.default_q(),
    )
    .expect("transform of a valid topology is valid");

    // Original edges come first and stay empty; each detour edge carries one
    // link in slot 1.
    let mut links = vec![Vec::new(); expanded.edge_count()];
    for slots in links.iter_mut().skip(topology.edge_count()) {
        slots.push(1);
    }
    let snapshot = Snapshot::from_parts(1, links, *snapshot.params())
        .expect("transformed snapshot is valid");
    (expanded, snapshot)
}

/// Visits every possible snapshot of `k` slots with its probability under
/// independent per-slot successes (no decoherence), in a fixed order.
///
/// The callback receives each snapshot and its probability `p^s (1-p)^(E*k-s)`
/// where `s` counts surviving links. Guarded by `edges * k <= max_cells`.
pub fn enumerate_snapshots(
    topology: &Topology,
    p: f64,
    k: u32,
    max_cells: usize,
    mut visit: impl FnMut(&Snapshot, f64) -> Result<()>,
) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "p must lie in [0, 1], got {p}"
        )));
    }
    if k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let cells = topology.edge_count() * k as usize;
    if cells > max_cells {
        return Err(Error::TooLarge {
            what: "edge-slot cells",
            actual: cells,
            limit: max_cells,
        });
    }

    let params = SnapshotParams {
        p,
        mu: f64::INFINITY,
        mode: DecoherenceMode::PerQubit,
        seed: None,
    };
    for mask in 0u64..(1u64 << cells) {
        let survivors = mask.count_ones();
        let prob = p.powi(survivors as i32) * (1.0 - p).powi((cells as u32 - survivors) as i32);
        let links: Vec<Vec<u32>> = (0..topology.edge_count())
            .map(|e| {
                (1..=k)
                    .filter(|t| mask >> (e as u32 * k + (t - 1)) & 1 == 1)
                    .collect()
            })
            .collect();
        let snapshot = Snapshot::from_parts(k, links, params).expect("enumerated snapshot");
        visit(&snapshot, prob)?;
    }
    Ok(())
}

/// Exact average rate `(1/k) * E[capacity]` by enumerating every snapshot of a
/// small network with uniform swap probability `q` and no decoherence.
pub fn average_capacity_exhaustive(topology: &Topology, p: f64, q: f64, k: u32) -> Result<f64> {
    let topology = topology.with_uniform_q(q)?;
    let mut sum = 0.0;
    enumerate_snapshots(&topology, p, k, DEFAULT_MAX_LINKS, |snapshot, prob| {
        sum += prob * snapshot_capacity_exact(snapshot, &topology)?;
        Ok(())
    })?;
    Ok(sum / f64::from(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkgen::generate_snapshot;
    use crate::topology::{six_node_topology, SixNode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn snapshot_where(topology: &Topology, present: &[(&str, &str)], k: u32) -> Snapshot {
        let mut links = vec![Vec::new(); topology.edge_count()];
        for (u, v) in present {
            let e = topology
                .edge_between(
                    topology.node_by_name(u).unwrap(),
                    topology.node_by_name(v).unwrap(),
                )
                .unwrap();
            links[e.0] = (1..=k).collect();
        }
        Snapshot::from_parts(
            k,
            links,
            SnapshotParams {
                p: 1.0,
                mu: f64::INFINITY,
                mode: DecoherenceMode::PerQubit,
                seed: None,
            },
        )
        .unwrap()
    }

    const ALL_SIX: [(&str, &str); 7] = [
        ("A", "2"),
        ("2", "1"),
        ("1", "B"),
        ("A", "3"),
        ("3", "4"),
        ("4", "B"),
        ("2", "3"),
    ];

    #[test]
    fn full_six_node_capacity_is_both_arms() {
        let topo = six_node_topology(SixNode::Base).with_uniform_q(0.9).unwrap();
        let snap = snapshot_where(&topo, &ALL_SIX, 1);
        let exact = snapshot_capacity_exact(&snap, &topo).unwrap();
        assert!((exact - 1.62).abs() < 1e-12);
        let greedy = snapshot_capacity_greedy(&snap, &topo);
        assert!((greedy - 1.62).abs() < 1e-12);
    }

    #[test]
    fn broken_arms_route_through_the_rung() {
        let topo = six_node_topology(SixNode::Base).with_uniform_q(0.9).unwrap();
        let snap = snapshot_where(
            &topo,
            &[("A", "2"), ("2", "3"), ("3", "4"), ("4", "B"), ("1", "B")],
            1,
        );
        let exact = snapshot_capacity_exact(&snap, &topo).unwrap();
        assert!((exact - 0.9f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn empty_snapshot_has_zero_capacity() {
        let topo = six_node_topology(SixNode::Base);
        let snap = snapshot_where(&topo, &[], 1);
        assert_eq!(snapshot_capacity_exact(&snap, &topo).unwrap(), 0.0);
        assert_eq!(snapshot_capacity_greedy(&snap, &topo), 0.0);
    }

    #[test]
    fn adding_a_link_never_hurts() {
        let topo = six_node_topology(SixNode::Base).with_uniform_q(0.7).unwrap();
        let without = snapshot_where(&topo, &[("A", "2"), ("2", "1"), ("1", "B")], 1);
        let with = snapshot_where(
            &topo,
            &[("A", "2"), ("2", "1"), ("1", "B"), ("A", "3")],
            1,
        );
        let a = snapshot_capacity_exact(&without, &topo).unwrap();
        let b = snapshot_capacity_exact(&with, &topo).unwrap();
        assert!(b >= a);
    }

    #[test]
    fn greedy_never_beats_exact_on_random_snapshots() {
        let topo = six_node_topology(SixNode::Base).with_uniform_q(0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let snap = generate_snapshot(
                &topo,
                0.6,
                2,
                f64::INFINITY,
                DecoherenceMode::PerQubit,
                &mut rng,
            )
            .unwrap();
            let exact = snapshot_capacity_exact(&snap, &topo).unwrap();
            let greedy = snapshot_capacity_greedy(&snap, &topo);
            assert!(greedy <= exact + 1e-12, "greedy {greedy} > exact {exact}");
        }
    }

    #[test]
    fn transform_preserves_capacity() {
        let topo = six_node_topology(SixNode::Base).with_uniform_q(0.85).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let snap = generate_snapshot(
                &topo,
                0.7,
                3,
                f64::INFINITY,
                DecoherenceMode::PerQubit,
                &mut rng,
            )
            .unwrap();
            let (big_topo, big_snap) = multigraph_transform(&snap, &topo);
            let direct = snapshot_capacity_exact(&snap, &topo).unwrap();
            let expanded =
                snapshot_capacity_exact_with_limit(&big_snap, &big_topo, 64).unwrap();
            assert!(
                (direct - expanded).abs() < 1e-12,
                "direct {direct} vs transformed {expanded}"
            );
        }
    }

    #[test]
    fn size_guard_rejects_large_instances() {
        let topo = crate::topology::grid_topology(6, 6, (0, 0), (5, 5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let snap = generate_snapshot(
            &topo,
            1.0,
            1,
            f64::INFINITY,
            DecoherenceMode::PerQubit,
            &mut rng,
        )
        .unwrap();
        match snapshot_capacity_exact(&snap, &topo) {
            Err(Error::TooLarge { actual, limit, .. }) => {
                assert_eq!(actual, 60);
                assert_eq!(limit, DEFAULT_MAX_LINKS);
            }
            other => panic!("expected size guard, got {other:?}"),
        }
    }

    #[test]
    fn exhaustive_average_at_p1_is_full_capacity() {
        let topo = six_node_topology(SixNode::Base);
        let avg = average_capacity_exhaustive(&topo, 1.0, 0.9, 1).unwrap();
        assert!((avg - 1.62).abs() < 1e-12);
    }

    #[test]
    fn enumeration_probabilities_sum_to_one() {
        let topo = six_node_topology(SixNode::Base);
        let mut total = 0.0;
        enumerate_snapshots(&topo, 0.3, 1, 24, |_, prob| {
            total += prob;
            Ok(())
        })
        .unwrap();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_respects_cell_guard() {
        let topo = six_node_topology(SixNode::Base);
        assert!(enumerate_snapshots(&topo, 0.5, 4, 24, |_, _| Ok(())).is_err());
    }
}
