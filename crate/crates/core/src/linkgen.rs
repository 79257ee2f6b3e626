//! External-phase link generation.
//!
//! During the external phase the network attempts entanglement on every edge
//! in each of `k` time slots; each attempt succeeds with probability `p`. A
//! link created in slot `t` must then sit in memory for the remaining
//! `k - t` slots, and decoherence may kill it before the internal phase runs.
//! The snapshot records, per edge, the slots whose links survived to slot `k`.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{EdgeId, Topology};

/// How stored entanglement decays while waiting for the internal phase.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoherenceMode {
    /// Each of the two qubits of a link draws an independent exponential
    /// lifetime with mean `mu`; the link survives only if both outlive the
    /// wait, so a link of age `t` survives with probability `e^(-2t/mu)`.
    PerQubit,
    /// The link draws a single exponential lifetime with mean `mu`; age `t`
    /// survives with probability `e^(-t/mu)`.
    PerLink,
}

impl DecoherenceMode {
    pub fn name(self) -> &'static str {
        match self {
            DecoherenceMode::PerQubit => "per_qubit",
            DecoherenceMode::PerLink => "per_link",
        }
    }
}

impl std::str::FromStr for DecoherenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_qubit" | "per-qubit" => Ok(DecoherenceMode::PerQubit),
            "per_link" | "per-link" => Ok(DecoherenceMode::PerLink),
            other => Err(Error::InvalidParameter(format!(
                "unknown decoherence mode {other:?} (expected per_qubit or per_link)"
            ))),
        }
    }
}

/// Probability that a link of age `t` slots is still usable.
pub fn survival_probability(t: u32, mu: f64, mode: DecoherenceMode) -> f64 {
    if mu.is_infinite() {
        return 1.0;
    }
    let factor = match mode {
        DecoherenceMode::PerQubit => 2.0,
        DecoherenceMode::PerLink => 1.0,
    };
    (-factor * f64::from(t) / mu).exp()
}

/// Generation parameters echoed into a [`Snapshot`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotParams {
    pub p: f64,
    pub mu: f64,
    pub mode: DecoherenceMode,
    /// Master seed of the run that produced this snapshot, when known.
    pub seed: Option<u64>,
}

/// Surviving links at the end of one external phase.
///
/// For each edge, the strictly increasing slot indices (in `1..=k`) whose
/// links made it to the internal phase.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    k: u32,
    links: Vec<Vec<u32>>,
    params: SnapshotParams,
}

impl Snapshot {
    /// Assembles a snapshot from raw per-edge slot lists, checking slot
    /// bounds and ordering.
    pub fn from_parts(k: u32, links: Vec<Vec<u32>>, params: SnapshotParams) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        for (e, slots) in links.iter().enumerate() {
            for (i, &t) in slots.iter().enumerate() {
                if t < 1 || t > k {
                    return Err(Error::InvalidParameter(format!(
                        "edge {e}: slot {t} outside 1..={k}"
                    )));
                }
                if i > 0 && slots[i - 1] >= t {
                    return Err(Error::InvalidParameter(format!(
                        "edge {e}: slots must be strictly increasing"
                    )));
                }
            }
        }
        Ok(Snapshot { k, links, params })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn params(&self) -> &SnapshotParams {
        &self.params
    }

    pub fn edge_count(&self) -> usize {
        self.links.len()
    }

    /// Surviving slots on an edge, strictly increasing.
    pub fn links(&self, e: EdgeId) -> &[u32] {
        &self.links[e.0]
    }

    pub fn link_count(&self, e: EdgeId) -> usize {
        self.links[e.0].len()
    }

    pub fn total_links(&self) -> usize {
        self.links.iter().map(Vec::len).sum()
    }

    /// Removes every link on one edge (used to build hand-crafted cases).
    pub fn clear_edge(&mut self, e: EdgeId) {
        self.links[e.0].clear();
    }

    /// Copy with only the most recent link kept on each edge.
    pub(crate) fn retain_last_slot(&self) -> Snapshot {
        Snapshot {
            k: self.k,
            links: self
                .links
                .iter()
                .map(|slots| slots.last().map(|&t| vec![t]).unwrap_or_default())
                .collect(),
            params: self.params,
        }
    }

    /// Same snapshot with the master seed recorded in the parameter echo.
    pub fn with_seed_echo(mut self, seed: u64) -> Self {
        self.params.seed = Some(seed);
        self
    }
}

fn check_generation_params(p: f64, k: u32, mu: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "p must lie in [0, 1], got {p}"
        )));
    }
    if k < 1 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "mu must be positive (or inf), got {mu}"
        )));
    }
    Ok(())
}

/// Runs one external phase and returns the surviving links.
///
/// Per edge and slot, a link appears with probability `p`; its lifetime is
/// sampled immediately (one exponential per qubit, or one per link, mean
/// `mu`) and the link survives if the lifetime covers the `k - t` remaining
/// slots. Links made in slot `k` always survive, and `mu = inf` keeps every
/// created link. The same topology, parameters, and generator state always
/// reproduce the same snapshot.
pub fn generate_snapshot(
    topology: &Topology,
    p: f64,
    k: u32,
    mu: f64,
    mode: DecoherenceMode,
    rng: &mut impl Rng,
) -> Result<Snapshot> {
    check_generation_params(p, k, mu)?;
    let lifetime = if mu.is_finite() {
        Some(Exp::new(1.0 / mu).expect("positive rate"))
    } else {
        None
    };

    let mut links = vec![Vec::new(); topology.edge_count()];
    for slots in &mut links {
        for t in 1..=k {
            if rng.gen::<f64>() >= p {
                continue;
            }
            let survives = match lifetime {
                None => true,
                Some(exp) => {
                    let age = f64::from(k - t);
                    match mode {
                        DecoherenceMode::PerQubit => {
                            let a = exp.sample(rng);
                            let b = exp.sample(rng);
                            a >= age && b >= age
                        }
                        DecoherenceMode::PerLink => exp.sample(rng) >= age,
                    }
                }
            };
            if survives {
                slots.push(t);
            }
        }
    }
    Snapshot::from_parts(k, links, SnapshotParams { p, mu, mode, seed: None })
}

/// Renders `mu` for documents and CSV (`inf` for unbounded memory).
pub fn format_mu(mu: f64) -> String {
    if mu.is_infinite() {
        "inf".to_string()
    } else {
        format!("{mu}")
    }
}

/// Parses `mu` as written by [`format_mu`] or entered on a command line.
pub fn parse_mu(text: &str) -> Result<f64> {
    let mu = if text.eq_ignore_ascii_case("inf") || text.eq_ignore_ascii_case("infinity") {
        f64::INFINITY
    } else {
        text.parse::<f64>().map_err(|_| {
            Error::InvalidParameter(format!("cannot parse mu from {text:?}"))
        })?
    };
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "mu must be positive (or inf), got {text:?}"
        )));
    }
    Ok(mu)
}

/// Serialized snapshot, with edges named by their endpoints.
#[derive(Serialize, Deserialize)]
pub struct SnapshotDoc {
    pub format: u32,
    pub k: u32,
    pub p: f64,
    pub mu: String,
    pub mode: DecoherenceMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub links: Vec<LinkDoc>,
}

/// Surviving slots of one edge in a [`SnapshotDoc`].
#[derive(Serialize, Deserialize)]
pub struct LinkDoc {
    pub u: String,
    pub v: String,
    pub slots: Vec<u32>,
}

const SNAPSHOT_FORMAT: u32 = 1;

/// Converts a snapshot into its named document form.
pub fn snapshot_to_doc(snapshot: &Snapshot, topology: &Topology) -> SnapshotDoc {
    SnapshotDoc {
        format: SNAPSHOT_FORMAT,
        k: snapshot.k(),
        p: snapshot.params().p,
        mu: format_mu(snapshot.params().mu),
        mode: snapshot.params().mode,
        seed: snapshot.params().seed,
        links: (0..topology.edge_count())
            .filter(|&e| !snapshot.links(EdgeId(e)).is_empty())
            .map(|e| {
                let (u, v) = topology.edge_endpoints(EdgeId(e));
                LinkDoc {
                    u: topology.name(u).to_string(),
                    v: topology.name(v).to_string(),
                    slots: snapshot.links(EdgeId(e)).to_vec(),
                }
            })
            .collect(),
    }
}

/// Rebuilds a snapshot from document form against a topology.
pub fn snapshot_from_doc(doc: &SnapshotDoc, topology: &Topology) -> Result<Snapshot> {
    if doc.format != SNAPSHOT_FORMAT {
        return Err(Error::Document(format!(
            "unsupported snapshot format {} (this build reads format {SNAPSHOT_FORMAT})",
            doc.format
        )));
    }
    let mut links = vec![Vec::new(); topology.edge_count()];
    for entry in &doc.links {
        let resolve = |name: &str| {
            topology.node_by_name(name).ok_or_else(|| {
                Error::Document(format!("snapshot references unknown node {name:?}"))
            })
        };
        let (u, v) = (resolve(&entry.u)?, resolve(&entry.v)?);
        let e = topology.edge_between(u, v).ok_or_else(|| {
            Error::Document(format!(
                "snapshot references missing edge {}-{}",
                entry.u, entry.v
            ))
        })?;
        if !links[e.0].is_empty() {
            return Err(Error::Document(format!(
                "snapshot lists edge {}-{} twice",
                entry.u, entry.v
            )));
        }
        links[e.0] = entry.slots.clone();
    }
    Snapshot::from_parts(
        doc.k,
        links,
        SnapshotParams {
            p: doc.p,
            mu: parse_mu(&doc.mu)?,
            mode: doc.mode,
            seed: doc.seed,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{grid_topology, six_node_topology, SixNode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn slots_are_ordered_and_bounded() {
        let topo = grid_topology(4, 4, (0, 0), (3, 3)).unwrap();
        let snap = generate_snapshot(
            &topo,
            0.6,
            7,
            3.0,
            DecoherenceMode::PerQubit,
            &mut rng(11),
        )
        .unwrap();
        for e in 0..topo.edge_count() {
            let slots = snap.links(EdgeId(e));
            assert!(slots.windows(2).all(|w| w[0] < w[1]));
            assert!(slots.iter().all(|&t| (1..=7).contains(&t)));
        }
    }

    #[test]
    fn same_seed_reproduces_the_snapshot() {
        let topo = six_node_topology(SixNode::Base);
        let a = generate_snapshot(&topo, 0.5, 5, 2.0, DecoherenceMode::PerQubit, &mut rng(3))
            .unwrap();
        let b = generate_snapshot(&topo, 0.5, 5, 2.0, DecoherenceMode::PerQubit, &mut rng(3))
            .unwrap();
        let c = generate_snapshot(&topo, 0.5, 5, 2.0, DecoherenceMode::PerQubit, &mut rng(4))
            .unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn infinite_memory_keeps_every_link() {
        let topo = six_node_topology(SixNode::Base);
        let snap = generate_snapshot(
            &topo,
            1.0,
            6,
            f64::INFINITY,
            DecoherenceMode::PerQubit,
            &mut rng(1),
        )
        .unwrap();
        for e in 0..topo.edge_count() {
            assert_eq!(snap.links(EdgeId(e)), &[1, 2, 3, 4, 5, 6]);
        }
    }

    #[test]
    fn final_slot_always_survives() {
        // Memory so short that anything older than the last slot is gone.
        let topo = six_node_topology(SixNode::Base);
        let snap = generate_snapshot(
            &topo,
            1.0,
            10,
            1e-6,
            DecoherenceMode::PerQubit,
            &mut rng(2),
        )
        .unwrap();
        for e in 0..topo.edge_count() {
            assert_eq!(snap.links(EdgeId(e)), &[10]);
        }
    }

    #[test]
    fn survival_probability_values() {
        let t = 1;
        assert!((survival_probability(t, 2.0, DecoherenceMode::PerQubit) - (-1.0f64).exp())
            .abs()
            < 1e-15);
        assert!((survival_probability(t, 2.0, DecoherenceMode::PerLink) - (-0.5f64).exp()).abs()
            < 1e-15);
        assert_eq!(survival_probability(0, 2.0, DecoherenceMode::PerQubit), 1.0);
        assert_eq!(
            survival_probability(9, f64::INFINITY, DecoherenceMode::PerLink),
            1.0
        );
    }

    #[test]
    fn generated_link_rate_matches_p_for_k1() {
        let topo = grid_topology(21, 21, (5, 5), (10, 10)).unwrap();
        let p = 0.7;
        let trials = 200;
        let mut hits = 0usize;
        let mut total = 0usize;
        let mut r = rng(42);
        for _ in 0..trials {
            let snap =
                generate_snapshot(&topo, p, 1, f64::INFINITY, DecoherenceMode::PerQubit, &mut r)
                    .unwrap();
            for e in 0..topo.edge_count() {
                total += 1;
                hits += usize::from(!snap.links(EdgeId(e)).is_empty());
            }
        }
        let frac = hits as f64 / total as f64;
        let sigma = (p * (1.0 - p) / total as f64).sqrt();
        assert!(
            (frac - p).abs() < 4.0 * sigma,
            "fraction {frac} too far from {p} (sigma {sigma})"
        );
    }

    #[test]
    fn from_parts_rejects_bad_slots() {
        let params = SnapshotParams {
            p: 0.5,
            mu: f64::INFINITY,
            mode: DecoherenceMode::PerQubit,
            seed: None,
        };
        assert!(Snapshot::from_parts(3, vec![vec![1, 1]], params).is_err());
        assert!(Snapshot::from_parts(3, vec![vec![2, 1]], params).is_err());
        assert!(Snapshot::from_parts(3, vec![vec![0]], params).is_err());
        assert!(Snapshot::from_parts(3, vec![vec![4]], params).is_err());
        assert!(Snapshot::from_parts(3, vec![vec![1, 3]], params).is_ok());
    }

    #[test]
    fn snapshot_document_round_trip() {
        let topo = six_node_topology(SixNode::Base);
        let snap = generate_snapshot(
            &topo,
            0.8,
            4,
            f64::INFINITY,
            DecoherenceMode::PerLink,
            &mut rng(9),
        )
        .unwrap()
        .with_seed_echo(9);
        let doc = snapshot_to_doc(&snap, &topo);
        assert_eq!(doc.mu, "inf");
        let json = serde_json::to_string(&doc).unwrap();
        let parsed: SnapshotDoc = serde_json::from_str(&json).unwrap();
        let back = snapshot_from_doc(&parsed, &topo).unwrap();
        assert_eq!(back, snap);
    }

    #[test]
    fn mu_parsing() {
        assert_eq!(parse_mu("inf").unwrap(), f64::INFINITY);
        assert_eq!(parse_mu("2.5").unwrap(), 2.5);
        assert!(parse_mu("-1").is_err());
        assert!(parse_mu("soon").is_err());
        assert_eq!(format_mu(2.5), "2.5");
    }
}
