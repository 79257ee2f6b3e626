//! Versioned on-disk topology format.
//!
//! Documents are TOML with a mandatory `format = 1` marker:
//!
//! ```toml
//! format = 1
//! alice = "A"
//! bob = "B"
//! default_q = 0.9
//! edges = [["A", "2"], ["2", "1"], ["1", "B"]]
//!
//! [[nodes]]
//! id = "A"
//! x = 0
//! y = 0
//!
//! [[nodes]]
//! id = "2"
//! q = 0.95
//! ```
//!
//! Coordinates and per-node `q` are optional; `default_q` (default 1.0) fills
//! in unset swap probabilities.

use serde::{Deserialize, Serialize};

use super::{NodeSpec, Topology};
use crate::error::{Error, Result};

const FORMAT: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TopologyDoc {
    format: u32,
    alice: String,
    bob: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default_q: Option<f64>,
    edges: Vec<(String, String)>,
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
}

/// Parses a topology document and validates the described graph.
pub fn load_topology(text: &str) -> Result<Topology> {
    let doc: TopologyDoc = toml::from_str(text).map_err(|e| Error::Document(e.to_string()))?;
    if doc.format != FORMAT {
        return Err(Error::Document(format!(
            "unsupported format {} (this build reads format {FORMAT})",
            doc.format
        )));
    }
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for node in doc.nodes {
        let coord = match (node.x, node.y) {
            (Some(x), Some(y)) => Some((x, y)),
            (None, None) => None,
            _ => {
                return Err(Error::Document(format!(
                    "node {:?} sets only one of x and y",
                    node.id
                )))
            }
        };
        nodes.push(NodeSpec {
            name: node.id,
            coord,
            q: node.q,
        });
    }
    Topology::new(
        nodes,
        &doc.edges,
        &doc.alice,
        &doc.bob,
        doc.default_q.unwrap_or(1.0),
    )
}

/// Serializes a topology back into document form.
pub fn to_document(topology: &Topology) -> String {
    let doc = TopologyDoc {
        format: FORMAT,
        alice: topology.name(topology.alice()).to_string(),
        bob: topology.name(topology.bob()).to_string(),
        default_q: Some(topology.default_q()),
        edges: topology
            .edges
            .iter()
            .map(|&(u, v)| (topology.name(u).to_string(), topology.name(v).to_string()))
            .collect(),
        nodes: topology
            .nodes()
            .map(|n| NodeDoc {
                id: topology.name(n).to_string(),
                x: topology.coord(n).map(|c| c.0),
                y: topology.coord(n).map(|c| c.1),
                q: (!topology.is_consumer(n) && topology.q(n) != topology.default_q())
                    .then(|| topology.q(n)),
            })
            .collect(),
    };
    toml::to_string(&doc).expect("topology document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{six_node_topology, Metric, SixNode};

    #[test]
    fn round_trip_preserves_structure() {
        let orig = six_node_topology(SixNode::Base).with_uniform_q(0.9).unwrap();
        let text = to_document(&orig);
        let back = load_topology(&text).unwrap();
        assert_eq!(back.node_count(), orig.node_count());
        assert_eq!(back.edge_count(), orig.edge_count());
        assert_eq!(back.name(back.alice()), "A");
        assert_eq!(back.name(back.bob()), "B");
        assert_eq!(back.uniform_q(), Some(0.9));
    }

    #[test]
    fn parses_minimal_document() {
        let text = r#"
            format = 1
            alice = "a"
            bob = "b"
            edges = [["a", "m"], ["m", "b"]]

            [[nodes]]
            id = "a"

            [[nodes]]
            id = "m"
            q = 0.5

            [[nodes]]
            id = "b"
        "#;
        let topo = load_topology(text).unwrap();
        assert_eq!(topo.edge_count(), 2);
        assert_eq!(topo.q(topo.node_by_name("m").unwrap()), 0.5);
    }

    #[test]
    fn rejects_unknown_format() {
        let text = r#"
            format = 2
            alice = "a"
            bob = "b"
            edges = [["a", "b"]]
            [[nodes]]
            id = "a"
            [[nodes]]
            id = "b"
        "#;
        let err = load_topology(text).unwrap_err();
        assert!(err.to_string().contains("format 2"), "{err}");
    }

    #[test]
    fn rejects_half_coordinates() {
        let text = r#"
            format = 1
            alice = "a"
            bob = "b"
            edges = [["a", "b"]]
            [[nodes]]
            id = "a"
            x = 3
            [[nodes]]
            id = "b"
        "#;
        let err = load_topology(text).unwrap_err();
        assert!(err.to_string().contains("only one of x and y"), "{err}");
    }

    #[test]
    fn parse_error_carries_locus() {
        let err = load_topology("format = \"one\"").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn document_graph_rejects_duplicate_edge() {
        let text = r#"
            format = 1
            alice = "a"
            bob = "b"
            edges = [["a", "b"], ["b", "a"]]
            [[nodes]]
            id = "a"
            [[nodes]]
            id = "b"
        "#;
        assert!(load_topology(text).is_err());
    }

    #[test]
    fn coordinates_survive_round_trip() {
        let g = crate::topology::grid_topology(3, 3, (0, 0), (2, 2)).unwrap();
        let back = load_topology(&to_document(&g)).unwrap();
        let n = back.node_by_name("1,2").unwrap();
        assert_eq!(back.coord(n), Some((1, 2)));
        assert!(crate::topology::distance(&back, Metric::Euclidean, back.alice(), back.bob())
            .is_ok());
    }
}
