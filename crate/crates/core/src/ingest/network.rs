//! Road networks as two CSV tables: `nodes.csv` (`node_id,lat,lon`) and
//! `edges.csv` (`u,v,length_m,oneway`).

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub node_id: u64,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: u64,
    pub v: u64,
    pub length_m: f64,
    /// `true` when the edge may only be traversed from `u` to `v`.
    #[serde(with = "bool_as_int")]
    pub oneway: bool,
}

mod bool_as_int {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(D::Error::custom(format!("oneway must be 0 or 1, got {other}"))),
        }
    }
}

/// Road graph with dense node indices. Undirected edges are stored once.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<u64, usize>,
}

impl RoadNetwork {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        let mut unique = Vec::with_capacity(nodes.len());
        for node in nodes {
            if !(node.lat.abs() <= 90.0 && node.lon.abs() <= 180.0) {
                return Err(Error::Data(format!(
                    "node {} has out-of-range coordinates ({}, {})",
                    node.node_id, node.lat, node.lon
                )));
            }
            match index.get(&node.node_id) {
                Some(&i) => {
                    let prev: &Node = &unique[i];
                    if prev.lat != node.lat || prev.lon != node.lon {
                        return Err(Error::Data(format!(
                            "node {} listed twice with different coordinates",
                            node.node_id
                        )));
                    }
                }
                None => {
                    index.insert(node.node_id, unique.len());
                    unique.push(node);
                }
            }
        }
        for e in &edges {
            for id in [e.u, e.v] {
                if !index.contains_key(&id) {
                    return Err(Error::Reference(format!("edge references unknown node {id}")));
                }
            }
            if e.u == e.v {
                return Err(Error::Data(format!("self-loop edge on node {}", e.u)));
            }
            if !(e.length_m > 0.0 && e.length_m.is_finite()) {
                return Err(Error::Data(format!(
                    "edge {}-{} has nonpositive length {}",
                    e.u, e.v, e.length_m
                )));
            }
        }
        Ok(RoadNetwork {
            nodes: unique,
            edges,
            index,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_index(&self, node_id: u64) -> Option<usize> {
        self.index.get(&node_id).copied()
    }

    /// Outgoing adjacency in CSR form: `(offsets, targets, weights)`.
    pub fn adjacency(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let n = self.nodes.len();
        let mut degree = vec![0usize; n + 1];
        for e in &self.edges {
            degree[self.index[&e.u] + 1] += 1;
            if !e.oneway {
                degree[self.index[&e.v] + 1] += 1;
            }
        }
        for i in 0..n {
            degree[i + 1] += degree[i];
        }
        let offsets = degree;
        let mut fill = offsets.clone();
        let m = offsets[n];
        let mut targets = vec![0usize; m];
        let mut weights = vec![0f64; m];
        let mut push = |from: usize, to: usize, w: f64| {
            targets[fill[from]] = to;
            weights[fill[from]] = w;
            fill[from] += 1;
        };
        for e in &self.edges {
            let (u, v) = (self.index[&e.u], self.index[&e.v]);
            push(u, v, e.length_m);
            if !e.oneway {
                push(v, u, e.length_m);
            }
        }
        (offsets, targets, weights)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(path.display().to_string(), e.to_string())
}

pub fn load_road_network(nodes_path: impl AsRef<Path>, edges_path: impl AsRef<Path>) -> Result<RoadNetwork> {
    let nodes_path = nodes_path.as_ref();
    let edges_path = edges_path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(nodes_path)
        .map_err(|e| csv_err(nodes_path, e))?;
    let nodes = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<Node>, _>>()
        .map_err(|e| csv_err(nodes_path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(edges_path)
        .map_err(|e| csv_err(edges_path, e))?;
    let edges = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<Edge>, _>>()
        .map_err(|e| csv_err(edges_path, e))?;
    RoadNetwork::new(nodes, edges)
}

/// Loads `nodes.csv` and `edges.csv` from a directory.
pub fn load_road_network_dir(dir: impl AsRef<Path>) -> Result<RoadNetwork> {
    let dir = dir.as_ref();
    load_road_network(dir.join("nodes.csv"), dir.join("edges.csv"))
}

pub fn write_road_network(net: &RoadNetwork, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let nodes_path = dir.join("nodes.csv");
    let mut w = csv::Writer::from_path(&nodes_path).map_err(|e| csv_err(&nodes_path, e))?;
    for n in &net.nodes {
        w.serialize(n).map_err(|e| csv_err(&nodes_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&nodes_path, e))?;
    let edges_path = dir.join("edges.csv");
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&edges_path)
        .map_err(|e| csv_err(&edges_path, e))?;
    // Header is written explicitly so an empty edge table still carries it.
    w.write_record(["u", "v", "length_m", "oneway"])
        .map_err(|e| csv_err(&edges_path, e))?;
    for e in &net.edges {
        w.serialize(e).map_err(|e| csv_err(&edges_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&edges_path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, nodes: &str, edges: &str) {
        fs::write(dir.join("nodes.csv"), nodes).unwrap();
        fs::write(dir.join("edges.csv"), edges).unwrap();
    }

    #[test]
    fn empty_edge_file_gives_isolated_nodes() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "node_id,lat,lon\n1,0,0\n2,0,1\n3,1,1\n", "u,v,length_m,oneway\n");
        let net = load_road_network_dir(dir.path()).unwrap();
        assert_eq!(net.nodes().len(), 3);
        assert!(net.edges().is_empty());
    }

    #[test]
    fn unknown_endpoint_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "node_id,lat,lon\n1,0,0\n", "u,v,length_m,oneway\n1,77,10,0\n");
        let err = load_road_network_dir(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Reference(ref m) if m.contains("77")), "{err}");
    }

    #[test]
    fn nonpositive_length_and_self_loops_rejected() {
        let nodes = vec![
            Node { node_id: 1, lat: 0.0, lon: 0.0 },
            Node { node_id: 2, lat: 0.0, lon: 1.0 },
        ];
        let bad = Edge { u: 1, v: 2, length_m: 0.0, oneway: false };
        assert!(matches!(RoadNetwork::new(nodes.clone(), vec![bad]), Err(Error::Data(_))));
        let looped = Edge { u: 1, v: 1, length_m: 5.0, oneway: false };
        assert!(matches!(RoadNetwork::new(nodes, vec![looped]), Err(Error::Data(_))));
    }

    #[test]
    fn duplicate_nodes_are_merged() {
        let n = Node { node_id: 4, lat: 1.0, lon: 2.0 };
        let net = RoadNetwork::new(vec![n, n], vec![]).unwrap();
        assert_eq!(net.nodes().len(), 1);
        let moved = Node { lat: 1.5, ..n };
        assert!(RoadNetwork::new(vec![n, moved], vec![]).is_err());
    }

    #[test]
    fn triangle_round_trip_keeps_adjacency() {
        let nodes = vec![
            Node { node_id: 10, lat: 0.0, lon: 0.0 },
            Node { node_id: 11, lat: 0.0, lon: 0.1 },
            Node { node_id: 12, lat: 0.1, lon: 0.0 },
        ];
        let edges = vec![
            Edge { u: 10, v: 11, length_m: 1000.5, oneway: false },
            Edge { u: 11, v: 12, length_m: 2000.25, oneway: true },
            Edge { u: 12, v: 10, length_m: 1500.0, oneway: false },
        ];
        let net = RoadNetwork::new(nodes, edges).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_road_network(&net, dir.path()).unwrap();
        let back = load_road_network_dir(dir.path()).unwrap();
        assert_eq!(back.adjacency(), net.adjacency());
        assert_eq!(back, net);
    }
}
