//! Inter-city distances: great-circle, road shortest paths, and the
//! assembled matrix.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;

use crate::cities::{CitySet, EARTH_RADIUS_KM};
use crate::error::{Error, Result};
use crate::ingest::RoadNetwork;

const EARTH_RADIUS_M: f64 = EARTH_RADIUS_KM * 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceProvider {
    Road,
    GreatCircle,
    Planar,
    Loaded,
}

/// Row-major `n x n` distances in meters, row = origin. `+inf` marks an
/// unreachable pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
    pub provider: DistanceProvider,
}

impl DistanceMatrix {
    pub fn new(n: usize, values: Vec<f64>, provider: DistanceProvider) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::format(
                "distance matrix",
                format!("expected {} values for n={n}, got {}", n * n, values.len()),
            ));
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[i * n + j];
                if i == j && v != 0.0 {
                    return Err(Error::Data(format!("nonzero diagonal entry d({i},{i}) = {v}")));
                }
                if v.is_nan() || v < 0.0 {
                    return Err(Error::Data(format!("invalid entry d({i},{j}) = {v}")));
                }
            }
        }
        Ok(DistanceMatrix { n, values, provider })
    }

    /// Builds a matrix from a distance function evaluated on every ordered pair.
    pub fn from_fn(n: usize, provider: DistanceProvider, f: impl Fn(usize, usize) -> f64 + Sync) -> Result<Self> {
        let values: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n, k % n);
                if i == j {
                    0.0
                } else {
                    f(i, j)
                }
            })
            .collect();
        DistanceMatrix::new(n, values, provider)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.values[from * self.n + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.values[from * self.n..(from + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unreachable_pairs(&self) -> usize {
        self.values.iter().filter(|v| v.is_infinite()).count()
    }
}

/// Haversine distance in meters on a sphere of radius 6371.0088 km.
pub fn great_circle_m(a: (f64, f64), b: (f64, f64)) -> Result<f64> {
    for &(lat, lon) in &[a, b] {
        if !(lat.abs() <= 90.0 && lon.abs() <= 180.0) {
            return Err(Error::Domain(format!("coordinate ({lat}, {lon}) out of range")));
        }
    }
    Ok(haversine(a, b))
}

fn haversine(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (phi1, phi2) = (a.0.to_radians(), b.0.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.1 - a.1).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Clone, Copy, PartialEq)]
struct Queued {
    dist: f64,
    node: usize,
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Outgoing adjacency in CSR form, reusable across many sources.
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
}

impl Graph {
    pub fn from_network(net: &RoadNetwork) -> Self {
        let (offsets, targets, weights) = net.adjacency();
        Graph { offsets, targets, weights }
    }

    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Dijkstra from a dense node index.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.n_nodes()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Queued { dist: 0.0, node: source });
        while let Some(Queued { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for e in self.offsets[node]..self.offsets[node + 1] {
                let next = self.targets[e];
                let nd = d + self.weights[e];
                if nd < dist[next] {
                    dist[next] = nd;
                    heap.push(Queued { dist: nd, node: next });
                }
            }
        }
        dist
    }
}

/// Shortest road distance from `source` (a node id) to every node, indexed
/// like `network.nodes()`.
pub fn shortest_path_from(network: &RoadNetwork, source: u64) -> Result<Vec<f64>> {
    let idx = network
        .node_index(source)
        .ok_or_else(|| Error::Reference(format!("unknown source node {source}")))?;
    Ok(Graph::from_network(network).distances_from(idx))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Snap {
    pub city: usize,
    pub node_id: u64,
    pub snap_distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapReport {
    pub radius_km: f64,
    pub snaps: Vec<Snap>,
    pub unreachable_pairs: usize,
}

/// Assigns each city to its nearest network node by great-circle distance.
pub fn snap_cities(cities: &CitySet, network: &RoadNetwork, radius_km: f64) -> Result<Vec<Snap>> {
    if network.nodes().is_empty() {
        return Err(Error::Snapping {
            cities: (0..cities.len()).collect(),
            radius_km,
        });
    }
    let snaps: Vec<Snap> = cities
        .cities()
        .par_iter()
        .map(|c| {
            let here = (c.center_lat, c.center_lon);
            let (node, dist) = network
                .nodes()
                .iter()
                .map(|n| (n.node_id, haversine(here, (n.lat, n.lon))))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .expect("network has nodes");
            Snap { city: c.id, node_id: node, snap_distance_m: dist }
        })
        .collect();
    let far: Vec<usize> = snaps
        .iter()
        .filter(|s| s.snap_distance_m > radius_km * 1000.0)
        .map(|s| s.city)
        .collect();
    if !far.is_empty() {
        return Err(Error::Snapping { cities: far, radius_km });
    }
    Ok(snaps)
}

/// Kilometers per degree used when planar coordinates are stored as
/// pseudo latitude/longitude.
pub const KM_PER_DEGREE: f64 = 111.195;

/// Euclidean distances treating `(center_lon, center_lat)` as planar
/// coordinates scaled by `KM_PER_DEGREE`.
pub fn planar_distance_matrix(cities: &CitySet) -> Result<DistanceMatrix> {
    let pts: Vec<(f64, f64)> = cities.cities().iter().map(|c| (c.center_lon, c.center_lat)).collect();
    DistanceMatrix::from_fn(pts.len(), DistanceProvider::Planar, |i, j| {
        let (a, b) = (pts[i], pts[j]);
        (a.0 - b.0).hypot(a.1 - b.1) * KM_PER_DEGREE * 1000.0
    })
}

/// Distance matrix over `cities`: road shortest paths between snapped nodes
/// when a network is given, great-circle distances otherwise.
pub fn build_distance_matrix(
    cities: &CitySet,
    network: Option<&RoadNetwork>,
    snap_radius_km: f64,
) -> Result<(DistanceMatrix, Option<SnapReport>)> {
    let n = cities.len();
    let Some(network) = network else {
        let pts: Vec<(f64, f64)> = cities.cities().iter().map(|c| (c.center_lat, c.center_lon)).collect();
        for &(lat, lon) in &pts {
            if !(lat.abs() <= 90.0 && lon.abs() <= 180.0) {
                return Err(Error::Domain(format!("coordinate ({lat}, {lon}) out of range")));
            }
        }
        let d = DistanceMatrix::from_fn(n, DistanceProvider::GreatCircle, |i, j| haversine(pts[i], pts[j]))?;
        return Ok((d, None));
    };

    let snaps = snap_cities(cities, network, snap_radius_km)?;
    let nodes: Vec<usize> = snaps
        .iter()
        .map(|s| network.node_index(s.node_id).expect("snapped to a known node"))
        .collect();
    let graph = Graph::from_network(network);
    let rows: Vec<Vec<f64>> = nodes
        .par_iter()
        .map(|&src| {
            let dist = graph.distances_from(src);
            nodes.iter().map(|&dst| dist[dst]).collect()
        })
        .collect();
    let mut values = Vec::with_capacity(n * n);
    for (i, row) in rows.into_iter().enumerate() {
        values.extend(row.into_iter().enumerate().map(|(j, v)| if i == j { 0.0 } else { v }));
    }
    let d = DistanceMatrix::new(n, values, DistanceProvider::Road)?;
    let report = SnapReport {
        radius_km: snap_radius_km,
        unreachable_pairs: d.unreachable_pairs(),
        snaps,
    };
    Ok((d, Some(report)))
}
