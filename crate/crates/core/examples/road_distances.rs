//! Snap cities to a road network and build the road-distance matrix, next
//! to great-circle distances for comparison.

use spatial_cpl::cities::{City, CitySet};
use spatial_cpl::geo::build_distance_matrix;
use spatial_cpl::ingest::{Edge, Node, RoadNetwork};

fn main() -> spatial_cpl::Result<()> {
    let cities = CitySet::from_unordered(vec![
        City::point(900_000.0, 48.000, 11.000),
        City::point(400_000.0, 48.000, 11.500),
        City::point(150_000.0, 48.300, 11.250),
    ])?;
    // A road triangle with a detour through node 4, plus a one-way shortcut.
    let nodes = vec![
        Node { node_id: 1, lat: 48.001, lon: 11.000 },
        Node { node_id: 2, lat: 48.001, lon: 11.500 },
        Node { node_id: 3, lat: 48.299, lon: 11.250 },
        Node { node_id: 4, lat: 48.150, lon: 11.250 },
    ];
    let edges = vec![
        Edge { u: 1, v: 4, length_m: 25_000.0, oneway: false },
        Edge { u: 4, v: 2, length_m: 25_000.0, oneway: false },
        Edge { u: 4, v: 3, length_m: 18_000.0, oneway: false },
        Edge { u: 1, v: 2, length_m: 39_000.0, oneway: true },
    ];
    let network = RoadNetwork::new(nodes, edges)?;

    let (road, report) = build_distance_matrix(&cities, Some(&network), 20.0)?;
    let (air, _) = build_distance_matrix(&cities, None, 20.0)?;
    if let Some(report) = report {
        for snap in &report.snaps {
            println!("city {} -> node {} ({:.0} m away)", snap.city, snap.node_id, snap.snap_distance_m);
        }
    }
    for i in 0..cities.len() {
        for j in 0..cities.len() {
            if i != j {
                println!("{i} -> {j}: road {:>8.0} m, great-circle {:>8.0} m", road.get(i, j), air.get(i, j));
            }
        }
    }
    Ok(())
}
