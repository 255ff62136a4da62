//! File readers and writers for population rasters, road networks and
//! distance matrices.

mod grid;
mod matrix;
mod network;

pub use grid::{
    load_population_grid, read_esri_ascii, read_packed, write_esri_ascii, write_packed,
    write_population_grid, GridFormat, PopulationGrid, CPG1_MAGIC,
};
pub use matrix::{
    load_distance_matrix, read_cdm1, read_matrix_csv, write_cdm1, write_distance_matrix,
    write_matrix_csv, CDM1_MAGIC,
};
pub use network::{
    load_road_network, load_road_network_dir, write_road_network, Edge, Node, RoadNetwork,
};
