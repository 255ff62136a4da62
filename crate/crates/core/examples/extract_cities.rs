//! Extract cities from a population raster: contiguous dense cells whose
//! combined population clears a threshold.

use spatial_cpl::cities::{extract_cities, write_cities_csv, Connectivity, ExtractParams};
use spatial_cpl::ingest::PopulationGrid;

fn main() -> spatial_cpl::Result<()> {
    // 12x12 raster of 30" cells near 45°N with three populated blobs.
    let (rows, cols) = (12, 12);
    let mut counts = vec![50.0; rows * cols];
    for (r0, c0, w, per_cell) in [(1, 1, 3, 9000.0), (7, 2, 2, 4000.0), (6, 8, 4, 2500.0)] {
        for r in r0..r0 + w {
            for c in c0..c0 + w {
                counts[r * cols + c] = per_cell;
            }
        }
    }
    // A diagonal pair only joins under 8-connectivity.
    counts[11 * cols + 11] = 6000.0;
    counts[10 * cols + 10] = 6000.0;
    let grid = PopulationGrid::new(rows, cols, 45.1, 7.0, 30.0, 30.0, counts)?;

    for connectivity in [Connectivity::Four, Connectivity::Eight] {
        let params = ExtractParams { connectivity, ..ExtractParams::default() };
        let cities = extract_cities(&grid, &params)?;
        println!("{connectivity:?}-connectivity: {} cities", cities.len());
        write_cities_csv(&cities, std::io::stdout())?;
    }
    Ok(())
}
