//! Cities as maximal contiguous clusters of dense grid cells.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::PopulationGrid;

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    /// Rook adjacency.
    Four,
    /// Queen adjacency.
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u8) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(Error::Argument(format!("connectivity must be 4 or 8, got {other}"))),
        }
    }

    pub fn count(self) -> u8 {
        match self {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }

    fn offsets(self) -> &'static [(isize, isize)] {
        const ROOK: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const QUEEN: [(isize, isize); 8] =
            [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        match self {
            Connectivity::Four => &ROOK,
            Connectivity::Eight => &QUEEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct City {
    /// Position in the owning `CitySet`.
    pub id: usize,
    pub population: f64,
    pub center_lat: f64,
    pub center_lon: f64,
    /// Densest member cell; `None` for cities that did not come from a raster.
    pub center_cell: Option<(usize, usize)>,
    pub n_cells: usize,
    /// Member cells sorted by (row, col). Empty when loaded from a cities CSV.
    pub cells: Vec<(usize, usize)>,
}

impl City {
    /// A city known only by its size and location.
    pub fn point(population: f64, lat: f64, lon: f64) -> Self {
        City {
            id: 0,
            population,
            center_lat: lat,
            center_lon: lon,
            center_cell: None,
            n_cells: 1,
            cells: Vec::new(),
        }
    }
}

/// Parameters a `CitySet` was extracted with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionMeta {
    pub density_min: f64,
    pub pop_min: f64,
    pub connectivity: Connectivity,
    pub area_model: String,
}

/// Cities ordered by population descending; ties by center cell, then
/// coordinates. `cities[i].id == i`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CitySet {
    cities: Vec<City>,
    pub meta: Option<ExtractionMeta>,
}

fn order(a: &City, b: &City) -> Ordering {
    b.population
        .total_cmp(&a.population)
        .then_with(|| match (a.center_cell, b.center_cell) {
            (Some(x), Some(y)) => x.cmp(&y),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        })
        .then_with(|| a.center_lat.total_cmp(&b.center_lat))
        .then_with(|| a.center_lon.total_cmp(&b.center_lon))
}

impl CitySet {
    /// Sorts into the canonical order and assigns ids.
    pub fn from_unordered(mut cities: Vec<City>) -> Result<Self> {
        for c in &cities {
            if !(c.population > 0.0 && c.population.is_finite()) {
                return Err(Error::Data(format!("city population must be positive, got {}", c.population)));
            }
        }
        cities.sort_by(order);
        for (i, c) in cities.iter_mut().enumerate() {
            c.id = i;
        }
        Ok(CitySet { cities, meta: None })
    }

    /// Accepts cities that already carry ids; checks ids and ordering.
    pub fn from_ordered(cities: Vec<City>) -> Result<Self> {
        for (i, c) in cities.iter().enumerate() {
            if c.id != i {
                return Err(Error::Data(format!("city at position {i} has id {}", c.id)));
            }
            if !(c.population > 0.0 && c.population.is_finite()) {
                return Err(Error::Data(format!("city {i} has nonpositive population {}", c.population)));
            }
        }
        if let Some(w) = cities.windows(2).find(|w| order(&w[0], &w[1]) == Ordering::Greater) {
            return Err(Error::Data(format!(
                "cities {} and {} violate the population-descending order",
                w[0].id, w[1].id
            )));
        }
        Ok(CitySet { cities, meta: None })
    }

    pub fn with_meta(mut self, meta: ExtractionMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn len(&self) -> usize {
        self.cities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cities.is_empty()
    }

    pub fn cities(&self) -> &[City] {
        &self.cities
    }

    pub fn get(&self, id: usize) -> Option<&City> {
        self.cities.get(id)
    }

    pub fn populations(&self) -> Vec<f64> {
        self.cities.iter().map(|c| c.population).collect()
    }
}

/// Spherical area of a cell in `row`: R^2 * dphi * dlambda * cos(phi_center).
pub fn cell_area_km2(grid: &PopulationGrid, row: usize) -> Result<f64> {
    if row >= grid.n_rows() {
        return Err(Error::Index { index: row, len: grid.n_rows() });
    }
    Ok(row_area(grid, row))
}

fn row_area(grid: &PopulationGrid, row: usize) -> f64 {
    let dphi = (grid.cell_height_arcsec / 3600.0).to_radians();
    let dlambda = (grid.cell_width_arcsec / 3600.0).to_radians();
    let phi = grid.row_center_lat(row).to_radians();
    EARTH_RADIUS_KM * EARTH_RADIUS_KM * dphi * dlambda * phi.cos()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractParams {
    /// Persons per km².
    pub density_min: f64,
    pub pop_min: f64,
    pub connectivity: Connectivity,
}

impl Default for ExtractParams {
    fn default() -> Self {
        ExtractParams {
            density_min: 1000.0,
            pop_min: 10_000.0,
            connectivity: Connectivity::Four,
        }
    }
}

/// Labels maximal connected groups of cells with density >= `density_min`
/// and keeps those whose total population reaches `pop_min`.
pub fn extract_cities(grid: &PopulationGrid, params: &ExtractParams) -> Result<CitySet> {
    if !(params.density_min > 0.0) {
        return Err(Error::Argument(format!("density_min must be positive, got {}", params.density_min)));
    }
    if !(params.pop_min > 0.0) {
        return Err(Error::Argument(format!("pop_min must be positive, got {}", params.pop_min)));
    }
    let (rows, cols) = (grid.n_rows(), grid.n_cols());
    let areas: Vec<f64> = (0..rows).map(|r| row_area(grid, r)).collect();
    let density = |r: usize, c: usize| grid.population(r, c) / areas[r];
    let qualifies = |r: usize, c: usize| areas[r] > 0.0 && density(r, c) >= params.density_min;

    let mut visited = vec![false; rows * cols];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let mut cities = Vec::new();
    let offsets = params.connectivity.offsets();

    for r0 in 0..rows {
        for c0 in 0..cols {
            if visited[r0 * cols + c0] || !qualifies(r0, c0) {
                continue;
            }
            visited[r0 * cols + c0] = true;
            stack.push((r0, c0));
            let mut cells = Vec::new();
            while let Some((r, c)) = stack.pop() {
                cells.push((r, c));
                for &(dr, dc) in offsets {
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                        continue;
                    }
                    let (nr, nc) = (nr as usize, nc as usize);
                    let idx = nr * cols + nc;
                    if !visited[idx] && qualifies(nr, nc) {
                        visited[idx] = true;
                        stack.push((nr, nc));
                    }
                }
            }
            cells.sort_unstable();
            let population: f64 = cells.iter().map(|&(r, c)| grid.population(r, c)).sum();
            if population < params.pop_min {
                continue;
            }
            // Cells are sorted, so the first maximum is the smallest (row, col).
            let mut center = cells[0];
            let mut best = density(center.0, center.1);
            for &(r, c) in &cells[1..] {
                let d = density(r, c);
                if d > best {
                    best = d;
                    center = (r, c);
                }
            }
            cities.push(City {
                id: 0,
                population,
                center_lat: grid.row_center_lat(center.0),
                center_lon: grid.col_center_lon(center.1),
                center_cell: Some(center),
                n_cells: cells.len(),
                cells,
            });
        }
    }

    Ok(CitySet::from_unordered(cities)?.with_meta(ExtractionMeta {
        density_min: params.density_min,
        pop_min: params.pop_min,
        connectivity: params.connectivity,
        area_model: "spherical cell area".into(),
    }))
}

#[derive(Debug, Serialize, Deserialize)]
struct CityRecord {
    id: usize,
    center_lat: f64,
    center_lon: f64,
    population: f64,
    n_cells: usize,
    center_row: Option<usize>,
    center_col: Option<usize>,
}

pub fn write_cities_csv<W: std::io::Write>(set: &CitySet, w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    let fmt = |e: csv::Error| Error::format("cities csv", e.to_string());
    wtr.write_record([
        "id",
        "center_lat",
        "center_lon",
        "population",
        "n_cells",
        "center_row",
        "center_col",
    ])
    .map_err(fmt)?;
    for c in set.cities() {
        wtr.serialize(CityRecord {
            id: c.id,
            center_lat: c.center_lat,
            center_lon: c.center_lon,
            population: c.population,
            n_cells: c.n_cells,
            center_row: c.center_cell.map(|x| x.0),
            center_col: c.center_cell.map(|x| x.1),
        })
        .map_err(fmt)?;
    }
    wtr.flush().map_err(|e| Error::format("cities csv", e.to_string()))?;
    Ok(())
}

pub fn read_cities_csv<R: std::io::Read>(r: R) -> Result<CitySet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut cities = Vec::new();
    for rec in rdr.deserialize::<CityRecord>() {
        let rec = rec.map_err(|e| Error::format("cities csv", e.to_string()))?;
        let center_cell = match (rec.center_row, rec.center_col) {
            (Some(r), Some(c)) => Some((r, c)),
            (None, None) => None,
            _ => return Err(Error::format("cities csv", format!("city {} has half a center cell", rec.id))),
        };
        cities.push(City {
            id: rec.id,
            population: rec.population,
            center_lat: rec.center_lat,
            center_lon: rec.center_lon,
            center_cell,
            n_cells: rec.n_cells,
            cells: Vec::new(),
        });
    }
    CitySet::from_ordered(cities)
}

pub fn load_cities_csv(path: impl AsRef<Path>) -> Result<CitySet> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_cities_csv(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn grid(rows: usize, cols: usize, lat0: f64, counts: Vec<f64>) -> PopulationGrid {
        PopulationGrid::new(rows, cols, lat0, 0.0, 30.0, 30.0, counts).unwrap()
    }

    #[test]
    fn equatorial_cell_area_matches_closed_form() {
        // One row centered on the equator.
        let g = PopulationGrid::new(1, 1, -15.0 / 3600.0, 0.0, 30.0, 30.0, vec![0.0]).unwrap();
        let d = 30.0 / 3600.0 * std::f64::consts::PI / 180.0;
        let expected = 6371.0088f64.powi(2) * d * d;
        assert!((cell_area_km2(&g, 0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.858635).abs() < 1e-6);
    }

    #[test]
    fn cell_area_scales_with_cosine() {
        let eq = PopulationGrid::new(1, 1, -15.0 / 3600.0, 0.0, 30.0, 30.0, vec![0.0]).unwrap();
        let at60 = PopulationGrid::new(1, 1, 60.0 - 15.0 / 3600.0, 0.0, 30.0, 30.0, vec![0.0]).unwrap();
        let ratio = cell_area_km2(&at60, 0).unwrap() / cell_area_km2(&eq, 0).unwrap();
        assert!((ratio - 0.5).abs() < 1e-12);
        let polar = PopulationGrid::new(1, 1, 89.999 - 15.0 / 3600.0, 0.0, 30.0, 30.0, vec![0.0]).unwrap();
        let a = cell_area_km2(&polar, 0).unwrap();
        assert!(a > 0.0 && a < 1e-3 * cell_area_km2(&eq, 0).unwrap());
        assert!(matches!(cell_area_km2(&eq, 1), Err(Error::Index { .. })));
    }

    #[test]
    fn sparse_grid_yields_no_cities() {
        let g = grid(3, 3, 0.0, vec![100.0; 9]);
        assert!(extract_cities(&g, &ExtractParams::default()).unwrap().is_empty());
    }

    /// Cells of 1 km² at the equator: 1/3600 degree... use 1 km cells built from
    /// a grid whose cell extents give exactly `area` at its center latitude.
    fn km_grid(rows: usize, cols: usize, counts: Vec<f64>) -> PopulationGrid {
        // dphi*dlambda*R^2 = 1 at the equator.
        let side_deg = (1.0 / EARTH_RADIUS_KM).to_degrees();
        let side_arcsec = side_deg * 3600.0;
        let lat0 = -(rows as f64) * side_deg / 2.0;
        PopulationGrid::new(rows, cols, lat0, 0.0, side_arcsec, side_arcsec, counts).unwrap()
    }

    #[test]
    fn isolated_block_is_one_city() {
        let (rows, cols) = (9, 9);
        let mut counts = vec![0.0; rows * cols];
        for r in 2..7 {
            for c in 2..7 {
                counts[r * cols + c] = 2000.0;
            }
        }
        let set = extract_cities(&km_grid(rows, cols, counts), &ExtractParams::default()).unwrap();
        assert_eq!(set.len(), 1);
        let city = &set.cities()[0];
        assert!((city.population - 50_000.0).abs() < 1e-9);
        assert_eq!(city.n_cells, 25);
        // Rows nearest the equator are largest, so density peaks away from row 4.
        let (r, _) = city.center_cell.unwrap();
        assert!(r == 2 || r == 6);
    }

    fn random_grid(seed: u64, rows: usize, cols: usize) -> PopulationGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = (0..rows * cols)
            .map(|_| {
                if rng.random_bool(0.45) {
                    rng.random_range(900.0..4000.0)
                } else {
                    rng.random_range(0.0..500.0)
                }
            })
            .collect();
        PopulationGrid::new(rows, cols, 40.0, 10.0, 30.0, 30.0, counts).unwrap()
    }

    /// Union-find labeling, independent of the traversal used by `extract_cities`.
    fn oracle(g: &PopulationGrid, params: &ExtractParams) -> BTreeMap<Vec<(usize, usize)>, f64> {
        let (rows, cols) = (g.n_rows(), g.n_cols());
        let dense = |r: usize, c: usize| {
            g.population(r, c) / cell_area_km2(g, r).unwrap() >= params.density_min
        };
        let mut parent: Vec<usize> = (0..rows * cols).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for r in 0..rows {
            for c in 0..cols {
                if !dense(r, c) {
                    continue;
                }
                let mut nbrs = vec![];
                if c + 1 < cols {
                    nbrs.push((r, c + 1));
                }
                if r + 1 < rows {
                    nbrs.push((r + 1, c));
                    if params.connectivity == Connectivity::Eight {
                        if c + 1 < cols {
                            nbrs.push((r + 1, c + 1));
                        }
                        if c > 0 {
                            nbrs.push((r + 1, c - 1));
                        }
                    }
                }
                for (nr, nc) in nbrs {
                    if dense(nr, nc) {
                        let a = find(&mut parent, r * cols + c);
                        let b = find(&mut parent, nr * cols + nc);
                        parent[a] = b;
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for r in 0..rows {
            for c in 0..cols {
                if dense(r, c) {
                    let root = find(&mut parent, r * cols + c);
                    groups.entry(root).or_default().push((r, c));
                }
            }
        }
        groups
            .into_values()
            .map(|cells| {
                let pop = cells.iter().map(|&(r, c)| g.population(r, c)).sum::<f64>();
                (cells, pop)
            })
            .filter(|(_, pop)| *pop >= params.pop_min)
            .collect()
    }

    fn as_map(set: &CitySet) -> BTreeMap<Vec<(usize, usize)>, f64> {
        set.cities().iter().map(|c| (c.cells.clone(), c.population)).collect()
    }

    #[test]
    fn matches_union_find_oracle_on_random_grid() {
        let g = random_grid(7, 200, 200);
        for conn in [Connectivity::Four, Connectivity::Eight] {
            let params = ExtractParams { density_min: 1000.0, pop_min: 10_000.0, connectivity: conn };
            let set = extract_cities(&g, &params).unwrap();
            let expected = oracle(&g, &params);
            assert!(!expected.is_empty());
            let got = as_map(&set);
            assert_eq!(got.len(), expected.len());
            for (cells, pop) in &expected {
                let p = got[cells];
                assert!((p - pop).abs() <= 1e-9 * pop, "{p} vs {pop}");
            }
        }
    }

    #[test]
    fn raising_pop_min_drops_exactly_the_small_components() {
        let g = random_grid(8, 200, 200);
        let low = ExtractParams::default();
        let high = ExtractParams { pop_min: 20_000.0, ..low };
        let all = oracle(&g, &ExtractParams { pop_min: 1e-9, ..low });
        let got_low = as_map(&extract_cities(&g, &low).unwrap());
        let got_high = as_map(&extract_cities(&g, &high).unwrap());
        let dropped: Vec<_> = got_low.keys().filter(|k| !got_high.contains_key(*k)).collect();
        let expected_dropped: Vec<_> = all
            .iter()
            .filter(|(_, &p)| (10_000.0..20_000.0).contains(&p))
            .map(|(k, _)| k)
            .collect();
        assert_eq!(dropped, expected_dropped);
        assert!(got_high.keys().all(|k| got_low.contains_key(k)));
    }

    #[test]
    fn ordering_and_ids_are_canonical() {
        let g = random_grid(9, 120, 120);
        let set = extract_cities(&g, &ExtractParams::default()).unwrap();
        for (i, w) in set.cities().windows(2).enumerate() {
            assert_eq!(w[0].id, i);
            assert!(w[0].population >= w[1].population);
        }
        let again = extract_cities(&g, &ExtractParams::default()).unwrap();
        assert_eq!(set, again);
    }

    #[test]
    fn center_is_densest_member_with_lexicographic_ties() {
        let mut counts = vec![0.0; 16];
        // Two cells of equal density in the same row.
        counts[5] = 9_000.0;
        counts[6] = 9_000.0;
        let g = km_grid(4, 4, counts);
        let set = extract_cities(&g, &ExtractParams { pop_min: 1.0, ..Default::default() }).unwrap();
        assert_eq!(set.cities()[0].center_cell, Some((1, 1)));
    }

    #[test]
    fn cities_csv_round_trip() {
        let g = random_grid(3, 60, 60);
        let set = extract_cities(&g, &ExtractParams::default()).unwrap();
        let mut buf = Vec::new();
        write_cities_csv(&set, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("id,center_lat,center_lon,population,n_cells,center_row,center_col\n"));
        let back = read_cities_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), set.len());
        for (a, b) in back.cities().iter().zip(set.cities()) {
            assert_eq!(a.population.to_bits(), b.population.to_bits());
            assert_eq!(a.center_cell, b.center_cell);
        }
    }

    #[test]
    fn empty_set_writes_header_only() {
        let mut buf = Vec::new();
        write_cities_csv(&CitySet::default(), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "id,center_lat,center_lon,population,n_cells,center_row,center_col\n"
        );
    }
}
