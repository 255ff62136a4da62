//! Synthetic city systems with known structure.
//!
//! Positions live on a plane measured in kilometers and are stored on each
//! city as pseudo coordinates (`lat = y / KM_PER_DEGREE`,
//! `lon = x / KM_PER_DEGREE`), so a generated system round-trips through the
//! cities CSV and `planar_distance_matrix` reproduces its distances.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Pareto};
use serde::{Deserialize, Serialize};

use crate::cities::{City, CitySet};
use crate::error::{Error, Result};
use crate::geo::{planar_distance_matrix, DistanceMatrix, KM_PER_DEGREE};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum SynthModel {
    /// `n` iid Pareto sizes at uniform random locations.
    IidZipf { n: usize },
    /// A tree of centers: at each of `depth - 1` rounds every city spawns
    /// `l_gen - 1` new cities around it; every city of the last round gets
    /// `satellites` small neighbors.
    Hierarchical { l_gen: usize, depth: usize, satellites: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub model: SynthModel,
    /// Pareto exponent of the size law.
    pub alpha: f64,
    pub min_size: f64,
    /// Side of the square domain.
    pub extent_km: f64,
    /// Radius of the disc holding a center's satellites.
    pub cluster_radius_km: f64,
    /// Separation of the cities created in the second round; later rounds
    /// shrink it by `spacing_decay`.
    pub spacing_km: f64,
    pub spacing_decay: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn iid(n: usize, seed: u64) -> Self {
        SynthSpec { model: SynthModel::IidZipf { n }, ..Self::base(seed) }
    }

    pub fn hierarchical(l_gen: usize, depth: usize, satellites: usize, seed: u64) -> Self {
        SynthSpec { model: SynthModel::Hierarchical { l_gen, depth, satellites }, ..Self::base(seed) }
    }

    fn base(seed: u64) -> Self {
        SynthSpec {
            model: SynthModel::IidZipf { n: 1 },
            alpha: 1.0,
            min_size: 10_000.0,
            extent_km: 1000.0,
            cluster_radius_km: 4.0,
            spacing_km: 300.0,
            spacing_decay: 0.25,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Argument(format!("{name} must be positive, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("min_size", self.min_size)?;
        positive("extent_km", self.extent_km)?;
        positive("cluster_radius_km", self.cluster_radius_km)?;
        positive("spacing_km", self.spacing_km)?;
        if self.extent_km / KM_PER_DEGREE > 90.0 {
            return Err(Error::Argument(format!("extent_km {} is too large", self.extent_km)));
        }
        if !(self.spacing_decay > 0.0 && self.spacing_decay < 1.0 / 3.0) {
            return Err(Error::Argument(format!("spacing_decay must lie in (0, 1/3), got {}", self.spacing_decay)));
        }
        match self.model {
            SynthModel::IidZipf { n: 0 } => Err(Error::Argument("n must be at least 1".into())),
            SynthModel::Hierarchical { l_gen, depth, .. } if l_gen < 2 || depth < 1 => {
                Err(Error::Argument(format!("need l_gen >= 2 and depth >= 1, got {l_gen} and {depth}")))
            }
            _ => Ok(()),
        }
    }
}

fn city_at(population: f64, (x, y): (f64, f64)) -> City {
    City::point(population, y / KM_PER_DEGREE, x / KM_PER_DEGREE)
}

fn pareto_sizes<R: Rng + ?Sized>(n: usize, alpha: f64, min_size: f64, rng: &mut R) -> Result<Vec<f64>> {
    let law = Pareto::new(min_size, alpha).map_err(|e| Error::Argument(e.to_string()))?;
    Ok((0..n).map(|_| law.sample(rng)).collect())
}

/// Cities with iid Pareto sizes at independent uniform locations.
pub fn gen_iid_system(spec: &SynthSpec) -> Result<(CitySet, DistanceMatrix)> {
    spec.validate()?;
    let SynthModel::IidZipf { n } = spec.model else {
        return Err(Error::Argument("gen_iid_system needs the iid-zipf model".into()));
    };
    let mut rng = substream(spec.seed, "synth/iid", &[]);
    let sizes = pareto_sizes(n, spec.alpha, spec.min_size, &mut rng)?;
    let cities = sizes
        .into_iter()
        .map(|s| {
            let p = (rng.random_range(0.0..spec.extent_km), rng.random_range(0.0..spec.extent_km));
            city_at(s, p)
        })
        .collect();
    let set = CitySet::from_unordered(cities)?;
    let d = planar_distance_matrix(&set)?;
    Ok((set, d))
}

/// Layout of a hierarchical system before sizes are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyLayout {
    pub positions: Vec<(f64, f64)>,
    /// Round in which each city was created, 1 for the root; satellites get
    /// `depth + 1`.
    pub rounds: Vec<usize>,
    /// Minimum separation enforced among the cities existing after round k
    /// (index k - 1; round 1 has a single city and reports infinity).
    pub separations: Vec<f64>,
}

fn hierarchy_layout<R: Rng + ?Sized>(spec: &SynthSpec, l_gen: usize, depth: usize, satellites: usize, rng: &mut R) -> Result<HierarchyLayout> {
    let half = spec.extent_km / 2.0;
    let mut positions = vec![(half, half)];
    let mut rounds = vec![1];
    let mut separations = vec![f64::INFINITY];
    // Children sit on a circle around their parent; the radius is chosen so
    // both parent-child and sibling distances reach the round's spacing.
    let stretch = 1.0 / (2.0 * (std::f64::consts::PI / l_gen as f64).sin()).min(1.0);
    let radius = |k: usize| spec.spacing_km * spec.spacing_decay.powi(k as i32 - 2) * stretch;
    for k in 2..=depth {
        let existing = positions.len();
        for parent in 0..existing {
            let (px, py) = positions[parent];
            let turn = rng.random_range(0.0..TAU);
            for j in 1..l_gen {
                let a = turn + TAU * j as f64 / l_gen as f64;
                positions.push((px + radius(k) * a.cos(), py + radius(k) * a.sin()));
                rounds.push(k);
            }
        }
        separations.push(spec.spacing_km * spec.spacing_decay.powi(k as i32 - 2));
    }
    if satellites > 0 {
        let existing = positions.len();
        for parent in 0..existing {
            let (px, py) = positions[parent];
            for _ in 0..satellites {
                let r = spec.cluster_radius_km * rng.random_range(0.0f64..1.0).sqrt();
                let a = rng.random_range(0.0..TAU);
                positions.push((px + r * a.cos(), py + r * a.sin()));
                rounds.push(depth + 1);
            }
        }
    }

    // A round-k city's descendants stay within `reach[k]` of it; Voronoi
    // cells around round-k centers recover the subtrees iff that reach is
    // below half the round's separation.
    let tail = if satellites > 0 { spec.cluster_radius_km } else { 0.0 };
    let mut reach = vec![0.0; depth + 2];
    reach[depth] = tail;
    for k in (1..depth).rev() {
        reach[k] = reach[k + 1] + radius(k + 1);
    }
    for k in 2..=depth {
        if reach[k] >= separations[k - 1] / 2.0 {
            return Err(Error::Geometry(format!(
                "round {k}: descendants reach {:.3} km but centers are only {:.3} km apart",
                reach[k],
                separations[k - 1]
            )));
        }
    }
    for &(x, y) in &positions {
        if !(0.0..=spec.extent_km).contains(&x) || !(0.0..=spec.extent_km).contains(&y) {
            return Err(Error::Geometry(format!("city at ({x:.1}, {y:.1}) km falls outside the domain")));
        }
    }
    Ok(HierarchyLayout { positions, rounds, separations })
}

/// A nested system whose spatial hierarchy at `L = l_gen` reproduces the
/// generating tree.
///
/// Sizes come in bands: cities of round k draw from
/// `[min * a^(B-k), min * a^(B-k+1))` with `a = l_gen^(1/alpha)` and `B` the
/// last round, log-uniformly within the band. Band counts grow by `l_gen`
/// per round, so every subtree follows a rank-size line of slope `1/alpha`.
pub fn gen_hierarchical_system(spec: &SynthSpec) -> Result<(CitySet, DistanceMatrix)> {
    let (set, d, _) = gen_hierarchical_with_layout(spec)?;
    Ok((set, d))
}

/// As `gen_hierarchical_system`, also returning the layout with rounds
/// indexed by city id.
pub fn gen_hierarchical_with_layout(spec: &SynthSpec) -> Result<(CitySet, DistanceMatrix, HierarchyLayout)> {
    spec.validate()?;
    let SynthModel::Hierarchical { l_gen, depth, satellites } = spec.model else {
        return Err(Error::Argument("gen_hierarchical_system needs the hierarchical model".into()));
    };
    let mut rng = substream(spec.seed, "synth/hierarchical", &[]);
    let layout = hierarchy_layout(spec, l_gen, depth, satellites, &mut rng)?;
    let last = if satellites > 0 { depth + 1 } else { depth };
    let a = (l_gen as f64).powf(1.0 / spec.alpha);
    let mut tagged: Vec<(City, usize)> = layout
        .positions
        .iter()
        .zip(&layout.rounds)
        .map(|(&p, &k)| {
            let size = spec.min_size * a.powf((last - k) as f64 + rng.random_range(0.0..1.0));
            (city_at(size, p), k)
        })
        .collect();
    // Order by size so rounds can be re-indexed by id after canonical sorting.
    tagged.sort_by(|x, y| y.0.population.total_cmp(&x.0.population));
    let rounds: Vec<usize> = tagged.iter().map(|t| t.1).collect();
    let positions: Vec<(f64, f64)> = tagged
        .iter()
        .map(|t| (t.0.center_lon * KM_PER_DEGREE, t.0.center_lat * KM_PER_DEGREE))
        .collect();
    let set = CitySet::from_unordered(tagged.into_iter().map(|t| t.0).collect())?;
    let d = planar_distance_matrix(&set)?;
    Ok((set, d, HierarchyLayout { positions, rounds, separations: layout.separations }))
}

/// Where the largest cities of a spaced system sit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpacedLayout {
    /// One large city at the hub of each of `l` mutually distant clusters.
    Spaced,
    /// All sizes, the largest included, shuffled uniformly over the sites.
    Relocated,
}

/// Clusters on a square lattice; each cluster has a hub site and satellites
/// within `cluster_radius_km` of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacedSpec {
    pub n: usize,
    /// Number of large cities placed at distant hubs.
    pub l: usize,
    pub lattice_side: usize,
    pub lattice_spacing_km: f64,
    pub cluster_radius_km: f64,
    pub alpha: f64,
    pub min_size: f64,
    pub seed: u64,
}

impl SpacedSpec {
    pub fn new(n: usize, l: usize, seed: u64) -> Self {
        SpacedSpec {
            n,
            l,
            lattice_side: 4,
            lattice_spacing_km: 100.0,
            cluster_radius_km: 20.0,
            alpha: 1.0,
            min_size: 10_000.0,
            seed,
        }
    }
}

/// Sites of a spaced system plus the hub indices, in generation order.
fn spaced_sites<R: Rng + ?Sized>(spec: &SpacedSpec, rng: &mut R) -> (Vec<(f64, f64)>, Vec<usize>) {
    let side = spec.lattice_side;
    let clusters = side * side;
    let hubs: Vec<(f64, f64)> = (0..clusters)
        .map(|c| ((c % side) as f64 * spec.lattice_spacing_km, (c / side) as f64 * spec.lattice_spacing_km))
        .map(|(x, y)| (x + spec.cluster_radius_km, y + spec.cluster_radius_km))
        .collect();
    let mut sites = hubs.clone();
    for i in clusters..spec.n {
        let (hx, hy) = hubs[i % clusters];
        let r = spec.cluster_radius_km * rng.random_range(0.0f64..1.0).sqrt();
        let a = rng.random_range(0.0..TAU);
        sites.push((hx + r * a.cos(), hy + r * a.sin()));
    }
    // Farthest-point selection from the first hub spreads the large cities.
    let mut chosen = vec![0];
    while chosen.len() < spec.l {
        let gap = |h: usize| {
            chosen
                .iter()
                .map(|&c| {
                    let (a, b) = (hubs[h], hubs[c]);
                    (a.0 - b.0).hypot(a.1 - b.1)
                })
                .fold(f64::INFINITY, f64::min)
        };
        let next = (0..clusters)
            .filter(|h| !chosen.contains(h))
            .max_by(|&a, &b| gap(a).total_cmp(&gap(b)).then(b.cmp(&a)))
            .expect("more clusters than large cities");
        chosen.push(next);
    }
    (sites, chosen)
}

/// A system whose `l` largest cities are spread over distant clusters, or,
/// with `SpacedLayout::Relocated`, the same sites and sizes with the
/// placement randomized. `run` selects an independent draw of sites and sizes.
pub fn gen_spaced_system(spec: &SpacedSpec, layout: SpacedLayout, run: u64) -> Result<(CitySet, DistanceMatrix)> {
    let clusters = spec.lattice_side * spec.lattice_side;
    if spec.l == 0 || spec.l > clusters || spec.n < clusters {
        return Err(Error::Argument(format!(
            "need 1 <= l <= {clusters} clusters <= n, got l = {} and n = {}",
            spec.l, spec.n
        )));
    }
    if !(spec.cluster_radius_km > 0.0 && spec.lattice_spacing_km > 2.0 * spec.cluster_radius_km) {
        return Err(Error::Geometry("clusters overlap: lattice spacing must exceed twice the radius".into()));
    }
    let mut rng = substream(spec.seed, "synth/spaced", &[run]);
    let (sites, hubs) = spaced_sites(spec, &mut rng);
    let mut sizes = pareto_sizes(spec.n, spec.alpha, spec.min_size, &mut rng)?;
    sizes.sort_by(|a, b| b.total_cmp(a));
    let mut order: Vec<usize> = (0..spec.n).collect();
    match layout {
        SpacedLayout::Spaced => {
            let mut rest: Vec<usize> = (0..spec.n).filter(|i| !hubs.contains(i)).collect();
            rest.shuffle(&mut rng);
            order = hubs.into_iter().chain(rest).collect();
        }
        SpacedLayout::Relocated => order.shuffle(&mut rng),
    }
    let cities = order.iter().zip(&sizes).map(|(&site, &s)| city_at(s, sites[site])).collect();
    let set = CitySet::from_unordered(cities)?;
    let d = planar_distance_matrix(&set)?;
    Ok((set, d))
}
