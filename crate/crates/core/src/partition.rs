//! Voronoi K-partitions, size-matched random partitions, spatial
//! hierarchical L-partitions with their random counterparts, and global
//! hinterlands.
//!
//! City ids follow the `CitySet` order, so "the L largest members" of any
//! member list sorted ascending are simply its first L entries. Every member
//! list built here is kept sorted.

use std::collections::VecDeque;

use rand::Rng;
use serde::Serialize;

use crate::cities::CitySet;
use crate::error::{Error, Result};
use crate::geo::DistanceMatrix;

/// Source of uniform integers in `0..bound`. Implemented for every `rand::Rng`;
/// tests drive it with scripted choices to enumerate outcomes exactly.
pub trait IndexSource {
    fn below(&mut self, bound: usize) -> usize;
}

impl<R: Rng + ?Sized> IndexSource for R {
    #[inline]
    fn below(&mut self, bound: usize) -> usize {
        self.random_range(0..bound)
    }
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T, S: IndexSource + ?Sized>(items: &mut [T], src: &mut S) {
    for i in (1..items.len()).rev() {
        let j = src.below(i + 1);
        items.swap(i, j);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    cell_of: Vec<usize>,
    centers: Option<Vec<usize>>,
    k: usize,
}

impl Partition {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cell_of(&self, city: usize) -> usize {
        self.cell_of[city]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.cell_of
    }

    pub fn centers(&self) -> Option<&[usize]> {
        self.centers.as_deref()
    }

    pub fn cell_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.cell_of {
            sizes[c] += 1;
        }
        sizes
    }

    /// Members of every cell, ascending.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.k];
        for (city, &c) in self.cell_of.iter().enumerate() {
            cells[c].push(city);
        }
        cells
    }

    /// Number of distinct cells holding at least one of cities `0..l`.
    pub fn cells_hit_by_largest(&self, l: usize) -> usize {
        let mut hit = vec![false; self.k];
        self.cell_of[..l].iter().filter(|&&c| !std::mem::replace(&mut hit[c], true)).count()
    }
}

fn check_centers(n: usize, centers: &[usize]) -> Result<()> {
    if centers.is_empty() {
        return Err(Error::Argument("at least one center is required".into()));
    }
    let mut seen = vec![false; n];
    for &c in centers {
        if c >= n {
            return Err(Error::Argument(format!("center {c} is not a city id (n = {n})")));
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(Error::Argument(format!("duplicate center {c}")));
        }
    }
    Ok(())
}

/// Nearest center for `city`, by distance from the city to the center.
/// Ties go to the earlier center in the list; `None` if every center is
/// unreachable.
#[inline]
fn nearest_center(d: &DistanceMatrix, city: usize, centers: &[usize]) -> Option<usize> {
    let row = d.row(city);
    let mut best = f64::INFINITY;
    let mut best_k = None;
    for (k, &c) in centers.iter().enumerate() {
        let v = row[c];
        if v < best {
            best = v;
            best_k = Some(k);
        }
    }
    best_k
}

fn unreachable(city: usize, centers: &[usize]) -> Error {
    Error::Connectivity(format!("city {city} cannot reach any of the centers {centers:?}"))
}

/// Voronoi K-partition of all cities generated by `centers`.
pub fn voronoi_partition(cities: &CitySet, centers: &[usize], d: &DistanceMatrix) -> Result<Partition> {
    let n = cities.len();
    if d.n() != n {
        return Err(Error::Argument(format!("distance matrix is {}x{0} but there are {n} cities", d.n())));
    }
    check_centers(n, centers)?;
    let mut center_cell = vec![usize::MAX; n];
    for (k, &c) in centers.iter().enumerate() {
        center_cell[c] = k;
    }
    let cell_of = (0..n)
        .map(|city| match center_cell[city] {
            usize::MAX => nearest_center(d, city, centers).ok_or_else(|| unreachable(city, centers)),
            k => Ok(k),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Partition { cell_of, centers: Some(centers.to_vec()), k: centers.len() })
}

/// Uniform sample of `k` distinct city ids.
pub fn random_centers<R: Rng + ?Sized>(cities: &CitySet, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    sample_ids(cities.len(), k, rng)
}

pub(crate) fn sample_ids<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::Argument(format!("cannot draw {k} centers from {n} cities")));
    }
    Ok(rand::seq::index::sample(rng, n, k).into_vec())
}

/// Slot labels for a shuffle: `sizes[k] - reserved[k]` copies of `k`.
fn slot_labels(sizes: &[usize], reserved: impl Fn(usize) -> usize) -> Vec<usize> {
    let mut labels = Vec::with_capacity(sizes.iter().sum());
    for (k, &s) in sizes.iter().enumerate() {
        labels.extend(std::iter::repeat_n(k, s - reserved(k)));
    }
    labels
}

/// Random partition with prescribed cell sizes, optionally with `pinned[k]`
/// fixed in cell `k`. Remaining cities fill the remaining slots uniformly.
pub fn random_partition_with_sizes<S: IndexSource + ?Sized>(
    cities: &CitySet,
    sizes: &[usize],
    src: &mut S,
    pinned: Option<&[usize]>,
) -> Result<Partition> {
    let n = cities.len();
    let total: usize = sizes.iter().sum();
    if total != n {
        return Err(Error::Argument(format!("cell sizes sum to {total}, expected {n}")));
    }
    let mut cell_of = vec![usize::MAX; n];
    if let Some(pinned) = pinned {
        if pinned.len() != sizes.len() {
            return Err(Error::Argument(format!(
                "{} pinned cities for {} cells",
                pinned.len(),
                sizes.len()
            )));
        }
        check_centers(n, pinned)?;
        for (k, (&city, &s)) in pinned.iter().zip(sizes).enumerate() {
            if s == 0 {
                return Err(Error::Argument(format!("cell {k} has size 0 but a pinned city")));
            }
            cell_of[city] = k;
        }
    }
    let mut labels = slot_labels(sizes, |k| usize::from(pinned.is_some() && sizes[k] > 0));
    shuffle(&mut labels, src);
    let mut next = labels.into_iter();
    for slot in cell_of.iter_mut().filter(|c| **c == usize::MAX) {
        *slot = next.next().expect("slot count matches free cities");
    }
    Ok(Partition {
        cell_of,
        centers: pinned.map(<[usize]>::to_vec),
        k: sizes.len(),
    })
}

/// Draws cell labels for cities `0..l` of a partition with the given cell
/// sizes, without materializing the rest of the partition.
///
/// Cell labels sit in one slot per city; a partial Fisher-Yates pass picks
/// `l` slots uniformly without replacement, which is the sequential
/// weighted draw over remaining slot counts.
#[derive(Debug, Clone)]
pub struct LabelSampler {
    slots: Vec<u32>,
    canonical: Vec<u32>,
    swaps: Vec<u32>,
    marks: Vec<u32>,
    epoch: u32,
}

impl LabelSampler {
    pub fn new(sizes: &[usize]) -> Self {
        let mut slots = Vec::with_capacity(sizes.iter().sum());
        for (k, &s) in sizes.iter().enumerate() {
            slots.extend(std::iter::repeat_n(k as u32, s));
        }
        LabelSampler {
            canonical: slots.clone(),
            slots,
            swaps: Vec::new(),
            marks: vec![0; sizes.len()],
            epoch: 0,
        }
    }

    fn next_epoch(&mut self) -> u32 {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.marks.fill(0);
            self.epoch = 1;
        }
        self.epoch
    }

    /// Distinct cells among the `l` largest cities, sampling only their labels.
    ///
    /// The slot array is restored afterwards, so the outcome depends only on
    /// the choices drawn from `src`.
    pub fn count_distinct<S: IndexSource + ?Sized>(&mut self, l: usize, src: &mut S) -> usize {
        let n = self.slots.len();
        let epoch = self.next_epoch();
        let mut distinct = 0;
        self.swaps.clear();
        for i in 0..l {
            let j = i + src.below(n - i);
            self.slots.swap(i, j);
            self.swaps.push(j as u32);
            let cell = self.slots[i] as usize;
            if self.marks[cell] != epoch {
                self.marks[cell] = epoch;
                distinct += 1;
            }
        }
        for (i, &j) in self.swaps.iter().enumerate().rev() {
            self.slots.swap(i, j as usize);
        }
        distinct
    }

    /// Same statistic via a full shuffle of every city's label.
    pub fn count_distinct_full_shuffle<S: IndexSource + ?Sized>(&mut self, l: usize, src: &mut S) -> usize {
        self.slots.copy_from_slice(&self.canonical);
        shuffle(&mut self.slots, src);
        let epoch = self.next_epoch();
        let mut distinct = 0;
        for i in 0..l {
            let cell = self.slots[i] as usize;
            if self.marks[cell] != epoch {
                self.marks[cell] = epoch;
                distinct += 1;
            }
        }
        distinct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Spatial,
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellNode {
    /// Root is layer 1.
    pub layer: usize,
    pub center: usize,
    /// Sorted ascending, i.e. largest city first.
    pub members: Vec<usize>,
    /// Indices into `HierarchicalPartition::nodes`.
    pub children: Vec<usize>,
    #[serde(skip)]
    pub parent: Option<usize>,
}

/// Tree of nested cells stored breadth-first; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HierarchicalPartition {
    pub l: usize,
    pub provenance: Provenance,
    pub nodes: Vec<CellNode>,
}

impl HierarchicalPartition {
    pub fn root(&self) -> &CellNode {
        &self.nodes[0]
    }

    pub fn n_cities(&self) -> usize {
        self.nodes[0].members.len()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.layer).max().unwrap_or(0)
    }

    /// Number of cells across all layers, root included.
    pub fn cell_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

fn check_l(l: usize) -> Result<()> {
    if l < 2 {
        return Err(Error::Argument(format!("L must be at least 2, got {l}")));
    }
    Ok(())
}

/// Splits every region with at least `l` cities into the Voronoi cells of
/// its `l` largest cities, recursively.
pub fn build_spatial_hierarchy(cities: &CitySet, l: usize, d: &DistanceMatrix) -> Result<HierarchicalPartition> {
    check_l(l)?;
    let n = cities.len();
    if n == 0 {
        return Err(Error::Argument("cannot build a hierarchy over zero cities".into()));
    }
    if d.n() != n {
        return Err(Error::Argument(format!("distance matrix is {}x{0} but there are {n} cities", d.n())));
    }
    let mut nodes = vec![CellNode {
        layer: 1,
        center: 0,
        members: (0..n).collect(),
        children: Vec::new(),
        parent: None,
    }];
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        if nodes[idx].members.len() < l {
            continue;
        }
        let members = std::mem::take(&mut nodes[idx].members);
        let centers = &members[..l];
        let mut child_members = vec![Vec::new(); l];
        for (pos, &city) in members.iter().enumerate() {
            let k = if pos < l {
                pos
            } else {
                nearest_center(d, city, centers).ok_or_else(|| unreachable(city, centers))?
            };
            child_members[k].push(city);
        }
        let layer = nodes[idx].layer + 1;
        for (k, m) in child_members.into_iter().enumerate() {
            let child = nodes.len();
            nodes.push(CellNode { layer, center: centers[k], members: m, children: Vec::new(), parent: Some(idx) });
            nodes[idx].children.push(child);
            queue.push_back(child);
        }
        nodes[idx].members = members;
    }
    Ok(HierarchicalPartition { l, provenance: Provenance::Spatial, nodes })
}

/// Random counterpart of `template`: at every split, the node's `l` largest
/// cities are pinned one per child and the rest are dealt out at random so
/// that each child has exactly the template's size at that position.
pub fn build_random_hierarchy<S: IndexSource + ?Sized>(
    template: &HierarchicalPartition,
    cities: &CitySet,
    src: &mut S,
) -> Result<HierarchicalPartition> {
    let n = cities.len();
    if template.n_cities() != n {
        return Err(Error::Argument(format!(
            "template covers {} cities but the city set has {n}",
            template.n_cities()
        )));
    }
    let l = template.l;
    let mut nodes: Vec<CellNode> = Vec::with_capacity(template.nodes.len());
    nodes.push(CellNode {
        layer: 1,
        center: 0,
        members: (0..n).collect(),
        children: Vec::new(),
        parent: None,
    });
    let mut labels = Vec::new();
    // Template nodes are breadth-first and children are appended in the same
    // order here, so node i mirrors template node i.
    for (idx, tnode) in template.nodes.iter().enumerate() {
        if tnode.children.is_empty() {
            continue;
        }
        if tnode.children.len() != l || nodes[idx].members.len() != tnode.members.len() {
            return Err(Error::Argument(format!("template node {idx} is not a valid {l}-split")));
        }
        let members = std::mem::take(&mut nodes[idx].members);
        labels.clear();
        for (k, &child) in tnode.children.iter().enumerate() {
            let size = template.nodes[child].members.len();
            labels.extend(std::iter::repeat_n(k, size - 1));
        }
        shuffle(&mut labels, src);
        let mut child_members: Vec<Vec<usize>> = tnode
            .children
            .iter()
            .enumerate()
            .map(|(k, &child)| {
                let mut v = Vec::with_capacity(template.nodes[child].members.len());
                v.push(members[k]);
                v
            })
            .collect();
        for (&city, &k) in members[l..].iter().zip(&labels) {
            child_members[k].push(city);
        }
        let layer = nodes[idx].layer + 1;
        for (k, m) in child_members.into_iter().enumerate() {
            let child = nodes.len();
            nodes.push(CellNode { layer, center: members[k], members: m, children: Vec::new(), parent: Some(idx) });
            nodes[idx].children.push(child);
        }
        nodes[idx].members = members;
    }
    Ok(HierarchicalPartition { l, provenance: Provenance::Random, nodes })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Hinterland {
    pub center: usize,
    pub layer: usize,
    /// Sorted ascending (largest first); the center is always first.
    pub members: Vec<usize>,
}

/// One global hinterland per distinct central city, ordered by center id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HinterlandSet {
    pub entries: Vec<Hinterland>,
    /// Cell count of the hierarchy the hinterlands came from.
    pub cell_count: usize,
}

impl HinterlandSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Member set of the shallowest cell each central city heads.
pub fn global_hinterlands(h: &HierarchicalPartition) -> HinterlandSet {
    // Breadth-first storage means the first node seen for a center is its
    // shallowest.
    let n = h.n_cities();
    let mut seen = vec![false; n];
    let mut entries = Vec::new();
    for node in &h.nodes {
        if !std::mem::replace(&mut seen[node.center], true) {
            entries.push(Hinterland { center: node.center, layer: node.layer, members: node.members.clone() });
        }
    }
    entries.sort_by_key(|e| e.center);
    HinterlandSet { entries, cell_count: h.nodes.len() }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::cities::City;
    use crate::geo::DistanceProvider;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    /// Replays every sequence of choices a randomized procedure can make.
    #[derive(Default)]
    pub(crate) struct Script {
        choices: Vec<usize>,
        bounds: Vec<usize>,
        pos: usize,
    }

    impl IndexSource for Script {
        fn below(&mut self, bound: usize) -> usize {
            if self.pos == self.choices.len() {
                self.choices.push(0);
                self.bounds.push(bound);
            }
            assert_eq!(self.bounds[self.pos], bound, "choice bounds must not depend on earlier choices");
            let c = self.choices[self.pos];
            self.pos += 1;
            c
        }
    }

    /// Calls `f` once per choice path; all paths are equally likely.
    pub(crate) fn for_each_path(mut f: impl FnMut(&mut Script)) -> u64 {
        let mut s = Script::default();
        let mut paths = 0;
        loop {
            s.pos = 0;
            f(&mut s);
            paths += 1;
            assert_eq!(s.pos, s.choices.len());
            let mut advanced = false;
            while let (Some(c), Some(b)) = (s.choices.pop(), s.bounds.pop()) {
                if c + 1 < b {
                    s.choices.push(c + 1);
                    s.bounds.push(b);
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                return paths;
            }
        }
    }

    pub(crate) fn line_cities(positions_km: &[f64], sizes: &[f64]) -> (CitySet, DistanceMatrix) {
        // Sizes are given in any order; ids follow the size order.
        let mut order: Vec<usize> = (0..sizes.len()).collect();
        order.sort_by(|&a, &b| sizes[b].total_cmp(&sizes[a]).then(a.cmp(&b)));
        let cities: Vec<City> = order
            .iter()
            .enumerate()
            .map(|(id, &i)| City { id, ..City::point(sizes[i], 0.0, 0.0) })
            .collect();
        let set = CitySet::from_ordered(cities).unwrap();
        let pos: Vec<f64> = order.iter().map(|&i| positions_km[i]).collect();
        let d = DistanceMatrix::from_fn(pos.len(), DistanceProvider::Planar, |i, j| (pos[i] - pos[j]).abs() * 1000.0)
            .unwrap();
        (set, d)
    }

    fn random_plane(seed: u64, n: usize) -> (CitySet, DistanceMatrix, Vec<(f64, f64)>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>() * 100.0, rng.random::<f64>() * 100.0)).collect();
        let cities = (0..n).map(|i| City { id: i, ..City::point((n - i) as f64, 0.0, 0.0) }).collect();
        let set = CitySet::from_ordered(cities).unwrap();
        let d = DistanceMatrix::from_fn(n, DistanceProvider::Planar, |i, j| {
            ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt()
        })
        .unwrap();
        (set, d, pts)
    }

    #[test]
    fn voronoi_degenerate_k() {
        let (set, d, _) = random_plane(1, 12);
        let all: Vec<usize> = (0..12).rev().collect();
        let p = voronoi_partition(&set, &all, &d).unwrap();
        assert_eq!(p.cell_sizes(), vec![1; 12]);
        for (k, &c) in all.iter().enumerate() {
            assert_eq!(p.cell_of(c), k);
        }
        let p = voronoi_partition(&set, &[5], &d).unwrap();
        assert_eq!(p.cell_sizes(), vec![12]);
    }

    #[test]
    fn voronoi_matches_exhaustive_scan() {
        let (set, d, pts) = random_plane(2, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let centers = random_centers(&set, 4, &mut rng).unwrap();
        let p = voronoi_partition(&set, &centers, &d).unwrap();
        for (city, &(x, y)) in pts.iter().enumerate() {
            let dists: Vec<f64> = centers
                .iter()
                .map(|&c| ((x - pts[c].0).powi(2) + (y - pts[c].1).powi(2)).sqrt())
                .collect();
            let best = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            let expected = dists.iter().position(|&v| v == best).unwrap();
            assert_eq!(p.cell_of(city), expected);
        }
    }

    #[test]
    fn voronoi_errors_and_ties() {
        let (set, d) = line_cities(&[0.0, 10.0, 20.0], &[3.0, 2.0, 1.0]);
        assert!(matches!(voronoi_partition(&set, &[0, 0], &d), Err(Error::Argument(_))));
        // City 1 (at 10 km) is equidistant from 0 and 2; the earlier center wins.
        let p = voronoi_partition(&set, &[2, 0], &d).unwrap();
        assert_eq!(p.cell_of(1), 0);
        let p = voronoi_partition(&set, &[0, 2], &d).unwrap();
        assert_eq!(p.cell_of(1), 0);

        let inf = f64::INFINITY;
        let d = DistanceMatrix::new(3, vec![0.0, 1.0, inf, 1.0, 0.0, inf, inf, inf, 0.0], DistanceProvider::Loaded)
            .unwrap();
        assert!(matches!(voronoi_partition(&set, &[0, 1], &d), Err(Error::Connectivity(_))));
    }

    #[test]
    fn random_centers_cases() {
        let (set, _, _) = random_plane(4, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut all = random_centers(&set, 7, &mut rng).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
        assert!(matches!(random_centers(&set, 8, &mut rng), Err(Error::Argument(_))));
        let (one, _, _) = random_plane(4, 1);
        assert_eq!(random_centers(&one, 1, &mut rng).unwrap(), vec![0]);
    }

    #[test]
    fn random_center_pairs_are_uniform() {
        let (set, _, _) = random_plane(6, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let mut freq: HashMap<(usize, usize), u32> = HashMap::new();
        for _ in 0..draws {
            let c = random_centers(&set, 2, &mut rng).unwrap();
            *freq.entry((c[0].min(c[1]), c[0].max(c[1]))).or_default() += 1;
        }
        assert_eq!(freq.len(), 10);
        let p = 0.1;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for &count in freq.values() {
            assert!((count as f64 - draws as f64 * p).abs() < 4.0 * sigma, "{count}");
        }
    }

    #[test]
    fn random_partition_edge_cases() {
        let (set, _, _) = random_plane(8, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_partition_with_sizes(&set, &[6], &mut rng, None).unwrap();
        assert_eq!(p.assignments(), &[0; 6]);
        let ident: Vec<usize> = (0..6).collect();
        let p = random_partition_with_sizes(&set, &[1; 6], &mut rng, Some(&ident)).unwrap();
        assert_eq!(p.assignments(), ident.as_slice());
        let p = random_partition_with_sizes(&set, &[1; 6], &mut rng, None).unwrap();
        let mut cells = p.assignments().to_vec();
        cells.sort_unstable();
        assert_eq!(cells, ident);
        assert!(matches!(
            random_partition_with_sizes(&set, &[2, 2], &mut rng, None),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn random_partition_is_exactly_uniform() {
        let (set, _, _) = random_plane(10, 6);
        let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
        let paths = for_each_path(|s| {
            let p = random_partition_with_sizes(&set, &[2, 2, 2], s, None).unwrap();
            *counts.entry(p.assignments().to_vec()).or_default() += 1;
        });
        assert_eq!(counts.len(), 90);
        assert!(counts.values().all(|&c| c * 90 == paths));
    }

    #[test]
    fn pinned_random_partition_keeps_pins_and_sizes() {
        let (set, _, _) = random_plane(11, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let p = random_partition_with_sizes(&set, &[4, 1, 4], &mut rng, Some(&[0, 1, 2])).unwrap();
            assert_eq!(p.cell_sizes(), vec![4, 1, 4]);
            assert_eq!(&p.assignments()[..3], &[0, 1, 2]);
        }
    }

    #[test]
    fn label_sampler_matches_full_shuffle_exactly() {
        for sizes in [vec![2, 2, 2], vec![3, 1, 1, 1], vec![5, 1], vec![1, 1, 1, 1, 1, 1]] {
            let n: usize = sizes.iter().sum();
            for l in 1..=n {
                let mut full = vec![0u64; n + 1];
                let full_paths = for_each_path(|s| {
                    let mut sampler = LabelSampler::new(&sizes);
                    full[sampler.count_distinct_full_shuffle(l, s)] += 1;
                });
                let mut short = vec![0u64; n + 1];
                let short_paths = for_each_path(|s| {
                    let mut sampler = LabelSampler::new(&sizes);
                    short[sampler.count_distinct(l, s)] += 1;
                });
                for c in 0..=n {
                    assert_eq!(full[c] * short_paths, short[c] * full_paths, "sizes {sizes:?}, l {l}");
                }
            }
        }
    }

    #[test]
    fn hierarchy_stops_below_l() {
        let (set, d) = line_cities(&[0.0, 5.0], &[2.0, 1.0]);
        let h = build_spatial_hierarchy(&set, 3, &d).unwrap();
        assert_eq!(h.cell_count(), 1);
        assert!(h.root().children.is_empty());
        assert!(matches!(build_spatial_hierarchy(&set, 1, &d), Err(Error::Argument(_))));
    }

    #[test]
    fn hierarchy_hand_simulated_on_a_line() {
        // Sizes 5, 3, 1 at 0, 100 and 10 km.
        let (set, d) = line_cities(&[0.0, 100.0, 10.0], &[5.0, 3.0, 1.0]);
        let h = build_spatial_hierarchy(&set, 2, &d).unwrap();
        let shape: Vec<(usize, usize, Vec<usize>)> =
            h.nodes.iter().map(|n| (n.layer, n.center, n.members.clone())).collect();
        assert_eq!(
            shape,
            vec![
                (1, 0, vec![0, 1, 2]),
                (2, 0, vec![0, 2]),
                (2, 1, vec![1]),
                (3, 0, vec![0]),
                (3, 2, vec![2]),
            ]
        );
        let hl = global_hinterlands(&h);
        let got: Vec<(usize, usize, Vec<usize>)> =
            hl.entries.iter().map(|e| (e.center, e.layer, e.members.clone())).collect();
        assert_eq!(got, vec![(0, 1, vec![0, 1, 2]), (1, 2, vec![1]), (2, 3, vec![2])]);
    }

    #[test]
    fn random_hierarchy_trivial_templates() {
        let (set, d) = line_cities(&[0.0, 5.0], &[2.0, 1.0]);
        let leaf = build_spatial_hierarchy(&set, 3, &d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = build_random_hierarchy(&leaf, &set, &mut rng).unwrap();
        assert_eq!(r.nodes, leaf.nodes);

        let (set, d) = line_cities(&[0.0, 5.0, 9.0], &[3.0, 2.0, 1.0]);
        let t = build_spatial_hierarchy(&set, 3, &d).unwrap();
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = build_random_hierarchy(&t, &set, &mut rng).unwrap();
            let kids: Vec<Vec<usize>> = r.root().children.iter().map(|&c| r.nodes[c].members.clone()).collect();
            assert_eq!(kids, vec![vec![0], vec![1], vec![2]]);
        }
        let (other, _) = line_cities(&[0.0, 5.0], &[2.0, 1.0]);
        assert!(matches!(build_random_hierarchy(&t, &other, &mut rng_for(0)), Err(Error::Argument(_))));
    }

    fn rng_for(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn random_hierarchy_is_uniform_over_admissible_assignments() {
        // Six cities, L = 2: root splits 4/2, the 4-cell splits 3/1, the 3-cell
        // splits 2/1, the 2-cells split 1/1.
        let (set, d) = line_cities(&[0.0, 100.0, 10.0, 101.0, 12.0, 30.0], &[6.0, 5.0, 4.0, 3.0, 2.0, 1.0]);
        let t = build_spatial_hierarchy(&set, 2, &d).unwrap();
        let template_sizes: Vec<usize> = t.nodes.iter().map(|n| n.members.len()).collect();
        let mut outcomes: HashMap<Vec<Vec<usize>>, u64> = HashMap::new();
        let paths = for_each_path(|s| {
            let r = build_random_hierarchy(&t, &set, s).unwrap();
            let sizes: Vec<usize> = r.nodes.iter().map(|n| n.members.len()).collect();
            assert_eq!(sizes, template_sizes);
            let leaves: Vec<Vec<usize>> = r.nodes.iter().map(|n| n.members.clone()).collect();
            *outcomes.entry(leaves).or_default() += 1;
        });
        // Count admissible outcomes independently: at every split the non-pinned
        // members are dealt into the children's free slots.
        let mut admissible: u64 = 1;
        for node in &t.nodes {
            if node.children.is_empty() {
                continue;
            }
            let mut free = node.members.len() - t.l;
            for &c in &node.children {
                let slots = t.nodes[c].members.len() - 1;
                admissible *= binomial(free, slots);
                free -= slots;
            }
        }
        assert_eq!(outcomes.len() as u64, admissible);
        assert!(outcomes.values().all(|&c| c * admissible == paths));
    }

    fn binomial(n: usize, k: usize) -> u64 {
        (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i as u64 + 1))
    }

    #[test]
    fn hinterlands_match_tree_scan() {
        for seed in 0..20 {
            let (set, d, _) = random_plane(100 + seed, 25);
            let h = build_spatial_hierarchy(&set, 2 + (seed as usize % 3), &d).unwrap();
            let hl = global_hinterlands(&h);
            let mut centers: Vec<usize> = h.nodes.iter().map(|n| n.center).collect();
            centers.sort_unstable();
            centers.dedup();
            assert_eq!(hl.len(), centers.len());
            for e in &hl.entries {
                let best = h
                    .nodes
                    .iter()
                    .filter(|n| n.center == e.center)
                    .min_by_key(|n| n.layer)
                    .unwrap();
                assert_eq!(best.layer, e.layer);
                assert_eq!(best.members, e.members);
            }
            assert_eq!(hl.entries[0].members.len(), 25);
        }
    }

    #[test]
    fn hierarchy_json_has_tree_fields() {
        let (set, d) = line_cities(&[0.0, 100.0, 10.0], &[5.0, 3.0, 1.0]);
        let h = build_spatial_hierarchy(&set, 2, &d).unwrap();
        let v: serde_json::Value = serde_json::from_str(&h.to_json().unwrap()).unwrap();
        assert_eq!(v["nodes"][0]["layer"], 1);
        assert_eq!(v["nodes"][0]["children"], serde_json::json!([1, 2]));
        assert_eq!(v["nodes"][1]["members"], serde_json::json!([0, 2]));
    }
}
