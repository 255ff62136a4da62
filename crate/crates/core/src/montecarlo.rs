//! Monte Carlo tests of the spacing-out property and of the spatial common
//! power law.
//!
//! Every replicate draws from its own substream keyed by the master seed, the
//! test name, its parameters and the replicate index, so results are
//! identical for any thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::cities::CitySet;
use crate::error::{Error, Result};
use crate::geo::DistanceMatrix;
use crate::partition::{
    build_random_hierarchy, build_spatial_hierarchy, global_hinterlands, sample_ids, voronoi_partition,
    HierarchicalPartition, HinterlandSet, LabelSampler,
};
use crate::rng::substream;
use crate::stats::{cpl_from_within, within_fit, CplFit, LnRankTable, RankSizeSample};

/// Significance bands used to report p-values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum SignificanceClass {
    #[serde(rename = "p<0.01")]
    Below001,
    #[serde(rename = "0.01<=p<0.05")]
    Below005,
    #[serde(rename = "0.05<=p<0.1")]
    Below010,
    #[serde(rename = "p>=0.1")]
    NotSignificant,
}

impl SignificanceClass {
    pub fn of(p: f64) -> Self {
        if p < 0.01 {
            SignificanceClass::Below001
        } else if p < 0.05 {
            SignificanceClass::Below005
        } else if p < 0.1 {
            SignificanceClass::Below010
        } else {
            SignificanceClass::NotSignificant
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SignificanceClass::Below001 => "p<0.01",
            SignificanceClass::Below005 => "0.01<=p<0.05",
            SignificanceClass::Below010 => "0.05<=p<0.1",
            SignificanceClass::NotSignificant => "p>=0.1",
        }
    }
}

/// How the size-matched random partitions of the spacing test are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomPartitionMode {
    /// Draw labels for the L largest cities only.
    #[default]
    LargestLabels,
    /// Shuffle every city's label.
    FullShuffle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacingOptions {
    pub replicates: usize,
    pub seed: u64,
    pub mode: RandomPartitionMode,
}

impl Default for SpacingOptions {
    fn default() -> Self {
        SpacingOptions { replicates: 1000, seed: 0, mode: RandomPartitionMode::LargestLabels }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpacingTestResult {
    pub k: usize,
    pub l: usize,
    /// Replicate count `M`, used both for Voronoi partitions and for random
    /// partitions per Voronoi partition.
    pub m: usize,
    pub mean_count_voronoi: f64,
    /// Count of random mean-counts at least as large as the Voronoi one,
    /// plus one for the observed case.
    pub m0: usize,
    pub p0: f64,
    pub class: SignificanceClass,
    pub seed: u64,
    pub mode: RandomPartitionMode,
    pub voronoi_counts: Vec<u32>,
    pub mean_counts_random: Vec<f64>,
}

fn check_range(name: &str, value: usize, n: usize) -> Result<()> {
    if value == 0 || value > n {
        return Err(Error::Argument(format!("{name} = {value} must lie in 1..={n}")));
    }
    Ok(())
}

/// Random Voronoi K-partitions against size-matched random K-partitions,
/// compared by how many cells hold at least one of the L largest cities.
pub fn spacing_out_test(
    cities: &CitySet,
    d: &DistanceMatrix,
    k: usize,
    l: usize,
    opts: &SpacingOptions,
) -> Result<SpacingTestResult> {
    let n = cities.len();
    check_range("K", k, n)?;
    check_range("L", l, n)?;
    if opts.replicates == 0 {
        return Err(Error::Argument("M must be at least 1".into()));
    }
    let m = opts.replicates;
    let key = [k as u64, l as u64];

    let voronoi: Vec<(u32, Vec<usize>)> = (0..m)
        .into_par_iter()
        .map(|v| {
            let mut rng = substream(opts.seed, "spacing/voronoi", &[key[0], key[1], v as u64]);
            let centers = sample_ids(n, k, &mut rng)?;
            let p = voronoi_partition(cities, &centers, d)?;
            Ok((p.cells_hit_by_largest(l) as u32, p.cell_sizes()))
        })
        .collect::<Result<_>>()?;
    let observed_sum: u64 = voronoi.iter().map(|(c, _)| u64::from(*c)).sum();
    let samplers: Vec<LabelSampler> = voronoi.iter().map(|(_, sizes)| LabelSampler::new(sizes)).collect();

    let random_sums: Vec<u64> = (0..m)
        .into_par_iter()
        .map_init(
            || samplers.clone(),
            |samplers, omega| {
                let mut rng = substream(opts.seed, "spacing/random", &[key[0], key[1], omega as u64]);
                samplers
                    .iter_mut()
                    .map(|s| match opts.mode {
                        RandomPartitionMode::LargestLabels => s.count_distinct(l, &mut rng),
                        RandomPartitionMode::FullShuffle => s.count_distinct_full_shuffle(l, &mut rng),
                    } as u64)
                    .sum()
            },
        )
        .collect();

    // Means share the denominator M, so comparing sums is exact.
    let m0 = 1 + random_sums.iter().filter(|&&s| s >= observed_sum).count();
    let p0 = m0 as f64 / (m + 1) as f64;
    Ok(SpacingTestResult {
        k,
        l,
        m,
        mean_count_voronoi: observed_sum as f64 / m as f64,
        m0,
        p0,
        class: SignificanceClass::of(p0),
        seed: opts.seed,
        mode: opts.mode,
        voronoi_counts: voronoi.iter().map(|(c, _)| *c).collect(),
        mean_counts_random: random_sums.iter().map(|&s| s as f64 / m as f64).collect(),
    })
}

/// One spacing test per `(K, L)` pair, in row-major order over `ks` then `ls`.
pub fn spacing_grid(
    cities: &CitySet,
    d: &DistanceMatrix,
    ks: &[usize],
    ls: &[usize],
    opts: &SpacingOptions,
) -> Result<Vec<SpacingTestResult>> {
    if ks.is_empty() || ls.is_empty() {
        return Err(Error::Argument("K and L lists must be nonempty".into()));
    }
    let mut out = Vec::with_capacity(ks.len() * ls.len());
    for &k in ks {
        for &l in ls {
            out.push(spacing_out_test(cities, d, k, l, opts)?);
        }
    }
    Ok(out)
}

/// Evaluates the common-slope fit on the global hinterlands of a hierarchy.
#[derive(Debug, Clone)]
pub struct CplEvaluator {
    ln_sizes: Vec<f64>,
    table: LnRankTable,
    pub min_subset_size: usize,
}

impl CplEvaluator {
    pub fn new(cities: &CitySet, min_subset_size: usize) -> Self {
        CplEvaluator {
            ln_sizes: cities.cities().iter().map(|c| c.population.ln()).collect(),
            table: LnRankTable::new(cities.len()),
            min_subset_size,
        }
    }

    /// Hinterlands with at least `min_subset_size` members.
    pub fn eligible<'a>(&self, hl: &'a HinterlandSet) -> impl Iterator<Item = &'a crate::partition::Hinterland> + 'a {
        let min = self.min_subset_size.max(1);
        hl.entries.iter().filter(move |e| e.members.len() >= min)
    }

    /// Rank-size samples of the eligible hinterlands, labeled by center id.
    pub fn samples(&self, cities: &CitySet, hl: &HinterlandSet) -> Result<Vec<RankSizeSample>> {
        self.eligible(hl)
            .map(|e| RankSizeSample::from_sorted(e.center, e.members.iter().map(|&c| cities.cities()[c].population).collect()))
            .collect()
    }

    pub fn fit(&self, hl: &HinterlandSet) -> Result<CplFit> {
        let mut ys = Vec::new();
        let mut offsets = vec![0];
        let mut ids = Vec::new();
        for e in self.eligible(hl) {
            ys.extend(e.members.iter().map(|&c| self.ln_sizes[c]));
            offsets.push(ys.len());
            ids.push(e.center);
        }
        let fit = within_fit(&ys, &offsets, &self.table)?;
        Ok(cpl_from_within(fit, ids))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CplOptions {
    pub replicates: usize,
    pub min_subset_size: usize,
    pub seed: u64,
}

impl Default for CplOptions {
    fn default() -> Self {
        CplOptions { replicates: 1000, min_subset_size: 2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CplTestResult {
    pub l: usize,
    /// Number of random hierarchies `N`.
    pub n: usize,
    pub rmse_observed: f64,
    /// Random RMSEs not exceeding the observed one, plus one for the observed.
    pub n_l: usize,
    pub p_l: f64,
    pub class: SignificanceClass,
    pub theta_hat: f64,
    /// Hinterlands entering the regression.
    pub m: usize,
    pub n_obs: usize,
    pub hinterland_count: usize,
    pub cell_count: usize,
    pub min_subset_size: usize,
    pub seed: u64,
    pub rmse_random: Vec<f64>,
}

fn degenerate_for(l: usize) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::Degeneracy(msg) => Error::Degeneracy(format!("L = {l}: {msg}")),
        other => other,
    }
}

/// Observed spatial hierarchy plus its fit, shared by the test and the
/// rank-size export.
pub fn observed_cpl(
    cities: &CitySet,
    d: &DistanceMatrix,
    l: usize,
    min_subset_size: usize,
) -> Result<(HierarchicalPartition, HinterlandSet, CplFit)> {
    let h = build_spatial_hierarchy(cities, l, d)?;
    let hl = global_hinterlands(&h);
    let fit = CplEvaluator::new(cities, min_subset_size).fit(&hl).map_err(degenerate_for(l))?;
    Ok((h, hl, fit))
}

/// RMSE of the observed spatial hierarchy against `N` size-template random
/// hierarchies; small p-values mean the spatial grouping fits a common
/// power law better than random grouping.
pub fn spatial_cpl_test(cities: &CitySet, d: &DistanceMatrix, l: usize, opts: &CplOptions) -> Result<CplTestResult> {
    if opts.replicates == 0 {
        return Err(Error::Argument("N must be at least 1".into()));
    }
    let (template, hl, fit) = observed_cpl(cities, d, l, opts.min_subset_size)?;
    let eval = CplEvaluator::new(cities, opts.min_subset_size);
    let rmse_random: Vec<f64> = (0..opts.replicates)
        .into_par_iter()
        .map(|v| {
            let mut rng = substream(opts.seed, "cpl/random", &[l as u64, v as u64]);
            let h = build_random_hierarchy(&template, cities, &mut rng)?;
            Ok(eval.fit(&global_hinterlands(&h)).map_err(degenerate_for(l))?.rmse)
        })
        .collect::<Result<_>>()?;
    let n_l = 1 + rmse_random.iter().filter(|&&r| r <= fit.rmse).count();
    let p_l = n_l as f64 / (opts.replicates + 1) as f64;
    Ok(CplTestResult {
        l,
        n: opts.replicates,
        rmse_observed: fit.rmse,
        n_l,
        p_l,
        class: SignificanceClass::of(p_l),
        theta_hat: fit.theta,
        m: fit.m,
        n_obs: fit.n_obs,
        hinterland_count: hl.len(),
        cell_count: hl.cell_count,
        min_subset_size: opts.min_subset_size,
        seed: opts.seed,
        rmse_random,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaRow {
    pub dataset: String,
    pub l: usize,
    pub theta_hat: f64,
    pub m: usize,
    pub n_obs: usize,
}

/// Common slope of the observed spatial hierarchy for every dataset and L.
pub fn theta_profile(
    datasets: &[(&str, &CitySet, &DistanceMatrix)],
    ls: &[usize],
    min_subset_size: usize,
) -> Result<Vec<ThetaRow>> {
    let mut rows = Vec::new();
    for &(name, cities, d) in datasets {
        for &l in ls {
            let (_, _, fit) = observed_cpl(cities, d, l, min_subset_size)?;
            rows.push(ThetaRow { dataset: name.to_string(), l, theta_hat: fit.theta, m: fit.m, n_obs: fit.n_obs });
        }
    }
    Ok(rows)
}
