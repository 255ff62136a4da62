//! Rank-size regressions.
//!
//! `fit_gi` regresses `ln s` on `ln(r - 0.5)`; `fit_cpl` pools several
//! subsets under one slope with a free intercept per subset. The pooled fit
//! is solved by demeaning within each subset, so its cost is linear in the
//! number of observations however many subsets there are.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RankSizeSample {
    pub subset_id: usize,
    /// Sizes in rank order; rank of `sizes[i]` is `i + 1`.
    pub sizes: Vec<f64>,
}

impl RankSizeSample {
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.sizes.iter().enumerate().map(|(i, &s)| (i + 1, s))
    }

    /// Builds a sample from sizes that are already nonincreasing.
    pub fn from_sorted(subset_id: usize, sizes: Vec<f64>) -> Result<Self> {
        check_sizes(&sizes)?;
        if sizes.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Data("sizes are not in nonincreasing order".into()));
        }
        Ok(RankSizeSample { subset_id, sizes })
    }
}

fn check_sizes(sizes: &[f64]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::Data("empty size list".into()));
    }
    if let Some(s) = sizes.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Data(format!("city size must be positive, got {s}")));
    }
    Ok(())
}

/// Sorts sizes in descending order; equal sizes keep their input order.
pub fn rank_sizes(populations: &[f64]) -> Result<RankSizeSample> {
    check_sizes(populations)?;
    let mut sizes = populations.to_vec();
    sizes.sort_by(|a, b| b.total_cmp(a));
    Ok(RankSizeSample { subset_id: 0, sizes })
}

/// `ln(r - 0.5)` for `r = 1..`, with prefix sums for subset means.
#[derive(Debug, Clone, Default)]
pub struct LnRankTable {
    x: Vec<f64>,
    prefix: Vec<f64>,
}

impl LnRankTable {
    pub fn new(max_rank: usize) -> Self {
        let mut t = LnRankTable { x: Vec::new(), prefix: vec![0.0] };
        t.ensure(max_rank);
        t
    }

    pub fn ensure(&mut self, max_rank: usize) {
        while self.x.len() < max_rank {
            let r = self.x.len() + 1;
            let v = (r as f64 - 0.5).ln();
            self.x.push(v);
            let last = *self.prefix.last().expect("prefix starts with 0");
            self.prefix.push(last + v);
        }
    }

    #[inline]
    pub fn x(&self, rank: usize) -> f64 {
        self.x[rank - 1]
    }

    #[inline]
    fn mean(&self, n: usize) -> f64 {
        self.prefix[n] / n as f64
    }
}

/// Pooled common-slope fit over groups of log sizes held in one flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct WithinFit {
    pub theta: f64,
    pub intercepts: Vec<f64>,
    pub ssr: f64,
    pub n_obs: usize,
}

/// `ln_sizes[offsets[j]..offsets[j + 1]]` holds group `j` in rank order.
pub(crate) fn within_fit(ln_sizes: &[f64], offsets: &[usize], table: &LnRankTable) -> Result<WithinFit> {
    let m = offsets.len().saturating_sub(1);
    let n_obs = ln_sizes.len();
    if m == 0 {
        return Err(Error::Degeneracy("no subsets to fit".into()));
    }
    if n_obs < m + 1 {
        return Err(Error::Degeneracy(format!("{n_obs} observations cannot identify {m} intercepts and a slope")));
    }
    let mut y_means = Vec::with_capacity(m);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for j in 0..m {
        let ys = &ln_sizes[offsets[j]..offsets[j + 1]];
        let nj = ys.len();
        let x_mean = table.mean(nj);
        let y_mean = ys.iter().sum::<f64>() / nj as f64;
        for (i, &y) in ys.iter().enumerate() {
            let dx = table.x(i + 1) - x_mean;
            sxx += dx * dx;
            sxy += dx * (y - y_mean);
        }
        y_means.push(y_mean);
    }
    if !(sxx > 0.0) {
        return Err(Error::Degeneracy("rank regressor has no within-subset variation".into()));
    }
    let slope = sxy / sxx;
    let mut ssr = 0.0;
    let mut intercepts = Vec::with_capacity(m);
    for j in 0..m {
        let ys = &ln_sizes[offsets[j]..offsets[j + 1]];
        let x_mean = table.mean(ys.len());
        let b = y_means[j] - slope * x_mean;
        for (i, &y) in ys.iter().enumerate() {
            let e = y - b - slope * table.x(i + 1);
            ssr += e * e;
        }
        intercepts.push(b);
    }
    Ok(WithinFit { theta: -slope, intercepts, ssr, n_obs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GiFit {
    /// Negated rank slope; the power-law exponent is `1 / theta`.
    pub theta: f64,
    pub b: f64,
    pub residuals: Vec<f64>,
    pub rmse: f64,
    pub n: usize,
}

impl GiFit {
    pub fn alpha(&self) -> f64 {
        1.0 / self.theta
    }

    /// Constant `c` of `Pr(S > s) ~ c s^-alpha`, from `b = ln(c n) / alpha`.
    pub fn c(&self) -> f64 {
        (self.b * self.alpha()).exp() / self.n as f64
    }
}

/// OLS of `ln s_i` on `ln(r_i - 0.5)` with intercept.
pub fn fit_gi(sample: &RankSizeSample) -> Result<GiFit> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::Degeneracy(format!("need at least 2 observations, got {n}")));
    }
    check_sizes(&sample.sizes)?;
    let table = LnRankTable::new(n);
    let ys: Vec<f64> = sample.sizes.iter().map(|s| s.ln()).collect();
    let fit = within_fit(&ys, &[0, n], &table)?;
    let b = fit.intercepts[0];
    let residuals: Vec<f64> = ys
        .iter()
        .enumerate()
        .map(|(i, &y)| y - (b - fit.theta * table.x(i + 1)))
        .collect();
    Ok(GiFit {
        theta: fit.theta,
        b,
        residuals,
        rmse: (fit.ssr / n as f64).sqrt(),
        n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CplFit {
    pub theta: f64,
    /// Intercept of the reference (first) subset.
    pub b1: f64,
    /// `beta_j = b_j - b1` for subsets `2..=m`.
    pub betas: Vec<f64>,
    pub rmse: f64,
    pub m: usize,
    pub n_obs: usize,
    pub subset_ids: Vec<usize>,
}

impl CplFit {
    /// Intercept of the `j`-th subset (0-based).
    pub fn intercept(&self, j: usize) -> f64 {
        if j == 0 {
            self.b1
        } else {
            self.b1 + self.betas[j - 1]
        }
    }

    pub fn fitted(&self, j: usize, rank: usize) -> f64 {
        self.intercept(j) - self.theta * (rank as f64 - 0.5).ln()
    }
}

/// Common-slope regression with one fixed effect per subset. RMSE divides
/// by the total observation count.
pub fn fit_cpl(samples: &[RankSizeSample]) -> Result<CplFit> {
    let mut ln_sizes = Vec::new();
    let mut offsets = vec![0];
    let mut max_n = 0;
    for s in samples {
        check_sizes(&s.sizes)?;
        ln_sizes.extend(s.sizes.iter().map(|v| v.ln()));
        offsets.push(ln_sizes.len());
        max_n = max_n.max(s.len());
    }
    let fit = within_fit(&ln_sizes, &offsets, &LnRankTable::new(max_n))?;
    Ok(cpl_from_within(fit, samples.iter().map(|s| s.subset_id).collect()))
}

pub(crate) fn cpl_from_within(fit: WithinFit, subset_ids: Vec<usize>) -> CplFit {
    let b1 = fit.intercepts[0];
    CplFit {
        theta: fit.theta,
        b1,
        betas: fit.intercepts[1..].iter().map(|b| b - b1).collect(),
        rmse: (fit.ssr / fit.n_obs as f64).sqrt(),
        m: fit.intercepts.len(),
        n_obs: fit.n_obs,
        subset_ids,
    }
}

/// Rows `subset_id,rank,size,ln_rank_adj,ln_size,fitted,residual`, logs natural.
pub fn write_rank_size_csv<W: std::io::Write>(
    samples: &[RankSizeSample],
    fit: &CplFit,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "subset_id,rank,size,ln_rank_adj,ln_size,fitted,residual")?;
    for (j, s) in samples.iter().enumerate() {
        for (rank, size) in s.pairs() {
            let fitted = fit.fitted(j, rank);
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                s.subset_id,
                rank,
                size,
                (rank as f64 - 0.5).ln(),
                size.ln(),
                fitted,
                size.ln() - fitted
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Pareto};

    fn zipf(c: f64, n: usize) -> Vec<f64> {
        (1..=n).map(|r| c * (r as f64 - 0.5).powi(-1)).collect()
    }

    #[test]
    fn rank_sizes_cases() {
        assert_eq!(rank_sizes(&[5.0]).unwrap().sizes, vec![5.0]);
        let s = rank_sizes(&[3.0, 9.0, 9.0]).unwrap();
        assert_eq!(s.pairs().collect::<Vec<_>>(), vec![(1, 9.0), (2, 9.0), (3, 3.0)]);
        assert!(matches!(rank_sizes(&[1.0, 0.0]), Err(Error::Data(_))));
        assert!(rank_sizes(&[]).is_err());
    }

    #[test]
    fn rank_sizes_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..1000).map(|_| rng.random_range(1.0..1e6)).collect();
        let mut oracle = v.clone();
        oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(rank_sizes(&v).unwrap().sizes, oracle);
    }

    #[test]
    fn gi_recovers_noiseless_zipf() {
        let s = RankSizeSample::from_sorted(0, zipf(1000.0, 50)).unwrap();
        let fit = fit_gi(&s).unwrap();
        assert!((fit.theta - 1.0).abs() < 1e-10);
        assert!((fit.b - 1000f64.ln()).abs() < 1e-10);
        assert!(fit.rmse < 1e-10);
        assert!((fit.alpha() - 1.0).abs() < 1e-10);
        assert!((fit.c() - 1000.0 / 50.0).abs() < 1e-8);
    }

    #[test]
    fn gi_three_points_match_normal_equations() {
        let s = RankSizeSample::from_sorted(0, vec![8.0, 4.0, 2.0]).unwrap();
        let fit = fit_gi(&s).unwrap();
        let x: Vec<f64> = [0.5f64, 1.5, 2.5].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [8.0f64, 4.0, 2.0].iter().map(|v| v.ln()).collect();
        // [n, Σx; Σx, Σx²] [b; slope] = [Σy; Σxy], solved by Cramer's rule.
        let (n, sx, sxx) = (3.0, x.iter().sum::<f64>(), x.iter().map(|v| v * v).sum::<f64>());
        let (sy, sxy) = (y.iter().sum::<f64>(), x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>());
        let det = n * sxx - sx * sx;
        let b = (sy * sxx - sx * sxy) / det;
        let slope = (n * sxy - sx * sy) / det;
        assert!((fit.b - b).abs() < 1e-12);
        assert!((fit.theta + slope).abs() < 1e-12);
        let ssr: f64 = fit.residuals.iter().map(|e| e * e).sum();
        assert!((fit.rmse - (ssr / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gi_recovers_pareto_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let pareto = Pareto::new(1.0, 1.0).unwrap();
        let draws: Vec<f64> = (0..10_000).map(|_| pareto.sample(&mut rng)).collect();
        let fit = fit_gi(&rank_sizes(&draws).unwrap()).unwrap();
        let band = 3.0 * (2.0f64 / 10_000.0).sqrt();
        assert!((fit.theta - 1.0).abs() < band, "theta {}", fit.theta);
    }

    #[test]
    fn gi_degenerate_inputs() {
        assert!(matches!(
            fit_gi(&RankSizeSample::from_sorted(0, vec![3.0]).unwrap()),
            Err(Error::Degeneracy(_))
        ));
    }

    #[test]
    fn cpl_single_subset_reduces_to_gi() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sizes: Vec<f64> = (0..40).map(|_| rng.random_range(1e4..1e6)).collect();
        let s = rank_sizes(&sizes).unwrap();
        let gi = fit_gi(&s).unwrap();
        let cpl = fit_cpl(std::slice::from_ref(&s)).unwrap();
        assert_eq!((cpl.theta, cpl.b1, cpl.rmse), (gi.theta, gi.b, gi.rmse));
        assert!(cpl.betas.is_empty());
    }

    #[test]
    fn cpl_noiseless_common_slope() {
        let a = RankSizeSample::from_sorted(0, zipf(1000.0, 40)).unwrap();
        let b = RankSizeSample::from_sorted(1, zipf(50.0, 20)).unwrap();
        let fit = fit_cpl(&[a, b]).unwrap();
        assert!((fit.theta - 1.0).abs() < 1e-9);
        assert!((fit.betas[0] - (50.0f64 / 1000.0).ln()).abs() < 1e-9);
        assert!(fit.rmse < 1e-10);
        assert_eq!(fit.n_obs, 60);
    }

    #[test]
    fn cpl_collinear_design_is_degenerate() {
        let samples: Vec<RankSizeSample> =
            (0..3).map(|j| RankSizeSample::from_sorted(j, vec![10.0 + j as f64]).unwrap()).collect();
        assert!(matches!(fit_cpl(&samples), Err(Error::Degeneracy(_))));
        assert!(matches!(fit_cpl(&[]), Err(Error::Degeneracy(_))));
    }

    /// Least squares on the full dummy-coded design via the normal equations.
    pub(crate) fn dense_cpl(samples: &[RankSizeSample]) -> (f64, f64, Vec<f64>, f64) {
        let m = samples.len();
        let rows: usize = samples.iter().map(|s| s.len()).sum();
        let mut x = DMatrix::<f64>::zeros(rows, m + 1);
        let mut y = DVector::<f64>::zeros(rows);
        let mut r = 0;
        for (j, s) in samples.iter().enumerate() {
            for (rank, size) in s.pairs() {
                x[(r, 0)] = 1.0;
                x[(r, 1)] = (rank as f64 - 0.5).ln();
                if j > 0 {
                    x[(r, j + 1)] = 1.0;
                }
                y[r] = size.ln();
                r += 1;
            }
        }
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * &y;
        let coef = xtx.lu().solve(&xty).expect("full-rank design");
        let resid = &y - &x * &coef;
        let rmse = (resid.norm_squared() / rows as f64).sqrt();
        (-coef[1], coef[0], coef.iter().skip(2).cloned().collect(), rmse)
    }

    #[test]
    fn cpl_matches_dense_solve_on_small_designs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let m = rng.random_range(1..=3);
            let samples: Vec<RankSizeSample> = (0..m)
                .map(|j| {
                    let nj = rng.random_range(2..=5);
                    let sizes: Vec<f64> = (0..nj).map(|_| rng.random_range(1e3..1e6)).collect();
                    RankSizeSample { subset_id: j, ..rank_sizes(&sizes).unwrap() }
                })
                .collect();
            let fit = fit_cpl(&samples).unwrap();
            let (theta, b1, betas, rmse) = dense_cpl(&samples);
            assert!((fit.theta - theta).abs() < 1e-9);
            assert!((fit.b1 - b1).abs() < 1e-9);
            for (a, b) in fit.betas.iter().zip(&betas) {
                assert!((a - b).abs() < 1e-9);
            }
            assert!((fit.rmse - rmse).abs() < 1e-9);
        }
    }

    fn arb_samples() -> impl Strategy<Value = Vec<RankSizeSample>> {
        prop::collection::vec(prop::collection::vec(1.0f64..1e6, 2..8), 1..5).prop_map(|groups| {
            groups
                .into_iter()
                .enumerate()
                .map(|(j, g)| RankSizeSample { subset_id: j, ..rank_sizes(&g).unwrap() })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn scale_equivariance(samples in arb_samples(), which in 0usize..5, lambda in 0.01f64..100.0) {
            let j = which % samples.len();
            let base = fit_cpl(&samples).unwrap();
            let mut scaled = samples.clone();
            scaled[j].sizes.iter_mut().for_each(|s| *s *= lambda);
            let fit = fit_cpl(&scaled).unwrap();
            prop_assert!((fit.theta - base.theta).abs() < 1e-9);
            prop_assert!((fit.rmse - base.rmse).abs() < 1e-9);
            prop_assert!((fit.intercept(j) - base.intercept(j) - lambda.ln()).abs() < 1e-9);
        }

        #[test]
        fn fixed_effects_never_fit_worse_than_one_pooled_line(samples in arb_samples()) {
            let cpl = fit_cpl(&samples).unwrap();
            // One line through every subset: same rank regressor, single intercept.
            let x: Vec<f64> = samples.iter().flat_map(|s| s.pairs().map(|(r, _)| (r as f64 - 0.5).ln())).collect();
            let y: Vec<f64> = samples.iter().flat_map(|s| s.sizes.iter().map(|v| v.ln())).collect();
            let n = x.len() as f64;
            let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
            let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
            let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
            let slope = sxy / sxx;
            let ssr: f64 = x.iter().zip(&y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
            prop_assert!(cpl.rmse <= (ssr / n).sqrt() + 1e-12);
        }

        #[test]
        fn gi_slope_ignores_tie_relabeling(mut sizes in prop::collection::vec(1u32..20, 3..30)) {
            let a = fit_gi(&rank_sizes(&sizes.iter().map(|&v| v as f64).collect::<Vec<_>>()).unwrap()).unwrap();
            sizes.reverse();
            let b = fit_gi(&rank_sizes(&sizes.iter().map(|&v| v as f64).collect::<Vec<_>>()).unwrap()).unwrap();
            prop_assert_eq!(a.theta, b.theta);
        }
    }
}
