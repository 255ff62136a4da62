//! Rank-size regressions: the single-sample slope with the rank - 1/2
//! correction, and a common slope shared by several samples.

use rand_distr::{Distribution, Pareto};
use spatial_cpl::rng::substream;
use spatial_cpl::stats::{fit_cpl, fit_gi, rank_sizes};

fn main() -> spatial_cpl::Result<()> {
    let mut rng = substream(0, "example/rank-size", &[]);
    let mut samples = Vec::new();
    for (j, (alpha, n)) in [(1.0, 400), (1.0, 150), (1.0, 60)].into_iter().enumerate() {
        let law = Pareto::new(10_000.0, alpha).expect("valid Pareto");
        let sizes: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        let mut sample = rank_sizes(&sizes)?;
        sample.subset_id = j;
        let gi = fit_gi(&sample)?;
        println!("subset {j}: n = {n:>3}, theta = {:.3} (alpha = {:.3}), rmse = {:.3}", gi.theta, gi.alpha(), gi.rmse);
        samples.push(sample);
    }
    let cpl = fit_cpl(&samples)?;
    println!("common slope over {} subsets ({} cities): theta = {:.3}, rmse = {:.3}", cpl.m, cpl.n_obs, cpl.theta, cpl.rmse);
    for j in 0..cpl.m {
        println!("  subset {} intercept {:.3}", cpl.subset_ids[j], cpl.intercept(j));
    }
    Ok(())
}
