//! Spacing-out test on a system whose largest cities sit in distant
//! clusters, and on the same sites with sizes shuffled.

use spatial_cpl::montecarlo::{spacing_grid, SpacingOptions};
use spatial_cpl::synth::{gen_spaced_system, SpacedLayout, SpacedSpec};

fn main() -> spatial_cpl::Result<()> {
    let spec = SpacedSpec::new(200, 5, 7);
    let opts = SpacingOptions { replicates: 200, seed: 7, ..Default::default() };
    for layout in [SpacedLayout::Spaced, SpacedLayout::Relocated] {
        let (cities, d) = gen_spaced_system(&spec, layout, 1)?;
        println!("{layout:?}:");
        println!("  K   L  mean cells (voronoi)  p0      class");
        for r in spacing_grid(&cities, &d, &[10, 20], &[3, 5], &opts)? {
            println!("  {:<3} {:<2} {:<21.3} {:<7.4} {}", r.k, r.l, r.mean_count_voronoi, r.p0, r.class.label());
        }
    }
    Ok(())
}
