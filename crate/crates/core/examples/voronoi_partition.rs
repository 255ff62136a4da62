//! Voronoi K-partitions around random centers, and how many cells the
//! largest cities land in compared with a size-matched random partition.

use spatial_cpl::partition::{random_centers, random_partition_with_sizes, voronoi_partition};
use spatial_cpl::rng::substream;
use spatial_cpl::synth::{gen_iid_system, SynthSpec};

fn main() -> spatial_cpl::Result<()> {
    let (cities, d) = gen_iid_system(&SynthSpec::iid(120, 4))?;
    let mut rng = substream(4, "example/voronoi", &[]);
    let (k, l) = (8, 6);
    for round in 0..3 {
        let centers = random_centers(&cities, k, &mut rng)?;
        let voronoi = voronoi_partition(&cities, &centers, &d)?;
        let sizes = voronoi.cell_sizes();
        let random = random_partition_with_sizes(&cities, &sizes, &mut rng, None)?;
        println!(
            "round {round}: centers {centers:?}\n  cell sizes {sizes:?}\n  cells holding the {l} largest: voronoi {}, random {}",
            voronoi.cells_hit_by_largest(l),
            random.cells_hit_by_largest(l)
        );
    }
    Ok(())
}
