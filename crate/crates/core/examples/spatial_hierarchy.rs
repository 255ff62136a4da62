//! Spatial hierarchical L-partition of a nested synthetic system, a random
//! counterpart with the same cell sizes, and their global hinterlands.

use spatial_cpl::partition::{build_random_hierarchy, build_spatial_hierarchy, global_hinterlands, HierarchicalPartition};
use spatial_cpl::rng::substream;
use spatial_cpl::synth::{gen_hierarchical_system, SynthSpec};

fn print_tree(h: &HierarchicalPartition, idx: usize) {
    let node = &h.nodes[idx];
    println!("{:indent$}layer {} center {} ({} cities)", "", node.layer, node.center, node.members.len(), indent = 2 * node.layer);
    for &c in &node.children {
        print_tree(h, c);
    }
}

fn main() -> spatial_cpl::Result<()> {
    let (cities, d) = gen_hierarchical_system(&SynthSpec::hierarchical(3, 3, 2, 1))?;
    let spatial = build_spatial_hierarchy(&cities, 3, &d)?;
    println!("spatial hierarchy over {} cities, {} cells:", cities.len(), spatial.cell_count());
    print_tree(&spatial, 0);

    let random = build_random_hierarchy(&spatial, &cities, &mut substream(1, "example/hierarchy", &[]))?;
    for (name, h) in [("spatial", &spatial), ("random", &random)] {
        println!("{name} hinterlands with at least two cities:");
        for e in global_hinterlands(h).entries.iter().filter(|e| e.members.len() >= 2) {
            println!("  center {:>2} (layer {}): {:?}", e.center, e.layer, e.members);
        }
    }
    Ok(())
}
