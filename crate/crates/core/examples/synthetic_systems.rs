//! Generate synthetic city systems and write them in the pipeline's file
//! formats (cities CSV and CDM1 matrix).

use spatial_cpl::cities::write_cities_csv;
use spatial_cpl::ingest::write_distance_matrix;
use spatial_cpl::synth::{gen_hierarchical_with_layout, gen_iid_system, SynthSpec};

fn main() -> spatial_cpl::Result<()> {
    let out = std::env::temp_dir().join("spatial-cpl-synth");
    std::fs::create_dir_all(&out).map_err(|e| spatial_cpl::Error::Argument(e.to_string()))?;

    let (iid, d) = gen_iid_system(&SynthSpec::iid(500, 3))?;
    let top: Vec<String> = iid.populations().iter().take(5).map(|p| format!("{p:.0}")).collect();
    println!("iid: {} cities, largest {}", iid.len(), top.join(", "));
    write_cities_csv(&iid, std::fs::File::create(out.join("iid.csv")).map_err(|e| spatial_cpl::Error::Argument(e.to_string()))?)?;
    write_distance_matrix(&d, out.join("iid.cdm"))?;

    let (nested, d, layout) = gen_hierarchical_with_layout(&SynthSpec::hierarchical(3, 4, 2, 3))?;
    for round in 1..=5 {
        let count = layout.rounds.iter().filter(|&&r| r == round).count();
        println!("nested: round {round} created {count} cities");
    }
    write_cities_csv(&nested, std::fs::File::create(out.join("nested.csv")).map_err(|e| spatial_cpl::Error::Argument(e.to_string()))?)?;
    write_distance_matrix(&d, out.join("nested.cdm"))?;
    println!("wrote {}", out.display());
    Ok(())
}
