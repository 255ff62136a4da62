//! The command-line pipeline driven in-process: synthesize, test, export,
//! then replay a run from its manifest on a different thread count.

use spatial_cpl::cli::run;

fn spcpl(args: &[&str]) -> spatial_cpl::Result<()> {
    let argv: Vec<String> = std::iter::once("spcpl").chain(args.iter().copied()).map(String::from).collect();
    run(&argv).map(|_| ())
}

fn main() -> spatial_cpl::Result<()> {
    let dir = std::env::temp_dir().join("spatial-cpl-pipeline");
    std::fs::create_dir_all(&dir).map_err(|e| spatial_cpl::Error::Argument(e.to_string()))?;
    let p = |name: &str| dir.join(name).display().to_string();

    spcpl(&["synth", "--model", "hierarchical", "--seed", "2", "--out", &p("cities.csv"), "--matrix-out", &p("d.cdm")])?;
    spcpl(&[
        "--threads", "1", "spacing", "--cities", &p("cities.csv"), "--distances", &p("d.cdm"), "--K", "5..20:5", "--L", "2..4",
        "--M", "200", "--seed", "1", "--out", &p("spacing.json"), "--summary", &p("spacing.csv"),
    ])?;
    spcpl(&[
        "cpl", "--cities", &p("cities.csv"), "--distances", &p("d.cdm"), "--L", "2..4", "--N", "200", "--seed", "1",
        "--out", &p("cpl.json"), "--summary", &p("cpl.csv"), "--theta-csv", &p("theta.csv"),
    ])?;
    spcpl(&["ranksize", "--cities", &p("cities.csv"), "--distances", &p("d.cdm"), "--L", "3", "--out", &p("ranksize.csv")])?;
    spcpl(&["--threads", "4", "rerun", &p("spacing.json.manifest.json"), "--verify"])?;

    for file in ["spacing.csv", "cpl.csv", "theta.csv"] {
        println!("== {file}");
        print!("{}", std::fs::read_to_string(dir.join(file)).map_err(|e| spatial_cpl::Error::Argument(e.to_string()))?);
    }
    println!("spacing run reproduced byte for byte on 4 threads; outputs in {}", dir.display());
    Ok(())
}
