//! The `spcpl` command line: extract → distances → spacing / cpl / ranksize.
//!
//! Stages talk only through files. Every command writes a run manifest next
//! to its primary output; `spcpl rerun --manifest FILE --verify` replays it
//! and checks the outputs byte for byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cities::{extract_cities, load_cities_csv, write_cities_csv, CitySet, Connectivity, ExtractParams};
use crate::error::{Error, Result};
use crate::geo::{build_distance_matrix, planar_distance_matrix, DistanceMatrix};
use crate::ingest::{load_distance_matrix, load_population_grid, load_road_network_dir, write_distance_matrix, write_matrix_csv, GridFormat};
use crate::montecarlo::{
    observed_cpl, spacing_grid, spatial_cpl_test, CplEvaluator, CplOptions, CplTestResult, RandomPartitionMode,
    SpacingOptions, SpacingTestResult,
};
use crate::stats::{fit_cpl, write_rank_size_csv};
use crate::synth::{gen_hierarchical_system, gen_iid_system, SynthSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "spcpl", version, about = "Spacing-out and spatial common-power-law tests for city systems")]
pub struct Cli {
    /// Worker threads for replicate loops (default: all cores). Results do
    /// not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Where to write the run manifest (default: `<out>.manifest.json`).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract cities from a population raster.
    Extract(ExtractArgs),
    /// Build the inter-city distance matrix.
    Distances(DistancesArgs),
    /// Spacing-out test over a K x L grid.
    Spacing(SpacingArgs),
    /// Spatial common-power-law test and slope profile over L.
    Cpl(CplArgs),
    /// Rank-size table of the observed hierarchy's hinterlands with fitted lines.
    Ranksize(RanksizeArgs),
    /// Generate a synthetic city system.
    Synth(SynthArgs),
    /// Replay a recorded run.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GridFormatArg {
    EsriAscii,
    PackedBinary,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, value_enum, default_value = "esri-ascii")]
    pub format: GridFormatArg,
    #[arg(long, default_value_t = 1000.0)]
    pub density_min: f64,
    #[arg(long, default_value_t = 10000.0)]
    pub pop_min: f64,
    /// 4 or 8.
    #[arg(long, default_value_t = 4)]
    pub connectivity: u8,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistanceMode {
    Road,
    GreatCircle,
    Planar,
}

#[derive(Debug, Args)]
pub struct DistancesArgs {
    #[arg(long)]
    pub cities: PathBuf,
    /// Directory holding `nodes.csv` and `edges.csv`; required for road mode.
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Defaults to road with a network, great-circle otherwise.
    #[arg(long, value_enum)]
    pub mode: Option<DistanceMode>,
    #[arg(long, default_value_t = 20.0)]
    pub snap_radius_km: f64,
    /// CDM1 output; a `.csv` extension writes the CSV form instead.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SpacingArgs {
    #[arg(long)]
    pub cities: PathBuf,
    #[arg(long)]
    pub distances: PathBuf,
    /// Voronoi cell counts: `a..b[:step]` (inclusive) or a comma list.
    #[arg(long = "K", default_value = "10..60:10")]
    pub k: String,
    /// Largest-city counts, same syntax.
    #[arg(long = "L", default_value = "2..10:2")]
    pub l: String,
    #[arg(long = "M", default_value_t = 1000)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Draw random partitions by shuffling every label instead of the L largest only.
    #[arg(long)]
    pub full_shuffle: bool,
    /// Include every replicate statistic in the JSON report.
    #[arg(long)]
    pub keep_samples: bool,
    /// JSON report.
    #[arg(long)]
    pub out: PathBuf,
    /// CSV summary with one row per (K, L).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CplArgs {
    #[arg(long)]
    pub cities: PathBuf,
    #[arg(long)]
    pub distances: PathBuf,
    #[arg(long = "L", default_value = "2..6")]
    pub l: String,
    #[arg(long = "N", default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub min_subset_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub keep_samples: bool,
    /// Dataset label for the slope table (default: cities file stem).
    #[arg(long)]
    pub dataset: Option<String>,
    /// JSON report.
    #[arg(long)]
    pub out: PathBuf,
    /// CSV of p-values per L.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// CSV of the estimated common slope per L.
    #[arg(long)]
    pub theta_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RanksizeArgs {
    #[arg(long)]
    pub cities: PathBuf,
    #[arg(long)]
    pub distances: PathBuf,
    #[arg(long = "L")]
    pub l: usize,
    #[arg(long, default_value_t = 2)]
    pub min_subset_size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthModelArg {
    Iid,
    Hierarchical,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub model: SynthModelArg,
    /// City count for the iid model.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub l_gen: usize,
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
    #[arg(long, default_value_t = 2)]
    pub satellites: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cities CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// CDM1 matrix of the generator's planar distances.
    #[arg(long)]
    pub matrix_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    /// Manifest written by an earlier run.
    pub manifest_path: PathBuf,
    /// Fail unless every output reproduces its recorded digest.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Full argument vector; replaying it reproduces the run.
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths.iter().map(|p| Ok(FileDigest { path: p.clone(), sha256: sha256_file(p)? })).collect()
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Parses `a..b[:step]` (inclusive), a comma list, or a single value.
pub fn parse_range(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Argument(format!("cannot parse range `{text}`"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let values = if let Some((a, rest)) = text.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, s)) => (num(b)?, num(s)?),
            None => (num(rest)?, 1),
        };
        let a = num(a)?;
        if step == 0 || b < a {
            return Err(bad());
        }
        (a..=b).step_by(step).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Files a command read and wrote, plus the parameters worth recording.
struct Outcome {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    config: serde_json::Value,
    seed: Option<u64>,
}

fn load_pair(cities: &Path, distances: &Path) -> Result<(CitySet, DistanceMatrix)> {
    let set = load_cities_csv(cities)?;
    let d = load_distance_matrix(distances)?;
    if d.n() != set.len() {
        return Err(Error::Data(format!(
            "distance matrix covers {} cities but {} lists {}",
            d.n(),
            cities.display(),
            set.len()
        )));
    }
    Ok((set, d))
}

fn cmd_extract(a: &ExtractArgs) -> Result<Outcome> {
    let format = match a.format {
        GridFormatArg::EsriAscii => GridFormat::EsriAscii,
        GridFormatArg::PackedBinary => GridFormat::PackedBinary,
    };
    let grid = load_population_grid(&a.grid, format)?;
    let params = ExtractParams {
        density_min: a.density_min,
        pop_min: a.pop_min,
        connectivity: Connectivity::from_count(a.connectivity)?,
    };
    let set = extract_cities(&grid, &params)?;
    let mut w = create(&a.out)?;
    write_cities_csv(&set, &mut w)?;
    w.flush().map_err(|e| Error::io(&a.out, e))?;
    Ok(Outcome {
        inputs: vec![a.grid.clone()],
        outputs: vec![a.out.clone()],
        config: serde_json::json!({
            "density_min": a.density_min,
            "pop_min": a.pop_min,
            "connectivity": a.connectivity,
            "cities": set.len(),
        }),
        seed: None,
    })
}

fn cmd_distances(a: &DistancesArgs) -> Result<Outcome> {
    let set = load_cities_csv(&a.cities)?;
    let mode = a.mode.unwrap_or(if a.network.is_some() { DistanceMode::Road } else { DistanceMode::GreatCircle });
    let mut inputs = vec![a.cities.clone()];
    let mut outputs = vec![a.out.clone()];
    let (d, report) = match mode {
        DistanceMode::Road => {
            let dir = a.network.as_ref().ok_or_else(|| Error::Argument("road mode needs --network".into()))?;
            let net = load_road_network_dir(dir)?;
            inputs.extend([dir.join("nodes.csv"), dir.join("edges.csv")]);
            build_distance_matrix(&set, Some(&net), a.snap_radius_km)?
        }
        DistanceMode::GreatCircle => build_distance_matrix(&set, None, a.snap_radius_km)?,
        DistanceMode::Planar => (planar_distance_matrix(&set)?, None),
    };
    if a.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let mut w = create(&a.out)?;
        write_matrix_csv(&d, &mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&a.out, e))?;
    } else {
        write_distance_matrix(&d, &a.out)?;
    }
    if let Some(report) = &report {
        let path = with_suffix(&a.out, ".snap.json");
        write_json(
            &path,
            &serde_json::json!({ "schema_version": SCHEMA_VERSION, "snap_report": report }),
        )?;
        outputs.push(path);
    }
    Ok(Outcome {
        inputs,
        outputs,
        config: serde_json::json!({
            "mode": format!("{mode:?}"),
            "snap_radius_km": a.snap_radius_km,
            "unreachable_pairs": d.unreachable_pairs(),
        }),
        seed: None,
    })
}

fn cmd_spacing(a: &SpacingArgs) -> Result<Outcome> {
    let (set, d) = load_pair(&a.cities, &a.distances)?;
    let ks = parse_range(&a.k)?;
    let ls = parse_range(&a.l)?;
    let opts = SpacingOptions {
        replicates: a.m,
        seed: a.seed,
        mode: if a.full_shuffle { RandomPartitionMode::FullShuffle } else { RandomPartitionMode::LargestLabels },
    };
    let mut results = spacing_grid(&set, &d, &ks, &ls, &opts)?;
    if !a.keep_samples {
        for r in &mut results {
            r.voronoi_counts.clear();
            r.mean_counts_random.clear();
        }
    }
    #[derive(Serialize)]
    struct Report<'a> {
        schema_version: u32,
        test: &'static str,
        n_cities: usize,
        k: &'a [usize],
        l: &'a [usize],
        m: usize,
        seed: u64,
        mode: RandomPartitionMode,
        samples_kept: bool,
        results: &'a [SpacingTestResult],
    }
    write_json(
        &a.out,
        &Report {
            schema_version: SCHEMA_VERSION,
            test: "spacing-out",
            n_cities: set.len(),
            k: &ks,
            l: &ls,
            m: a.m,
            seed: a.seed,
            mode: opts.mode,
            samples_kept: a.keep_samples,
            results: &results,
        },
    )?;
    let mut outputs = vec![a.out.clone()];
    if let Some(path) = &a.summary {
        let mut w = create(path)?;
        let io = |e| Error::io(path, e);
        writeln!(w, "K,L,mean_count_voronoi,m0,p0,class").map_err(io)?;
        for r in &results {
            writeln!(w, "{},{},{},{},{},{}", r.k, r.l, r.mean_count_voronoi, r.m0, r.p0, r.class.label()).map_err(io)?;
        }
        w.flush().map_err(io)?;
        outputs.push(path.clone());
    }
    Ok(Outcome {
        inputs: vec![a.cities.clone(), a.distances.clone()],
        outputs,
        config: serde_json::json!({ "K": ks, "L": ls, "M": a.m, "mode": opts.mode, "keep_samples": a.keep_samples }),
        seed: Some(a.seed),
    })
}

fn cmd_cpl(a: &CplArgs) -> Result<Outcome> {
    let (set, d) = load_pair(&a.cities, &a.distances)?;
    let ls = parse_range(&a.l)?;
    if let Some(&l) = ls.iter().find(|&&l| l < 2) {
        return Err(Error::Argument(format!("L = {l}: the hierarchy needs L >= 2")));
    }
    let opts = CplOptions { replicates: a.n, min_subset_size: a.min_subset_size, seed: a.seed };
    let mut results = ls
        .iter()
        .map(|&l| spatial_cpl_test(&set, &d, l, &opts))
        .collect::<Result<Vec<CplTestResult>>>()?;
    if !a.keep_samples {
        for r in &mut results {
            r.rmse_random.clear();
        }
    }
    let dataset = a.dataset.clone().unwrap_or_else(|| {
        a.cities.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    });
    #[derive(Serialize)]
    struct Report<'a> {
        schema_version: u32,
        test: &'static str,
        dataset: &'a str,
        n_cities: usize,
        l: &'a [usize],
        n: usize,
        min_subset_size: usize,
        seed: u64,
        samples_kept: bool,
        results: &'a [CplTestResult],
    }
    write_json(
        &a.out,
        &Report {
            schema_version: SCHEMA_VERSION,
            test: "spatial-cpl",
            dataset: &dataset,
            n_cities: set.len(),
            l: &ls,
            n: a.n,
            min_subset_size: a.min_subset_size,
            seed: a.seed,
            samples_kept: a.keep_samples,
            results: &results,
        },
    )?;
    let mut outputs = vec![a.out.clone()];
    if let Some(path) = &a.summary {
        let mut w = create(path)?;
        let io = |e| Error::io(path, e);
        writeln!(w, "L,N,rmse_observed,n_l,p_l,class,theta_hat,m").map_err(io)?;
        for r in &results {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.l,
                r.n,
                r.rmse_observed,
                r.n_l,
                r.p_l,
                r.class.label(),
                r.theta_hat,
                r.m
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)?;
        outputs.push(path.clone());
    }
    if let Some(path) = &a.theta_csv {
        let mut w = create(path)?;
        let io = |e| Error::io(path, e);
        writeln!(w, "dataset,L,theta_hat,m,n_obs").map_err(io)?;
        for r in &results {
            writeln!(w, "{},{},{},{},{}", dataset, r.l, r.theta_hat, r.m, r.n_obs).map_err(io)?;
        }
        w.flush().map_err(io)?;
        outputs.push(path.clone());
    }
    Ok(Outcome {
        inputs: vec![a.cities.clone(), a.distances.clone()],
        outputs,
        config: serde_json::json!({
            "L": ls, "N": a.n, "min_subset_size": a.min_subset_size,
            "keep_samples": a.keep_samples, "dataset": dataset,
        }),
        seed: Some(a.seed),
    })
}

fn cmd_ranksize(a: &RanksizeArgs) -> Result<Outcome> {
    let (set, d) = load_pair(&a.cities, &a.distances)?;
    let (_, hl, _) = observed_cpl(&set, &d, a.l, a.min_subset_size)?;
    let samples = CplEvaluator::new(&set, a.min_subset_size).samples(&set, &hl)?;
    let fit = fit_cpl(&samples)?;
    let mut w = create(&a.out)?;
    write_rank_size_csv(&samples, &fit, &mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&a.out, e))?;
    Ok(Outcome {
        inputs: vec![a.cities.clone(), a.distances.clone()],
        outputs: vec![a.out.clone()],
        config: serde_json::json!({
            "L": a.l, "min_subset_size": a.min_subset_size,
            "theta_hat": fit.theta, "rmse": fit.rmse, "subsets": fit.m, "rows": fit.n_obs,
        }),
        seed: None,
    })
}

fn cmd_synth(a: &SynthArgs) -> Result<Outcome> {
    let spec = match a.model {
        SynthModelArg::Iid => SynthSpec { alpha: a.alpha, ..SynthSpec::iid(a.n, a.seed) },
        SynthModelArg::Hierarchical => {
            SynthSpec { alpha: a.alpha, ..SynthSpec::hierarchical(a.l_gen, a.depth, a.satellites, a.seed) }
        }
    };
    let (set, d) = match a.model {
        SynthModelArg::Iid => gen_iid_system(&spec)?,
        SynthModelArg::Hierarchical => gen_hierarchical_system(&spec)?,
    };
    let mut w = create(&a.out)?;
    write_cities_csv(&set, &mut w)?;
    w.flush().map_err(|e| Error::io(&a.out, e))?;
    write_distance_matrix(&d, &a.matrix_out)?;
    Ok(Outcome {
        inputs: Vec::new(),
        outputs: vec![a.out.clone(), a.matrix_out.clone()],
        config: serde_json::to_value(spec).unwrap_or_default(),
        seed: Some(a.seed),
    })
}

fn cmd_rerun(a: &RerunArgs, threads: Option<usize>) -> Result<()> {
    let text = std::fs::read_to_string(&a.manifest_path).map_err(|e| Error::io(&a.manifest_path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| Error::format(a.manifest_path.display().to_string(), e.to_string()))?;
    let mut cli = parse(&manifest.argv)?;
    if matches!(cli.command, Command::Rerun(_)) {
        return Err(Error::Argument("a manifest cannot replay another rerun".into()));
    }
    if threads.is_some() {
        cli.threads = threads;
    }
    for input in &manifest.inputs {
        if sha256_file(&input.path)? != input.sha256 {
            return Err(Error::Data(format!("input {} changed since the recorded run", input.path.display())));
        }
    }
    let outcome = in_pool(cli.threads, || dispatch(&cli.command))?;
    if a.verify {
        for (old, new) in manifest.outputs.iter().zip(digests(&outcome.outputs)?) {
            if old.path != new.path || old.sha256 != new.sha256 {
                return Err(Error::Data(format!("output {} does not reproduce", old.path.display())));
            }
        }
    }
    Ok(())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Extract(_) => "extract",
        Command::Distances(_) => "distances",
        Command::Spacing(_) => "spacing",
        Command::Cpl(_) => "cpl",
        Command::Ranksize(_) => "ranksize",
        Command::Synth(_) => "synth",
        Command::Rerun(_) => "rerun",
    }
}

fn dispatch(c: &Command) -> Result<Outcome> {
    match c {
        Command::Extract(a) => cmd_extract(a),
        Command::Distances(a) => cmd_distances(a),
        Command::Spacing(a) => cmd_spacing(a),
        Command::Cpl(a) => cmd_cpl(a),
        Command::Ranksize(a) => cmd_ranksize(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Rerun(_) => unreachable!("handled by run"),
    }
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(Error::Argument("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Argument(e.to_string()))?
            .install(f),
    }
}

fn parse(argv: &[String]) -> Result<Cli> {
    Cli::try_parse_from(argv).map_err(|e| Error::Argument(e.to_string()))
}

fn primary_output(c: &Command) -> Option<&Path> {
    match c {
        Command::Extract(a) => Some(&a.out),
        Command::Distances(a) => Some(&a.out),
        Command::Spacing(a) => Some(&a.out),
        Command::Cpl(a) => Some(&a.out),
        Command::Ranksize(a) => Some(&a.out),
        Command::Synth(a) => Some(&a.out),
        Command::Rerun(_) => None,
    }
}

/// Runs one command from a full argument vector (program name first) and
/// returns the manifest it wrote, if any.
pub fn run(argv: &[String]) -> Result<Option<RunManifest>> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(None);
        }
        Err(e) => return Err(Error::Argument(e.to_string())),
    };
    if let Command::Rerun(a) = &cli.command {
        cmd_rerun(a, cli.threads)?;
        return Ok(None);
    }
    let started = unix_now();
    let outcome = in_pool(cli.threads, || dispatch(&cli.command))?;
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        tool: "spcpl".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command_name(&cli.command).into(),
        argv: argv.to_vec(),
        config: outcome.config,
        seed: outcome.seed,
        threads: cli.threads,
        inputs: digests(&outcome.inputs)?,
        outputs: digests(&outcome.outputs)?,
        started_unix_s: started,
        finished_unix_s: unix_now(),
    };
    let path = cli
        .manifest
        .clone()
        .or_else(|| primary_output(&cli.command).map(|p| with_suffix(p, ".manifest.json")))
        .expect("every non-rerun command has an output");
    write_json(&path, &manifest)?;
    Ok(Some(manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("2..6").unwrap(), vec![2, 3, 4, 5, 6]);
        assert_eq!(parse_range("10..60:20").unwrap(), vec![10, 30, 50]);
        assert_eq!(parse_range("3, 5,8").unwrap(), vec![3, 5, 8]);
        assert_eq!(parse_range("7").unwrap(), vec![7]);
        for bad in ["", "5..2", "1..4:0", "a..b", "1,,2"] {
            assert!(matches!(parse_range(bad), Err(Error::Argument(_))), "{bad}");
        }
    }

    #[test]
    fn parse_errors_are_argument_errors() {
        let argv: Vec<String> = ["spcpl", "spacing", "--bogus"].iter().map(|s| s.to_string()).collect();
        assert_eq!(run(&argv).unwrap_err().exit_code(), 2);
    }
}
