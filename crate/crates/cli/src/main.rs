//! `mr1l` command-line tool.
//!
//! Exit status: 0 on success, 2 on invalid input, 3 when an internal
//! consistency check fails.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mr1l::freqset::{hyperbolic_cross_even, random_cube_set, read_freqset};
use mr1l::harness::{self, Experiment, ExperimentConfig, Family, Provenance};
use mr1l::plan::{build, MultiLatticePlan};
use mr1l::spectral::{read_coeffs, reconstruct, reconstruct_average, sample_on_plan, write_coeffs};
use mr1l::testfn::{g3_coeff_oracle, G3Spec, DEFAULT_K_MAX, DEFAULT_TAIL_TOLERANCE};
use mr1l::{Error, FrequencySet, LatticeSource, Rank1Lattice, SampleSet64, TrigPolynomial64, Variant};

#[derive(Parser)]
#[command(name = "mr1l", version, about = "Deterministic multiple rank-1 lattices")]
struct Cli {
    /// Output format for summaries and experiment tables.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "MR1L_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a frequency set.
    Genfreq(GenfreqArgs),
    /// Build a reconstructing single rank-1 lattice.
    Lattice(LatticeArgs),
    /// Build a multiple rank-1 lattice plan.
    Plan(PlanArgs),
    /// Sample a polynomial or the G3 test function on a plan.
    Sample(SampleArgs),
    /// Recover Fourier coefficients from samples.
    Reconstruct(ReconstructArgs),
    /// Run an experiment grid and write CSV.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenfreqArgs {
    #[arg(long, value_parser = parse_family, default_value = "hyperbolic-cross")]
    family: Family,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    radius: u64,
    /// Cardinality of a random set.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LatticeArgs {
    #[arg(long)]
    freq: PathBuf,
    #[arg(long, value_parser = parse_source, default_value = "lat1")]
    source: LatticeSource,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    freq: PathBuf,
    #[arg(long)]
    lattice: PathBuf,
    #[arg(long, value_parser = parse_variant, default_value = "full")]
    variant: Variant,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    freq: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Coefficients (`re im` per frequency) of the polynomial to sample.
    #[arg(long, conflicts_with = "g3", required_unless_present = "g3")]
    coeffs: Option<PathBuf>,
    /// Sample the G3 test function instead.
    #[arg(long)]
    g3: bool,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    freq: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    samples: PathBuf,
    /// Average over all lattices that recover a frequency.
    #[arg(long)]
    average: bool,
    /// Reference coefficients for an error report.
    #[arg(long, conflicts_with = "g3")]
    reference: Option<PathBuf>,
    /// Report the relative L2 error against G3.
    #[arg(long)]
    g3: bool,
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    k_max: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment preset used when no config file is given.
    #[arg(long, value_parser = parse_experiment)]
    id: Option<Experiment>,
    #[arg(long, value_parser = parse_family)]
    family: Option<Family>,
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long, value_parser = parse_source)]
    source: Option<LatticeSource>,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long)]
    max_card: Option<u64>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    g3_table: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Omit the timestamp comment.
    #[arg(long)]
    no_timestamp: bool,
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_source(s: &str) -> std::result::Result<LatticeSource, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_experiment(s: &str) -> std::result::Result<Experiment, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

type Result<T> = std::result::Result<T, Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_internal() { 3 } else { 2 })
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if !matches!(cli.command, Command::Experiment(_)) {
        if let Some(n) = cli.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        }
    }
    match &cli.command {
        Command::Genfreq(a) => genfreq(a),
        Command::Lattice(a) => lattice(cli.format, a),
        Command::Plan(a) => plan(cli.format, a),
        Command::Sample(a) => sample(cli.format, a),
        Command::Reconstruct(a) => reconstruct_cmd(cli.format, a),
        Command::Experiment(a) => experiment(cli, a),
    }
}

/// Prints a one-row summary as CSV or JSON.
fn summary(format: Format, fields: &[(&str, serde_json::Value)]) -> Result<()> {
    let mut out = io::stdout().lock();
    match format {
        Format::Csv => {
            let head: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
            let vals: Vec<String> = fields
                .iter()
                .map(|(_, v)| match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect();
            writeln!(out, "{}", head.join(","))?;
            writeln!(out, "{}", vals.join(","))?;
        }
        Format::Structured => {
            let obj: serde_json::Map<String, serde_json::Value> =
                fields.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
            writeln!(out, "{}", serde_json::Value::Object(obj))?;
        }
    }
    Ok(())
}

fn genfreq(a: &GenfreqArgs) -> Result<()> {
    let set = match a.family {
        Family::HyperbolicCross => hyperbolic_cross_even(a.dim, a.radius)?,
        Family::Random => {
            let size = a
                .size
                .ok_or_else(|| Error::InvalidInput("random sets need --size".into()))?;
            let radius = u32::try_from(a.radius).map_err(|_| Error::InvalidInput("radius too large".into()))?;
            random_cube_set(a.dim, radius, size, a.seed)?
        }
    };
    match &a.out {
        Some(path) => set.write_to(File::create(path)?),
        None => set.write_to(io::stdout().lock()),
    }
}

fn lattice(format: Format, a: &LatticeArgs) -> Result<()> {
    let set = read_freqset(&a.freq)?;
    let lat = harness::single_lattice(&set, a.source, a.seed)?;
    lat.write(&a.out)?;
    summary(
        format,
        &[
            ("d", json!(lat.dim())),
            ("M", json!(lat.size.to_string())),
            ("source", json!(lat.source.as_str())),
        ],
    )
}

fn plan_summary(format: Format, plan: &MultiLatticePlan) -> Result<()> {
    let primes: Vec<String> = plan.primes().iter().map(|p| p.to_string()).collect();
    summary(
        format,
        &[
            ("variant", json!(plan.variant().as_str())),
            ("card", json!(plan.set().len())),
            ("L", json!(plan.len())),
            ("primes", json!(primes.join(";"))),
            ("total_samples", json!(plan.total_samples())),
            ("oversampling", json!(plan.oversampling())),
            ("sum_bound", json!(plan.sum_bound())),
            ("bound_ok", json!(plan.bound_ok())),
            ("hash", json!(plan.hash())),
        ],
    )
}

fn plan(format: Format, a: &PlanArgs) -> Result<()> {
    let set = read_freqset(&a.freq)?;
    let lat = Rank1Lattice::read(&a.lattice)?;
    let plan = build(&set, &lat, a.variant)?;
    plan.write(&a.out)?;
    plan_summary(format, &plan)
}

fn load_plan(freq: &Path, plan: &Path) -> Result<(FrequencySet, MultiLatticePlan)> {
    let set = read_freqset(freq)?;
    let plan = MultiLatticePlan::read(plan, &set)?;
    Ok((set, plan))
}

fn g3_spec(dim: usize, k_max: usize) -> Result<G3Spec<f64>> {
    G3Spec::from_table(dim, g3_coeff_oracle(k_max, DEFAULT_TAIL_TOLERANCE)?)
}

fn sample(format: Format, a: &SampleArgs) -> Result<()> {
    let (set, plan) = load_plan(&a.freq, &a.plan)?;
    let samples: SampleSet64 = match &a.coeffs {
        Some(path) => {
            let coeffs = read_coeffs(File::open(path)?)?;
            let poly = TrigPolynomial64::new(set, coeffs)?;
            sample_on_plan(&poly, &plan)?
        }
        None => sample_on_plan(&g3_spec(set.dim(), DEFAULT_K_MAX)?, &plan)?,
    };
    samples.write(&a.out)?;
    summary(
        format,
        &[
            ("L", json!(samples.primes.len())),
            ("evaluations", json!(samples.evaluations)),
            ("plan", json!(samples.plan_hash)),
        ],
    )
}

fn reconstruct_cmd(format: Format, a: &ReconstructArgs) -> Result<()> {
    let (set, plan) = load_plan(&a.freq, &a.plan)?;
    let samples = SampleSet64::read(&a.samples)?;
    let rec = if a.average {
        reconstruct_average(&samples, &plan)?
    } else {
        reconstruct(&samples, &plan)?
    };
    match &a.out {
        Some(path) => write_coeffs(rec.coeffs(), File::create(path)?)?,
        None => write_coeffs(rec.coeffs(), io::stdout().lock())?,
    }
    if let Some(path) = &a.reference {
        let reference = TrigPolynomial64::new(set, read_coeffs(File::open(path)?)?)?;
        summary(format, &[("max_rel_error", json!(rec.max_rel_error(&reference)?))])?;
    } else if a.g3 {
        let spec = g3_spec(set.dim(), a.k_max)?;
        summary(format, &[("rel_l2_error", json!(spec.rel_l2_error(&rec)?))])?;
    }
    Ok(())
}

fn experiment(cli: &Cli, a: &ExperimentArgs) -> Result<()> {
    let mut cfg = match (&a.config, a.id) {
        (Some(path), _) => ExperimentConfig::read(path)?,
        (None, Some(id)) => ExperimentConfig::preset(id),
        (None, None) => return Err(Error::InvalidInput("need --config or --id".into())),
    };
    if let Some(id) = a.id {
        cfg.experiment = id;
    }
    if let Some(f) = a.family {
        cfg.family = f;
    }
    if let Some(v) = &a.dims {
        cfg.dims = v.clone();
    }
    if let Some(v) = &a.radii {
        cfg.radii = v.clone();
    }
    if let Some(v) = &a.sizes {
        cfg.sizes = v.clone();
    }
    if let Some(v) = &a.seeds {
        cfg.seeds = v.clone();
    }
    if let Some(v) = a.repetitions {
        cfg.repetitions = v;
    }
    if let Some(v) = a.source {
        cfg.source = v;
    }
    if let Some(v) = a.variant {
        cfg.variant = Some(v);
    }
    if let Some(v) = a.max_card {
        cfg.max_card = Some(v);
    }
    if let Some(v) = a.k_max {
        cfg.k_max = Some(v);
    }
    if let Some(v) = &a.g3_table {
        cfg.g3_table = Some(v.clone());
    }
    if let Some(v) = &a.output {
        cfg.output = Some(v.clone());
    }
    cfg.validate()?;
    let table = harness::run(&cfg, cli.threads)?;
    let prov = Provenance::new(&cfg, !a.no_timestamp);
    let write = |w: &mut dyn Write| -> Result<()> {
        match cli.format {
            Format::Csv => table.write_csv(w, &prov),
            Format::Structured => {
                writeln!(w, "{}", table.to_json(&prov))?;
                Ok(())
            }
        }
    };
    match &cfg.output {
        Some(path) => write(&mut File::create(path)?)?,
        None => write(&mut io::stdout().lock())?,
    }
    let failures = table.failures();
    if failures > 0 {
        return Err(Error::Certificate(format!("{failures} rows failed their check")));
    }
    Ok(())
}
