use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{Experiment, ExperimentConfig, Family};
use super::{GridKey, Table};
use crate::error::{Error, Result};
use crate::freqset::{hyperbolic_cross_even, hyperbolic_cross_even_len, random_cube_set, FrequencySet};
use crate::plan::{build, build_full, MultiLatticePlan};
use crate::primes::log2_biguint;
use crate::rank1::{build_cbc, build_crt, build_mixed_radix, CbcOptions, LatticeSource, Rank1Lattice};
use crate::spectral::{reconstruct, reconstruct_average, sample_on_plan, TrigPolynomial};
use crate::testfn::{g3_coeff_oracle, G3Spec, G3Table, DEFAULT_K_MAX, DEFAULT_TAIL_TOLERANCE};

/// Largest admissible max relative coefficient error of a round trip.
pub const ROUNDTRIP_TOLERANCE: f64 = 1e-10;

/// Reconstructing single lattice of the given kind.
pub fn single_lattice(set: &FrequencySet, source: LatticeSource, seed: u64) -> Result<Rank1Lattice> {
    match source {
        LatticeSource::Lat1 => build_mixed_radix(set),
        LatticeSource::Lat2 => build_crt(set),
        LatticeSource::Cbc => build_cbc(
            set,
            &CbcOptions {
                seed,
                ..CbcOptions::default()
            },
        ),
        LatticeSource::User => Err(Error::invalid("user lattices cannot be generated")),
    }
}

#[derive(Debug, Clone, Copy)]
struct Point {
    d: usize,
    r: u64,
    /// Requested cardinality of a random set.
    s: Option<usize>,
    seed: u64,
}

impl Point {
    fn key(&self, card: usize) -> GridKey {
        (self.d, self.r, self.s.unwrap_or(card) as u64, self.seed)
    }

    fn lead(&self, card: usize) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.r.to_string(),
            self.s.unwrap_or(card).to_string(),
            self.seed.to_string(),
        ]
    }
}

fn grid(cfg: &ExperimentConfig) -> Vec<Point> {
    let mut out = Vec::new();
    for &d in &cfg.dims {
        for &r in &cfg.radii {
            match cfg.family {
                Family::HyperbolicCross => {
                    if hyperbolic_cross_even_len(d, r) <= cfg.max_card() as u128 {
                        out.push(Point { d, r, s: None, seed: 0 });
                    }
                }
                Family::Random => {
                    for &s in &cfg.sizes {
                        if s as u64 > cfg.max_card() {
                            continue;
                        }
                        for &seed in &cfg.seeds {
                            out.push(Point { d, r, s: Some(s), seed });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Seed of one repetition, independent of grid iteration order.
fn derive_seed(p: &Point, rep: usize, salt: &str) -> u64 {
    let tag = format!("{salt}:{}:{}:{}:{}:{rep}", p.d, p.r, p.s.unwrap_or(0), p.seed);
    let h = Sha256::digest(tag.as_bytes());
    u64::from_le_bytes(h[..8].try_into().expect("digest has 32 bytes"))
}

fn repetitions(cfg: &ExperimentConfig) -> usize {
    match cfg.family {
        Family::HyperbolicCross => 1,
        Family::Random => cfg.repetitions,
    }
}

fn instance(p: &Point, rep: usize) -> Result<FrequencySet> {
    match p.s {
        None => hyperbolic_cross_even(p.d, p.r),
        Some(s) => {
            let radius = u32::try_from(p.r).map_err(|_| Error::invalid("radius too large"))?;
            random_cube_set(p.d, radius, s, derive_seed(p, rep, "set"))
        }
    }
}

fn plan_for(cfg: &ExperimentConfig, p: &Point, rep: usize, set: &FrequencySet) -> Result<MultiLatticePlan> {
    let lattice = single_lattice(set, cfg.source, derive_seed(p, rep, "cbc"))?;
    build(set, &lattice, cfg.variant())
}

fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn collect<F>(cfg: &ExperimentConfig, threads: Option<usize>, mut table: Table, f: F) -> Result<Table>
where
    F: Fn(&Point) -> Result<(GridKey, Vec<String>)> + Sync,
{
    let points = grid(cfg);
    let rows = in_pool(threads, || points.par_iter().map(&f).collect::<Result<Vec<_>>>())??;
    for (key, row) in rows {
        table.push(key, row);
    }
    table.sort();
    Ok(table)
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Oversampling of the multiple-lattice plans over the grid.
pub fn run_oversampling(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Table> {
    cfg.validate()?;
    let header = vec![
        "d",
        "R",
        "s",
        "seed",
        "card",
        "L",
        "sum_primes",
        "total_samples",
        "oversampling",
        "sum_bound",
        "bound_ok",
        "envelope",
        "samples_per_rep",
    ];
    collect(cfg, threads, Table::new(cfg.experiment, header), |p| {
        let mut worst: Option<MultiLatticePlan> = None;
        let mut per_rep = Vec::new();
        let mut all_ok = true;
        for rep in 0..repetitions(cfg) {
            let set = instance(p, rep)?;
            let plan = plan_for(cfg, p, rep, &set)?;
            per_rep.push(plan.total_samples());
            all_ok &= plan.bound_ok();
            if worst.as_ref().is_none_or(|w| plan.total_samples() > w.total_samples()) {
                worst = Some(plan);
            }
        }
        let w = worst.expect("at least one repetition");
        let card = w.set().len();
        let mut row = p.lead(card);
        row.extend([
            card.to_string(),
            w.len().to_string(),
            w.sum_primes().to_string(),
            w.total_samples().to_string(),
            w.oversampling().to_string(),
            w.sum_bound().to_string(),
            all_ok.to_string(),
            (1.7 * (card as f64).ln() + 3.0).to_string(),
            join(&per_rep),
        ]);
        Ok((p.key(card), row))
    })
}

/// Total samples divided by the size of the single lattice.
pub fn run_sample_ratio(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Table> {
    cfg.validate()?;
    let header = vec![
        "d",
        "R",
        "s",
        "seed",
        "card",
        "variant",
        "M",
        "total_samples",
        "ratio",
        "ratio_per_rep",
    ];
    collect(cfg, threads, Table::new(cfg.experiment, header), |p| {
        let mut best: Option<(f64, MultiLatticePlan)> = None;
        let mut per_rep = Vec::new();
        for rep in 0..repetitions(cfg) {
            let set = instance(p, rep)?;
            let plan = plan_for(cfg, p, rep, &set)?;
            let ratio = ((plan.total_samples() as f64).log2() - log2_biguint(&plan.source().size)).exp2();
            per_rep.push(ratio);
            if best.as_ref().is_none_or(|(r, _)| ratio > *r) {
                best = Some((ratio, plan));
            }
        }
        let (ratio, plan) = best.expect("at least one repetition");
        let card = plan.set().len();
        let mut row = p.lead(card);
        row.extend([
            card.to_string(),
            plan.variant().to_string(),
            plan.source().size.to_string(),
            plan.total_samples().to_string(),
            ratio.to_string(),
            join(&per_rep),
        ]);
        Ok((p.key(card), row))
    })
}

fn g3_table(cfg: &ExperimentConfig) -> Result<G3Table> {
    let k_max = cfg.k_max.unwrap_or(DEFAULT_K_MAX);
    match &cfg.g3_table {
        Some(path) => G3Table::load_or_build(path, k_max, DEFAULT_TAIL_TOLERANCE),
        None => g3_coeff_oracle(k_max, DEFAULT_TAIL_TOLERANCE),
    }
}

/// Relative `L_2` error of the averaged multiple-lattice approximation of `G_3^d`.
pub fn run_approx_g3(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Table> {
    cfg.validate()?;
    let table = g3_table(cfg)?;
    let header = vec![
        "d",
        "R",
        "card",
        "L",
        "total_samples",
        "rel_l2_error",
        "truncation_error",
    ];
    collect(cfg, threads, Table::new(cfg.experiment, header), |p| {
        let spec = G3Spec::<f64>::from_table(p.d, table.clone())?;
        let set = instance(p, 0)?;
        let lattice = single_lattice(&set, cfg.source, derive_seed(p, 0, "cbc"))?;
        let plan = build_full(&set, &lattice)?;
        let samples = sample_on_plan(&spec, &plan)?;
        let approx = reconstruct_average(&samples, &plan)?;
        let card = set.len();
        let row = vec![
            p.d.to_string(),
            p.r.to_string(),
            card.to_string(),
            plan.len().to_string(),
            plan.total_samples().to_string(),
            format!("{:e}", spec.rel_l2_error(&approx)?),
            format!("{:e}", spec.truncation_error(&set)?),
        ];
        Ok((p.key(card), row))
    })
}

/// Sample-and-reconstruct of random unit-modulus polynomials.
pub fn run_roundtrip(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Table> {
    cfg.validate()?;
    let header = vec![
        "d",
        "R",
        "s",
        "seed",
        "variant",
        "card",
        "L",
        "max_rel_error",
        "pass",
    ];
    collect(cfg, threads, Table::new(cfg.experiment, header), |p| {
        let mut worst = 0.0f64;
        let mut card = 0;
        let mut l = 0;
        for rep in 0..repetitions(cfg) {
            let set = instance(p, rep)?;
            let plan = plan_for(cfg, p, rep, &set)?;
            let poly = TrigPolynomial::<f64>::random_unit(set, derive_seed(p, rep, "coeffs"));
            let samples = sample_on_plan(&poly, &plan)?;
            let err = reconstruct(&samples, &plan)?.max_rel_error(&poly)?;
            if rep == 0 || err > worst || err.is_nan() {
                worst = err;
                card = plan.set().len();
                l = plan.len();
            }
        }
        let mut row = p.lead(card);
        row.extend([
            cfg.variant().to_string(),
            card.to_string(),
            l.to_string(),
            format!("{worst:e}"),
            (worst <= ROUNDTRIP_TOLERANCE).to_string(),
        ]);
        Ok((p.key(card), row))
    })
}

/// Dispatches on the configured experiment.
pub fn run(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Table> {
    match cfg.experiment {
        Experiment::OversamplingFull | Experiment::OversamplingReduction => run_oversampling(cfg, threads),
        Experiment::SampleRatio => run_sample_ratio(cfg, threads),
        Experiment::ApproxG3 => run_approx_g3(cfg, threads),
        Experiment::Roundtrip => run_roundtrip(cfg, threads),
    }
}
