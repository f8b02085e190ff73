//! Multiple rank-1 lattices `Λ(z, P̃_0), …, Λ(z, P̃_{L-1})` derived from one
//! reconstructing single lattice.
//!
//! Two variants are provided:
//!
//! * [`Variant::Full`]: each round takes the first unused candidate prime
//!   under which at most half of the still unassigned frequencies collide
//!   with *any* frequency of `I`. Every coefficient is then read off a single
//!   lattice without further processing.
//! * [`Variant::Reduction`]: each round only asks for non-collision within
//!   the frequencies not yet assigned, with the candidate set rebuilt from
//!   the residual set. Reconstruction has to peel off earlier rounds.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use bitvec::prelude::*;
use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flat::Flat;
use crate::freqset::FrequencySet;
use crate::primes::{log2_biguint, CandidateSet, PrimeIndexer, C1, C2};
use crate::rank1::{modulus_image, LatticeSource, Rank1Lattice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Reduction,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Reduction => "reduction",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "reduction" => Ok(Variant::Reduction),
            _ => Err(Error::invalid(format!(
                "unknown variant {s:?} (expected full or reduction)"
            ))),
        }
    }
}

/// Diagnostics of one selection round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub prime: u64,
    /// Unassigned frequencies before the round.
    pub active_before: u64,
    /// Unassigned frequencies after the round.
    pub active_after: u64,
    /// Candidate primes examined, including the selected one.
    pub scanned: u64,
    /// Size of the candidate set the round drew from.
    pub candidates: u64,
    /// `M̃` of the frequencies the round worked on.
    pub tilde_m: String,
}

#[derive(Debug, Clone)]
pub struct PlanOptions {
    /// Memory budget for cached per-prime collision bitsets (full variant).
    pub cache_bytes: usize,
    /// Check the reconstruction property of the input lattice.
    pub verify_input: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            cache_bytes: 256 << 20,
            verify_input: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiLatticePlan {
    set: FrequencySet,
    source: Rank1Lattice,
    tilde_m: BigUint,
    variant: Variant,
    primes: Vec<u64>,
    nu: Vec<u32>,
    rounds: Vec<Round>,
    /// Full variant: for each lattice, every frequency that is alias-free
    /// against all of `I`. Reduction variant: the `ν` classes.
    recoverable: Vec<Vec<u32>>,
}

impl MultiLatticePlan {
    pub fn set(&self) -> &FrequencySet {
        &self.set
    }

    pub fn z(&self) -> &[BigUint] {
        &self.source.z
    }

    pub fn source(&self) -> &Rank1Lattice {
        &self.source
    }

    pub fn tilde_m(&self) -> &BigUint {
        &self.tilde_m
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// `L`.
    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn nu(&self) -> &[u32] {
        &self.nu
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    /// Frequencies recoverable from lattice `l`: the full alias-free set
    /// (full variant) or the `ν` class (reduction variant).
    pub fn recoverable(&self, l: usize) -> &[u32] {
        &self.recoverable[l]
    }

    /// Indices with `ν(k) = l`.
    pub fn class(&self, l: usize) -> Vec<u32> {
        self.nu
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v as usize == l)
            .map(|(i, _)| i as u32)
            .collect()
    }

    pub fn sum_primes(&self) -> u64 {
        self.primes.iter().sum()
    }

    /// `1 − L + Σ P̃_ℓ`: the origin is shared by all lattices.
    pub fn total_samples(&self) -> u64 {
        total_samples(&self.primes)
    }

    pub fn oversampling(&self) -> f64 {
        self.total_samples() as f64 / self.set.len() as f64
    }

    /// Bound on `Σ P̃_ℓ` guaranteed for this plan's variant.
    pub fn sum_bound(&self) -> f64 {
        let s = self.set.len() as u64;
        match self.variant {
            Variant::Full => full_sum_bound(s, &self.tilde_m),
            Variant::Reduction => reduction_sum_bound(s, &self.tilde_m),
        }
    }

    pub fn bound_ok(&self) -> bool {
        self.sum_primes() as f64 <= self.sum_bound()
    }

    /// Recomputes the non-collision certificate and the structural
    /// invariants (coverage, halving, distinct primes, `L` bound).
    pub fn verify(&self) -> Result<()> {
        let s = self.set.len();
        let l = self.primes.len();
        let fail = |msg: String| Err(Error::Certificate(msg));
        if self.nu.len() != s {
            return fail(format!("nu has {} entries for {s} frequencies", self.nu.len()));
        }
        if l == 0 || l > max_rounds(s as u64) {
            return fail(format!("L = {l} outside [1, floor(log2 s) + 1] for s = {s}"));
        }
        let distinct: HashSet<u64> = self.primes.iter().copied().collect();
        if distinct.len() != l {
            return fail("primes are not pairwise distinct".into());
        }
        let mut class_sizes = vec![0u64; l];
        for &v in &self.nu {
            match class_sizes.get_mut(v as usize) {
                Some(c) => *c += 1,
                None => return fail(format!("nu value {v} out of range")),
            }
        }
        if let Some(empty) = class_sizes.iter().position(|&c| c == 0) {
            return fail(format!("lattice {empty} recovers no frequency"));
        }
        let mut active = s as u64;
        for (r, c) in class_sizes.iter().enumerate() {
            let after = active - c;
            if 2 * after > active {
                return fail(format!("round {r} does not halve: {active} -> {after}"));
            }
            active = after;
        }
        let flat = Flat::new(&self.set, self.z());
        let mut res = Vec::new();
        for (ell, &p) in self.primes.iter().enumerate() {
            let scope: Vec<u32> = match self.variant {
                Variant::Full => (0..s as u32).collect(),
                Variant::Reduction => (0..s as u32)
                    .filter(|&i| self.nu[i as usize] as usize >= ell)
                    .collect(),
            };
            flat.residues_into(p, Some(&scope), &mut res);
            let mut counts: HashMap<u64, u32> = HashMap::with_capacity(res.len());
            for &r in &res {
                *counts.entry(r).or_default() += 1;
            }
            for (j, &i) in scope.iter().enumerate() {
                if self.nu[i as usize] as usize == ell && counts[&res[j]] != 1 {
                    return fail(format!(
                        "frequency {i} collides modulo {p} although assigned to lattice {ell}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Deterministic SHA-256 of the plan file contents.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        let file = PlanFile {
            variant: self.variant,
            source: self.source.source,
            dim: self.set.dim() as u64,
            s: self.set.len() as u64,
            z: self.source.z.iter().map(|v| v.to_string()).collect(),
            source_m: self.source.size.to_string(),
            tilde_m: self.tilde_m.to_string(),
            primes: self.primes.clone(),
            nu: self.nu.clone(),
            rounds: self.rounds.clone(),
        };
        toml::to_string(&file).expect("plan serializes")
    }

    /// Loads a plan for the frequency set it was built on and re-verifies it.
    pub fn from_toml(text: &str, set: &FrequencySet) -> Result<Self> {
        let file: PlanFile = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            msg: e.message().to_string(),
        })?;
        if file.dim as usize != set.dim() {
            return Err(Error::DimensionMismatch {
                expected: set.dim(),
                got: file.dim as usize,
            });
        }
        if file.s as usize != set.len() || file.nu.len() != set.len() {
            return Err(Error::LengthMismatch {
                expected: set.len(),
                got: file.nu.len(),
            });
        }
        let parse = |s: &str| {
            BigUint::from_str(s).map_err(|e| Error::Parse {
                line: 0,
                msg: format!("bad integer {s:?}: {e}"),
            })
        };
        let z = file.z.iter().map(|v| parse(v)).collect::<Result<Vec<_>>>()?;
        let source = Rank1Lattice::new(z, parse(&file.source_m)?, file.source)?;
        if source.dim() != set.dim() {
            return Err(Error::DimensionMismatch {
                expected: set.dim(),
                got: source.dim(),
            });
        }
        let tilde_m = parse(&file.tilde_m)?;
        let flat = Flat::new(set, &source.z);
        if flat.tilde_m(None) != tilde_m {
            return Err(Error::Certificate(
                "stored tilde_M does not match the frequency set".into(),
            ));
        }
        let mut plan = MultiLatticePlan {
            set: set.clone(),
            source,
            tilde_m,
            variant: file.variant,
            primes: file.primes,
            nu: file.nu,
            rounds: file.rounds,
            recoverable: vec![],
        };
        plan.verify()?;
        plan.recoverable = match plan.variant {
            Variant::Full => {
                let mut res = Vec::new();
                plan.primes
                    .iter()
                    .map(|&p| {
                        flat.residues_into(p, None, &mut res);
                        bits_to_indices(&noncolliding_bits(&res, p))
                    })
                    .collect()
            }
            Variant::Reduction => (0..plan.primes.len()).map(|l| plan.class(l)).collect(),
        };
        Ok(plan)
    }

    pub fn read(path: impl AsRef<Path>, set: &FrequencySet) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?, set)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct PlanFile {
    variant: Variant,
    source: LatticeSource,
    dim: u64,
    s: u64,
    z: Vec<String>,
    #[serde(rename = "source_M")]
    source_m: String,
    #[serde(rename = "tilde_M")]
    tilde_m: String,
    primes: Vec<u64>,
    nu: Vec<u32>,
    rounds: Vec<Round>,
}

pub fn total_samples(primes: &[u64]) -> u64 {
    1 + primes.iter().sum::<u64>() - primes.len() as u64
}

fn max_rounds(s: u64) -> usize {
    (63 - s.max(1).leading_zeros()) as usize + 1
}

/// `Σ P̃_ℓ ≤ 2 C_1 s log2(M̃) ln(C_2 s log_s M̃)`, or 2 for `s = 1`.
pub fn full_sum_bound(s: u64, tilde_m: &BigUint) -> f64 {
    if s <= 1 {
        return 2.0;
    }
    let s = s as f64;
    let lg = log2_biguint(tilde_m);
    2.0 * C1 * s * lg * (C2 * s * lg / s.log2()).ln()
}

/// `Σ P̃_ℓ ≤ 8 s log2(M̃) ln(2 log2 M̃)`, or 2 for `s = 1`.
pub fn reduction_sum_bound(s: u64, tilde_m: &BigUint) -> f64 {
    if s <= 1 {
        return 2.0;
    }
    let lg = log2_biguint(tilde_m);
    8.0 * s as f64 * lg * (2.0 * lg).ln()
}

/// `6 s log2(d N_I M) ln(3 s / log2(s) · log2(d N_I M))`, or 2 for `s = 1`.
pub fn lattice_sum_bound(s: u64, d: usize, n_i: u64, m: &BigUint) -> f64 {
    if s <= 1 {
        return 2.0;
    }
    let lg = log2_biguint(&(m * d as u64 * n_i));
    let s = s as f64;
    6.0 * s * lg * (3.0 * s / s.log2() * lg).ln()
}

/// Splits `active` (indices into `values`) by whether `values[i] mod p` is
/// unique among all of `values`. Returns `(noncolliding, colliding)`.
pub fn survivors(active: &[u32], values: &[u64], p: u64) -> (Vec<u32>, Vec<u32>) {
    let res: Vec<u64> = values.iter().map(|v| v % p).collect();
    let bits = noncolliding_bits(&res, p);
    active.iter().partition(|&&i| bits[i as usize])
}

/// Bit `i` is set iff `res[i]` occurs exactly once in `res`.
fn noncolliding_bits(res: &[u64], p: u64) -> BitVec<u64> {
    let n = res.len();
    let mut out = bitvec![u64, Lsb0; 0; n];
    if (p as usize) <= (8 * n).max(1 << 22) {
        let mut counts = vec![0u8; p as usize];
        for &r in res {
            let c = &mut counts[r as usize];
            *c = c.saturating_add(1);
        }
        for (i, &r) in res.iter().enumerate() {
            if counts[r as usize] == 1 {
                out.set(i, true);
            }
        }
    } else {
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_unstable_by_key(|&i| res[i as usize]);
        let mut a = 0;
        while a < n {
            let mut b = a + 1;
            while b < n && res[order[b] as usize] == res[order[a] as usize] {
                b += 1;
            }
            if b == a + 1 {
                out.set(order[a] as usize, true);
            }
            a = b;
        }
    }
    out
}

fn bits_to_indices(bits: &BitSlice<u64>) -> Vec<u32> {
    bits.iter_ones().map(|i| i as u32).collect()
}

fn check_dim(set: &FrequencySet, lattice: &Rank1Lattice) -> Result<()> {
    if set.dim() != lattice.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            got: lattice.dim(),
        });
    }
    Ok(())
}

fn check_input(set: &FrequencySet, lattice: &Rank1Lattice, flat: &Flat, tilde: &BigUint, opts: &PlanOptions) -> Result<()> {
    if !opts.verify_input {
        return Ok(());
    }
    let ok = match flat.distinct() {
        Some(false) => false,
        // Distinct integers spread over fewer than M consecutive values stay
        // distinct modulo M.
        Some(true) if *tilde <= lattice.size => true,
        _ => modulus_image(set, &lattice.z, &lattice.size)?.is_injective(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::NotReconstructing)
    }
}

/// Ascending walk over a candidate set that skips already chosen primes and
/// hands out batches for parallel evaluation.
struct Cursor<'a> {
    cand: &'a CandidateSet,
    indexer: &'a PrimeIndexer,
    next: u64,
    batch: usize,
}

impl<'a> Cursor<'a> {
    fn new(cand: &'a CandidateSet, indexer: &'a PrimeIndexer) -> Self {
        Cursor {
            cand,
            indexer,
            next: 0,
            batch: rayon::current_num_threads().max(1) * 2,
        }
    }

    fn next_batch(&mut self, chosen: &HashSet<u64>) -> Result<Vec<u64>> {
        let mut primes = Vec::with_capacity(self.batch);
        while primes.len() < self.batch {
            match self.cand.get(self.indexer, self.next)? {
                Some(p) => {
                    self.next += 1;
                    if !chosen.contains(&p) {
                        primes.push(p);
                    }
                }
                None => break,
            }
        }
        Ok(primes)
    }
}

fn evaluate<T: Send>(primes: &[u64], eval: impl Fn(u64) -> T + Sync) -> Vec<T> {
    if primes.len() > 1 && rayon::current_num_threads() > 1 {
        primes.par_iter().map(|&p| eval(p)).collect()
    } else {
        primes.iter().map(|&p| eval(p)).collect()
    }
}

fn exhausted(round: usize, active: usize, scanned: u64, cand: &CandidateSet, indexer: &PrimeIndexer) -> Error {
    Error::CandidateExhausted {
        round,
        active,
        scanned,
        candidates: cand.count,
        first: indexer.nth_prime(cand.q).unwrap_or(0),
    }
}

/// Full variant: every frequency is alias-free against all of `I` on its
/// lattice.
pub fn build_full(set: &FrequencySet, lattice: &Rank1Lattice) -> Result<MultiLatticePlan> {
    build_full_with(set, lattice, &PlanOptions::default())
}

pub fn build_full_with(set: &FrequencySet, lattice: &Rank1Lattice, opts: &PlanOptions) -> Result<MultiLatticePlan> {
    check_dim(set, lattice)?;
    let flat = Flat::new(set, &lattice.z);
    let tilde = flat.tilde_m(None);
    check_input(set, lattice, &flat, &tilde, opts)?;
    let s = set.len();
    let indexer = PrimeIndexer::global();
    let cand = CandidateSet::new(indexer, s as u64, &tilde)?;

    let bitset_bytes = s.div_ceil(64) * 8 + 64;
    let max_cached = (opts.cache_bytes / bitset_bytes).max(1);
    let mut cache: HashMap<u64, Arc<BitVec<u64>>> = HashMap::new();
    let compute = |p: u64| -> Arc<BitVec<u64>> {
        let mut res = Vec::new();
        flat.residues_into(p, None, &mut res);
        Arc::new(noncolliding_bits(&res, p))
    };

    let mut active: Vec<u32> = (0..s as u32).collect();
    let mut nu = vec![u32::MAX; s];
    let mut primes = Vec::new();
    let mut chosen = HashSet::new();
    let mut rounds = Vec::new();
    let mut recoverable = Vec::new();
    while !active.is_empty() {
        let before = active.len();
        let mut cursor = Cursor::new(&cand, indexer);
        let mut scanned = 0u64;
        let (p, bits) = 'scan: loop {
            let batch = cursor.next_batch(&chosen)?;
            if batch.is_empty() {
                return Err(exhausted(primes.len(), before, scanned, &cand, indexer));
            }
            let missing: Vec<u64> = batch.iter().copied().filter(|p| !cache.contains_key(p)).collect();
            let mut fresh: HashMap<u64, Arc<BitVec<u64>>> =
                missing.iter().copied().zip(evaluate(&missing, compute)).collect();
            for p in batch {
                scanned += 1;
                let bits = match cache.get(&p) {
                    Some(b) => b.clone(),
                    None => fresh.remove(&p).expect("evaluated"),
                };
                let after = active.iter().filter(|&&i| !bits[i as usize]).count();
                if 2 * after <= before {
                    break 'scan (p, bits);
                }
                if cache.len() < max_cached {
                    cache.insert(p, bits);
                }
            }
        };
        let ell = primes.len() as u32;
        active.retain(|&i| {
            if bits[i as usize] {
                nu[i as usize] = ell;
                false
            } else {
                true
            }
        });
        rounds.push(Round {
            prime: p,
            active_before: before as u64,
            active_after: active.len() as u64,
            scanned,
            candidates: cand.count,
            tilde_m: tilde.to_string(),
        });
        recoverable.push(bits_to_indices(&bits));
        primes.push(p);
        chosen.insert(p);
    }
    Ok(MultiLatticePlan {
        set: set.clone(),
        source: lattice.clone(),
        tilde_m: tilde,
        variant: Variant::Full,
        primes,
        nu,
        rounds,
        recoverable,
    })
}

/// Reduction variant: round `ℓ` only needs non-collision within the
/// frequencies not recovered by earlier rounds.
pub fn build_reduction(set: &FrequencySet, lattice: &Rank1Lattice) -> Result<MultiLatticePlan> {
    build_reduction_with(set, lattice, &PlanOptions::default())
}

pub fn build_reduction_with(set: &FrequencySet, lattice: &Rank1Lattice, opts: &PlanOptions) -> Result<MultiLatticePlan> {
    check_dim(set, lattice)?;
    let flat = Flat::new(set, &lattice.z);
    let tilde = flat.tilde_m(None);
    check_input(set, lattice, &flat, &tilde, opts)?;
    let s = set.len();
    let indexer = PrimeIndexer::global();

    let mut residual: Vec<u32> = (0..s as u32).collect();
    let mut nu = vec![u32::MAX; s];
    let mut primes = Vec::new();
    let mut chosen = HashSet::new();
    let mut rounds = Vec::new();
    let mut recoverable = Vec::new();
    while !residual.is_empty() {
        let before = residual.len();
        let local_tilde = flat.tilde_m(Some(&residual));
        let cand = CandidateSet::new(indexer, before as u64, &local_tilde)?;
        let mut cursor = Cursor::new(&cand, indexer);
        let mut scanned = 0u64;
        let (p, bits) = 'scan: loop {
            let batch = cursor.next_batch(&chosen)?;
            if batch.is_empty() {
                return Err(exhausted(primes.len(), before, scanned, &cand, indexer));
            }
            let evals = evaluate(&batch, |p| {
                let mut res = Vec::new();
                flat.residues_into(p, Some(&residual), &mut res);
                noncolliding_bits(&res, p)
            });
            for (p, bits) in batch.into_iter().zip(evals) {
                scanned += 1;
                if 2 * bits.count_ones() >= before {
                    break 'scan (p, bits);
                }
            }
        };
        let ell = primes.len() as u32;
        let mut class = Vec::new();
        let mut rest = Vec::new();
        for (j, &i) in residual.iter().enumerate() {
            if bits[j] {
                nu[i as usize] = ell;
                class.push(i);
            } else {
                rest.push(i);
            }
        }
        residual = rest;
        rounds.push(Round {
            prime: p,
            active_before: before as u64,
            active_after: residual.len() as u64,
            scanned,
            candidates: cand.count,
            tilde_m: local_tilde.to_string(),
        });
        recoverable.push(class);
        primes.push(p);
        chosen.insert(p);
    }
    Ok(MultiLatticePlan {
        set: set.clone(),
        source: lattice.clone(),
        tilde_m: tilde,
        variant: Variant::Reduction,
        primes,
        nu,
        rounds,
        recoverable,
    })
}

pub fn build(set: &FrequencySet, lattice: &Rank1Lattice, variant: Variant) -> Result<MultiLatticePlan> {
    match variant {
        Variant::Full => build_full(set, lattice),
        Variant::Reduction => build_reduction(set, lattice),
    }
}

impl MultiLatticePlan {
    /// Residues `k·z mod P̃_ℓ` for all of `I`.
    pub fn residues(&self, l: usize) -> Vec<u64> {
        let mut out = Vec::new();
        Flat::new(&self.set, self.z()).residues_into(self.primes[l], None, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freqset::{hyperbolic_cross_even, random_cube_set};
    use crate::rank1::{build_cbc, build_crt, build_mixed_radix, CbcOptions};
    use proptest::prelude::*;

    fn three() -> FrequencySet {
        FrequencySet::from_rows(2, &[[0i64, 0], [2, 0], [0, 2]]).unwrap()
    }

    fn lat(z: &[u64], m: u64) -> Rank1Lattice {
        Rank1Lattice::from_u64(z, m, LatticeSource::User).unwrap()
    }

    #[test]
    fn survivors_examples() {
        let all = [0u64, 2, 10];
        assert_eq!(survivors(&[0, 1, 2], &all, 3), (vec![0, 1, 2], vec![]));
        assert_eq!(survivors(&[0, 1, 2], &all, 2), (vec![], vec![0, 1, 2]));
        assert_eq!(survivors(&[0], &[7], 2), (vec![0], vec![]));
        // Large moduli take the sorting path.
        let p = (1u64 << 41) + 1;
        let big = [5u64, 1 << 40, 5 + p];
        assert_eq!(survivors(&[0, 1, 2], &big, p), (vec![1], vec![0, 2]));
    }

    #[test]
    fn small_plans() {
        for variant in [Variant::Full, Variant::Reduction] {
            let plan = build(&three(), &lat(&[1, 5], 25), variant).unwrap();
            assert_eq!(plan.primes(), &[3]);
            assert_eq!(plan.nu(), &[0, 0, 0]);
            assert_eq!(plan.total_samples(), 3);
            plan.verify().unwrap();

            let single = FrequencySet::from_rows(3, &[[4i64, -2, 6]]).unwrap();
            let plan = build(&single, &lat(&[1, 1, 1], 1), variant).unwrap();
            assert_eq!(plan.primes(), &[2]);
            assert_eq!(plan.total_samples(), 2);
        }
    }

    #[test]
    fn rejects_non_reconstructing_input() {
        let pair = FrequencySet::from_rows(2, &[[0i64, 0], [2, 0]]).unwrap();
        assert!(matches!(build_full(&pair, &lat(&[1, 1], 2)), Err(Error::NotReconstructing)));
        assert!(matches!(
            build_reduction(&pair, &lat(&[1, 1], 2)),
            Err(Error::NotReconstructing)
        ));
        assert!(matches!(
            build_full(&pair, &lat(&[1], 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hyperbolic_cross_lat1_sample_counts() {
        // (|I|, #samples) for d = 2 and R = 2, 4, 8, 16, 32.
        let want = [(5, 7), (13, 53), (29, 99), (65, 215), (145, 801)];
        for (j, &(card, samples)) in want.iter().enumerate() {
            let h = hyperbolic_cross_even(2, 2 << j).unwrap();
            let plan = build_full(&h, &build_mixed_radix(&h).unwrap()).unwrap();
            assert_eq!((h.len(), plan.total_samples()), (card, samples));
        }
    }

    #[test]
    fn reduction_oversampling_d2() {
        let want = [1.4, 1.462, 1.483, 2.354, 1.759, 1.845];
        for (j, &w) in want.iter().enumerate() {
            let h = hyperbolic_cross_even(2, 2 << j).unwrap();
            let plan = build_reduction(&h, &build_mixed_radix(&h).unwrap()).unwrap();
            assert!((plan.oversampling() - w).abs() < 5e-4, "R={} got {}", 2 << j, plan.oversampling());
        }
    }

    #[test]
    fn bound_examples() {
        assert_eq!(full_sum_bound(1, &BigUint::from(1u32)), 2.0);
        assert_eq!(reduction_sum_bound(1, &BigUint::from(7u32)), 2.0);
        assert_eq!(lattice_sum_bound(1, 3, 0, &BigUint::from(1u32)), 2.0);
        let b = full_sum_bound(2, &BigUint::from(2u32));
        assert!((b - 2.0 * 2.832 * 2.0 * (2.3f64 * 2.0).ln()).abs() < 1e-12);
        let b = reduction_sum_bound(4, &BigUint::from(16u32));
        assert!((b - 8.0 * 4.0 * 4.0 * 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn plan_file_roundtrip() {
        let h = hyperbolic_cross_even(3, 16).unwrap();
        for variant in [Variant::Full, Variant::Reduction] {
            let plan = build(&h, &build_mixed_radix(&h).unwrap(), variant).unwrap();
            let text = plan.to_toml();
            let back = MultiLatticePlan::from_toml(&text, &h).unwrap();
            assert_eq!(back.to_toml(), text);
            assert_eq!(back.hash(), plan.hash());
            for l in 0..plan.len() {
                assert_eq!(back.recoverable(l), plan.recoverable(l));
            }
            let broken = text.replacen("nu = [", "nu = [1, ", 1);
            assert!(MultiLatticePlan::from_toml(&broken, &h).is_err());
        }
        let other = hyperbolic_cross_even(3, 8).unwrap();
        let plan = build_full(&h, &build_mixed_radix(&h).unwrap()).unwrap();
        assert!(MultiLatticePlan::from_toml(&plan.to_toml(), &other).is_err());
    }

    #[test]
    fn tampered_certificate_is_detected() {
        let h = hyperbolic_cross_even(2, 16).unwrap();
        let mut plan = build_full(&h, &build_mixed_radix(&h).unwrap()).unwrap();
        plan.primes[0] = 2;
        assert!(matches!(plan.verify(), Err(Error::Certificate(_))));
    }

    #[test]
    fn single_thread_and_parallel_plans_agree() {
        let set = random_cube_set(6, 64, 2000, 3).unwrap();
        let lattice = build_mixed_radix(&set).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = pool.install(|| build_full(&set, &lattice).unwrap());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let b = pool.install(|| build_full(&set, &lattice).unwrap());
        assert_eq!(a.to_toml(), b.to_toml());
        let tiny = PlanOptions {
            cache_bytes: 1,
            ..Default::default()
        };
        assert_eq!(build_full_with(&set, &lattice, &tiny).unwrap().to_toml(), a.to_toml());
    }

    fn check_invariants(plan: &MultiLatticePlan) -> std::result::Result<(), TestCaseError> {
        plan.verify().map_err(|e| TestCaseError::fail(e.to_string()))?;
        let s = plan.set().len() as u64;
        prop_assert!(plan.len() <= (s as f64).log2().floor() as usize + 1);
        prop_assert!(plan.bound_ok(), "sum {} > bound {}", plan.sum_primes(), plan.sum_bound());
        let mut active = s;
        for r in plan.rounds() {
            prop_assert_eq!(r.active_before, active);
            prop_assert!(2 * r.active_after <= r.active_before);
            active = r.active_after;
        }
        prop_assert_eq!(active, 0);
        if plan.variant() == Variant::Full {
            let cand = crate::primes::candidate_primes(s, plan.tilde_m()).unwrap();
            prop_assert!(plan.primes().iter().all(|p| cand.contains(p)));
        }
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn plan_invariants(dim in 1usize..7, s in 1usize..400, seed in any::<u64>(), src in 0u8..3) {
            let cube = 129usize.saturating_pow(dim as u32);
            let set = random_cube_set(dim, 64, s.min(cube), seed).unwrap();
            let lattice = match src {
                0 => build_mixed_radix(&set).unwrap(),
                1 => build_crt(&set).unwrap(),
                _ => build_cbc(&set, &CbcOptions { seed, ..Default::default() }).unwrap(),
            };
            for variant in [Variant::Full, Variant::Reduction] {
                let plan = build(&set, &lattice, variant).unwrap();
                check_invariants(&plan)?;
                prop_assert_eq!(build(&set, &lattice, variant).unwrap().to_toml(), plan.to_toml());
            }
        }
    }
}
