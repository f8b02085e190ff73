//! Single rank-1 lattices `Λ(z, M) = {(j z mod M) / M : j ∈ [M]}`.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flat::{residue_mod, z_mod, Flat};
use crate::freqset::FrequencySet;
use crate::primes::PrimeIndexer;

/// Upper limit on the total bits stored in a constructed generating vector.
pub const MAX_LATTICE_BITS: u64 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeSource {
    Lat1,
    Lat2,
    Cbc,
    User,
}

impl LatticeSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LatticeSource::Lat1 => "lat1",
            LatticeSource::Lat2 => "lat2",
            LatticeSource::Cbc => "cbc",
            LatticeSource::User => "user",
        }
    }
}

impl fmt::Display for LatticeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LatticeSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lat1" => Ok(LatticeSource::Lat1),
            "lat2" => Ok(LatticeSource::Lat2),
            "cbc" => Ok(LatticeSource::Cbc),
            "user" => Ok(LatticeSource::User),
            _ => Err(Error::invalid(format!(
                "unknown lattice source {s:?} (expected lat1, lat2, cbc or user)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rank1Lattice {
    pub z: Vec<BigUint>,
    pub size: BigUint,
    pub source: LatticeSource,
}

/// Residues `m_{z,M}(k) = k·z mod M`, aligned with the frequency set order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModulusImage {
    Small(Vec<u64>),
    Wide(Vec<BigUint>),
}

impl ModulusImage {
    pub fn len(&self) -> usize {
        match self {
            ModulusImage::Small(v) => v.len(),
            ModulusImage::Wide(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> BigUint {
        match self {
            ModulusImage::Small(v) => BigUint::from(v[i]),
            ModulusImage::Wide(v) => v[i].clone(),
        }
    }

    /// True when the residues are pairwise distinct.
    pub fn is_injective(&self) -> bool {
        fn distinct<T: Ord + Clone>(v: &[T]) -> bool {
            let mut s = v.to_vec();
            s.sort_unstable();
            s.windows(2).all(|w| w[0] != w[1])
        }
        match self {
            ModulusImage::Small(v) => distinct(v),
            ModulusImage::Wide(v) => distinct(v),
        }
    }
}

impl Rank1Lattice {
    pub fn new(z: Vec<BigUint>, size: BigUint, source: LatticeSource) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::invalid("generating vector must be non-empty"));
        }
        if size.is_zero() {
            return Err(Error::invalid("lattice size must be positive"));
        }
        Ok(Rank1Lattice { z, size, source })
    }

    pub fn from_u64(z: &[u64], size: u64, source: LatticeSource) -> Result<Self> {
        Self::new(z.iter().map(|&v| BigUint::from(v)).collect(), size.into(), source)
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn size_u64(&self) -> Option<u64> {
        self.size.to_u64()
    }

    /// Node `x_j` as exact numerators `(j z_t mod M)`; the coordinates are
    /// these divided by `M`.
    pub fn node_numerators(&self, j: u64) -> Result<Vec<u64>> {
        let m = self.require_u64_size()?;
        let zm = z_mod(&self.z, m);
        Ok(zm.iter().map(|&zt| mul_mod(j % m, zt, m)).collect())
    }

    /// Stream of the `M` nodes `x_j ∈ [0,1)^d`.
    pub fn nodes(&self) -> Result<impl Iterator<Item = Vec<f64>> + '_> {
        let m = self.require_u64_size()?;
        let zm = z_mod(&self.z, m);
        Ok((0..m).map(move |j| {
            zm.iter()
                .map(|&zt| mul_mod(j, zt, m) as f64 / m as f64)
                .collect()
        }))
    }

    fn require_u64_size(&self) -> Result<u64> {
        self.size_u64().ok_or_else(|| {
            Error::ResourceLimit(format!(
                "lattice size with {} bits cannot be enumerated",
                self.size.bits()
            ))
        })
    }

    pub fn to_toml(&self) -> String {
        let file = LatticeFile {
            z: self.z.iter().map(|v| v.to_string()).collect(),
            m: self.size.to_string(),
            source: self.source,
        };
        toml::to_string(&file).expect("lattice serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: LatticeFile = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            msg: e.message().to_string(),
        })?;
        let parse = |s: &str| {
            BigUint::from_str(s.trim()).map_err(|e| Error::Parse {
                line: 0,
                msg: format!("bad integer {s:?}: {e}"),
            })
        };
        let z = file.z.iter().map(|s| parse(s)).collect::<Result<Vec<_>>>()?;
        Self::new(z, parse(&file.m)?, file.source)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct LatticeFile {
    z: Vec<String>,
    #[serde(rename = "M")]
    m: String,
    source: LatticeSource,
}

#[inline]
fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn check_dim(set: &FrequencySet, z: &[BigUint]) -> Result<()> {
    if set.dim() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            got: z.len(),
        });
    }
    Ok(())
}

/// `k ↦ k·z mod M` over `I`, by per-component modular accumulation.
pub fn modulus_image(set: &FrequencySet, z: &[BigUint], size: &BigUint) -> Result<ModulusImage> {
    check_dim(set, z)?;
    if size.is_zero() {
        return Err(Error::invalid("lattice size must be positive"));
    }
    if let Some(m) = size.to_u64() {
        let zm = z_mod(z, m);
        return Ok(ModulusImage::Small(
            set.iter().map(|row| residue_mod(row, &zm, m)).collect(),
        ));
    }
    let zm: Vec<BigUint> = z.iter().map(|zt| zt % size).collect();
    let out = set
        .iter()
        .map(|row| {
            let mut acc = BigUint::zero();
            for (&k, zt) in row.iter().zip(&zm) {
                if k == 0 || zt.is_zero() {
                    continue;
                }
                let term = (zt * k.unsigned_abs()) % size;
                acc += if k < 0 && !term.is_zero() {
                    size - term
                } else {
                    term
                };
                if acc >= *size {
                    acc -= size;
                }
            }
            acc
        })
        .collect();
    Ok(ModulusImage::Wide(out))
}

pub fn is_reconstructing(set: &FrequencySet, z: &[BigUint], size: &BigUint) -> Result<bool> {
    Ok(modulus_image(set, z, size)?.is_injective())
}

impl Rank1Lattice {
    pub fn is_reconstructing(&self, set: &FrequencySet) -> Result<bool> {
        is_reconstructing(set, &self.z, &self.size)
    }
}

/// `M̃ = max_{k∈I} k·z − min_{k∈I} k·z + 1`, exact.
pub fn tilde_m(set: &FrequencySet, z: &[BigUint]) -> Result<BigUint> {
    check_dim(set, z)?;
    Ok(Flat::new(set, z).tilde_m(None))
}

/// `d · N_I · M`.
pub fn tilde_m_bound_dnm(set: &FrequencySet, size: &BigUint) -> BigUint {
    size * set.dim() as u64 * set.expansion().n_i
}

/// `2 M max_k ||k||_1`.
pub fn tilde_m_bound_l1(set: &FrequencySet, size: &BigUint) -> BigUint {
    size * 2u64 * set.max_l1()
}

/// `z = (1, N_I+1, …, (N_I+1)^{d-1})`, `M = (N_I+1)^d`.
pub fn build_mixed_radix(set: &FrequencySet) -> Result<Rank1Lattice> {
    let d = set.dim();
    let base = BigUint::from(set.expansion().n_i + 1);
    // The components together hold about d^2/2 digits of base N_I+1.
    let bits = base.bits().saturating_mul(d as u64).saturating_mul(d as u64 + 1) / 2;
    if bits > MAX_LATTICE_BITS {
        return Err(Error::ResourceLimit(format!(
            "mixed-radix lattice for d={d} needs about {bits} bits (budget {MAX_LATTICE_BITS})"
        )));
    }
    let mut z = Vec::with_capacity(d);
    let mut acc = BigUint::from(1u32);
    for _ in 0..d {
        z.push(acc.clone());
        acc *= &base;
    }
    Rank1Lattice::new(z, acc, LatticeSource::Lat1)
}

/// `q_1 = d N_I + d + 1`, `q_{t+1}` the next prime after `q_t`,
/// `M = ∏ q_t`, `z_t = M / q_t`.
pub fn build_crt(set: &FrequencySet) -> Result<Rank1Lattice> {
    let d = set.dim();
    let n = set.expansion().n_i;
    let q1 = (d as u64)
        .checked_mul(n)
        .and_then(|v| v.checked_add(d as u64 + 1))
        .ok_or_else(|| Error::ResourceLimit("first CRT modulus overflows".into()))?;
    let indexer = PrimeIndexer::global();
    let mut qs = Vec::with_capacity(d);
    qs.push(q1);
    let mut bits = (64 - q1.leading_zeros()) as u64;
    for _ in 1..d {
        let next = indexer.next_prime_after(*qs.last().unwrap())?;
        bits += (64 - next.leading_zeros()) as u64;
        qs.push(next);
    }
    if bits.saturating_mul(d as u64) > MAX_LATTICE_BITS {
        return Err(Error::ResourceLimit(format!(
            "CRT lattice for d={d} needs about {} bits (budget {MAX_LATTICE_BITS})",
            bits.saturating_mul(d as u64)
        )));
    }
    let m = product(&qs);
    let z = qs.iter().map(|&q| &m / q).collect();
    Rank1Lattice::new(z, m, LatticeSource::Lat2)
}

fn product(v: &[u64]) -> BigUint {
    match v.len() {
        0 => BigUint::from(1u32),
        1 => BigUint::from(v[0]),
        n => product(&v[..n / 2]) * product(&v[n / 2..]),
    }
}

/// Search parameters for [`build_cbc`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbcOptions {
    /// Each failed lattice size moves to the next prime `>= ceil(growth * M)`.
    pub growth: f64,
    /// Pseudo-random components tried per coordinate and lattice size.
    pub tries: usize,
    pub seed: u64,
}

impl Default for CbcOptions {
    fn default() -> Self {
        CbcOptions {
            growth: 1.05,
            tries: 64,
            seed: 0,
        }
    }
}

/// Component-by-component search for a reconstructing lattice of prime size.
pub fn build_cbc(set: &FrequencySet, opts: &CbcOptions) -> Result<Rank1Lattice> {
    if !(opts.growth > 1.0) || opts.tries == 0 {
        return Err(Error::invalid("cbc needs growth > 1 and at least one try"));
    }
    let s = set.len() as u64;
    let n = set.expansion().n_i;
    let target = (s * s).max(2 * (n + 1));
    let limit = 4 * target;
    let indexer = PrimeIndexer::global();
    let mut m = indexer.next_prime_after(s.max(n))?;
    let mut search = CbcSearch::new(set);
    while m <= limit {
        if let Some(z) = search.run(m, opts) {
            return Rank1Lattice::from_u64(&z, m, LatticeSource::Cbc);
        }
        let grown = ((m as f64) * opts.growth).ceil() as u64;
        m = indexer.next_prime_after(grown.max(m + 1) - 1)?;
    }
    Err(Error::SearchExhausted { limit })
}

/// Columns transposed per block for the component loop.
const CBC_CHUNK: usize = 64;

struct CbcSearch<'a> {
    set: &'a FrequencySet,
    /// Columns `chunk_start..chunk_start + CBC_CHUNK`, column-major.
    cols: Vec<i32>,
    chunk_start: Option<usize>,
    /// `(min, max)` of each loaded column.
    bounds: Vec<(i32, i32)>,
    /// `k z_t mod m` for `k` in the current column's range.
    lut: Vec<u64>,
    residues: Vec<u64>,
    trial: Vec<u64>,
    classes: Vec<u32>,
    next_classes: Vec<u32>,
    table: ResidueTable,
}

impl<'a> CbcSearch<'a> {
    fn new(set: &'a FrequencySet) -> Self {
        let s = set.len();
        CbcSearch {
            set,
            cols: Vec::new(),
            chunk_start: None,
            bounds: Vec::new(),
            lut: Vec::new(),
            residues: vec![0; s],
            trial: vec![0; s],
            classes: vec![0; s],
            next_classes: vec![0; s],
            table: ResidueTable::new(s),
        }
    }

    fn run(&mut self, m: u64, opts: &CbcOptions) -> Option<Vec<u64>> {
        let d = self.set.dim();
        let s = self.set.len();
        self.residues.iter_mut().for_each(|r| *r = 0);
        self.classes.iter_mut().for_each(|c| *c = 0);
        let mut n_classes = 1usize;
        let mut z = Vec::with_capacity(d);
        for t in 0..d {
            if n_classes < s {
                n_classes = self.refine(t);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(
                opts.seed ^ m.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (t as u64).rotate_left(32),
            );
            let mut found = None;
            for attempt in 0..opts.tries {
                let zt = if attempt == 0 && t == 0 { 1 % m } else { rng.gen_range(1..m.max(2)) % m };
                if self.admissible(t, zt, m) {
                    found = Some(zt);
                    break;
                }
            }
            let zt = found?;
            std::mem::swap(&mut self.residues, &mut self.trial);
            z.push(zt);
        }
        Some(z)
    }

    /// Loads the column block containing `t` if needed and returns its offset.
    fn column_offset(&mut self, t: usize) -> usize {
        let start = t - t % CBC_CHUNK;
        let s = self.set.len();
        if self.chunk_start != Some(start) {
            let width = CBC_CHUNK.min(self.set.dim() - start);
            self.cols.resize(width * s, 0);
            for (i, row) in self.set.iter().enumerate() {
                for (c, &k) in row[start..start + width].iter().enumerate() {
                    self.cols[c * s + i] = k;
                }
            }
            self.bounds = (0..width)
                .map(|c| {
                    let col = &self.cols[c * s..(c + 1) * s];
                    let lo = col.iter().copied().min().unwrap_or(0);
                    let hi = col.iter().copied().max().unwrap_or(0);
                    (lo, hi)
                })
                .collect();
            self.chunk_start = Some(start);
        }
        (t - start) * s
    }

    /// Refines the projection classes by coordinate `t`; returns their count.
    fn refine(&mut self, t: usize) -> usize {
        let s = self.set.len();
        let off = self.column_offset(t);
        let mut ids: HashMap<(u32, i32), u32> = HashMap::with_capacity(s);
        for i in 0..s {
            let key = (self.classes[i], self.cols[off + i]);
            let next = ids.len() as u32;
            self.next_classes[i] = *ids.entry(key).or_insert(next);
        }
        std::mem::swap(&mut self.classes, &mut self.next_classes);
        ids.len()
    }

    /// Writes the residues after adding `k_t z_t` into `trial` and checks that
    /// distinct projection classes keep distinct residues.
    fn admissible(&mut self, t: usize, zt: u64, m: u64) -> bool {
        let s = self.set.len();
        let off = self.column_offset(t);
        self.table.clear();
        let (lo, hi) = self.bounds[t % CBC_CHUNK];
        let span = (hi as i64 - lo as i64 + 1) as usize;
        let zt = zt % m;
        let use_lut = span <= s.max(256);
        if use_lut {
            self.lut.clear();
            self.lut
                .extend((lo as i64..=hi as i64).map(|k| mul_mod(crate::flat::reduce_i64(k, m), zt, m)));
        }
        for i in 0..s {
            let k = self.cols[off + i];
            let prod = if use_lut {
                self.lut[(k as i64 - lo as i64) as usize]
            } else {
                mul_mod(crate::flat::reduce_i64(k as i64, m), zt, m)
            };
            let mut r = self.residues[i] + prod;
            if r >= m {
                r -= m;
            }
            self.trial[i] = r;
            if !self.table.insert_or_check(r, self.classes[i]) {
                return false;
            }
        }
        true
    }
}

/// Open-addressing map residue → class with O(1) clearing.
struct ResidueTable {
    slots: Vec<Slot>,
    stamp: u32,
    mask: usize,
}

#[derive(Clone, Copy, Default)]
struct Slot {
    key: u64,
    val: u32,
    stamp: u32,
}

impl ResidueTable {
    fn new(n: usize) -> Self {
        let cap = (2 * n.max(1)).next_power_of_two();
        ResidueTable {
            slots: vec![Slot::default(); cap],
            stamp: 0,
            mask: cap - 1,
        }
    }

    fn clear(&mut self) {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.slots.iter_mut().for_each(|s| s.stamp = 0);
            self.stamp = 1;
        }
    }

    /// Inserts `key → val`; false if `key` is present with another value.
    #[inline]
    fn insert_or_check(&mut self, key: u64, val: u32) -> bool {
        let mut h = (key.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 17) as usize & self.mask;
        loop {
            let slot = &mut self.slots[h];
            if slot.stamp != self.stamp {
                *slot = Slot {
                    key,
                    val,
                    stamp: self.stamp,
                };
                return true;
            }
            if slot.key == key {
                return slot.val == val;
            }
            h = (h + 1) & self.mask;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flat::dot_big;
    use crate::freqset::{hyperbolic_cross_even, random_cube_set};
    use num_bigint::BigInt;
    use num_integer::Integer;
    use proptest::prelude::*;

    fn big(v: &[u64]) -> Vec<BigUint> {
        v.iter().map(|&x| BigUint::from(x)).collect()
    }

    fn three() -> FrequencySet {
        FrequencySet::from_rows(2, &[[0i64, 0], [2, 0], [0, 2]]).unwrap()
    }

    #[test]
    fn modulus_image_examples() {
        let set = three();
        let img = modulus_image(&set, &big(&[1, 5]), &BigUint::from(25u32)).unwrap();
        // canonical order (0,0), (0,2), (2,0)
        assert_eq!(img, ModulusImage::Small(vec![0, 10, 2]));
        assert!(img.is_injective());
        let zero = modulus_image(&set, &big(&[0, 0]), &BigUint::from(25u32)).unwrap();
        assert_eq!(zero, ModulusImage::Small(vec![0, 0, 0]));
        let origin = FrequencySet::from_rows(2, &[[0i64, 0]]).unwrap();
        assert_eq!(
            modulus_image(&origin, &big(&[3, 7]), &BigUint::from(11u32)).unwrap(),
            ModulusImage::Small(vec![0])
        );
        let pair = FrequencySet::from_rows(2, &[[0i64, 0], [2, 0]]).unwrap();
        assert!(!is_reconstructing(&pair, &big(&[1, 1]), &BigUint::from(2u32)).unwrap());
        assert!(modulus_image(&set, &big(&[1]), &BigUint::from(2u32)).is_err());
    }

    #[test]
    fn mixed_radix_examples() {
        let lat = build_mixed_radix(&hyperbolic_cross_even(2, 2).unwrap()).unwrap();
        assert_eq!(lat.z, big(&[1, 5]));
        assert_eq!(lat.size, BigUint::from(25u32));
        let origin = FrequencySet::from_rows(2, &[[0i64, 0]]).unwrap();
        let lat = build_mixed_radix(&origin).unwrap();
        assert_eq!((lat.z, lat.size), (big(&[1, 1]), BigUint::from(1u32)));
        let set = FrequencySet::from_rows(3, &[[-64i64, 0, 0], [64, 1, -3]]).unwrap();
        let lat = build_mixed_radix(&set).unwrap();
        assert_eq!(lat.z, big(&[1, 129, 16641]));
        assert_eq!(lat.size, BigUint::from(2146689u32));
    }

    #[test]
    fn crt_examples() {
        let set = FrequencySet::from_rows(2, &[[0i64, 0], [2, 1], [1, 2]]).unwrap();
        let lat = build_crt(&set).unwrap();
        assert_eq!(lat.z, big(&[11, 7]));
        assert_eq!(lat.size, BigUint::from(77u32));
        let set = FrequencySet::from_rows(1, &[[-2i64], [0], [2]]).unwrap();
        let lat = build_crt(&set).unwrap();
        assert_eq!((lat.z, lat.size), (big(&[1]), BigUint::from(6u32)));
        assert!(build_crt(&set).unwrap().is_reconstructing(&set).unwrap());
    }

    #[test]
    fn cbc_examples() {
        let origin = FrequencySet::from_rows(3, &[[0i64, 0, 0]]).unwrap();
        let lat = build_cbc(&origin, &CbcOptions::default()).unwrap();
        assert_eq!(lat.size, BigUint::from(2u32));
        assert!(lat.is_reconstructing(&origin).unwrap());
        let h = hyperbolic_cross_even(4, 32).unwrap();
        let lat = build_cbc(&h, &CbcOptions::default()).unwrap();
        assert!(lat.is_reconstructing(&h).unwrap());
        let s = h.len() as u64;
        assert!(lat.size_u64().unwrap() <= (s * s).max(2 * (h.expansion().n_i + 1)));
    }

    #[test]
    fn tilde_m_examples() {
        assert_eq!(tilde_m(&three(), &big(&[1, 5])).unwrap(), BigUint::from(11u32));
        let origin = FrequencySet::from_rows(2, &[[4i64, -2]]).unwrap();
        assert_eq!(tilde_m(&origin, &big(&[3, 9])).unwrap(), BigUint::from(1u32));
    }

    #[test]
    fn nodes_examples() {
        let lat = Rank1Lattice::from_u64(&[1, 5], 3, LatticeSource::User).unwrap();
        let nodes: Vec<Vec<f64>> = lat.nodes().unwrap().collect();
        assert_eq!(nodes.len(), 3);
        assert_eq!(nodes[0], vec![0.0, 0.0]);
        assert_eq!(nodes[1], vec![1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(lat.node_numerators(1).unwrap(), vec![1, 2]);
    }

    #[test]
    fn lattice_file_roundtrip() {
        let lat = build_mixed_radix(&random_cube_set(40, 64, 5, 1).unwrap()).unwrap();
        assert!(lat.size.bits() > 64);
        let text = lat.to_toml();
        assert!(text.contains("source = \"lat1\""));
        assert_eq!(Rank1Lattice::from_toml(&text).unwrap(), lat);
        assert!(Rank1Lattice::from_toml("z = [\"1\"]\nM = \"x\"\nsource = \"lat1\"").is_err());
        assert!(Rank1Lattice::from_toml("z = [\"1\"]\nM = \"3\"\nsource = \"foo\"").is_err());
    }

    #[test]
    fn wide_modulus_image_matches_bigint() {
        let set = random_cube_set(30, 64, 60, 2).unwrap();
        let lat = build_mixed_radix(&set).unwrap();
        let img = modulus_image(&set, &lat.z, &lat.size).unwrap();
        assert!(matches!(img, ModulusImage::Wide(_)));
        let m = BigInt::from(lat.size.clone());
        for (i, row) in set.iter().enumerate() {
            let want = dot_big(row, &lat.z).mod_floor(&m).to_biguint().unwrap();
            assert_eq!(img.get(i), want);
        }
        assert!(img.is_injective());
    }

    fn random_set(dim: usize, radius: u32, seed: u64, s: usize) -> FrequencySet {
        let cube = (2 * radius as usize + 1).pow(dim as u32);
        random_cube_set(dim, radius, s.min(cube), seed).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn constructors_reconstruct(dim in 1usize..6, radius in 0u32..20, s in 1usize..60, seed in any::<u64>()) {
            let set = random_set(dim, radius, seed, s);
            let e = set.expansion();
            for lat in [build_mixed_radix(&set).unwrap(), build_crt(&set).unwrap()] {
                prop_assert!(lat.is_reconstructing(&set).unwrap());
                let tm = tilde_m(&set, &lat.z).unwrap();
                if e.n_i > 0 {
                    prop_assert!(tm <= tilde_m_bound_dnm(&set, &lat.size));
                    prop_assert!(tm <= tilde_m_bound_l1(&set, &lat.size));
                }
            }
            let opts = CbcOptions { seed, ..Default::default() };
            let lat = build_cbc(&set, &opts).unwrap();
            prop_assert!(lat.is_reconstructing(&set).unwrap());
        }

        #[test]
        fn modulus_image_matches_wide_products(dim in 1usize..5, seed in any::<u64>(),
                                               zs in prop::collection::vec(0u64..1<<40, 5), m in 1u64..1<<40) {
            let set = random_set(dim, 100, seed, 30);
            let z = big(&zs[..dim]);
            let img = modulus_image(&set, &z, &BigUint::from(m)).unwrap();
            let mb = BigInt::from(m);
            for (i, row) in set.iter().enumerate() {
                prop_assert_eq!(img.get(i), dot_big(row, &z).mod_floor(&mb).to_biguint().unwrap());
            }
        }
    }
}
