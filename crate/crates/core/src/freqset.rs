//! Frequency sets `I ⊂ ℤ^d`.
//!
//! A [`FrequencySet`] is an immutable, duplicate-free list of integer vectors
//! kept in lexicographic order. The order is canonical: every downstream
//! index (lattice assignments, coefficient files) refers to it.
//!
//! Text format: a header line `d s`, then `s` lines of `d` space-separated
//! integers.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default cap on generated set sizes.
pub const DEFAULT_SIZE_CAP: usize = 50_000_000;

#[derive(Clone, PartialEq, Eq)]
pub struct FrequencySet {
    dim: usize,
    /// Row-major, `len * dim` entries.
    data: Arc<[i32]>,
}

impl fmt::Debug for FrequencySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrequencySet")
            .field("dim", &self.dim)
            .field("len", &self.len())
            .finish()
    }
}

/// Per-axis ranges and the expansion `N_I = max_t (max k_t - min k_t)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expansion {
    pub ranges: Vec<(i32, i32)>,
    pub n_i: u64,
}

impl FrequencySet {
    /// Builds a set from rows in any order. Rejects empty sets, ragged rows
    /// and duplicates.
    pub fn from_rows<R: AsRef<[i64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            for &k in row {
                data.push(i32::try_from(k).map_err(|_| {
                    Error::invalid(format!("component {k} of row {i} exceeds the i32 range"))
                })?);
            }
        }
        Self::from_flat(dim, data)
    }

    /// Builds a set from row-major data in any order.
    pub fn from_flat(dim: usize, mut data: Vec<i32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} components do not form a non-empty set of {dim}-dimensional rows",
                data.len()
            )));
        }
        if !is_sorted_unique(dim, &data) {
            let mut rows: Vec<&[i32]> = data.chunks_exact(dim).collect();
            rows.sort_unstable();
            if let Some(w) = rows.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::invalid(format!("duplicate frequency {:?}", w[0])));
            }
            data = rows.concat();
        }
        Ok(FrequencySet {
            dim,
            data: data.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `s = |I|`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[i32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[i32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Position of `k` in the canonical order.
    pub fn position(&self, k: &[i32]) -> Option<usize> {
        if k.len() != self.dim {
            return None;
        }
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.get(mid).cmp(k) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    pub fn expansion(&self) -> Expansion {
        let mut ranges = self.get(0).iter().map(|&k| (k, k)).collect::<Vec<_>>();
        for row in self.iter().skip(1) {
            for (r, &k) in ranges.iter_mut().zip(row) {
                r.0 = r.0.min(k);
                r.1 = r.1.max(k);
            }
        }
        let n_i = ranges
            .iter()
            .map(|&(lo, hi)| (hi as i64 - lo as i64) as u64)
            .max()
            .unwrap_or(0);
        Expansion { ranges, n_i }
    }

    /// `max_k ||k||_1`.
    pub fn max_l1(&self) -> u64 {
        self.iter()
            .map(|row| row.iter().map(|&k| k.unsigned_abs() as u64).sum::<u64>())
            .max()
            .unwrap_or(0)
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let header = header?;
        let nums: Vec<&str> = header.split_whitespace().collect();
        let parse_usize = |s: &str| {
            s.parse::<usize>().map_err(|e| Error::Parse {
                line: 1,
                msg: format!("bad header field {s:?}: {e}"),
            })
        };
        if nums.len() != 2 {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header must be `d s`, got {header:?}"),
            });
        }
        let (dim, len) = (parse_usize(nums[0])?, parse_usize(nums[1])?);
        if dim == 0 || len == 0 {
            return Err(Error::Parse {
                line: 1,
                msg: "d and s must be positive".into(),
            });
        }
        let mut data = Vec::with_capacity(dim.saturating_mul(len).min(1 << 28));
        let mut rows = 0;
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(tok.parse::<i32>().map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: format!("bad component {tok:?}: {e}"),
                })?);
            }
            if data.len() - before != dim {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected {dim} components, got {}", data.len() - before),
                });
            }
            rows += 1;
        }
        if rows != len {
            return Err(Error::Parse {
                line: rows + 1,
                msg: format!("header announces {len} rows, found {rows}"),
            });
        }
        Self::from_flat(dim, data).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::Parse { line: 0, msg },
            other => other,
        })
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "{} {}", self.dim, self.len())?;
        for row in self.iter() {
            let mut first = true;
            for k in row {
                if !first {
                    w.write_all(b" ")?;
                }
                write!(w, "{k}")?;
                first = false;
            }
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }
}

fn is_sorted_unique(dim: usize, data: &[i32]) -> bool {
    let mut rows = data.chunks_exact(dim);
    let Some(mut prev) = rows.next() else {
        return true;
    };
    for row in rows {
        if prev >= row {
            return false;
        }
        prev = row;
    }
    true
}

pub fn read_freqset(path: impl AsRef<Path>) -> Result<FrequencySet> {
    FrequencySet::read_from(File::open(path)?)
}

pub fn write_freqset(set: &FrequencySet, path: impl AsRef<Path>) -> Result<()> {
    set.write_to(File::create(path)?)
}

/// `H^d_{R,even} = {k ∈ (2ℤ)^d : ∏ max(1, |k_t|) <= R}` in lexicographic
/// order.
pub fn hyperbolic_cross_even(dim: usize, radius: u64) -> Result<FrequencySet> {
    hyperbolic_cross_even_capped(dim, radius, DEFAULT_SIZE_CAP)
}

pub fn hyperbolic_cross_even_capped(dim: usize, radius: u64, cap: usize) -> Result<FrequencySet> {
    if dim == 0 || radius == 0 {
        return Err(Error::invalid("hyperbolic cross needs d >= 1 and R >= 1"));
    }
    if radius > i32::MAX as u64 {
        return Err(Error::invalid("radius exceeds the i32 component range"));
    }
    let count = hyperbolic_cross_even_len(dim, radius);
    if count > cap as u128 {
        return Err(Error::ResourceLimit(format!(
            "H^{dim}_{{{radius},even}} has {count} elements, cap is {cap}"
        )));
    }
    let mut data = Vec::with_capacity(count as usize * dim);
    let mut prefix = vec![0i32; dim];
    // Depth-first over axes; children are visited in ascending order so the
    // output is already lexicographic.
    fn rec(axis: usize, budget: u64, prefix: &mut [i32], data: &mut Vec<i32>) {
        if axis == prefix.len() {
            data.extend_from_slice(prefix);
            return;
        }
        let m = (budget / 2) as i64;
        for j in -m..=m {
            let k = 2 * j;
            prefix[axis] = k as i32;
            rec(axis + 1, budget / k.unsigned_abs().max(1), prefix, data);
        }
    }
    rec(0, radius, &mut prefix, &mut data);
    Ok(FrequencySet {
        dim,
        data: data.into(),
    })
}

/// `|H^d_{R,even}|` without materializing the set.
pub fn hyperbolic_cross_even_len(dim: usize, radius: u64) -> u128 {
    fn count(axes: usize, budget: u64, memo: &mut std::collections::HashMap<(usize, u64), u128>) -> u128 {
        if axes == 0 {
            return 1;
        }
        if let Some(&c) = memo.get(&(axes, budget)) {
            return c;
        }
        let mut total = count(axes - 1, budget, memo);
        let mut j = 1u64;
        while 2 * j <= budget {
            total += 2 * count(axes - 1, budget / (2 * j), memo);
            j += 1;
        }
        memo.insert((axes, budget), total);
        total
    }
    count(dim, radius, &mut Default::default())
}

/// `size` distinct vectors drawn uniformly without replacement from
/// `([-R, R] ∩ ℤ)^d`, reproducible from `seed`.
pub fn random_cube_set(dim: usize, radius: u32, size: usize, seed: u64) -> Result<FrequencySet> {
    if dim == 0 || size == 0 {
        return Err(Error::invalid("random cube set needs d >= 1 and s >= 1"));
    }
    if radius > i32::MAX as u32 / 2 {
        return Err(Error::invalid("radius exceeds the i32 component range"));
    }
    if size > DEFAULT_SIZE_CAP || size.saturating_mul(dim) > 1 << 31 {
        return Err(Error::ResourceLimit(format!(
            "{size} vectors of dimension {dim} exceed the size cap"
        )));
    }
    let side = 2 * radius as u64 + 1;
    let cube: Option<u64> = (0..dim).try_fold(1u64, |acc, _| acc.checked_mul(side));
    if let Some(c) = cube {
        if size as u64 > c {
            return Err(Error::invalid(format!(
                "cannot draw {size} distinct vectors from a cube of {c} points"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = radius as i32;
    let mut data = Vec::with_capacity(size * dim);
    match cube {
        // Dense regime: sample cube indices and decode them.
        Some(c) if (size as u64) * 100 > c => {
            let picks = index::sample(&mut rng, c as usize, size);
            for idx in picks.iter() {
                let mut rest = idx as u64;
                for _ in 0..dim {
                    data.push((rest % side) as i32 - r);
                    rest /= side;
                }
            }
        }
        _ => {
            let mut seen: HashSet<Vec<i32>> = HashSet::with_capacity(size);
            let mut row = vec![0i32; dim];
            while seen.len() < size {
                for k in row.iter_mut() {
                    *k = rng.gen_range(-r..=r);
                }
                if !seen.contains(&row) {
                    seen.insert(row.clone());
                    data.extend_from_slice(&row);
                }
            }
        }
    }
    FrequencySet::from_flat(dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rows(set: &FrequencySet) -> Vec<Vec<i32>> {
        set.iter().map(|r| r.to_vec()).collect()
    }

    /// Brute force over the even points of the cube `[-R, R]^d`.
    fn hc_brute(dim: usize, radius: i64) -> Vec<Vec<i32>> {
        let side: Vec<i64> = (-radius..=radius).filter(|k| k % 2 == 0).collect();
        let mut out = vec![vec![]];
        for _ in 0..dim {
            let mut next = vec![];
            for p in &out {
                for &k in &side {
                    let mut q: Vec<i64> = p.clone();
                    q.push(k);
                    next.push(q);
                }
            }
            out = next;
        }
        let mut keep: Vec<Vec<i32>> = out
            .into_iter()
            .filter(|k| k.iter().map(|&x| x.abs().max(1)).product::<i64>() <= radius)
            .map(|k| k.into_iter().map(|x| x as i32).collect())
            .collect();
        keep.sort();
        keep
    }

    #[test]
    fn hyperbolic_cross_examples() {
        let h = hyperbolic_cross_even(2, 2).unwrap();
        assert_eq!(
            rows(&h),
            vec![vec![-2, 0], vec![0, -2], vec![0, 0], vec![0, 2], vec![2, 0]]
        );
        assert_eq!(rows(&hyperbolic_cross_even(2, 1).unwrap()), vec![vec![0, 0]]);
        assert_eq!(hyperbolic_cross_even(3, 4).unwrap().len(), 25);
    }

    #[test]
    fn hyperbolic_cross_matches_brute_force() {
        for dim in 1..=4 {
            for radius in 1..=12 {
                let h = hyperbolic_cross_even(dim, radius).unwrap();
                assert_eq!(rows(&h), hc_brute(dim, radius as i64), "d={dim} R={radius}");
                assert_eq!(hyperbolic_cross_even_len(dim, radius), h.len() as u128);
            }
        }
    }

    #[test]
    fn hyperbolic_cross_cardinalities_for_doubling_radius() {
        let d2: Vec<u128> = (0..8).map(|j| hyperbolic_cross_even_len(2, 1 << j)).collect();
        assert_eq!(d2, vec![1, 5, 13, 29, 65, 145, 329, 733]);
        let d9: Vec<u128> = (0..5).map(|j| hyperbolic_cross_even_len(9, 1 << j)).collect();
        assert_eq!(d9, vec![1, 19, 181, 1177, 6001]);
    }

    #[test]
    fn hyperbolic_cross_elements_are_even_and_bounded() {
        let radius = 64;
        let h = hyperbolic_cross_even(4, radius).unwrap();
        for k in h.iter() {
            assert!(k.iter().all(|x| x % 2 == 0));
            assert!(k.iter().map(|x| x.unsigned_abs().max(1) as u64).product::<u64>() <= radius);
        }
        assert!(h.expansion().n_i <= 2 * radius);
    }

    #[test]
    fn hyperbolic_cross_cap() {
        assert!(matches!(
            hyperbolic_cross_even_capped(3, 64, 100),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn expansion_examples() {
        let single = FrequencySet::from_rows(2, &[[0i64, 0]]).unwrap();
        assert_eq!(single.expansion().n_i, 0);
        let h = hyperbolic_cross_even(2, 2).unwrap();
        let e = h.expansion();
        assert_eq!(e.n_i, 4);
        assert_eq!(e.ranges, vec![(-2, 2), (-2, 2)]);
    }

    #[test]
    fn random_cube_examples() {
        let s = random_cube_set(2, 0, 1, 3).unwrap();
        assert_eq!(rows(&s), vec![vec![0, 0]]);
        let a = random_cube_set(3, 64, 100, 7).unwrap();
        let b = random_cube_set(3, 64, 100, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        assert_ne!(a, random_cube_set(3, 64, 100, 8).unwrap());
        let wide = random_cube_set(10_000, 64, 10, 1).unwrap();
        assert_eq!(wide.len(), 10);
        assert!(wide.iter().flatten().all(|k| (-64..=64).contains(k)));
        assert!(matches!(random_cube_set(1, 1, 4, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn random_cube_dense_regime_fills_cube() {
        let full = random_cube_set(2, 2, 25, 11).unwrap();
        assert_eq!(full.len(), 25);
        assert_eq!(full.expansion().n_i, 4);
    }

    #[test]
    fn construction_rejects_bad_rows() {
        assert!(FrequencySet::from_rows(2, &[vec![1i64, 2], vec![1, 2]]).is_err());
        assert!(FrequencySet::from_rows(2, &[vec![1i64]]).is_err());
        assert!(FrequencySet::from_rows::<Vec<i64>>(2, &[]).is_err());
        let set = FrequencySet::from_rows(2, &[[3i64, 1], [-1, 5], [0, 0]]).unwrap();
        assert_eq!(rows(&set), vec![vec![-1, 5], vec![0, 0], vec![3, 1]]);
        assert_eq!(set.position(&[0, 0]), Some(1));
        assert_eq!(set.position(&[0, 1]), None);
    }

    #[test]
    fn parse_errors() {
        let bad = |text: &str| FrequencySet::read_from(text.as_bytes()).unwrap_err();
        assert!(matches!(bad("2\n1 2\n"), Error::Parse { line: 1, .. }));
        assert!(matches!(bad("2 2\n1 2\n3\n"), Error::Parse { line: 3, .. }));
        assert!(matches!(bad("2 2\n1 2\n1 2\n"), Error::Parse { .. }));
        assert!(matches!(bad("2 3\n1 2\n3 4\n"), Error::Parse { .. }));
        assert!(matches!(bad("1 1\nx\n"), Error::Parse { line: 2, .. }));
    }

    proptest! {
        #[test]
        fn write_read_roundtrip(
            dim in 1usize..5,
            raw in prop::collection::vec(-1000i64..1000, 1..200),
        ) {
            let rows: Vec<Vec<i64>> = raw.chunks(dim).filter(|c| c.len() == dim).map(|c| c.to_vec()).collect();
            prop_assume!(!rows.is_empty());
            let mut uniq = rows.clone();
            uniq.sort();
            uniq.dedup();
            let set = FrequencySet::from_rows(dim, &uniq).unwrap();
            let mut buf = Vec::new();
            set.write_to(&mut buf).unwrap();
            let back = FrequencySet::read_from(&buf[..]).unwrap();
            prop_assert_eq!(back, set);
        }
    }
}
