//! Flattened frequencies `k·z` for a fixed generating vector.
//!
//! When every inner product fits in `i128` the values are stored as
//! non-negative offsets from the minimum, in `u64` when the spread allows.
//! Otherwise residues are accumulated per component modulo each prime and
//! exact values are only formed for `M̃`.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, ToPrimitive, Zero};

use crate::freqset::FrequencySet;

pub(crate) struct Flat {
    repr: Repr,
}

enum Repr {
    Narrow { off: Vec<u64>, min: i128 },
    Wide { off: Vec<u128>, min: i128 },
    Modular {
        set: FrequencySet,
        z: Vec<BigUint>,
        /// `Some(b)` when `z_t = b^t` and every axis range is below `b`.
        radix: Option<u64>,
    },
}

/// `(k mod p)` as a non-negative residue.
#[inline]
pub(crate) fn reduce_i64(k: i64, p: u64) -> u64 {
    let r = (k as i128).rem_euclid(p as i128);
    r as u64
}

/// `k·z mod p` by per-component modular accumulation; `zmod[t] = z_t mod p`.
#[inline]
pub(crate) fn residue_mod(row: &[i32], zmod: &[u64], p: u64) -> u64 {
    if p == 1 {
        return 0;
    }
    if p <= 1 << 31 {
        let pi = p as i64;
        let mut acc = 0u64;
        for (&k, &zt) in row.iter().zip(zmod) {
            if zt == 0 || k == 0 {
                continue;
            }
            let kk = (k as i64).rem_euclid(pi) as u64;
            acc = (acc + kk * zt) % p;
        }
        acc
    } else {
        let p128 = p as u128;
        let mut acc = 0u128;
        for (&k, &zt) in row.iter().zip(zmod) {
            let kk = reduce_i64(k as i64, p) as u128;
            acc = (acc + kk * zt as u128 % p128) % p128;
        }
        acc as u64
    }
}

pub(crate) fn z_mod(z: &[BigUint], p: u64) -> Vec<u64> {
    let pb = BigUint::from(p);
    z.iter()
        .map(|zt| match zt.to_u64() {
            Some(v) => v % p,
            None => (zt % &pb).to_u64().unwrap(),
        })
        .collect()
}

impl Flat {
    pub(crate) fn new(set: &FrequencySet, z: &[BigUint]) -> Flat {
        debug_assert_eq!(set.dim(), z.len());
        if let Some(repr) = Self::try_exact(set, z) {
            return Flat { repr };
        }
        let radix = detect_radix(set, z);
        Flat {
            repr: Repr::Modular {
                set: set.clone(),
                z: z.to_vec(),
                radix,
            },
        }
    }

    fn try_exact(set: &FrequencySet, z: &[BigUint]) -> Option<Repr> {
        let zi: Vec<i128> = z
            .iter()
            .map(|v| v.to_i128())
            .collect::<Option<Vec<_>>>()?;
        let mut vals = Vec::with_capacity(set.len());
        for row in set.iter() {
            let mut acc: i128 = 0;
            for (&k, &zt) in row.iter().zip(&zi) {
                acc = acc.checked_add((k as i128).checked_mul(zt)?)?;
            }
            vals.push(acc);
        }
        let min = *vals.iter().min()?;
        let max = *vals.iter().max()?;
        let spread = (max as i128).checked_sub(min)?;
        if spread <= u64::MAX as i128 {
            Some(Repr::Narrow {
                off: vals.iter().map(|&v| (v - min) as u64).collect(),
                min,
            })
        } else {
            Some(Repr::Wide {
                off: vals.iter().map(|&v| v.wrapping_sub(min) as u128).collect(),
                min,
            })
        }
    }

    #[cfg(test)]
    pub(crate) fn is_modular(&self) -> bool {
        matches!(self.repr, Repr::Modular { .. })
    }

    pub(crate) fn len(&self) -> usize {
        match &self.repr {
            Repr::Narrow { off, .. } => off.len(),
            Repr::Wide { off, .. } => off.len(),
            Repr::Modular { set, .. } => set.len(),
        }
    }

    /// `M̃ = max k·z − min k·z + 1` over `idx` (all of `I` when `None`).
    pub(crate) fn tilde_m(&self, idx: Option<&[u32]>) -> BigUint {
        let spread = |f: &dyn Fn(usize) -> u128| -> BigUint {
            let (mut lo, mut hi) = (u128::MAX, 0u128);
            let mut visit = |i: usize| {
                let v = f(i);
                lo = lo.min(v);
                hi = hi.max(v);
            };
            match idx {
                Some(ix) => ix.iter().for_each(|&i| visit(i as usize)),
                None => (0..self.len()).for_each(&mut visit),
            }
            BigUint::from(hi - lo) + 1u32
        };
        match &self.repr {
            Repr::Narrow { off, .. } => spread(&|i| off[i] as u128),
            Repr::Wide { off, .. } => spread(&|i| off[i]),
            Repr::Modular { set, z, radix } => {
                let all: Vec<u32>;
                let ix = match idx {
                    Some(ix) => ix,
                    None => {
                        all = (0..set.len() as u32).collect();
                        &all
                    }
                };
                let (lo, hi) = match radix {
                    Some(_) => {
                        // Shifted digits lie in [0, b), so the order of k·z is
                        // the lexicographic order of the reversed vectors.
                        let rev = |i: u32| set.get(i as usize).iter().rev();
                        let lo = ix.iter().copied().min_by(|&a, &b| rev(a).cmp(rev(b))).unwrap();
                        let hi = ix.iter().copied().max_by(|&a, &b| rev(a).cmp(rev(b))).unwrap();
                        (dot_big(set.get(lo as usize), z), dot_big(set.get(hi as usize), z))
                    }
                    None => {
                        let mut lo: Option<BigInt> = None;
                        let mut hi: Option<BigInt> = None;
                        for &i in ix {
                            let v = dot_big(set.get(i as usize), z);
                            if lo.as_ref().is_none_or(|l| v < *l) {
                                lo = Some(v.clone());
                            }
                            if hi.as_ref().is_none_or(|h| v > *h) {
                                hi = Some(v);
                            }
                        }
                        (lo.unwrap(), hi.unwrap())
                    }
                };
                (hi - lo + 1u32).to_biguint().expect("max >= min")
            }
        }
    }

    /// Whether the exact values `k·z` are pairwise distinct, when that is
    /// cheap to decide.
    pub(crate) fn distinct(&self) -> Option<bool> {
        fn check<T: Ord + Copy>(v: &[T]) -> bool {
            let mut s = v.to_vec();
            s.sort_unstable();
            s.windows(2).all(|w| w[0] != w[1])
        }
        match &self.repr {
            Repr::Narrow { off, .. } => Some(check(off)),
            Repr::Wide { off, .. } => Some(check(off)),
            // Distinct digit vectors give distinct values.
            Repr::Modular { radix: Some(_), .. } => Some(true),
            Repr::Modular { radix: None, .. } => None,
        }
    }

    /// True residues `k·z mod p` for the indices in `idx` (all of `I` when
    /// `None`), written into `out`.
    pub(crate) fn residues_into(&self, p: u64, idx: Option<&[u32]>, out: &mut Vec<u64>) {
        out.clear();
        let n = idx.map_or(self.len(), |ix| ix.len());
        out.reserve(n);
        let at = |j: usize| idx.map_or(j, |ix| ix[j] as usize);
        match &self.repr {
            Repr::Narrow { off, min } => {
                let base = min.rem_euclid(p as i128) as u64;
                for j in 0..n {
                    let r = off[at(j)] % p;
                    out.push(add_mod(r, base, p));
                }
            }
            Repr::Wide { off, min } => {
                let base = min.rem_euclid(p as i128) as u64;
                for j in 0..n {
                    let r = (off[at(j)] % p as u128) as u64;
                    out.push(add_mod(r, base, p));
                }
            }
            Repr::Modular { set, z, radix } => {
                let zmod = match radix {
                    Some(b) => {
                        let bm = b % p;
                        let mut acc = 1 % p;
                        (0..z.len())
                            .map(|_| {
                                let v = acc;
                                acc = ((acc as u128 * bm as u128) % p as u128) as u64;
                                v
                            })
                            .collect()
                    }
                    None => z_mod(z, p),
                };
                for j in 0..n {
                    out.push(residue_mod(set.get(at(j)), &zmod, p));
                }
            }
        }
    }
}

#[inline]
fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    let s = a as u128 + b as u128;
    (s % p as u128) as u64
}

pub(crate) fn dot_big(row: &[i32], z: &[BigUint]) -> BigInt {
    let mut acc = BigInt::zero();
    for (&k, zt) in row.iter().zip(z) {
        if k == 0 || zt.is_zero() {
            continue;
        }
        let sign = if k < 0 { Sign::Minus } else { Sign::Plus };
        acc += BigInt::from_biguint(sign, zt * k.unsigned_abs());
    }
    acc
}

fn detect_radix(set: &FrequencySet, z: &[BigUint]) -> Option<u64> {
    if z.len() < 2 || !z[0].is_one() {
        return None;
    }
    let b = z[1].to_u64()?;
    if b < 2 {
        return None;
    }
    let e = set.expansion();
    if e.n_i >= b {
        return None;
    }
    let bb = BigUint::from(b);
    let mut expect = bb.clone();
    for zt in &z[2..] {
        expect *= &bb;
        if *zt != expect {
            return None;
        }
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_integer::Integer;
    use proptest::prelude::*;

    fn big(v: &[u64]) -> Vec<BigUint> {
        v.iter().map(|&x| BigUint::from(x)).collect()
    }

    fn oracle_residues(set: &FrequencySet, z: &[BigUint], p: u64) -> Vec<u64> {
        let pb = BigInt::from(p);
        set.iter()
            .map(|row| dot_big(row, z).mod_floor(&pb).to_u64().unwrap())
            .collect()
    }

    fn oracle_tilde(set: &FrequencySet, z: &[BigUint]) -> BigUint {
        let vals: Vec<BigInt> = set.iter().map(|r| dot_big(r, z)).collect();
        let lo = vals.iter().min().unwrap();
        let hi = vals.iter().max().unwrap();
        (hi - lo + 1u32).to_biguint().unwrap()
    }

    #[test]
    fn small_example() {
        let set = FrequencySet::from_rows(2, &[[0i64, 0], [2, 0], [0, 2]]).unwrap();
        let flat = Flat::new(&set, &big(&[1, 5]));
        assert_eq!(flat.tilde_m(None), BigUint::from(11u32));
        let mut out = vec![];
        flat.residues_into(25, None, &mut out);
        // canonical order is (0,0), (0,2), (2,0)
        assert_eq!(out, vec![0, 10, 2]);
        flat.residues_into(3, Some(&[1, 2]), &mut out);
        assert_eq!(out, vec![1, 2]);
    }

    #[test]
    fn modular_path_for_huge_vectors() {
        let set = crate::freqset::random_cube_set(30, 64, 40, 5).unwrap();
        let b = BigUint::from(129u32);
        let z: Vec<BigUint> = (0..30u32).map(|t| b.pow(t)).collect();
        let flat = Flat::new(&set, &z);
        assert!(flat.is_modular());
        assert_eq!(flat.tilde_m(None), oracle_tilde(&set, &z));
        let idx: Vec<u32> = (0..40).step_by(3).collect();
        let sub_rows: Vec<Vec<i64>> = idx
            .iter()
            .map(|&i| set.get(i as usize).iter().map(|&k| k as i64).collect())
            .collect();
        let sub = FrequencySet::from_rows(30, &sub_rows).unwrap();
        assert_eq!(flat.tilde_m(Some(&idx)), oracle_tilde(&sub, &z));
        let mut out = vec![];
        for p in [2u64, 97, 65_537, 4_294_967_311] {
            flat.residues_into(p, None, &mut out);
            assert_eq!(out, oracle_residues(&set, &z, p));
        }
        // Same vector without radix structure.
        let mut z2 = z.clone();
        z2[7] += 1u32;
        let flat2 = Flat::new(&set, &z2);
        assert_eq!(flat2.tilde_m(None), oracle_tilde(&set, &z2));
        flat2.residues_into(101, None, &mut out);
        assert_eq!(out, oracle_residues(&set, &z2, 101));
    }

    proptest! {
        #[test]
        fn flat_matches_bigint_oracle(
            dim in 1usize..6,
            seed in any::<u64>(),
            zs in prop::collection::vec(0u64..u64::MAX, 6),
            p in 2u64..1_000_000,
        ) {
            let set = crate::freqset::random_cube_set(dim, 50, 20.min(101usize.pow(dim as u32)), seed).unwrap();
            let z = big(&zs[..dim]);
            let flat = Flat::new(&set, &z);
            prop_assert_eq!(flat.tilde_m(None), oracle_tilde(&set, &z));
            let mut out = vec![];
            flat.residues_into(p, None, &mut out);
            prop_assert_eq!(out, oracle_residues(&set, &z, p));
        }
    }
}
