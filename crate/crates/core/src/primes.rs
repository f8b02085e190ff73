//! Prime generation and indexing.
//!
//! Primes are indexed from one, `P_1 = 2, P_2 = 3, …`, with the sentinel
//! `P_0 = 1`. The cache is a segmented sieve of Eratosthenes that grows by
//! doubling whenever a query runs past its end.

use std::sync::{OnceLock, RwLock};

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};

/// Constant `C_1` of the prime-size bound.
pub const C1: f64 = 2.832;
/// Constant `C_2` of the prime-size bound.
pub const C2: f64 = 2.3;

/// Largest sieve limit a [`PrimeIndexer`] accepts unless configured otherwise.
pub const DEFAULT_SIEVE_CAP: u64 = 1 << 32;

/// Candidate sets larger than this are never materialized as a list.
pub const MAX_MATERIALIZED_CANDIDATES: u64 = 1 << 26;

const BASE_LIMIT: u64 = (1 << 16) + 1;
const SEGMENT: u64 = 1 << 18;

#[derive(Debug, Default)]
struct SieveState {
    /// All primes strictly below `limit`, ascending.
    primes: Vec<u64>,
    limit: u64,
}

/// Thread-safe, grow-on-demand prime table.
#[derive(Debug)]
pub struct PrimeIndexer {
    state: RwLock<SieveState>,
    cap: u64,
}

impl Default for PrimeIndexer {
    fn default() -> Self {
        Self::new()
    }
}

impl PrimeIndexer {
    pub fn new() -> Self {
        Self::with_cap(DEFAULT_SIEVE_CAP)
    }

    /// `cap` bounds the sieve limit; queries needing more fail with
    /// [`Error::ResourceLimit`]. Clamped to `2^32` so the base primes always
    /// come from the initial sieve.
    pub fn with_cap(cap: u64) -> Self {
        let mut state = SieveState::default();
        simple_sieve(&mut state, BASE_LIMIT);
        PrimeIndexer {
            state: RwLock::new(state),
            cap: cap.clamp(BASE_LIMIT, DEFAULT_SIEVE_CAP),
        }
    }

    /// Process-wide shared instance.
    pub fn global() -> &'static PrimeIndexer {
        static GLOBAL: OnceLock<PrimeIndexer> = OnceLock::new();
        GLOBAL.get_or_init(PrimeIndexer::new)
    }

    pub fn sieve_limit(&self) -> u64 {
        self.state.read().expect("sieve lock poisoned").limit
    }

    /// Number of primes currently cached.
    pub fn cached(&self) -> usize {
        self.state.read().expect("sieve lock poisoned").primes.len()
    }

    /// Grows the sieve until it covers `x`.
    fn ensure_limit(&self, x: u64) -> Result<()> {
        let limit = self.sieve_limit();
        if limit > x {
            return Ok(());
        }
        if x >= self.cap {
            return Err(Error::ResourceLimit(format!(
                "prime sieve would need to exceed its cap of {}",
                self.cap
            )));
        }
        let mut st = self.state.write().expect("sieve lock poisoned");
        if st.limit > x {
            return Ok(());
        }
        let target = (x + 1).max(st.limit.saturating_mul(2)).min(self.cap);
        segmented_extend(&mut st, target);
        Ok(())
    }

    /// Grows the sieve until at least `n` primes are cached.
    fn ensure_count(&self, n: usize) -> Result<()> {
        // Rosser: p_n < n (ln n + ln ln n) for n >= 6. Only used to pre-size.
        if n >= 6 {
            let nf = n as f64;
            let estimate = nf * (nf.ln() + nf.ln().ln());
            if estimate < self.cap as f64 {
                self.ensure_limit(estimate.ceil() as u64)?;
            }
        }
        loop {
            let (have, limit) = {
                let st = self.state.read().expect("sieve lock poisoned");
                (st.primes.len(), st.limit)
            };
            if have >= n {
                return Ok(());
            }
            self.ensure_limit(limit)?;
        }
    }

    /// `P_q` with `P_0 = 1`.
    pub fn nth_prime(&self, q: usize) -> Result<u64> {
        if q == 0 {
            return Ok(1);
        }
        self.ensure_count(q)?;
        Ok(self.state.read().expect("sieve lock poisoned").primes[q - 1])
    }

    /// Smallest `q >= 1` with `s <= P_q`. For `s = 1` this is `q = 1`.
    pub fn prime_index_of_least_geq(&self, s: u64) -> Result<usize> {
        if s <= 2 {
            return Ok(1);
        }
        self.ensure_limit(s)?;
        loop {
            {
                let st = self.state.read().expect("sieve lock poisoned");
                let idx = st.primes.partition_point(|&p| p < s);
                if idx < st.primes.len() {
                    return Ok(idx + 1);
                }
            }
            let limit = self.sieve_limit();
            self.ensure_limit(limit)?;
        }
    }

    /// Smallest prime strictly greater than `x`.
    pub fn next_prime_after(&self, x: u64) -> Result<u64> {
        let q = self.prime_index_of_least_geq(x.saturating_add(1))?;
        self.nth_prime(q)
    }

    /// `P_q, …, P_{q+count-1}`.
    pub fn prime_run(&self, q: usize, count: usize) -> Result<Vec<u64>> {
        if q == 0 {
            return Err(Error::invalid("prime runs start at index 1"));
        }
        self.ensure_count(q + count - 1)?;
        let st = self.state.read().expect("sieve lock poisoned");
        Ok(st.primes[q - 1..q - 1 + count].to_vec())
    }
}

fn simple_sieve(st: &mut SieveState, limit: u64) {
    let n = limit as usize;
    let mut composite = vec![false; n];
    let mut primes = Vec::new();
    for i in 2..n {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j < n {
                composite[j] = true;
                j += i;
            }
        }
    }
    st.primes = primes;
    st.limit = limit;
}

fn segmented_extend(st: &mut SieveState, target: u64) {
    debug_assert!(target <= BASE_LIMIT * BASE_LIMIT);
    let root = target.isqrt() + 1;
    let base_len = st.primes.partition_point(|&p| p <= root);
    let mut marks = vec![false; SEGMENT as usize];
    let mut lo = st.limit;
    while lo < target {
        let hi = (lo + SEGMENT).min(target);
        let span = (hi - lo) as usize;
        marks[..span].fill(false);
        for i in 0..base_len {
            let p = st.primes[i];
            if p * p >= hi {
                break;
            }
            let mut m = (p * p).max(lo.div_ceil(p) * p);
            while m < hi {
                marks[(m - lo) as usize] = true;
                m += p;
            }
        }
        for (off, &is_composite) in marks[..span].iter().enumerate() {
            if !is_composite {
                st.primes.push(lo + off as u64);
            }
        }
        lo = hi;
    }
    st.limit = target;
}

/// Smallest `e >= 0` with `base^(e+1) >= tilde_m`, i.e. the exact value of
/// `⌈-1 + log_base(tilde_m)⌉` for `tilde_m >= 1`.
pub fn log_ceil_exponent(base: u64, tilde_m: &BigUint) -> u64 {
    assert!(base >= 2, "logarithm base must be at least 2");
    let base = BigUint::from(base);
    let mut power = base.clone();
    let mut e = 0u64;
    while &power < tilde_m {
        power *= &base;
        e += 1;
    }
    e
}

/// `log2` of an arbitrarily large integer.
pub fn log2_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        n.to_f64().map_or(f64::INFINITY, f64::log2)
    } else {
        let shift = bits - 64;
        let top = (n >> shift).to_f64().expect("64-bit value fits f64");
        top.log2() + shift as f64
    }
}

/// The candidate prime set `{P_q, …, P_{q+K-1}}` for a set of `s` distinct
/// integers spread over `tilde_m` consecutive values, with
/// `P_{q-1} < s <= P_q` and `K = max(1, 2(s-1)⌈-1 + log_{P_q} tilde_m⌉)`.
///
/// Kept symbolic: the primes are produced on demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    /// Index `q` of the first candidate.
    pub q: usize,
    /// `P_q`.
    pub first: u64,
    /// `K`.
    pub count: u64,
    /// `⌈-1 + log_{P_q} tilde_m⌉`.
    pub exponent: u64,
}

impl CandidateSet {
    pub fn new(indexer: &PrimeIndexer, s: u64, tilde_m: &BigUint) -> Result<Self> {
        if s == 0 {
            return Err(Error::invalid("candidate set needs s >= 1"));
        }
        if BigUint::from(s) > *tilde_m {
            return Err(Error::invalid(format!(
                "candidate set needs s <= tilde_M (s = {s}, tilde_M = {tilde_m})"
            )));
        }
        let q = indexer.prime_index_of_least_geq(s)?;
        let first = indexer.nth_prime(q)?;
        let exponent = log_ceil_exponent(first, tilde_m);
        let count = 2u64
            .saturating_mul(s - 1)
            .saturating_mul(exponent)
            .max(1);
        Ok(CandidateSet {
            q,
            first,
            count,
            exponent,
        })
    }

    /// The `i`-th candidate (zero-based), or `None` past the end.
    pub fn get(&self, indexer: &PrimeIndexer, i: u64) -> Result<Option<u64>> {
        if i >= self.count {
            return Ok(None);
        }
        let idx = usize::try_from(i)
            .ok()
            .and_then(|i| i.checked_add(self.q))
            .ok_or_else(|| Error::ResourceLimit("candidate index overflows usize".into()))?;
        indexer.nth_prime(idx).map(Some)
    }

    /// All candidates, ascending.
    pub fn primes(&self, indexer: &PrimeIndexer) -> Result<Vec<u64>> {
        if self.count > MAX_MATERIALIZED_CANDIDATES {
            return Err(Error::ResourceLimit(format!(
                "candidate set of {} primes is too large to list",
                self.count
            )));
        }
        indexer.prime_run(self.q, self.count as usize)
    }
}

/// `P_q` under the `P_0 = 1` convention, using the shared indexer.
pub fn nth_prime(q: usize) -> Result<u64> {
    PrimeIndexer::global().nth_prime(q)
}

/// Smallest `q >= 1` with `s <= P_q`, using the shared indexer.
pub fn prime_index_of_least_geq(s: u64) -> Result<usize> {
    PrimeIndexer::global().prime_index_of_least_geq(s)
}

/// Materialized candidate set for `(s, tilde_m)`, using the shared indexer.
pub fn candidate_primes(s: u64, tilde_m: &BigUint) -> Result<Vec<u64>> {
    let indexer = PrimeIndexer::global();
    CandidateSet::new(indexer, s, tilde_m)?.primes(indexer)
}

/// Upper bound on the largest candidate prime:
/// `2` for `s = 1`, otherwise `C1 s (log_s tilde_m) ln(C2 s log_s tilde_m)`.
pub fn max_candidate_bound(s: u64, tilde_m: &BigUint) -> f64 {
    if s <= 1 {
        return 2.0;
    }
    let sf = s as f64;
    let log_s = log2_biguint(tilde_m) / sf.log2();
    C1 * sf * log_s * (C2 * sf * log_s).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;
    use proptest::prelude::*;

    fn is_prime_trial(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2;
        while d * d <= n {
            if n % d == 0 {
                return false;
            }
            d += 1;
        }
        true
    }

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn nth_prime_examples() {
        let ix = PrimeIndexer::new();
        assert_eq!(ix.nth_prime(0).unwrap(), 1);
        assert_eq!(ix.nth_prime(1).unwrap(), 2);
        assert_eq!(ix.nth_prime(5).unwrap(), 11);
    }

    #[test]
    fn sieve_matches_trial_division_across_growth() {
        let ix = PrimeIndexer::new();
        // Forces several segmented extensions past the base sieve.
        let p = ix.nth_prime(40_000).unwrap();
        assert!(ix.sieve_limit() > p);
        let mut q = 0;
        for n in 0..=p {
            if is_prime_trial(n) {
                q += 1;
                if q % 97 == 0 || n > 400_000 {
                    assert_eq!(ix.nth_prime(q).unwrap(), n, "P_{q}");
                }
            }
        }
        assert_eq!(q, 40_000);
    }

    #[test]
    fn least_geq_examples() {
        let ix = PrimeIndexer::new();
        assert_eq!(ix.prime_index_of_least_geq(1).unwrap(), 1);
        assert_eq!(ix.prime_index_of_least_geq(2).unwrap(), 1);
        assert_eq!(ix.prime_index_of_least_geq(3).unwrap(), 2);
        assert_eq!(ix.prime_index_of_least_geq(6).unwrap(), 4);
        assert_eq!(ix.nth_prime(4).unwrap(), 7);
    }

    #[test]
    fn least_geq_beyond_current_limit() {
        let ix = PrimeIndexer::new();
        let s = 5_000_000u64;
        let q = ix.prime_index_of_least_geq(s).unwrap();
        let p = ix.nth_prime(q).unwrap();
        assert!(p >= s && is_prime_trial(p));
        assert!(ix.nth_prime(q - 1).unwrap() < s);
    }

    #[test]
    fn cap_is_enforced() {
        let ix = PrimeIndexer::with_cap(200_000);
        assert!(ix.nth_prime(1000).is_ok());
        assert!(matches!(
            ix.nth_prime(1_000_000),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn exponent_is_exact_on_powers() {
        assert_eq!(log_ceil_exponent(3, &big(11)), 2);
        assert_eq!(log_ceil_exponent(3, &big(9)), 1);
        assert_eq!(log_ceil_exponent(3, &big(10)), 2);
        assert_eq!(log_ceil_exponent(5, &big(5)), 0);
        assert_eq!(log_ceil_exponent(2, &big(1)), 0);
        assert_eq!(log_ceil_exponent(2, &(BigUint::one() << 200)), 199);
        assert_eq!(log_ceil_exponent(2, &((BigUint::one() << 200) + 1u32)), 200);
    }

    #[test]
    fn candidate_examples() {
        assert_eq!(
            candidate_primes(3, &big(11)).unwrap(),
            vec![3, 5, 7, 11, 13, 17, 19, 23]
        );
        assert_eq!(candidate_primes(1, &big(1)).unwrap(), vec![2]);
        assert_eq!(candidate_primes(5, &big(5)).unwrap(), vec![5]);
        assert!(matches!(
            candidate_primes(6, &big(5)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn max_candidate_examples() {
        assert_eq!(max_candidate_bound(1, &big(1)), 2.0);
        assert_eq!(max_candidate_bound(1, &big(1_000_000)), 2.0);
        let expected = 2.832 * 2.0 * 1.0 * (2.3f64 * 2.0).ln();
        assert!((max_candidate_bound(2, &big(2)) - expected).abs() < 1e-12);
        assert!((expected - 8.645).abs() < 2e-3);
    }

    #[test]
    fn log2_of_huge_integers() {
        let n = BigUint::one() << 5000;
        assert!((log2_biguint(&n) - 5000.0).abs() < 1e-9);
        assert!((log2_biguint(&big(1024)) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn max_candidate_bound_holds_on_small_grid() {
        let ix = PrimeIndexer::global();
        for s in 2..=40u64 {
            for tm in s..=400 {
                let tm = big(tm);
                let c = CandidateSet::new(ix, s, &tm).unwrap();
                let last = c.get(ix, c.count - 1).unwrap().unwrap();
                assert!(
                    (last as f64) <= max_candidate_bound(s, &tm),
                    "s={s} tilde_M={tm}: {last}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn candidate_count_and_bound(tm in 2u64..=1_000_000, frac in 0.0f64..1.0) {
            let s = 2 + ((tm - 2) as f64 * frac * frac) as u64;
            let ix = PrimeIndexer::global();
            let tmb = big(tm);
            let c = CandidateSet::new(ix, s, &tmb).unwrap();
            // |P_s| = max(1, 2(s-1)e) with e from a float-free oracle.
            let pq = (s..).find(|&n| is_prime_trial(n)).unwrap();
            prop_assert_eq!(c.first, pq);
            let mut e = 0u32;
            while (pq as u128).pow(e + 1) < tm as u128 {
                e += 1;
            }
            prop_assert_eq!(c.count, (2 * (s - 1) * e as u64).max(1));
            let last = c.get(ix, c.count - 1).unwrap().unwrap();
            prop_assert!(is_prime_trial(last));
            prop_assert!((last as f64) <= max_candidate_bound(s, &tmb));
        }

        #[test]
        fn nth_prime_strictly_increasing(q in 1usize..50_000) {
            let a = nth_prime(q).unwrap();
            let b = nth_prime(q + 1).unwrap();
            prop_assert!(a < b);
            prop_assert!(is_prime_trial(a));
        }
    }
}
