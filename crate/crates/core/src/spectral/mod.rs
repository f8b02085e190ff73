//! Sampling on multiple rank-1 lattices and coefficient reconstruction.
//!
//! The DFT of the samples on `Λ(z, P)` (scaled by `1/P`) has, in bin
//! `b`, the sum of all coefficients `f̂_k` with `k·z ≡ b (mod P)`. A
//! frequency that is alias-free modulo `P` can therefore be read off
//! directly.

pub mod dft;

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flat::{residue_mod, z_mod, Flat};
use crate::freqset::FrequencySet;
use crate::plan::{MultiLatticePlan, Variant};
use crate::Real;

pub use dft::{naive_dft, PrimeDft};

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// `f(x) = Σ_{k∈I} f̂_k e^{2πi k·x}` with coefficients aligned to the
/// canonical order of `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial<T: Real> {
    set: FrequencySet,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> TrigPolynomial<T> {
    pub fn new(set: FrequencySet, coeffs: Vec<Complex<T>>) -> Result<Self> {
        if coeffs.len() != set.len() {
            return Err(Error::LengthMismatch {
                expected: set.len(),
                got: coeffs.len(),
            });
        }
        Ok(TrigPolynomial { set, coeffs })
    }

    pub fn zero(set: FrequencySet) -> Self {
        let coeffs = vec![czero(); set.len()];
        TrigPolynomial { set, coeffs }
    }

    /// Coefficients `e^{2πiθ_k}` with independent uniform phases.
    pub fn random_unit(set: FrequencySet, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..set.len())
            .map(|_| {
                let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                Complex::new(T::from_f64_lossy(theta.cos()), T::from_f64_lossy(theta.sin()))
            })
            .collect();
        TrigPolynomial { set, coeffs }
    }

    pub fn set(&self) -> &FrequencySet {
        &self.set
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn coeff(&self, k: &[i32]) -> Option<Complex<T>> {
        self.set.position(k).map(|i| self.coeffs[i])
    }

    /// Evaluates `f(x)`; each phase term `k_t x_t` is reduced modulo 1
    /// before summation.
    pub fn eval(&self, x: &[T]) -> Result<Complex<T>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let tau = T::TAU();
        let mut acc = czero();
        for (k, &c) in self.set.iter().zip(&self.coeffs) {
            let mut phase = T::zero();
            for (&kt, &xt) in k.iter().zip(x) {
                if kt != 0 {
                    let v = T::from_i32(kt).unwrap() * xt;
                    phase = phase + (v - v.floor());
                }
            }
            phase = phase - phase.floor();
            acc = acc + c * Complex::from_polar(T::one(), tau * phase);
        }
        Ok(acc)
    }

    /// `max_k |a_k − b_k| / max_k |a_k|`.
    pub fn max_rel_error(&self, other: &TrigPolynomial<T>) -> Result<T> {
        if self.set != other.set {
            return Err(Error::invalid("polynomials have different supports"));
        }
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(T::zero(), T::max);
        let diff = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max);
        Ok(if scale > T::zero() { diff / scale } else { diff })
    }

    pub fn write_coeffs<W: Write>(&self, w: W) -> Result<()> {
        write_coeffs(&self.coeffs, w)
    }
}

/// A function that can be sampled at rational lattice nodes.
pub trait Target<T: Real>: Sync {
    fn dim(&self) -> usize;

    /// Value at the node with coordinates `num[t] / den`.
    fn eval_node(&self, num: &[u64], den: u64) -> std::result::Result<Complex<T>, String>;

    /// Writes `f(x_j)` into `out[j]` for `j = 1..p`; `out[0]` is left as is.
    fn sample_lattice(&self, zmod: &[u64], p: u64, out: &mut [Complex<T>]) -> Result<()> {
        let mut num = vec![0u64; zmod.len()];
        for j in 1..p {
            for (n, &zt) in num.iter_mut().zip(zmod) {
                *n = ((j as u128 * zt as u128) % p as u128) as u64;
            }
            out[j as usize] = self.eval_node(&num, p).map_err(|msg| Error::Evaluation {
                lattice: 0,
                node: j,
                msg,
            })?;
        }
        Ok(())
    }
}

impl<T: Real> Target<T> for TrigPolynomial<T> {
    fn dim(&self) -> usize {
        self.set.dim()
    }

    fn eval_node(&self, num: &[u64], den: u64) -> std::result::Result<Complex<T>, String> {
        Ok(exact_phase(self, num, den))
    }

    /// Uses `f(x_j) = Σ_k f̂_k e^{2πi j (k·z mod p) / p}` with an exact
    /// twiddle index.
    fn sample_lattice(&self, zmod: &[u64], p: u64, out: &mut [Complex<T>]) -> Result<()> {
        let tw = dft::twiddles::<T>(p);
        let bins: Vec<u64> = self.set.iter().map(|k| residue_mod(k, zmod, p)).collect();
        for (j, o) in out.iter_mut().enumerate().skip(1) {
            let mut acc = czero();
            for (&b, &c) in bins.iter().zip(&self.coeffs) {
                acc = acc + c * tw[((j as u128 * b as u128) % p as u128) as usize];
            }
            *o = acc;
        }
        Ok(())
    }
}

/// `f(num/den)` with the phase of each term reduced exactly modulo `den`.
fn exact_phase<T: Real>(poly: &TrigPolynomial<T>, num: &[u64], den: u64) -> Complex<T> {
    let tau = std::f64::consts::TAU;
    let mut acc = czero();
    for (k, &c) in poly.set.iter().zip(&poly.coeffs) {
        let r = residue_mod(k, num, den);
        let a = tau * (r as f64 / den as f64);
        acc = acc + c * Complex::new(T::from_f64_lossy(a.cos()), T::from_f64_lossy(a.sin()));
    }
    acc
}

/// Adapts a closure on points of `[0,1)^d`.
pub struct FnTarget<F> {
    dim: usize,
    f: F,
}

impl<F> FnTarget<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnTarget { dim, f }
    }
}

impl<T: Real, F> Target<T> for FnTarget<F>
where
    F: Fn(&[T]) -> std::result::Result<Complex<T>, String> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_node(&self, num: &[u64], den: u64) -> std::result::Result<Complex<T>, String> {
        let x: Vec<T> = num
            .iter()
            .map(|&n| T::from_f64_lossy(n as f64 / den as f64))
            .collect();
        (self.f)(&x)
    }
}

/// Samples on every lattice of a plan, tagged with the plan hash.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<T: Real> {
    pub plan_hash: String,
    pub primes: Vec<u64>,
    pub values: Vec<Vec<Complex<T>>>,
    /// Function evaluations spent; the origin is evaluated once.
    pub evaluations: u64,
}

impl<T: Real> SampleSet<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check(&self, plan: &MultiLatticePlan) -> Result<()> {
        if self.primes != plan.primes() {
            return Err(Error::invalid("samples were taken for a different plan"));
        }
        for (v, &p) in self.values.iter().zip(&self.primes) {
            if v.len() as u64 != p {
                return Err(Error::LengthMismatch {
                    expected: p as usize,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "plan {}", self.plan_hash)?;
        writeln!(w, "L {}", self.primes.len())?;
        let primes: Vec<String> = self.primes.iter().map(|p| p.to_string()).collect();
        writeln!(w, "primes {}", primes.join(" "))?;
        for (l, v) in self.values.iter().enumerate() {
            writeln!(w, "lattice {l} {}", v.len())?;
            for c in v {
                writeln!(w, "{} {}", c.re, c.im)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut lines = Lines::new(r);
        let plan_hash = lines.keyed("plan")?.to_string();
        let l: usize = lines.parse_one("L")?;
        let primes_line = lines.keyed("primes")?;
        let primes = primes_line
            .split_whitespace()
            .map(|t| lines.parse::<u64>(t))
            .collect::<Result<Vec<_>>>()?;
        if primes.len() != l {
            return Err(lines.err(format!("expected {l} primes, found {}", primes.len())));
        }
        let mut values = Vec::with_capacity(l);
        for (ell, &p) in primes.iter().enumerate() {
            let head = lines.keyed("lattice")?;
            let want = format!("{ell} {p}");
            if head.trim() != want {
                return Err(lines.err(format!("expected `lattice {want}`, got `lattice {head}`")));
            }
            let mut v = Vec::with_capacity(p as usize);
            for _ in 0..p {
                v.push(lines.complex::<T>()?);
            }
            values.push(v);
        }
        let evaluations = 1 + primes.iter().map(|p| p - 1).sum::<u64>();
        Ok(SampleSet {
            plan_hash,
            primes,
            values,
            evaluations,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(std::fs::File::create(path)?)
    }
}

struct Lines<R: Read> {
    inner: std::io::Lines<BufReader<R>>,
    line: usize,
}

impl<R: Read> Lines<R> {
    fn new(r: R) -> Self {
        Lines {
            inner: BufReader::new(r).lines(),
            line: 0,
        }
    }

    fn err(&self, msg: String) -> Error {
        Error::Parse {
            line: self.line,
            msg,
        }
    }

    fn next_line(&mut self) -> Result<String> {
        loop {
            self.line += 1;
            match self.inner.next() {
                Some(l) => {
                    let l = l?;
                    if !l.trim().is_empty() && !l.starts_with('#') {
                        return Ok(l);
                    }
                }
                None => return Err(self.err("unexpected end of file".into())),
            }
        }
    }

    fn keyed(&mut self, key: &str) -> Result<String> {
        let l = self.next_line()?;
        match l.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.to_string()),
            _ if l == key => Ok(String::new()),
            _ => Err(self.err(format!("expected `{key} …`, got {l:?}"))),
        }
    }

    fn parse<V: std::str::FromStr>(&self, t: &str) -> Result<V> {
        t.trim()
            .parse::<V>()
            .map_err(|_| self.err(format!("cannot parse {t:?}")))
    }

    fn parse_one<V: std::str::FromStr>(&mut self, key: &str) -> Result<V> {
        let v = self.keyed(key)?;
        self.parse(&v)
    }

    fn complex<T: Real>(&mut self) -> Result<Complex<T>> {
        let l = self.next_line()?;
        let mut it = l.split_whitespace();
        match (it.next(), it.next(), it.next()) {
            (Some(re), Some(im), None) => Ok(Complex::new(self.parse(re)?, self.parse(im)?)),
            _ => Err(self.err(format!("expected `re im`, got {l:?}"))),
        }
    }
}

pub fn write_coeffs<T: Real, W: Write>(coeffs: &[Complex<T>], w: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    let mut buf = String::new();
    for c in coeffs {
        buf.clear();
        writeln!(buf, "{} {}", c.re, c.im).expect("string write");
        w.write_all(buf.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_coeffs<T: Real, R: Read>(r: R) -> Result<Vec<Complex<T>>> {
    let mut lines = Lines::new(r);
    let mut out = Vec::new();
    loop {
        match lines.complex::<T>() {
            Ok(c) => out.push(c),
            Err(Error::Parse { msg, .. }) if msg == "unexpected end of file" => return Ok(out),
            Err(e) => return Err(e),
        }
    }
}

/// Samples `f` on all lattices of `plan`; the origin is evaluated once and
/// shared, so `evaluations == plan.total_samples()`.
pub fn sample_on_plan<T: Real, F: Target<T> + ?Sized>(f: &F, plan: &MultiLatticePlan) -> Result<SampleSet<T>> {
    if f.dim() != plan.set().dim() {
        return Err(Error::DimensionMismatch {
            expected: plan.set().dim(),
            got: f.dim(),
        });
    }
    let d = plan.set().dim();
    let origin = f.eval_node(&vec![0; d], 1).map_err(|msg| Error::Evaluation {
        lattice: 0,
        node: 0,
        msg,
    })?;
    let values = plan
        .primes()
        .par_iter()
        .enumerate()
        .map(|(l, &p)| {
            let mut v = vec![czero(); p as usize];
            v[0] = origin;
            f.sample_lattice(&z_mod(plan.z(), p), p, &mut v)
                .map_err(|e| match e {
                    Error::Evaluation { node, msg, .. } => Error::Evaluation { lattice: l, node, msg },
                    other => other,
                })?;
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let evaluations = 1 + plan.primes().iter().map(|&p| p - 1).sum::<u64>();
    Ok(SampleSet {
        plan_hash: plan.hash(),
        primes: plan.primes().to_vec(),
        values,
        evaluations,
    })
}

/// All `P` bins `(1/P) Σ_j f_j e^{-2πi jb/P}`.
pub fn lattice_bins<T: Real>(samples: &[Complex<T>]) -> Vec<Complex<T>> {
    let p = samples.len();
    let scale = T::one() / T::from_usize(p).expect("length fits");
    PrimeDft::new(p)
        .transform(samples)
        .into_iter()
        .map(|c| c * scale)
        .collect()
}

/// `f̂_k^{Λ(z,P)}` for every `k ∈ I`: the DFT bin `k·z mod P`.
pub fn lattice_dft<T: Real>(samples: &[Complex<T>], set: &FrequencySet, z: &[num_bigint::BigUint], p: u64) -> Result<Vec<Complex<T>>> {
    if samples.len() as u64 != p {
        return Err(Error::LengthMismatch {
            expected: p as usize,
            got: samples.len(),
        });
    }
    if z.len() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            got: z.len(),
        });
    }
    let bins = lattice_bins(samples);
    let zm = z_mod(z, p);
    Ok(set.iter().map(|k| bins[residue_mod(k, &zm, p) as usize]).collect())
}

struct Prepared<T: Real> {
    /// Per lattice: DFT bins and the residues of all of `I`.
    bins: Vec<Vec<Complex<T>>>,
    residues: Vec<Vec<u64>>,
}

fn prepare<T: Real>(samples: &SampleSet<T>, plan: &MultiLatticePlan) -> Result<Prepared<T>> {
    samples.check(plan)?;
    let flat = Flat::new(plan.set(), plan.z());
    let (bins, residues) = plan
        .primes()
        .par_iter()
        .zip(&samples.values)
        .map(|(&p, v)| {
            let mut res = Vec::new();
            flat.residues_into(p, None, &mut res);
            (lattice_bins(v), res)
        })
        .unzip();
    Ok(Prepared { bins, residues })
}

fn require(plan: &MultiLatticePlan, want: Variant) -> Result<()> {
    if plan.variant() != want {
        return Err(Error::VariantMismatch {
            expected: want.as_str(),
            found: plan.variant().as_str(),
        });
    }
    Ok(())
}

/// `f̂_k` read off lattice `ν(k)`.
pub fn reconstruct_direct<T: Real>(samples: &SampleSet<T>, plan: &MultiLatticePlan) -> Result<TrigPolynomial<T>> {
    require(plan, Variant::Full)?;
    let prep = prepare(samples, plan)?;
    let coeffs = plan
        .nu()
        .iter()
        .enumerate()
        .map(|(i, &l)| prep.bins[l as usize][prep.residues[l as usize][i] as usize])
        .collect();
    TrigPolynomial::new(plan.set().clone(), coeffs)
}

/// Mean of `f̂_k^{Λ(z,P̃_ℓ)}` over every lattice on which `k` is alias-free.
pub fn reconstruct_average<T: Real>(samples: &SampleSet<T>, plan: &MultiLatticePlan) -> Result<TrigPolynomial<T>> {
    require(plan, Variant::Full)?;
    let prep = prepare(samples, plan)?;
    let s = plan.set().len();
    let mut sum = vec![czero::<T>(); s];
    let mut count = vec![0u32; s];
    for l in 0..plan.len() {
        for &i in plan.recoverable(l) {
            let i = i as usize;
            sum[i] = sum[i] + prep.bins[l][prep.residues[l][i] as usize];
            count[i] += 1;
        }
    }
    let coeffs = sum
        .into_iter()
        .zip(count)
        .map(|(c, n)| c / T::from_u32(n).expect("count fits"))
        .collect();
    TrigPolynomial::new(plan.set().clone(), coeffs)
}

/// Sequential recovery for reduction plans: before reading lattice `ℓ`,
/// the coefficients recovered on earlier lattices are removed from the
/// bins they alias into.
pub fn reconstruct_peeling<T: Real>(samples: &SampleSet<T>, plan: &MultiLatticePlan) -> Result<TrigPolynomial<T>> {
    require(plan, Variant::Reduction)?;
    let mut prep = prepare(samples, plan)?;
    let s = plan.set().len();
    let mut coeffs = vec![czero::<T>(); s];
    let mut done: Vec<usize> = Vec::with_capacity(s);
    for l in 0..plan.len() {
        let bins = &mut prep.bins[l];
        let res = &prep.residues[l];
        for &h in &done {
            bins[res[h] as usize] = bins[res[h] as usize] - coeffs[h];
        }
        for &i in plan.recoverable(l) {
            let i = i as usize;
            coeffs[i] = bins[res[i] as usize];
            done.push(i);
        }
    }
    TrigPolynomial::new(plan.set().clone(), coeffs)
}

/// Dispatches on the plan variant: direct readout for full plans, peeling
/// for reduction plans.
pub fn reconstruct<T: Real>(samples: &SampleSet<T>, plan: &MultiLatticePlan) -> Result<TrigPolynomial<T>> {
    match plan.variant() {
        Variant::Full => reconstruct_direct(samples, plan),
        Variant::Reduction => reconstruct_peeling(samples, plan),
    }
}

/// Node-domain residual `f(x_j) − Σ_h ĉ_h e^{2πi h·x_j}` on `Λ(z, p)`.
pub fn residual_samples<T: Real>(
    samples: &[Complex<T>],
    recovered: &TrigPolynomial<T>,
    z: &[num_bigint::BigUint],
    p: u64,
) -> Result<Vec<Complex<T>>> {
    if samples.len() as u64 != p {
        return Err(Error::LengthMismatch {
            expected: p as usize,
            got: samples.len(),
        });
    }
    let zm = z_mod(z, p);
    let mut model = vec![czero(); p as usize];
    model[0] = recovered.coeffs.iter().fold(czero(), |a, &c| a + c);
    recovered.sample_lattice(&zm, p, &mut model)?;
    Ok(samples.iter().zip(model).map(|(&a, b)| a - b).collect())
}
