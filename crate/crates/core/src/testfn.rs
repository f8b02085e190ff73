//! The tensor-product test function `G_3^d(x) = Π_t g_3(x_t)` with
//!
//! ```text
//! g_3(x) = c (2 + sgn((x mod 1) − 1/2) sin³(2πx)),   c = 4 √(3π / (207π − 256)),
//! ```
//!
//! normalized to `‖G_3^d‖_{L_2} = 1`, and the relative `L_2` error of an
//! approximation supported on a frequency set.
//!
//! `g_3` is even and `1/2`-periodic up to the constant, so its coefficients
//! are real, symmetric, and vanish for odd `k`.

use std::io::{BufRead, BufReader, Read, Write};
use std::marker::PhantomData;
use std::path::Path;

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::freqset::FrequencySet;
use crate::spectral::{Target, TrigPolynomial};
use crate::Real;

/// Default truncation order of the one-dimensional table.
pub const DEFAULT_K_MAX: usize = 1 << 14;

/// Default bound on the estimated `L_2` mass beyond `K_max`.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-20;

/// Bound on `|ĝ_3(k)|` for odd `k` before it is replaced by zero.
pub const ODD_TOLERANCE: f64 = 1e-9;

/// Gaps shorter than this are summed directly instead of by differences.
const DIRECT_GAP: i64 = 64;

/// `4 √(3π / (207π − 256))`.
pub fn g3_constant() -> f64 {
    let pi = std::f64::consts::PI;
    4.0 * (3.0 * pi / (207.0 * pi - 256.0)).sqrt()
}

/// One-dimensional `g_3` in the scalar type `T`.
pub fn g3<T: Real>(x: T) -> T {
    let half = T::from_f64_lossy(0.5);
    let xm = x - x.floor();
    let s = (T::TAU() * xm).sin();
    let sgn = if xm > half {
        T::one()
    } else if xm < half {
        -T::one()
    } else {
        T::zero()
    };
    T::from_f64_lossy(g3_constant()) * (T::from_f64_lossy(2.0) + sgn * s * s * s)
}

/// `g_3(num/den)` with the sign decided exactly.
fn g3_rational(num: u64, den: u64) -> f64 {
    let num = num % den;
    let twice = 2 * num as u128;
    let sgn = match twice.cmp(&(den as u128)) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Less => -1.0,
        std::cmp::Ordering::Equal => 0.0,
    };
    let s = (std::f64::consts::TAU * (num as f64 / den as f64)).sin();
    g3_constant() * (2.0 + sgn * s * s * s)
}

/// One-dimensional coefficients `ĝ_3(k)`, `0 ≤ k ≤ K_max`, with an estimate
/// of the `L_2` mass `Σ_{|k|>K_max} |ĝ_3(k)|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct G3Table {
    pub k_max: usize,
    pub coeffs: Vec<f64>,
    pub tail_mass: f64,
    /// Largest `|ĝ_3(k)|` computed for odd `k` before zeroing.
    pub odd_residual: f64,
}

impl G3Table {
    /// `ĝ_3(k)` for `|k| ≤ K_max`.
    pub fn get(&self, k: i64) -> Option<f64> {
        self.coeffs.get(k.unsigned_abs() as usize).copied()
    }

    /// Writes `kmax <K> tail <mass> odd <residual>` followed by one `k re`
    /// pair per line.
    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(
            w,
            "kmax {} tail {:e} odd {:e}",
            self.k_max, self.tail_mass, self.odd_residual
        )?;
        for (k, c) in self.coeffs.iter().enumerate() {
            writeln!(w, "{k} {c:e}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let perr = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        let head = lines.next().ok_or_else(|| perr(1, "empty table"))??;
        let f: Vec<&str> = head.split_whitespace().collect();
        if f.len() != 6 || f[0] != "kmax" || f[2] != "tail" || f[4] != "odd" {
            return Err(perr(1, "expected `kmax <K> tail <mass> odd <residual>`"));
        }
        let k_max: usize = f[1].parse().map_err(|_| perr(1, "bad K_max"))?;
        let tail_mass: f64 = f[3].parse().map_err(|_| perr(1, "bad tail mass"))?;
        let odd_residual: f64 = f[5].parse().map_err(|_| perr(1, "bad odd residual"))?;
        let mut coeffs = Vec::with_capacity(k_max + 1);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lno = i + 2;
            let mut it = line.split_whitespace();
            let k: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| perr(lno, "bad index"))?;
            let c: f64 = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| perr(lno, "bad coefficient"))?;
            if k != coeffs.len() || it.next().is_some() {
                return Err(perr(lno, "expected consecutive `k re` pairs"));
            }
            coeffs.push(c);
        }
        if coeffs.len() != k_max + 1 {
            return Err(perr(k_max + 2, "table is shorter than K_max"));
        }
        Ok(G3Table {
            k_max,
            coeffs,
            tail_mass,
            odd_residual,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(std::fs::File::create(path)?)
    }

    /// Reads a cached table, rebuilding and rewriting it when the file is
    /// missing, unreadable or has a smaller `K_max`.
    pub fn load_or_build(path: impl AsRef<Path>, k_max: usize, tolerance: f64) -> Result<Self> {
        let path = path.as_ref();
        if let Ok(t) = Self::read(path) {
            if t.k_max >= k_max {
                return Ok(t);
            }
        }
        let t = g3_coeff_oracle(k_max, tolerance)?;
        t.write(path)?;
        Ok(t)
    }
}

/// Coefficients of `g_3` from a length-`2·K_max` equispaced DFT.
///
/// The bin at `±K_max` holds `ĝ_3(K_max) + ĝ_3(−K_max)` and is halved. The
/// tail is estimated from `|ĝ_3(k)| ≤ c k^{-3}` with `c` fitted on the top
/// octave.
pub fn g3_coeff_oracle(k_max: usize, tolerance: f64) -> Result<G3Table> {
    if k_max < 2 {
        return Err(Error::invalid("K_max must be at least 2"));
    }
    let n = 2 * k_max;
    let mut buf: Vec<Complex<f64>> = (0..n as u64)
        .map(|j| Complex::new(g3_rational(j, n as u64), 0.0))
        .collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    let mut coeffs = Vec::with_capacity(k_max + 1);
    let mut odd_residual = 0.0f64;
    for (k, b) in buf.iter().take(k_max + 1).enumerate() {
        let mut c = *b * scale;
        if k == k_max {
            c /= 2.0;
        }
        if c.im.abs() > ODD_TOLERANCE {
            return Err(Error::Certificate(format!(
                "imaginary part {:e} at k = {k}",
                c.im
            )));
        }
        if k % 2 == 1 {
            odd_residual = odd_residual.max(c.re.abs());
            if c.re.abs() > ODD_TOLERANCE {
                return Err(Error::Certificate(format!(
                    "odd coefficient {:e} at k = {k}",
                    c.re
                )));
            }
            coeffs.push(0.0);
        } else {
            coeffs.push(c.re);
        }
    }
    let c = (k_max / 2..=k_max)
        .map(|k| coeffs[k].abs() * (k as f64).powi(3))
        .fold(0.0, f64::max);
    let tail_mass = 2.0 * c * c / (5.0 * (k_max as f64).powi(5));
    if tail_mass > tolerance {
        return Err(Error::TailTooLarge {
            estimate: tail_mass,
            tolerance,
        });
    }
    Ok(G3Table {
        k_max,
        coeffs,
        tail_mass,
        odd_residual,
    })
}

/// `G_3^d` with its tensorized coefficient table.
#[derive(Debug, Clone)]
pub struct G3Spec<T: Real> {
    dim: usize,
    table: G3Table,
    /// `w[k] = ĝ_3(k)²`.
    w: Vec<f64>,
    /// `hi[v] = Σ_{v ≤ k ≤ K_max} w[k]` plus half the tail mass.
    hi: Vec<f64>,
    _scalar: PhantomData<T>,
}

impl<T: Real> G3Spec<T> {
    /// Builds the table with the default tail tolerance.
    pub fn new(dim: usize, k_max: usize) -> Result<Self> {
        Self::from_table(dim, g3_coeff_oracle(k_max, DEFAULT_TAIL_TOLERANCE)?)
    }

    pub fn from_table(dim: usize, table: G3Table) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if table.coeffs.len() != table.k_max + 1 {
            return Err(Error::invalid("coefficient table length does not match K_max"));
        }
        let w: Vec<f64> = table.coeffs.iter().map(|c| c * c).collect();
        let mut hi = vec![0.0; w.len() + 1];
        hi[w.len()] = table.tail_mass / 2.0;
        for k in (0..w.len()).rev() {
            hi[k] = hi[k + 1] + w[k];
        }
        Ok(G3Spec {
            dim,
            table,
            w,
            hi,
            _scalar: PhantomData,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_max(&self) -> usize {
        self.table.k_max
    }

    pub fn table(&self) -> &G3Table {
        &self.table
    }

    /// `G_3^d(x)`.
    pub fn eval(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(eval_g3d(x))
    }

    /// `Ĝ_3^d(k) = Π_t ĝ_3(k_t)`.
    pub fn coeff(&self, k: &[i32]) -> Result<f64> {
        let mut prod = 1.0;
        for &kt in k {
            prod *= self.table.get(kt as i64).ok_or(Error::OutsideTable {
                component: kt as i64,
                k_max: self.table.k_max,
            })?;
        }
        Ok(prod)
    }

    /// Exact coefficients of `G_3^d` on `set`, aligned with its order.
    pub fn coefficients(&self, set: &FrequencySet) -> Result<TrigPolynomial<T>> {
        self.check_set(set)?;
        let coeffs = set
            .iter()
            .map(|k| self.coeff(k).map(|c| Complex::new(T::from_f64_lossy(c), T::zero())))
            .collect::<Result<Vec<_>>>()?;
        TrigPolynomial::new(set.clone(), coeffs)
    }

    /// `Σ_{k ∉ I} |Ĝ_k|²`, accumulated without cancellation against `‖G‖² = 1`.
    pub fn outside_mass(&self, set: &FrequencySet) -> Result<f64> {
        self.check_set(set)?;
        let rows: Vec<&[i32]> = set.iter().collect();
        if rows.is_empty() {
            return Ok(1.0);
        }
        Ok(self.tail(&rows, 0))
    }

    /// Truncation error `‖G − S_I G‖ / ‖G‖`.
    pub fn truncation_error(&self, set: &FrequencySet) -> Result<f64> {
        Ok(self.outside_mass(set)?.sqrt())
    }

    /// `‖G − S_I^Λ G‖ / ‖G‖` for an approximation supported on `I`.
    pub fn rel_l2_error(&self, recovered: &TrigPolynomial<T>) -> Result<f64> {
        let set = recovered.set();
        let mut sq = self.outside_mass(set)?;
        for (k, c) in set.iter().zip(recovered.coeffs()) {
            let exact = self.coeff(k)?;
            let re = c.re.to_f64_lossy() - exact;
            let im = c.im.to_f64_lossy();
            sq += re * re + im * im;
        }
        Ok(sq.sqrt())
    }

    fn check_set(&self, set: &FrequencySet) -> Result<()> {
        if set.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: set.dim(),
            });
        }
        let k_max = self.table.k_max as i64;
        for k in set.iter() {
            if let Some(&kt) = k.iter().find(|&&kt| (kt as i64).abs() > k_max) {
                return Err(Error::OutsideTable {
                    component: kt as i64,
                    k_max: self.table.k_max,
                });
            }
        }
        Ok(())
    }

    fn weight(&self, v: i64) -> f64 {
        self.w[v.unsigned_abs() as usize]
    }

    /// `Σ_{a ≤ v ≤ b} w(v)` for `0 ≤ a`, `b ≤ K_max`.
    fn seg_pos(&self, a: i64, b: i64) -> f64 {
        if a > b {
            0.0
        } else if b - a < DIRECT_GAP {
            (a..=b).map(|v| self.w[v as usize]).sum()
        } else {
            self.hi[a as usize] - self.hi[b as usize + 1]
        }
    }

    /// `Σ_{a ≤ v ≤ b} w(|v|)` for `−K_max ≤ a`, `b ≤ K_max`.
    fn seg(&self, a: i64, b: i64) -> f64 {
        if a > b {
            0.0
        } else if a >= 0 {
            self.seg_pos(a, b)
        } else if b <= 0 {
            self.seg_pos(-b, -a)
        } else {
            self.seg_pos(1, -a) + self.w[0] + self.seg_pos(1, b)
        }
    }

    /// Mass strictly above `c`, including the tail beyond the table.
    fn upper(&self, c: i64) -> f64 {
        if c >= 0 {
            self.hi[c as usize + 1]
        } else {
            self.seg(c + 1, 0) + self.hi[1]
        }
    }

    fn lower(&self, c: i64) -> f64 {
        self.upper(-c)
    }

    /// Mass of all `v ∉ values` (sorted, distinct).
    fn complement(&self, values: &[i64]) -> f64 {
        let mut acc = self.lower(values[0]) + self.upper(values[values.len() - 1]);
        for pair in values.windows(2) {
            acc += self.seg(pair[0] + 1, pair[1] - 1);
        }
        acc
    }

    /// Mass of the product measure outside the rows, restricted to
    /// components `t..d` (rows share their first `t` components).
    fn tail(&self, rows: &[&[i32]], t: usize) -> f64 {
        if t == self.dim {
            return 0.0;
        }
        if rows.len() == 1 {
            let r = rows[0];
            let mut acc = 0.0;
            for u in (t..self.dim).rev() {
                let v = r[u] as i64;
                acc = self.complement(&[v]) + self.weight(v) * acc;
            }
            return acc;
        }
        let mut values = Vec::new();
        let mut acc = 0.0;
        let mut start = 0;
        while start < rows.len() {
            let v = rows[start][t];
            let mut end = start + 1;
            while end < rows.len() && rows[end][t] == v {
                end += 1;
            }
            values.push(v as i64);
            acc += self.weight(v as i64) * self.tail(&rows[start..end], t + 1);
            start = end;
        }
        acc + self.complement(&values)
    }
}

/// `G_3^d(x) = Π_t g_3(x_t)`.
pub fn eval_g3d<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::one(), |acc, &xt| acc * g3(xt))
}

impl<T: Real> Target<T> for G3Spec<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_node(&self, num: &[u64], den: u64) -> std::result::Result<Complex<T>, String> {
        let v: f64 = num.iter().map(|&n| g3_rational(n, den)).product();
        Ok(Complex::new(T::from_f64_lossy(v), T::zero()))
    }

    fn sample_lattice(&self, zmod: &[u64], p: u64, out: &mut [Complex<T>]) -> Result<()> {
        let g1: Vec<f64> = (0..p).map(|m| g3_rational(m, p)).collect();
        let mut num = vec![0u64; zmod.len()];
        for o in out.iter_mut().take(p as usize).skip(1) {
            let mut v = 1.0;
            for (n, &zt) in num.iter_mut().zip(zmod) {
                *n += zt;
                if *n >= p {
                    *n -= p;
                }
                v *= g1[*n as usize];
            }
            *o = Complex::new(T::from_f64_lossy(v), T::zero());
        }
        Ok(())
    }
}
