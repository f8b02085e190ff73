//! Deterministic multiple rank-1 lattices.
//!
//! Starting from a *reconstructing* single rank-1 lattice `Λ(z, M)` for a
//! frequency set `I ⊂ ℤ^d` (the map `k ↦ k·z mod M` is injective on `I`),
//! this crate selects a short list of primes `P̃_0, …, P̃_{L-1}` such that
//! every `k ∈ I` is alias-free modulo at least one of them. Sampling a
//! trigonometric polynomial on the small lattices `Λ(z, P̃_ℓ)` and running one
//! prime-length DFT per lattice recovers all of its Fourier coefficients.
//!
//! Module map:
//!
//! * [`primes`]: sieve-backed prime indexing and the candidate prime sets.
//! * [`freqset`]: frequency sets, hyperbolic crosses, random cube sets.
//! * [`rank1`]: single rank-1 lattices and their constructors.
//! * [`plan`]: the multiple-lattice construction (full and reduction variants).
//! * [`spectral`]: sampling, prime-length DFTs and coefficient reconstruction.
//! * [`testfn`]: the `G_3^d` test function and the relative `L_2` error.
//! * [`harness`]: experiment runner emitting CSV.
//!
//! Floating-point code is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`.

pub mod error;
pub mod freqset;
pub mod harness;
mod flat;
pub mod plan;
pub mod primes;
pub mod rank1;
pub mod spectral;
pub mod testfn;

use std::fmt;

use num_traits::{Float, FloatConst, FromPrimitive};

pub use error::{Error, Result};
pub use freqset::FrequencySet;
pub use plan::{MultiLatticePlan, Variant};
pub use rank1::{LatticeSource, Rank1Lattice};
pub use spectral::{SampleSet, TrigPolynomial};
pub use testfn::G3Spec;

/// Floating-point scalar used by the spectral and test-function code.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + rustfft::FftNum
    + Default
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + std::str::FromStr
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`.
    fn from_f64_lossy(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    /// Lossless-enough widening to `f64`.
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type TrigPolynomial64 = TrigPolynomial<f64>;
pub type TrigPolynomial32 = TrigPolynomial<f32>;
pub type SampleSet64 = SampleSet<f64>;
pub type SampleSet32 = SampleSet<f32>;
pub type G3Spec64 = G3Spec<f64>;
pub type G3Spec32 = G3Spec<f32>;
pub type Complex64 = num_complex::Complex<f64>;
pub type Complex32 = num_complex::Complex<f32>;
