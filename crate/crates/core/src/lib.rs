//! Pricing engine and validation harness for the mode-indexed Merton-Garman
//! equation family.
//!
//! An integer pair `(n, m)` scales the security-sector and variance-sector
//! terms of the two-factor pricing operator; `(1, 1)` is the classical
//! Merton-Garman equation, `(0, 0)` reduces to pure discounting. The crate
//! provides:
//!
//! - [`sde`]: correlated-noise generation and path simulation of the coupled
//!   lognormal dynamics, reproducible across thread counts;
//! - [`operator`]: the discretized spatial generator and pointwise residual
//!   evaluation;
//! - [`pde`]: backward ADI (Douglas) solution of the pricing equation on an
//!   `(S, V)` grid;
//! - [`closedform`]: Black-Scholes and its mode-`n` generalization, used as
//!   analytic oracles;
//! - [`mc`]: Monte Carlo pricing on top of [`sde`];
//! - [`hedge`]: the noise-elimination hedge residuals and a delta-hedging
//!   P&L harness;
//! - [`kkmodes`]: quantized-momentum bookkeeping for the compactified extra
//!   dimensions (effective mass, Fourier mode decomposition).
//!
//! All numerics are generic over the scalar type through [`Real`]; the `*64`
//! aliases at the crate root fix `f64` for everyday use.

pub mod closedform;
pub mod error;
pub mod grid;
pub mod hedge;
pub mod kkmodes;
pub mod mc;
pub mod model;
pub mod operator;
pub mod pde;
pub mod sde;
mod tridiag;

pub use error::{Error, Violation};
// Re-exported because `kkmodes::ModeField` exposes `Complex<T>` samples.
pub use num_complex;

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

/// Floating-point scalar the engine is generic over: `f32` or `f64`.
///
/// The one method beyond the standard numeric traits is
/// [`sample_standard_normal`](Real::sample_standard_normal), which lets the
/// simulation modules draw Gaussian variates without dragging distribution
/// trait bounds through every signature.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Draws one standard normal variate from `rng`.
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Shorthand for lossless conversion from small literals.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Conversion from a usize count (grid sizes, path counts).
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable in scalar type")
    }
}

impl Real for f64 {
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

impl Real for f32 {
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
}

/// Double-precision model parameters.
pub type ModelParams64 = model::ModelParams<f64>;
/// Double-precision risk-neutral parameters.
pub type RiskNeutralParams64 = model::RiskNeutralParams<f64>;
/// Double-precision payoff specification.
pub type PayoffSpec64 = model::PayoffSpec<f64>;
/// Double-precision grid specification.
pub type GridSpec64 = grid::GridSpec<f64>;
/// Double-precision path ensemble.
pub type PathSet64 = sde::PathSet<f64>;
/// Double-precision price surface.
pub type PriceSurface64 = pde::PriceSurface<f64>;
/// Double-precision Black-Scholes inputs.
pub type BsInputs64 = closedform::BsInputs<f64>;
/// Double-precision compactification parameters.
pub type KKParams64 = kkmodes::KKParams<f64>;

/// Formats a scalar with 10 significant digits, the precision contract for
/// all emitted numeric output.
pub fn fmt_sig<T: Real>(x: T) -> String {
    format!("{:.9e}", x)
}
