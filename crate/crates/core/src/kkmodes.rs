//! Quantized-momentum bookkeeping for the compactified extra dimensions:
//! effective mass, momentum quantization, per-step compactification radii,
//! and Fourier mode decomposition under the periodicity condition.
//!
//! The "effective mass" follows the source formula verbatim,
//! `gamma^2 n^2 / (2 pi L)^2 + epsilon-signed m^2 c^2` — dimensionally a
//! mass-squared object despite the name; fidelity wins over unit repair.
//! The compactification radius is the reciprocal of a realized discrete
//! increment, so it is a per-step diagnostic (stochastic, sign passed
//! through), not a constant of the model.

use num_complex::Complex;

use crate::error::Error;
use crate::Real;

/// Signature of the extra dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signature {
    /// `epsilon = +1`.
    Spacelike,
    /// `epsilon = -1`.
    Timelike,
}

/// Compactification parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KKParams<T> {
    /// Compactification radius `L > 0`.
    pub l: T,
    /// Rest mass `m >= 0`.
    pub mass: T,
    /// Speed constant `c > 0`.
    pub c: T,
    /// Lorentz factor `gamma >= 1`.
    pub gamma: T,
    pub signature: Signature,
}

/// Effective mass parameter of mode `n`:
/// `m^2 c^2 + epsilon gamma^2 n^2 / (2 pi L)^2`.
pub fn effective_mass<T: Real>(p: &KKParams<T>, n: i64) -> T {
    let nf = T::of(n as f64);
    let two_pi_l = T::of(2.0) * T::PI() * p.l;
    let momentum_sq = p.gamma * p.gamma * nf * nf / (two_pi_l * two_pi_l);
    let rest = p.mass * p.mass * p.c * p.c;
    match p.signature {
        Signature::Spacelike => momentum_sq + rest,
        Signature::Timelike => rest - momentum_sq,
    }
}

/// Quantized momentum along a compactified direction: `n / radius`.
pub fn quantized_momentum<T: Real>(n: i64, radius: T) -> Result<T, Error> {
    if !(radius > T::zero()) {
        return Err(Error::Domain(format!(
            "compactification radius must be > 0 (got {})",
            radius
        )));
    }
    Ok(T::of(n as f64) / radius)
}

/// Reciprocal of the realized increment `(drift + vol_term) * dt`: the
/// per-step compactified radius. The sign of the increment passes through.
pub fn compactification_radius<T: Real>(drift: T, vol_term: T, dt: T) -> Result<T, Error> {
    if !(dt > T::zero()) {
        return Err(Error::Domain(format!("dt must be > 0 (got {})", dt)));
    }
    let increment = (drift + vol_term) * dt;
    if increment == T::zero() {
        return Err(Error::Singular(
            "zero increment: compactification radius undefined".to_string(),
        ));
    }
    Ok(increment.recip())
}

/// Complex field samples on one period of the compact direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeField<T> {
    /// Uniform samples over `[0, period)`; the count must be a power of two
    /// (>= 2) for the transform.
    pub samples: Vec<Complex<T>>,
    /// `2 pi` times the compactification radius.
    pub period: T,
}

impl<T: Real> ModeField<T> {
    pub fn new(samples: Vec<Complex<T>>, period: T) -> Result<Self, Error> {
        if samples.len() < 2 || !samples.len().is_power_of_two() {
            return Err(Error::Dimension(format!(
                "sample count must be a power of two >= 2 (got {})",
                samples.len()
            )));
        }
        if !(period > T::zero()) {
            return Err(Error::Domain(format!("period must be > 0 (got {})", period)));
        }
        Ok(Self { samples, period })
    }

    /// Samples a scalar function of the coordinate over one period.
    pub fn from_fn(count: usize, period: T, f: impl Fn(T) -> Complex<T>) -> Result<Self, Error> {
        let samples = (0..count)
            .map(|k| f(period * T::of_usize(k) / T::of_usize(count)))
            .collect();
        Self::new(samples, period)
    }
}

/// Iterative radix-2 transform; `inverse` flips the twiddle sign. No
/// normalization is applied here.
fn fft_in_place<T: Real>(buf: &mut [Complex<T>], inverse: bool) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { T::one() } else { -T::one() };
    let mut len = 2;
    while len <= n {
        let ang = sign * T::of(2.0) * T::PI() / T::of_usize(len);
        let w_len = Complex::new(ang.cos(), ang.sin());
        for chunk in buf.chunks_mut(len) {
            let mut w = Complex::new(T::one(), T::zero());
            for k in 0..len / 2 {
                let a = chunk[k];
                let b = chunk[k + len / 2] * w;
                chunk[k] = a + b;
                chunk[k + len / 2] = a - b;
                w = w * w_len;
            }
        }
        len <<= 1;
    }
}

/// Fourier coefficients `c_n` of the field under the convention
/// `f(x) = sum_n c_n exp(i n x / L)` with `period = 2 pi L`:
/// `c_n = (1/N) sum_k f(x_k) exp(-2 pi i n k / N)`.
pub fn mode_decompose<T: Real>(field: &ModeField<T>) -> Vec<Complex<T>> {
    let n = field.samples.len();
    let mut buf = field.samples.clone();
    fft_in_place(&mut buf, false);
    let scale = T::one() / T::of_usize(n);
    for c in buf.iter_mut() {
        *c = Complex::new(c.re * scale, c.im * scale);
    }
    buf
}

/// Reconstructs the field samples from coefficients; `count` must equal the
/// coefficient count.
pub fn mode_reconstruct<T: Real>(
    coeffs: &[Complex<T>],
    period: T,
    count: usize,
) -> Result<ModeField<T>, Error> {
    if count != coeffs.len() {
        return Err(Error::Dimension(format!(
            "cannot reconstruct {} samples from {} coefficients",
            count,
            coeffs.len()
        )));
    }
    let mut buf = coeffs.to_vec();
    fft_in_place(&mut buf, true);
    ModeField::new(buf, period)
}
