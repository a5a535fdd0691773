//! Analytic oracles: Black-Scholes, its constant-volatility mode-`n`
//! generalization, the ground-state discounting solution, and the risk-free
//! portfolio growth law.
//!
//! The mode-`n` closed form prices under `dS = n r S dt + n sigma S dW`
//! with discounting at `r`; it reduces to Black-Scholes at `n = 1` and to
//! `exp(-r tau) * payoff(S)` at `n = 0`.

use crate::error::Error;
use crate::model::PayoffSpec;
use crate::Real;

/// Option side for the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

/// Inputs to the constant-volatility closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsInputs<T> {
    /// Spot, > 0.
    pub s: T,
    /// Strike, > 0.
    pub k: T,
    /// Risk-free rate.
    pub r: T,
    /// Volatility, >= 0.
    pub sigma: T,
    /// Time to maturity, >= 0.
    pub tau: T,
    pub kind: OptionKind,
}

impl<T: Real> BsInputs<T> {
    fn check(&self) -> Result<(), Error> {
        if !(self.s > T::zero()) {
            return Err(Error::Domain(format!("spot must be > 0 (got {})", self.s)));
        }
        if !(self.k > T::zero()) {
            return Err(Error::Domain(format!("strike must be > 0 (got {})", self.k)));
        }
        if !(self.sigma >= T::zero()) {
            return Err(Error::Domain(format!("sigma must be >= 0 (got {})", self.sigma)));
        }
        if !(self.tau >= T::zero()) {
            return Err(Error::Domain(format!("tau must be >= 0 (got {})", self.tau)));
        }
        Ok(())
    }
}

/// Standard normal density.
pub fn norm_pdf<T: Real>(x: T) -> T {
    let two = T::of(2.0);
    (-x * x / two).exp() / (two * T::PI()).sqrt()
}

/// Standard normal CDF, `0.5 * erfc(-x / sqrt(2))`.
///
/// Max absolute error is below 1e-15 in double precision (see the frozen
/// reference values in the tests).
pub fn norm_cdf<T: Real>(x: T) -> T {
    T::of(0.5) * erfc(-x / T::SQRT_2())
}

// Rational Chebyshev approximation of erf/erfc after W. J. Cody's CALERF,
// three branches split at 0.46875 and 4.0.

const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const ERFC_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERFC_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const ERFC_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERFC_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

/// `exp(-y^2)` split as `exp(-hi^2) * exp(-(y-hi)(y+hi))` with `hi` rounded
/// to 1/16 so the squared argument loses no low bits.
fn exp_neg_square<T: Real>(y: T) -> T {
    let sixteen = T::of(16.0);
    let hi = (y * sixteen).floor() / sixteen;
    let del = (y - hi) * (y + hi);
    (-hi * hi).exp() * (-del).exp()
}

/// Error function.
pub fn erf<T: Real>(x: T) -> T {
    let y = x.abs();
    if y <= T::of(0.46875) {
        let ysq = if y > T::of(1.11e-16) { y * y } else { T::zero() };
        let mut num = T::of(ERF_A[4]) * ysq;
        let mut den = ysq;
        for i in 0..3 {
            num = (num + T::of(ERF_A[i])) * ysq;
            den = (den + T::of(ERF_B[i])) * ysq;
        }
        x * (num + T::of(ERF_A[3])) / (den + T::of(ERF_B[3]))
    } else {
        let tail = erfc_positive(y);
        if x >= T::zero() {
            T::one() - tail
        } else {
            tail - T::one()
        }
    }
}

/// Complementary error function.
pub fn erfc<T: Real>(x: T) -> T {
    if x < T::of(-0.46875) {
        T::of(2.0) - erfc_positive(-x)
    } else if x <= T::of(0.46875) {
        T::one() - erf(x)
    } else {
        erfc_positive(x)
    }
}

fn erfc_positive<T: Real>(y: T) -> T {
    debug_assert!(y >= T::of(0.46875));
    if y <= T::of(4.0) {
        let mut num = T::of(ERFC_C[8]) * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + T::of(ERFC_C[i])) * y;
            den = (den + T::of(ERFC_D[i])) * y;
        }
        exp_neg_square(y) * (num + T::of(ERFC_C[7])) / (den + T::of(ERFC_D[7]))
    } else if y < T::of(26.6) {
        let inv_sqrt_pi = T::of(5.641895835477562869e-1);
        let ysq = T::one() / (y * y);
        let mut num = T::of(ERFC_P[5]) * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + T::of(ERFC_P[i])) * ysq;
            den = (den + T::of(ERFC_Q[i])) * ysq;
        }
        let r = ysq * (num + T::of(ERFC_P[4])) / (den + T::of(ERFC_Q[4]));
        exp_neg_square(y) * (inv_sqrt_pi - r) / y
    } else {
        T::zero()
    }
}

fn discounted_payoff_of_forward<T: Real>(forward: T, k: T, disc: T, kind: OptionKind) -> T {
    match kind {
        OptionKind::Call => disc * (forward - k).max(T::zero()),
        OptionKind::Put => disc * (k - forward).max(T::zero()),
    }
}

fn lognormal_value<T: Real>(forward: T, k: T, vol_sqrt_tau: T, disc: T, kind: OptionKind) -> T {
    if vol_sqrt_tau <= T::zero() {
        return discounted_payoff_of_forward(forward, k, disc, kind);
    }
    let half = T::of(0.5);
    let d1 = (forward / k).ln() / vol_sqrt_tau + half * vol_sqrt_tau;
    let d2 = d1 - vol_sqrt_tau;
    match kind {
        OptionKind::Call => disc * (forward * norm_cdf(d1) - k * norm_cdf(d2)),
        OptionKind::Put => disc * (k * norm_cdf(-d2) - forward * norm_cdf(-d1)),
    }
}

/// Black-Scholes price. At `tau = 0` returns the payoff; at `sigma = 0` the
/// discounted intrinsic value on the forward.
pub fn bs_price<T: Real>(inp: &BsInputs<T>) -> Result<T, Error> {
    inp.check()?;
    if inp.tau == T::zero() {
        return Ok(discounted_payoff_of_forward(inp.s, inp.k, T::one(), inp.kind));
    }
    let disc = (-inp.r * inp.tau).exp();
    let forward = inp.s / disc;
    Ok(lognormal_value(
        forward,
        inp.k,
        inp.sigma * inp.tau.sqrt(),
        disc,
        inp.kind,
    ))
}

/// Closed form for the mode-`n` constant-volatility equation: geometric
/// Brownian motion with drift `n r` and volatility `n sigma`, discounted at
/// `r`. Equals [`bs_price`] at `n = 1` and the ground-state value at
/// `n = 0`.
pub fn generalized_bs_price<T: Real>(inp: &BsInputs<T>, n: u32) -> Result<T, Error> {
    inp.check()?;
    let nf = T::of_usize(n as usize);
    if inp.tau == T::zero() {
        return Ok(discounted_payoff_of_forward(inp.s, inp.k, T::one(), inp.kind));
    }
    let disc = (-inp.r * inp.tau).exp();
    let forward = inp.s * (nf * inp.r * inp.tau).exp();
    Ok(lognormal_value(
        forward,
        inp.k,
        nf * inp.sigma * inp.tau.sqrt(),
        disc,
        inp.kind,
    ))
}

/// Ground-state value `exp(-r tau) * payoff(s, v)`: the solution of the
/// mode-(0, 0) equation, where no stochastic term survives projection.
pub fn ground_state_price<T: Real>(
    payoff: &PayoffSpec<T>,
    r: T,
    tau: T,
    s: T,
    v: T,
) -> Result<T, Error> {
    Ok((-r * tau).exp() * payoff.eval(s, v)?)
}

/// Value of the risk-free self-replicating portfolio: `pi0 * exp(r t)`.
pub fn portfolio_growth<T: Real>(pi0: T, r: T, t: T) -> T {
    pi0 * (r * t).exp()
}

/// Centered finite-difference delta of a closed-form pricer in `s`.
pub(crate) fn bumped_delta<T: Real>(
    price: impl Fn(T) -> Result<T, Error>,
    s: T,
) -> Result<T, Error> {
    let h = T::of(1e-4) * s.max(T::one());
    let up = price(s + h)?;
    let down = price(s - h)?;
    Ok((up - down) / (T::of(2.0) * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PayoffSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Taylor-series erf for |x| <= 2, an oracle independent of the rational
    /// approximation.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = 0.0;
        for k in 0..64 {
            sum += term / (2 * k + 1) as f64;
            term *= -x * x / (k + 1) as f64;
        }
        sum * 2.0 / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn erf_matches_series_oracle() {
        for i in 0..=80 {
            let x = -2.0 + 0.05 * i as f64;
            assert_relative_eq!(erf(x), erf_series(x), epsilon = 1e-15, max_relative = 1e-14);
        }
    }

    #[test]
    fn norm_cdf_matches_reference_values() {
        // Reference values computed with 50-digit arithmetic.
        let cases: [(f64, f64); 11] = [
            (-8.0, 6.22096057427178412351e-16),
            (-5.0, 2.86651571879193911674e-7),
            (-3.0, 1.34989803163009452665e-3),
            (-1.0, 1.58655253931457051415e-1),
            (-0.3, 3.82088577811047366928e-1),
            (0.0, 0.5),
            (0.3, 6.17911422188952633072e-1),
            (1.0, 8.41344746068542948585e-1),
            (3.0, 9.98650101968369905473e-1),
            (5.0, 9.99999713348428120806e-1),
            (8.0, 9.99999999999999377904e-1),
        ];
        for (x, expected) in cases {
            let got = norm_cdf(x);
            assert!(
                (got - expected).abs() <= 1e-15,
                "norm_cdf({}) = {:e}, expected {:e}",
                x,
                got,
                expected
            );
        }
    }

    #[test]
    fn erfc_matches_reference_values() {
        // Max relative error of the rational approximation is a few 1e-16;
        // reference values from 50-digit arithmetic.
        let cases: [(f64, f64); 6] = [
            (0.5, 4.79500122186953462317e-1),
            (1.0, 1.57299207050285130659e-1),
            (2.5, 4.06952017444958939564e-4),
            (4.5, 1.96616044154288747628e-10),
            (6.0, 2.15197367124989131166e-17),
            (-1.5, 1.96610514647531072707e0),
        ];
        for (x, expected) in cases {
            assert_relative_eq!(erfc(x), expected, max_relative = 1e-14);
        }
    }

    fn atm_call() -> BsInputs<f64> {
        BsInputs {
            s: 100.0,
            k: 100.0,
            r: 0.05,
            sigma: 0.2,
            tau: 1.0,
            kind: OptionKind::Call,
        }
    }

    /// Quadrature oracle: discounted lognormal expectation of the payoff,
    /// Simpson's rule on each side of the payoff kink.
    fn bs_by_quadrature(inp: &BsInputs<f64>) -> f64 {
        let drift = (inp.r - 0.5 * inp.sigma * inp.sigma) * inp.tau;
        let vol = inp.sigma * inp.tau.sqrt();
        let payoff = |z: f64| {
            let s_t = inp.s * (drift + vol * z).exp();
            match inp.kind {
                OptionKind::Call => (s_t - inp.k).max(0.0),
                OptionKind::Put => (inp.k - s_t).max(0.0),
            }
        };
        let density = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let z_kink = (((inp.k / inp.s).ln() - drift) / vol).clamp(-12.0, 12.0);
        let simpson = |a: f64, b: f64, n: usize| {
            let h = (b - a) / n as f64;
            let mut acc = payoff(a) * density(a) + payoff(b) * density(b);
            for k in 1..n {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                let z = a + h * k as f64;
                acc += w * payoff(z) * density(z);
            }
            acc * h / 3.0
        };
        (-inp.r * inp.tau).exp() * (simpson(-12.0, z_kink, 4000) + simpson(z_kink, 12.0, 4000))
    }

    #[test]
    fn bs_price_matches_quadrature_oracle() {
        let cases = [
            atm_call(),
            BsInputs { k: 120.0, ..atm_call() },
            BsInputs { k: 80.0, sigma: 0.4, tau: 0.5, ..atm_call() },
            BsInputs { kind: OptionKind::Put, ..atm_call() },
            BsInputs { kind: OptionKind::Put, k: 130.0, tau: 2.0, ..atm_call() },
        ];
        for inp in cases {
            let oracle = bs_by_quadrature(&inp);
            assert_relative_eq!(bs_price(&inp).unwrap(), oracle, max_relative = 1e-9);
        }
    }

    #[test]
    fn bs_atm_pinned_value() {
        // Frozen from the quadrature oracle above.
        assert_relative_eq!(bs_price(&atm_call()).unwrap(), 10.4506, max_relative = 1e-4);
        assert_relative_eq!(
            bs_price(&atm_call()).unwrap(),
            10.450583572185565,
            max_relative = 1e-12
        );
    }

    #[test]
    fn bs_zero_tau_is_payoff() {
        let inp = BsInputs { s: 120.0, tau: 0.0, ..atm_call() };
        assert_eq!(bs_price(&inp).unwrap(), 20.0);
    }

    #[test]
    fn bs_zero_sigma_is_discounted_forward_intrinsic() {
        let inp = BsInputs { sigma: 0.0, ..atm_call() };
        let expected = 100.0 - 100.0 * (-0.05_f64).exp();
        assert_relative_eq!(bs_price(&inp).unwrap(), expected, max_relative = 1e-12);
        assert_relative_eq!(bs_price(&inp).unwrap(), 4.8771, max_relative = 1e-4);
    }

    #[test]
    fn bs_rejects_domain_violations() {
        assert!(bs_price(&BsInputs { s: -1.0, ..atm_call() }).is_err());
        assert!(bs_price(&BsInputs { k: 0.0, ..atm_call() }).is_err());
        assert!(bs_price(&BsInputs { sigma: -0.1, ..atm_call() }).is_err());
        assert!(bs_price(&BsInputs { tau: -0.5, ..atm_call() }).is_err());
    }

    #[test]
    fn generalized_reduces_to_ground_state_at_n0() {
        let price = generalized_bs_price(&atm_call(), 0).unwrap();
        assert_relative_eq!(price, 0.0, epsilon = 1e-15);
        let itm = BsInputs { s: 150.0, ..atm_call() };
        let expected = (150.0 - 100.0) * (-0.05_f64).exp();
        assert_relative_eq!(generalized_bs_price(&itm, 0).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn ground_state_examples() {
        let call = PayoffSpec::call(100.0, 2.0);
        assert_eq!(ground_state_price(&call, 0.05, 0.0, 150.0, 0.04).unwrap(), 50.0);
        assert_relative_eq!(
            ground_state_price(&call, 0.05, 2.0, 150.0, 0.04).unwrap(),
            50.0 * (-0.1_f64).exp(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            ground_state_price(&call, 0.05, 2.0, 150.0, 0.04).unwrap(),
            45.2419,
            max_relative = 1e-4
        );
        let put = PayoffSpec::put(100.0, 2.0);
        assert_eq!(ground_state_price(&put, 0.05, 2.0, 150.0, 0.04).unwrap(), 0.0);
    }

    #[test]
    fn portfolio_growth_examples() {
        assert_eq!(portfolio_growth(3.0, 0.05, 0.0), 3.0);
        assert_relative_eq!(portfolio_growth(1.0, 0.05, 1.0), 1.05127, max_relative = 1e-5);
        assert_eq!(portfolio_growth(2.5, 0.0, 7.0), 2.5);
    }

    proptest! {
        // Put-call parity holds to near machine precision.
        #[test]
        fn put_call_parity(s in 10.0_f64..300.0, k in 10.0_f64..300.0,
                           r in -0.05_f64..0.15, sigma in 0.01_f64..0.9, tau in 0.01_f64..3.0) {
            let call = bs_price(&BsInputs { s, k, r, sigma, tau, kind: OptionKind::Call }).unwrap();
            let put = bs_price(&BsInputs { s, k, r, sigma, tau, kind: OptionKind::Put }).unwrap();
            let rhs = s - k * (-r * tau).exp();
            prop_assert!((call - put - rhs).abs() <= 1e-12 * s.max(k));
        }

        // The mode-n value equals Black-Scholes after the forward adjustment
        // s -> s * exp((n-1) r tau) with volatility n sigma.
        #[test]
        fn generalized_is_forward_adjusted_bs(
            s in 50.0_f64..200.0, k in 50.0_f64..200.0,
            r in 0.0_f64..0.1, sigma in 0.05_f64..0.5, tau in 0.1_f64..2.0, n in 0u32..4) {
            let inp = BsInputs { s, k, r, sigma, tau, kind: OptionKind::Call };
            let lhs = generalized_bs_price(&inp, n).unwrap();
            let nf = n as f64;
            let adjusted = BsInputs {
                s: s * ((nf - 1.0) * r * tau).exp(),
                sigma: nf * sigma,
                ..inp
            };
            let rhs = bs_price(&adjusted).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }

        #[test]
        fn generalized_matches_bs_at_n1(s in 50.0_f64..200.0, k in 50.0_f64..200.0,
                                        sigma in 0.05_f64..0.5, tau in 0.1_f64..2.0) {
            let inp = BsInputs { s, k, r: 0.03, sigma, tau, kind: OptionKind::Call };
            let lhs = generalized_bs_price(&inp, 1).unwrap();
            let rhs = bs_price(&inp).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn call_price_monotone_in_sigma() {
        let mut last = -1.0;
        for i in 1..40 {
            let sigma = 0.02 * i as f64;
            let p = bs_price(&BsInputs { sigma, ..atm_call() }).unwrap();
            assert!(p > last, "call not increasing in sigma at {}", sigma);
            last = p;
        }
    }
}
