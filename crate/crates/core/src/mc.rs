//! Monte Carlo pricing under the risk-neutral dynamics.

use rayon::prelude::*;

use crate::error::Error;
use crate::model::{PayoffSpec, RiskNeutralParams};
use crate::sde::{self, Dynamics, Scheme};
use crate::Real;

/// Monte Carlo price estimate with its sampling error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate<T> {
    /// Discounted sample mean of the payoff.
    pub price: T,
    /// Standard error: sample standard deviation / sqrt(paths).
    pub std_err: T,
    pub paths: usize,
    /// Euler-scheme variance clamps encountered (zero for log-euler).
    pub v_clamps: u64,
}

/// Settings for [`mc_price`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Pair every path with its sign-flipped twin (variance reduction,
    /// off by default).
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: 100_000,
            steps: 200,
            seed: 42,
            scheme: Scheme::LogEuler,
            antithetic: false,
        }
    }
}

/// Discounted-payoff mean over risk-neutral paths of the configured mode.
///
/// Deterministic for fixed `(seed, config)` regardless of thread count: the
/// per-path values are accumulated in path order.
pub fn mc_price<T: Real>(
    rn: &RiskNeutralParams<T>,
    payoff: &PayoffSpec<T>,
    s0: T,
    config: &McConfig,
) -> Result<McEstimate<T>, Error> {
    let violations = payoff.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidParams(violations));
    }
    if config.steps == 0 || config.paths == 0 {
        return Err(Error::Domain("paths and steps must be >= 1".to_string()));
    }
    let dynamics = Dynamics::risk_neutral(rn);
    let maturity = payoff.maturity;
    let dt = maturity / T::of_usize(config.steps);
    let disc = (-rn.r * maturity).exp();

    let (values, v_clamps) = if config.antithetic {
        let (terminals, clamps) = sde::simulate_terminal_antithetic(
            &dynamics,
            rn.mode,
            s0,
            config.paths,
            config.steps,
            dt,
            config.scheme,
            config.seed,
        )?;
        let values = terminals
            .par_iter()
            .map(|&((s_a, v_a), (s_b, v_b))| {
                let half = T::of(0.5);
                Ok(half * (payoff.eval(s_a, v_a)? + payoff.eval(s_b, v_b)?))
            })
            .collect::<Result<Vec<T>, Error>>()?;
        (values, clamps)
    } else {
        let ts = sde::simulate_terminal(
            &dynamics,
            rn.mode,
            s0,
            config.paths,
            config.steps,
            dt,
            config.scheme,
            config.seed,
        )?;
        let values = ts
            .s
            .par_iter()
            .zip(ts.v.par_iter())
            .map(|(&s, &v)| payoff.eval(s, v))
            .collect::<Result<Vec<T>, Error>>()?;
        (values, ts.v_clamps)
    };

    let n = T::of_usize(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one())
    } else {
        T::zero()
    };
    Ok(McEstimate {
        price: disc * mean,
        std_err: disc * (var / n).sqrt(),
        paths: values.len(),
        v_clamps,
    })
}
