//! The noise-elimination hedging algebra, both symbolic (residuals of the
//! two matrix-relation rows) and empirical (simulated delta-hedged P&L).
//!
//! The hedging matrix pairs one option against `theta2` units of the
//! security. Its first row cancels the security noise and has the exact root
//! `theta2 = -n theta1 delta`; the second row demands
//! `m xi V theta1 f_V = 0`, for which the portfolio holds no instrument.
//! The residual of that row is therefore exposed rather than assumed away:
//! with `m > 0` and vega exposure it stays nonzero, and the empirical
//! delta-hedge experiment shows the corresponding residual variance.

use rayon::prelude::*;

use crate::closedform::{bumped_delta, generalized_bs_price, BsInputs, OptionKind};
use crate::error::Error;
use crate::grid::GridSpec;
use crate::model::{ModeIndex, PayoffKind, PayoffSpec, RiskNeutralParams};
use crate::pde::{self, PriceSurface, SolverConfig};
use crate::sde::{self, Dynamics, Scheme};
use crate::{fmt_sig, Real};

/// Self-replicating two-instrument portfolio: `theta1` options worth `f`
/// each, `theta2` securities worth `s` each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Portfolio<T> {
    pub theta1: T,
    pub theta2: T,
    pub f: T,
    pub s: T,
}

impl<T: Real> Portfolio<T> {
    /// Portfolio value `theta1 f + theta2 s`.
    pub fn value(&self) -> T {
        self.theta1 * self.f + self.theta2 * self.s
    }
}

/// Residuals of the two noise-elimination rows.
///
/// `res1 = sigma s (n theta1 delta + theta2)` — grouped so the root at
/// `theta2 = -n theta1 delta` cancels exactly in floating point.
/// `res2 = m xi v theta1 vega_v`, identically zero when `m = 0` or the
/// option carries no variance exposure.
#[allow(clippy::too_many_arguments)]
pub fn hedge_matrix_residual<T: Real>(
    p: &Portfolio<T>,
    delta: T,
    vega_v: T,
    sigma: T,
    xi: T,
    v: T,
    s: T,
    mode: ModeIndex,
) -> (T, T) {
    let nf = mode.n_as::<T>();
    let mf = mode.m_as::<T>();
    let res1 = sigma * s * (nf * p.theta1 * delta + p.theta2);
    let res2 = mf * xi * v * p.theta1 * vega_v;
    (res1, res2)
}

/// Discounted terminal P&L sample of a delta-hedging experiment.
#[derive(Debug, Clone)]
pub struct PnlDistribution<T> {
    /// Per-path discounted P&L.
    pub pnl: Vec<T>,
    pub rebalances: usize,
    pub seed: u64,
}

/// Summary statistics of a P&L sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnlSummary<T> {
    pub mean: T,
    pub std: T,
    /// Standard error of the mean.
    pub std_err: T,
    pub paths: usize,
    pub rebalances: usize,
}

impl<T: Real> PnlDistribution<T> {
    pub fn summary(&self) -> PnlSummary<T> {
        let n = T::of_usize(self.pnl.len());
        let mean = self.pnl.iter().copied().sum::<T>() / n;
        let var = if self.pnl.len() > 1 {
            self.pnl.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one())
        } else {
            T::zero()
        };
        let std = var.sqrt();
        PnlSummary {
            mean,
            std,
            std_err: std / n.sqrt(),
            paths: self.pnl.len(),
            rebalances: self.rebalances,
        }
    }

    /// Equal-width histogram over the sample range.
    pub fn histogram(&self, bins: usize) -> Vec<(T, T, u64)> {
        let bins = bins.max(1);
        let lo = self.pnl.iter().copied().fold(T::infinity(), T::min);
        let hi = self.pnl.iter().copied().fold(T::neg_infinity(), T::max);
        let width = ((hi - lo) / T::of_usize(bins)).max(T::of(1e-300));
        let mut counts = vec![0u64; bins];
        for &x in &self.pnl {
            let k = ((x - lo) / width).to_usize().unwrap_or(0).min(bins - 1);
            counts[k] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(k, c)| (lo + T::of_usize(k) * width, lo + T::of_usize(k + 1) * width, c))
            .collect()
    }

    /// CSV dump with columns `bin_low,bin_high,count`.
    pub fn write_histogram_csv<W: std::io::Write>(
        &self,
        bins: usize,
        w: &mut W,
    ) -> std::io::Result<()> {
        writeln!(w, "bin_low,bin_high,count")?;
        for (lo, hi, count) in self.histogram(bins) {
            writeln!(w, "{},{},{}", fmt_sig(lo), fmt_sig(hi), count)?;
        }
        Ok(())
    }
}

/// How option values and deltas are looked up along simulated paths.
enum Pricer<T> {
    /// Constant-variance closed form (exact at every time).
    ClosedForm { sigma: T, n: u32 },
    /// Numerical surfaces captured at each rebalance date.
    Surfaces { slices: Vec<PriceSurface<T>> },
}

impl<T: Real> Pricer<T> {
    fn price(&self, idx: usize, tau: T, s: T, v: T, payoff: &PayoffSpec<T>, r: T) -> Result<T, Error> {
        match self {
            Pricer::ClosedForm { sigma, n } => generalized_bs_price(
                &BsInputs {
                    s,
                    k: payoff.strike,
                    r,
                    sigma: *sigma,
                    tau,
                    kind: option_kind(payoff)?,
                },
                *n,
            ),
            Pricer::Surfaces { slices } => {
                let surf = &slices[idx];
                let g = &surf.grid;
                let s_q = s.max(g.s_min).min(g.s_max);
                let v_q = v.max(g.v_min).min(g.v_max);
                pde::price_at(surf, s_q, v_q)
            }
        }
    }

    fn delta(&self, idx: usize, tau: T, s: T, v: T, payoff: &PayoffSpec<T>, r: T) -> Result<T, Error> {
        match self {
            Pricer::ClosedForm { sigma, n } => {
                let kind = option_kind(payoff)?;
                bumped_delta(
                    |s_b| {
                        generalized_bs_price(
                            &BsInputs { s: s_b, k: payoff.strike, r, sigma: *sigma, tau, kind },
                            *n,
                        )
                    },
                    s,
                )
            }
            Pricer::Surfaces { slices } => {
                let surf = &slices[idx];
                let g = &surf.grid;
                let h = g.hs();
                let s_q = s.max(g.s_min + h).min(g.s_max - h);
                let v_q = v.max(g.v_min).min(g.v_max);
                let up = pde::price_at(surf, s_q + h, v_q)?;
                let down = pde::price_at(surf, s_q - h, v_q)?;
                Ok((up - down) / (T::of(2.0) * h))
            }
        }
    }
}

fn option_kind<T: Real>(payoff: &PayoffSpec<T>) -> Result<OptionKind, Error> {
    match payoff.kind {
        PayoffKind::Call => Ok(OptionKind::Call),
        PayoffKind::Put => Ok(OptionKind::Put),
        PayoffKind::CustomTabulated { .. } => Err(Error::Domain(
            "hedging experiment requires a call or put payoff".to_string(),
        )),
    }
}

/// Simulates short-one-option delta hedging: sell at the model price, hold
/// the centered-difference delta, rebalance at equal intervals, accrue cash
/// at `r`, and report the discounted terminal P&L distribution.
///
/// With `xi = 0` (constant variance) the option is priced in closed form;
/// otherwise a numerical surface is solved once and sampled at each
/// rebalance date.
pub fn simulate_hedged_pnl<T: Real>(
    rn: &RiskNeutralParams<T>,
    payoff: &PayoffSpec<T>,
    s0: T,
    rebalances: usize,
    paths: usize,
    seed: u64,
) -> Result<PnlDistribution<T>, Error> {
    if rebalances < 1 {
        return Err(Error::Domain(format!(
            "rebalances must be >= 1 (got {})",
            rebalances
        )));
    }
    option_kind(payoff)?;
    let maturity = payoff.maturity;
    let dt = maturity / T::of_usize(rebalances);

    let constant_variance = rn.xi == T::zero() && (rn.mu_bar == T::zero() || rn.mode.m == 0);
    let pricer = if constant_variance || rn.mode.n == 0 {
        Pricer::ClosedForm { sigma: rn.v0.sqrt(), n: rn.mode.n }
    } else {
        // Time steps aligned so every rebalance date has its own slice.
        let steps_per_rebalance = (200 + rebalances - 1) / rebalances;
        let n_t = rebalances * steps_per_rebalance;
        let grid = GridSpec::default_domain(payoff.strike, s0, rn.v0, 201, 51, n_t);
        // Rebalance i at t_i = i dt <=> slice index n_t - 1 - i * steps_per_rebalance.
        let capture: Vec<usize> = (0..rebalances)
            .map(|i| n_t - 1 - i * steps_per_rebalance)
            .collect();
        let (_, slices) =
            pde::solve_with_captures(rn, payoff, &grid, &SolverConfig::default(), &capture)?;
        Pricer::Surfaces { slices }
    };

    let dynamics = Dynamics::risk_neutral(rn);
    let pathset = sde::simulate(
        &dynamics,
        rn.mode,
        s0,
        paths,
        rebalances,
        dt,
        Scheme::LogEuler,
        seed,
    )?;

    let growth = (rn.r * dt).exp();
    let disc = (-rn.r * maturity).exp();
    let pnl = (0..paths)
        .into_par_iter()
        .map(|p| {
            let f0 = pricer.price(0, maturity, s0, rn.v0, payoff, rn.r)?;
            let mut delta = pricer.delta(0, maturity, s0, rn.v0, payoff, rn.r)?;
            let mut cash = f0 - delta * s0;
            for i in 1..rebalances {
                let tau = maturity - T::of_usize(i) * dt;
                let s_i = pathset.s(p, i);
                let v_i = pathset.v(p, i);
                cash = cash * growth;
                let new_delta = pricer.delta(i, tau, s_i, v_i, payoff, rn.r)?;
                cash = cash - (new_delta - delta) * s_i;
                delta = new_delta;
            }
            cash = cash * growth;
            let s_t = pathset.s(p, rebalances);
            let v_t = pathset.v(p, rebalances);
            let wealth = cash + delta * s_t - payoff.eval(s_t, v_t)?;
            Ok(disc * wealth)
        })
        .collect::<Result<Vec<T>, Error>>()?;
    Ok(PnlDistribution { pnl, rebalances, seed })
}
