//! Correlated Gaussian noise and discrete-time simulation of the coupled
//! lognormal dynamics, for any mode `(n, m)`.
//!
//! Determinism contract: every path draws from its own counter-derived
//! sub-stream keyed by `(seed, path index)`, so path `k` is bit-identical
//! whether the ensemble is computed serially or in parallel, and regardless
//! of how many paths are requested.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Error;
use crate::model::{ModeIndex, ModelParams, RiskNeutralParams};
use crate::{fmt_sig, Real};

/// Probability measure the drift coefficients belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    RealWorld,
    RiskNeutral,
}

/// Time-stepping scheme.
///
/// `LogEuler` (the default everywhere) advances `ln S` and `ln V` with the
/// Ito-corrected drift, so positivity holds structurally; plain `Euler`
/// advances levels and clamps negative excursions to zero, counting them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    LogEuler,
}

/// Drift/diffusion coefficient set for simulation, under either measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dynamics<T> {
    /// Security drift: `phi` (real-world) or `r` (risk-neutral).
    pub drift_s: T,
    /// Variance drift: `mu` (real-world) or `mu_bar` (risk-neutral).
    pub drift_v: T,
    pub v0: T,
    pub xi: T,
    pub rho: T,
    pub measure: Measure,
}

impl<T: Real> Dynamics<T> {
    /// Real-world dynamics from validated model parameters.
    pub fn real_world(params: &ModelParams<T>) -> Result<Self, Error> {
        let violations = crate::model::validate_params(params);
        if !violations.is_empty() {
            return Err(Error::InvalidParams(violations));
        }
        Ok(Self {
            drift_s: params.phi,
            drift_v: params.mu,
            v0: params.v0,
            xi: params.xi,
            rho: params.rho,
            measure: Measure::RealWorld,
        })
    }

    /// Risk-neutral dynamics: `phi -> r`, `mu -> mu_bar`.
    pub fn risk_neutral(rn: &RiskNeutralParams<T>) -> Self {
        Self {
            drift_s: rn.r,
            drift_v: rn.mu_bar,
            v0: rn.v0,
            xi: rn.xi,
            rho: rn.rho,
            measure: Measure::RiskNeutral,
        }
    }
}

/// Pre-generated correlated increments `(dW1, dW2)` with `Var = dt` per step
/// and cross-correlation `rho` by construction:
/// `q = rho * r + sqrt(1 - rho^2) * z` with `z` independent of `r`.
#[derive(Debug, Clone)]
pub struct NoiseMatrix<T> {
    /// Row-major `[paths x steps]` increments driving the security factor.
    pub r_increments: Vec<T>,
    /// Row-major `[paths x steps]` increments driving the variance factor.
    pub q_increments: Vec<T>,
    pub paths: usize,
    pub steps: usize,
    pub dt: T,
    pub rho: T,
    pub seed: u64,
}

fn check_noise_args<T: Real>(paths: usize, steps: usize, dt: T, rho: T) -> Result<(), Error> {
    if paths < 1 || steps < 1 {
        return Err(Error::Domain(format!(
            "paths and steps must be >= 1 (got {}, {})",
            paths, steps
        )));
    }
    if !(dt > T::zero()) {
        return Err(Error::Domain(format!("dt must be > 0 (got {})", dt)));
    }
    if !(rho.abs() <= T::one()) {
        return Err(Error::Domain(format!("|rho| must be <= 1 (got {})", rho)));
    }
    Ok(())
}

/// RNG sub-stream for one path: ChaCha keyed by the run seed with the path
/// index as the stream counter.
fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Per-step correlated draw, shared by every consumer so all of them see the
/// same increments for a given `(seed, path, step)`.
#[inline]
fn draw_increments<T: Real>(rng: &mut ChaCha8Rng, sqrt_dt: T, rho: T, ortho: T) -> (T, T) {
    let z1 = T::sample_standard_normal(rng);
    let z2 = T::sample_standard_normal(rng);
    let dw1 = sqrt_dt * z1;
    let dw2 = rho * dw1 + ortho * sqrt_dt * z2;
    (dw1, dw2)
}

/// Generates the `[paths x steps]` correlated increment pair.
pub fn gen_noise<T: Real>(
    paths: usize,
    steps: usize,
    dt: T,
    rho: T,
    seed: u64,
) -> Result<NoiseMatrix<T>, Error> {
    check_noise_args(paths, steps, dt, rho)?;
    let sqrt_dt = dt.sqrt();
    let ortho = (T::one() - rho * rho).sqrt();
    let mut r_increments = vec![T::zero(); paths * steps];
    let mut q_increments = vec![T::zero(); paths * steps];
    r_increments
        .par_chunks_mut(steps)
        .zip(q_increments.par_chunks_mut(steps))
        .enumerate()
        .for_each(|(p, (r_row, q_row))| {
            let mut rng = path_rng(seed, p);
            for k in 0..steps {
                let (dw1, dw2) = draw_increments(&mut rng, sqrt_dt, rho, ortho);
                r_row[k] = dw1;
                q_row[k] = dw2;
            }
        });
    Ok(NoiseMatrix {
        r_increments,
        q_increments,
        paths,
        steps,
        dt,
        rho,
        seed,
    })
}

/// Monte Carlo ensemble of discrete `(S, V)` trajectories.
///
/// Layout: `s[path * (steps + 1) + k]` is the security value of `path` after
/// `k` steps; likewise `v`. Immutable after construction.
#[derive(Debug, Clone)]
pub struct PathSet<T> {
    s: Vec<T>,
    v: Vec<T>,
    pub paths: usize,
    pub steps: usize,
    pub dt: T,
    pub measure: Measure,
    pub mode: ModeIndex,
    pub scheme: Scheme,
    pub seed: u64,
    /// Correlation the noise was generated with; kept so diagnostics can
    /// regenerate the exact increments.
    pub rho: T,
    /// Euler-scheme clamps of negative variance excursions.
    pub v_clamps: u64,
    /// Euler-scheme clamps of negative security excursions.
    pub s_clamps: u64,
}

impl<T: Real> PathSet<T> {
    /// Security value of `path` after `step` steps.
    pub fn s(&self, path: usize, step: usize) -> T {
        self.s[path * (self.steps + 1) + step]
    }

    /// Variance value of `path` after `step` steps.
    pub fn v(&self, path: usize, step: usize) -> T {
        self.v[path * (self.steps + 1) + step]
    }

    pub fn terminal_s(&self, path: usize) -> T {
        self.s(path, self.steps)
    }

    pub fn terminal_v(&self, path: usize) -> T {
        self.v(path, self.steps)
    }

    /// CSV dump with columns `path_id,step,t,S,V`.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "path_id,step,t,S,V")?;
        for p in 0..self.paths {
            for k in 0..=self.steps {
                let t = T::of_usize(k) * self.dt;
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    p,
                    k,
                    fmt_sig(t),
                    fmt_sig(self.s(p, k)),
                    fmt_sig(self.v(p, k))
                )?;
            }
        }
        Ok(())
    }
}

/// One step of the discrete dynamics; both schemes consume the same
/// increment pair.
struct StepCore<T> {
    nf: T,
    mf: T,
    drift_s: T,
    drift_v: T,
    xi: T,
    dt: T,
    scheme: Scheme,
    /// Log-scheme drift of `ln S` per unit variance is assembled per step;
    /// the `ln V` drift is state-independent and precomputed here.
    log_v_drift: T,
}

impl<T: Real> StepCore<T> {
    fn new(dynamics: &Dynamics<T>, mode: ModeIndex, dt: T, scheme: Scheme) -> Self {
        let nf = mode.n_as::<T>();
        let mf = mode.m_as::<T>();
        let half = T::of(0.5);
        Self {
            nf,
            mf,
            drift_s: dynamics.drift_s,
            drift_v: dynamics.drift_v,
            xi: dynamics.xi,
            dt,
            scheme,
            log_v_drift: (mf * dynamics.drift_v - half * mf * mf * dynamics.xi * dynamics.xi) * dt,
        }
    }

    #[inline]
    fn advance(&self, s: T, v: T, dw1: T, dw2: T, s_clamps: &mut u64, v_clamps: &mut u64) -> (T, T) {
        match self.scheme {
            Scheme::Euler => {
                let sigma = v.max(T::zero()).sqrt();
                let mut s_new = s + self.nf * (self.drift_s * s * self.dt + sigma * s * dw1);
                let mut v_new = v + self.mf * (self.drift_v * v * self.dt + self.xi * v * dw2);
                if v_new < T::zero() {
                    v_new = T::zero();
                    *v_clamps += 1;
                }
                if s_new < T::zero() {
                    s_new = T::zero();
                    *s_clamps += 1;
                }
                (s_new, v_new)
            }
            Scheme::LogEuler => {
                let half = T::of(0.5);
                let sigma = v.sqrt();
                let log_s_inc =
                    (self.nf * self.drift_s - half * self.nf * self.nf * v) * self.dt
                        + self.nf * sigma * dw1;
                let log_v_inc = self.log_v_drift + self.mf * self.xi * dw2;
                (s * log_s_inc.exp(), v * log_v_inc.exp())
            }
        }
    }
}

fn check_sim_args<T: Real>(dynamics: &Dynamics<T>, s0: T, dt: T) -> Result<(), Error> {
    if !(s0 > T::zero()) {
        return Err(Error::Domain(format!("s0 must be > 0 (got {})", s0)));
    }
    if !(dynamics.v0 > T::zero()) {
        return Err(Error::Domain(format!("v0 must be > 0 (got {})", dynamics.v0)));
    }
    if !(dt > T::zero()) {
        return Err(Error::Domain(format!("dt must be > 0 (got {})", dt)));
    }
    if !(dynamics.rho.abs() <= T::one()) {
        return Err(Error::Domain(format!("|rho| must be <= 1 (got {})", dynamics.rho)));
    }
    Ok(())
}

/// Simulates the full trajectory ensemble. The trajectories are stored
/// densely; for large ensembles where only terminal values matter, use
/// [`simulate_terminal`].
#[allow(clippy::too_many_arguments)]
pub fn simulate<T: Real>(
    dynamics: &Dynamics<T>,
    mode: ModeIndex,
    s0: T,
    paths: usize,
    steps: usize,
    dt: T,
    scheme: Scheme,
    seed: u64,
) -> Result<PathSet<T>, Error> {
    check_sim_args(dynamics, s0, dt)?;
    check_noise_args(paths, steps, dt, dynamics.rho)?;
    let core = StepCore::new(dynamics, mode, dt, scheme);
    let sqrt_dt = dt.sqrt();
    let rho = dynamics.rho;
    let ortho = (T::one() - rho * rho).sqrt();
    let cols = steps + 1;
    let mut s = vec![T::zero(); paths * cols];
    let mut v = vec![T::zero(); paths * cols];
    let (s_clamps, v_clamps) = s
        .par_chunks_mut(cols)
        .zip(v.par_chunks_mut(cols))
        .enumerate()
        .map(|(p, (s_row, v_row))| {
            let mut rng = path_rng(seed, p);
            let mut s_clamps = 0u64;
            let mut v_clamps = 0u64;
            s_row[0] = s0;
            v_row[0] = dynamics.v0;
            for k in 0..steps {
                let (dw1, dw2) = draw_increments(&mut rng, sqrt_dt, rho, ortho);
                let (s_new, v_new) =
                    core.advance(s_row[k], v_row[k], dw1, dw2, &mut s_clamps, &mut v_clamps);
                s_row[k + 1] = s_new;
                v_row[k + 1] = v_new;
            }
            (s_clamps, v_clamps)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(PathSet {
        s,
        v,
        paths,
        steps,
        dt,
        measure: dynamics.measure,
        mode,
        scheme,
        seed,
        rho,
        v_clamps,
        s_clamps,
    })
}

/// Terminal `(S_T, V_T)` pairs of the same ensemble [`simulate`] would
/// produce, without materializing trajectories.
#[derive(Debug, Clone)]
pub struct TerminalSet<T> {
    pub s: Vec<T>,
    pub v: Vec<T>,
    pub dt: T,
    pub steps: usize,
    pub seed: u64,
    pub v_clamps: u64,
    pub s_clamps: u64,
}

/// Simulates terminal values only; path `k` is bit-identical to path `k` of
/// [`simulate`] with the same arguments.
#[allow(clippy::too_many_arguments)]
pub fn simulate_terminal<T: Real>(
    dynamics: &Dynamics<T>,
    mode: ModeIndex,
    s0: T,
    paths: usize,
    steps: usize,
    dt: T,
    scheme: Scheme,
    seed: u64,
) -> Result<TerminalSet<T>, Error> {
    check_sim_args(dynamics, s0, dt)?;
    check_noise_args(paths, steps, dt, dynamics.rho)?;
    let core = StepCore::new(dynamics, mode, dt, scheme);
    let sqrt_dt = dt.sqrt();
    let rho = dynamics.rho;
    let ortho = (T::one() - rho * rho).sqrt();
    let results: Vec<(T, T, u64, u64)> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut s = s0;
            let mut v = dynamics.v0;
            let mut s_clamps = 0u64;
            let mut v_clamps = 0u64;
            for _ in 0..steps {
                let (dw1, dw2) = draw_increments(&mut rng, sqrt_dt, rho, ortho);
                let (s_new, v_new) = core.advance(s, v, dw1, dw2, &mut s_clamps, &mut v_clamps);
                s = s_new;
                v = v_new;
            }
            (s, v, s_clamps, v_clamps)
        })
        .collect();
    let mut s = Vec::with_capacity(paths);
    let mut v = Vec::with_capacity(paths);
    let mut s_clamps = 0;
    let mut v_clamps = 0;
    for (st, vt, sc, vc) in results {
        s.push(st);
        v.push(vt);
        s_clamps += sc;
        v_clamps += vc;
    }
    Ok(TerminalSet {
        s,
        v,
        dt,
        steps,
        seed,
        v_clamps,
        s_clamps,
    })
}

/// Terminal pairs for antithetic sampling: each path is evolved twice, once
/// with its increments and once with their negation. Returns
/// `((s, v), (s_anti, v_anti))` per path plus the total variance clamp count.
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
pub fn simulate_terminal_antithetic<T: Real>(
    dynamics: &Dynamics<T>,
    mode: ModeIndex,
    s0: T,
    paths: usize,
    steps: usize,
    dt: T,
    scheme: Scheme,
    seed: u64,
) -> Result<(Vec<((T, T), (T, T))>, u64), Error> {
    check_sim_args(dynamics, s0, dt)?;
    check_noise_args(paths, steps, dt, dynamics.rho)?;
    let core = StepCore::new(dynamics, mode, dt, scheme);
    let sqrt_dt = dt.sqrt();
    let rho = dynamics.rho;
    let ortho = (T::one() - rho * rho).sqrt();
    let results: Vec<(((T, T), (T, T)), u64)> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut a = (s0, dynamics.v0);
            let mut b = (s0, dynamics.v0);
            let mut s_clamps = 0u64;
            let mut v_clamps = 0u64;
            for _ in 0..steps {
                let (dw1, dw2) = draw_increments(&mut rng, sqrt_dt, rho, ortho);
                a = core.advance(a.0, a.1, dw1, dw2, &mut s_clamps, &mut v_clamps);
                b = core.advance(b.0, b.1, -dw1, -dw2, &mut s_clamps, &mut v_clamps);
            }
            ((a, b), v_clamps)
        })
        .collect();
    let mut out = Vec::with_capacity(paths);
    let mut clamps = 0;
    for (pair, c) in results {
        out.push(pair);
        clamps += c;
    }
    Ok((out, clamps))
}

/// Exact sample statistics of a path ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats<T> {
    pub mean_terminal_s: T,
    pub mean_terminal_v: T,
    pub var_terminal_s: T,
    pub var_terminal_v: T,
    /// Sample Pearson correlation of the driving increments, recomputed from
    /// the stored seed so it reflects exactly the draws the paths consumed.
    pub increment_correlation: T,
    pub v_clamps: u64,
    pub s_clamps: u64,
}

fn mean_and_var<T: Real>(xs: impl Iterator<Item = T> + Clone, n: usize) -> (T, T) {
    let nf = T::of_usize(n);
    let mean = xs.clone().sum::<T>() / nf;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<T>() / nf;
    (mean, var)
}

/// Pearson correlation of two equally long samples.
fn correlation<T: Real>(sums: (T, T, T, T, T), n: usize) -> T {
    let nf = T::of_usize(n);
    let (sx, sy, sxx, syy, sxy) = sums;
    let cov = sxy / nf - (sx / nf) * (sy / nf);
    let vx = sxx / nf - (sx / nf) * (sx / nf);
    let vy = syy / nf - (sy / nf) * (sy / nf);
    let denom = (vx * vy).sqrt();
    if denom == T::zero() {
        T::zero()
    } else {
        cov / denom
    }
}

/// Computes summary statistics for `pathset`. Deterministic: the increment
/// correlation is rebuilt from `(seed, rho, paths, steps)` rather than
/// estimated from the trajectories.
pub fn sample_stats<T: Real>(pathset: &PathSet<T>) -> SampleStats<T> {
    let (mean_terminal_s, var_terminal_s) = mean_and_var(
        (0..pathset.paths).map(|p| pathset.terminal_s(p)),
        pathset.paths,
    );
    let (mean_terminal_v, var_terminal_v) = mean_and_var(
        (0..pathset.paths).map(|p| pathset.terminal_v(p)),
        pathset.paths,
    );
    let sqrt_dt = pathset.dt.sqrt();
    let rho = pathset.rho;
    let ortho = (T::one() - rho * rho).sqrt();
    let sums = (0..pathset.paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(pathset.seed, p);
            let mut acc = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
            for _ in 0..pathset.steps {
                let (dw1, dw2) = draw_increments(&mut rng, sqrt_dt, rho, ortho);
                acc.0 += dw1;
                acc.1 += dw2;
                acc.2 += dw1 * dw1;
                acc.3 += dw2 * dw2;
                acc.4 += dw1 * dw2;
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((T::zero(), T::zero(), T::zero(), T::zero(), T::zero()), |a, b| {
            (a.0 + b.0, a.1 + b.1, a.2 + b.2, a.3 + b.3, a.4 + b.4)
        });
    SampleStats {
        mean_terminal_s,
        mean_terminal_v,
        var_terminal_s,
        var_terminal_v,
        increment_correlation: correlation(sums, pathset.paths * pathset.steps),
        v_clamps: pathset.v_clamps,
        s_clamps: pathset.s_clamps,
    }
}

impl<T: Real> NoiseMatrix<T> {
    /// Sample cross-correlation of the stored increment pair.
    pub fn sample_correlation(&self) -> T {
        let mut acc = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
        for (&x, &y) in self.r_increments.iter().zip(&self.q_increments) {
            acc.0 += x;
            acc.1 += y;
            acc.2 += x * x;
            acc.3 += y * y;
            acc.4 += x * y;
        }
        correlation(acc, self.r_increments.len())
    }

    /// Sample variance of the security-driving increments.
    pub fn sample_variance_r(&self) -> T {
        let (_, var) = mean_and_var(self.r_increments.iter().copied(), self.r_increments.len());
        var
    }

    /// Sample variance of the variance-driving increments.
    pub fn sample_variance_q(&self) -> T {
        let (_, var) = mean_and_var(self.q_increments.iter().copied(), self.q_increments.len());
        var
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModeIndex;
    use approx::assert_relative_eq;

    fn dynamics(xi: f64, rho: f64) -> Dynamics<f64> {
        Dynamics {
            drift_s: 0.05,
            drift_v: 0.0,
            v0: 0.04,
            xi,
            rho,
            measure: Measure::RiskNeutral,
        }
    }

    #[test]
    fn real_world_dynamics_validate_their_parameters() {
        let params = crate::model::ModelParams {
            phi: 0.1,
            mu: 0.15,
            v0: 0.04,
            xi: 0.3,
            rho: -0.5,
            r: 0.05,
            lambda2: 0.5,
            mu_bar: None,
        };
        let dynamics = Dynamics::real_world(&params).unwrap();
        assert_eq!(dynamics.drift_s, params.phi);
        assert_eq!(dynamics.drift_v, params.mu);
        assert_eq!(dynamics.measure, Measure::RealWorld);

        let bad = crate::model::ModelParams { rho: -2.0, ..params };
        assert!(matches!(
            Dynamics::real_world(&bad),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn gen_noise_rejects_bad_arguments() {
        assert!(gen_noise::<f64>(0, 10, 0.01, 0.0, 1).is_err());
        assert!(gen_noise::<f64>(10, 0, 0.01, 0.0, 1).is_err());
        assert!(gen_noise::<f64>(10, 10, 0.0, 0.0, 1).is_err());
        assert!(matches!(
            gen_noise::<f64>(10, 10, 0.01, 1.5, 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn perfect_correlation_duplicates_increments() {
        let nm = gen_noise::<f64>(100, 50, 0.01, 1.0, 42).unwrap();
        for (r, q) in nm.r_increments.iter().zip(&nm.q_increments) {
            assert_eq!(r, q);
        }
    }

    #[test]
    fn zero_correlation_within_confidence_band() {
        // 10^6 increments: estimator standard error 1/sqrt(N) = 1e-3.
        let nm = gen_noise::<f64>(1000, 1000, 0.01, 0.0, 42).unwrap();
        assert!(nm.sample_correlation().abs() < 3e-3);
    }

    #[test]
    fn target_correlation_recovered() {
        // SE = (1 - rho^2)/sqrt(N) = 5.1e-4 at rho = 0.7, N = 10^6.
        let nm = gen_noise::<f64>(1000, 1000, 0.01, 0.7, 42).unwrap();
        assert!((nm.sample_correlation() - 0.7).abs() < 3.0 * 5.1e-4);
    }

    #[test]
    fn increment_variance_converges_to_dt() {
        // Variance estimator SE is dt * sqrt(2/N).
        for (paths, steps) in [(100, 100), (1000, 1000)] {
            let n = (paths * steps) as f64;
            let nm = gen_noise::<f64>(paths, steps, 0.01, 0.3, 7).unwrap();
            let band = 4.0 * 0.01 * (2.0 / n).sqrt();
            assert!((nm.sample_variance_r() - 0.01).abs() < band);
            assert!((nm.sample_variance_q() - 0.01).abs() < band);
        }
    }

    #[test]
    fn noise_streams_do_not_depend_on_path_count() {
        let small = gen_noise::<f64>(4, 32, 0.01, 0.4, 11).unwrap();
        let large = gen_noise::<f64>(64, 32, 0.01, 0.4, 11).unwrap();
        for p in 0..4 {
            for k in 0..32 {
                assert_eq!(
                    small.r_increments[p * 32 + k],
                    large.r_increments[p * 32 + k]
                );
            }
        }
    }

    #[test]
    fn frozen_variance_dynamics() {
        // xi = 0, mu = 0: V stays at V0 under both schemes.
        for scheme in [Scheme::Euler, Scheme::LogEuler] {
            let ps = simulate(
                &dynamics(0.0, 0.0),
                ModeIndex::CLASSICAL,
                100.0,
                16,
                64,
                0.01,
                scheme,
                3,
            )
            .unwrap();
            for p in 0..16 {
                for k in 0..=64 {
                    assert_eq!(ps.v(p, k), 0.04, "scheme {:?}", scheme);
                }
            }
        }
    }

    #[test]
    fn ground_mode_paths_are_constant() {
        for scheme in [Scheme::Euler, Scheme::LogEuler] {
            let ps = simulate(
                &dynamics(0.3, -0.5),
                ModeIndex::GROUND,
                100.0,
                8,
                32,
                0.01,
                scheme,
                5,
            )
            .unwrap();
            for p in 0..8 {
                for k in 0..=32 {
                    assert_eq!(ps.s(p, k), 100.0);
                    assert_eq!(ps.v(p, k), 0.04);
                }
            }
            let stats = sample_stats(&ps);
            assert_eq!(stats.var_terminal_s, 0.0);
            assert_eq!(stats.var_terminal_v, 0.0);
        }
    }

    #[test]
    fn log_euler_paths_strictly_positive() {
        let ps = simulate(
            &Dynamics {
                drift_s: -0.3,
                drift_v: -0.5,
                v0: 0.04,
                xi: 1.5,
                rho: -0.9,
                measure: Measure::RealWorld,
            },
            ModeIndex::new(2, 3),
            100.0,
            64,
            256,
            0.02,
            Scheme::LogEuler,
            99,
        )
        .unwrap();
        for p in 0..64 {
            for k in 0..=256 {
                assert!(ps.s(p, k) > 0.0);
                assert!(ps.v(p, k) > 0.0);
            }
        }
        assert_eq!(ps.v_clamps, 0);
        assert_eq!(ps.s_clamps, 0);
    }

    #[test]
    fn euler_clamps_are_counted() {
        // Violent vol-of-vol forces negative euler excursions in V.
        let ps = simulate(
            &Dynamics {
                drift_s: 0.0,
                drift_v: 0.0,
                v0: 0.04,
                xi: 6.0,
                rho: 0.0,
                measure: Measure::RealWorld,
            },
            ModeIndex::CLASSICAL,
            100.0,
            256,
            64,
            0.05,
            Scheme::Euler,
            17,
        )
        .unwrap();
        assert!(ps.v_clamps > 0);
        for p in 0..256 {
            for k in 0..=64 {
                assert!(ps.v(p, k) >= 0.0);
            }
        }
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let dynamics = dynamics(0.3, -0.5);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    simulate(&dynamics, ModeIndex::CLASSICAL, 100.0, 64, 32, 0.01, Scheme::LogEuler, 77)
                        .unwrap()
                })
        };
        let serial = run(1);
        let parallel = run(4);
        for p in 0..64 {
            for k in 0..=32 {
                assert_eq!(serial.s(p, k).to_bits(), parallel.s(p, k).to_bits());
                assert_eq!(serial.v(p, k).to_bits(), parallel.v(p, k).to_bits());
            }
        }
    }

    #[test]
    fn terminal_matches_full_simulation() {
        let dynamics = dynamics(0.3, -0.5);
        let ps = simulate(&dynamics, ModeIndex::CLASSICAL, 100.0, 32, 64, 0.01, Scheme::LogEuler, 23)
            .unwrap();
        let ts = simulate_terminal(
            &dynamics,
            ModeIndex::CLASSICAL,
            100.0,
            32,
            64,
            0.01,
            Scheme::LogEuler,
            23,
        )
        .unwrap();
        for p in 0..32 {
            assert_eq!(ps.terminal_s(p), ts.s[p]);
            assert_eq!(ps.terminal_v(p), ts.v[p]);
        }
    }

    #[test]
    fn mode_scaling_matches_rescaled_parameters() {
        // With xi = 0, mode (n, 0) equals mode (1, 0) run with (n*phi, n*sigma).
        let n = 3u32;
        let nf = n as f64;
        let base = Dynamics {
            drift_s: 0.07,
            drift_v: 0.0,
            v0: 0.04,
            xi: 0.0,
            rho: 0.0,
            measure: Measure::RealWorld,
        };
        let rescaled = Dynamics {
            drift_s: nf * 0.07,
            v0: nf * nf * 0.04,
            ..base
        };
        for scheme in [Scheme::Euler, Scheme::LogEuler] {
            let hi = simulate(&base, ModeIndex::new(n, 0), 100.0, 16, 128, 0.005, scheme, 31).unwrap();
            let lo =
                simulate(&rescaled, ModeIndex::new(1, 0), 100.0, 16, 128, 0.005, scheme, 31).unwrap();
            for p in 0..16 {
                assert_relative_eq!(
                    hi.terminal_s(p),
                    lo.terminal_s(p),
                    max_relative = 1e-11
                );
            }
        }
    }

    #[test]
    fn sample_stats_reports_generator_correlation() {
        let ps = simulate(&dynamics(0.3, 0.7), ModeIndex::CLASSICAL, 100.0, 1000, 1000, 0.001, Scheme::LogEuler, 42)
            .unwrap();
        let stats = sample_stats(&ps);
        assert!((stats.increment_correlation - 0.7).abs() < 3.0 * 5.1e-4);

        let ps0 = simulate(&dynamics(0.3, 0.0), ModeIndex::CLASSICAL, 100.0, 500, 500, 0.001, Scheme::LogEuler, 42)
            .unwrap();
        assert!(sample_stats(&ps0).increment_correlation.abs() < 3.0 / 500.0);
    }

    #[test]
    fn csv_export_schema() {
        let ps = simulate(&dynamics(0.0, 0.0), ModeIndex::CLASSICAL, 100.0, 2, 2, 0.5, Scheme::LogEuler, 1)
            .unwrap();
        let mut buf = Vec::new();
        ps.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "path_id,step,t,S,V");
        assert_eq!(text.lines().count(), 1 + 2 * 3);
        assert!(text.lines().nth(1).unwrap().starts_with("0,0,0.0"));
    }

    #[test]
    fn martingale_mean_of_discounted_terminal_price() {
        // Under the risk-neutral measure the log-euler update has exact mean
        // S0 * exp(r T); the discounted sample mean must sit within 3 SE.
        let rn = dynamics(0.3, -0.5);
        let steps = 50;
        let dt = 0.02;
        let t = steps as f64 * dt;
        let ts = simulate_terminal(&rn, ModeIndex::CLASSICAL, 100.0, 100_000, steps, dt, Scheme::LogEuler, 4242)
            .unwrap();
        let disc = (-rn.drift_s * t).exp();
        let discounted: Vec<f64> = ts.s.iter().map(|s| disc * s).collect();
        let n = discounted.len() as f64;
        let mean = discounted.iter().sum::<f64>() / n;
        let var = discounted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!(
            (mean - 100.0).abs() < 3.0 * se,
            "martingale violated: mean {} se {}",
            mean,
            se
        );
    }
}
