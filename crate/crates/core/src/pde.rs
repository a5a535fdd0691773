//! Backward-in-time finite-difference solution of the mode-indexed pricing
//! equation on the `(S, V)` grid.
//!
//! Time stepping is Douglas splitting: an explicit predictor with the full
//! operator (mixed derivative included), followed by implicit one-dimensional
//! corrections in `S` then `V`, each a tridiagonal solve. The discounting
//! term `-r f` is split evenly between the two one-dimensional operators.
//! The first `rannacher_steps` steps run fully implicit (`theta = 1`) to damp
//! payoff-kink oscillations.
//!
//! Boundary conditions:
//! - `S = s_min` / `S = s_max`: Dirichlet with the discounted intrinsic on
//!   the mode-`n` forward, `max(+-(S e^((n-1) r tau) - K e^(-r tau)), 0)`;
//!   at `n = 1` these are the usual `0` / `S - K e^(-r tau)` call values and
//!   their put mirrors. Tabulated payoffs pin the discounted terminal value.
//! - `V = v_min`: the degenerate equation row, one-sided first difference in
//!   `V` (every variance-sector coefficient vanishes at `V = 0`).
//! - `V = v_max`: zero Neumann in `V`, folded into the stencil at second
//!   order.

use rayon::prelude::*;

use crate::closedform::{generalized_bs_price, BsInputs, OptionKind};
use crate::error::Error;
use crate::grid::GridSpec;
use crate::model::{ModeIndex, PayoffKind, PayoffSpec, RiskNeutralParams};
use crate::operator::{build_generator, GeneratorStencil};
use crate::tridiag;
use crate::{fmt_sig, Real};

/// Option values on the grid at one time slice.
#[derive(Debug, Clone)]
pub struct PriceSurface<T> {
    /// Node values, `i`-major (see [`GridSpec::idx`]).
    pub values: Vec<T>,
    pub grid: GridSpec<T>,
    /// Calendar time of the slice.
    pub t: T,
    pub mode: ModeIndex,
}

impl<T: Real> PriceSurface<T> {
    /// CSV dump with columns `i,j,S,V,f`.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "i,j,S,V,f")?;
        for i in 0..self.grid.n_s {
            for j in 0..self.grid.n_v {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    i,
                    j,
                    fmt_sig(self.grid.s(i)),
                    fmt_sig(self.grid.v(j)),
                    fmt_sig(self.values[self.grid.idx(i, j)])
                )?;
            }
        }
        Ok(())
    }
}

/// Splitting configuration: implicitness weight and fully implicit startup
/// step count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    /// Implicitness of the one-dimensional corrections, in `[0, 1]`.
    pub theta: T,
    /// Leading fully implicit smoothing steps.
    pub rannacher_steps: usize,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            theta: T::of(0.5),
            rannacher_steps: 2,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    fn validate(&self) -> Result<(), Error> {
        if !(self.theta >= T::zero() && self.theta <= T::one()) {
            return Err(Error::Domain(format!(
                "theta must lie in [0, 1] (got {})",
                self.theta
            )));
        }
        Ok(())
    }
}

/// Dirichlet values on the two `S` boundaries at time-to-maturity `tau`.
struct SBoundary<'a, T> {
    payoff: &'a PayoffSpec<T>,
    rn_r: T,
    nf: T,
    grid: GridSpec<T>,
}

impl<T: Real> SBoundary<'_, T> {
    /// Value at `(s_edge, v_j)` for time-to-maturity `tau`.
    fn value(&self, s_edge: T, v: T, tau: T) -> T {
        let disc = (-self.rn_r * tau).exp();
        match &self.payoff.kind {
            PayoffKind::Call => {
                let growth = ((self.nf - T::one()) * self.rn_r * tau).exp();
                (s_edge * growth - self.payoff.strike * disc).max(T::zero())
            }
            PayoffKind::Put => {
                let growth = ((self.nf - T::one()) * self.rn_r * tau).exp();
                (self.payoff.strike * disc - s_edge * growth).max(T::zero())
            }
            PayoffKind::CustomTabulated { .. } => {
                disc * self.payoff.eval(s_edge, v).unwrap_or(T::zero())
            }
        }
    }

    fn apply(&self, values: &mut [T], tau: T) {
        let g = &self.grid;
        for j in 0..g.n_v {
            let v = g.v(j);
            values[g.idx(0, j)] = self.value(g.s_min, v, tau);
            values[g.idx(g.n_s - 1, j)] = self.value(g.s_max, v, tau);
        }
    }
}

/// Tridiagonal coefficients of the one-dimensional operators, per node.
///
/// `A1` acts along `S` (rows `j = 0 .. n_v-1`, Dirichlet ends excluded) and
/// carries `conv_s`, `diff_ss` and half the discounting; `A2` acts along `V`
/// (all rows are unknowns; degenerate at `v_min`, Neumann-folded at `v_max`)
/// and carries `conv_v`, `diff_vv` and the other half. Nodes where a
/// diffusion coefficient vanishes while its convection survives fall back to
/// one-sided (upwinded) first differences to stay monotone.
struct SplitOperators<T> {
    a1_lo: Vec<T>,
    a1_di: Vec<T>,
    a1_up: Vec<T>,
    a2_lo: Vec<T>,
    a2_di: Vec<T>,
    a2_up: Vec<T>,
}

fn split_operators<T: Real>(gen: &GeneratorStencil<T>, r: T) -> SplitOperators<T> {
    let g = &gen.grid;
    let hs = g.hs();
    let hv = g.hv();
    let half = T::of(0.5);
    let two = T::of(2.0);
    let half_r = half * r;
    let n_nodes = g.n_nodes();
    let mut op = SplitOperators {
        a1_lo: vec![T::zero(); n_nodes],
        a1_di: vec![T::zero(); n_nodes],
        a1_up: vec![T::zero(); n_nodes],
        a2_lo: vec![T::zero(); n_nodes],
        a2_di: vec![T::zero(); n_nodes],
        a2_up: vec![T::zero(); n_nodes],
    };
    for i in 1..g.n_s - 1 {
        for j in 0..g.n_v {
            let p = g.idx(i, j);
            let d = gen.diff_ss[p];
            let c = gen.conv_s[p];
            if d == T::zero() && c != T::zero() {
                // Degenerate row (V = 0): pure transport, one-sided.
                if c > T::zero() {
                    op.a1_di[p] = -c / hs;
                    op.a1_up[p] = c / hs;
                } else {
                    op.a1_lo[p] = -c / hs;
                    op.a1_di[p] = c / hs;
                }
            } else {
                op.a1_lo[p] = d / (hs * hs) - c / (two * hs);
                op.a1_di[p] = -two * d / (hs * hs);
                op.a1_up[p] = d / (hs * hs) + c / (two * hs);
            }
            op.a1_di[p] = op.a1_di[p] - half_r;

            let d = gen.diff_vv[p];
            let c = gen.conv_v[p];
            if j == 0 {
                // Degenerate boundary row: one-sided first difference, zero
                // curvature ghost for the (vanishing at V = 0) second
                // derivative.
                op.a2_di[p] = -c / hv - half_r;
                op.a2_up[p] = c / hv;
            } else if j == g.n_v - 1 {
                // Zero Neumann via the second-order ghost u[n_v] = u[n_v-2]:
                // the first derivative drops, the curvature folds into lower.
                op.a2_lo[p] = two * d / (hv * hv);
                op.a2_di[p] = -two * d / (hv * hv) - half_r;
            } else if d == T::zero() && c != T::zero() {
                if c > T::zero() {
                    op.a2_di[p] = -c / hv - half_r;
                    op.a2_up[p] = c / hv;
                } else {
                    op.a2_lo[p] = -c / hv;
                    op.a2_di[p] = c / hv - half_r;
                }
            } else {
                op.a2_lo[p] = d / (hv * hv) - c / (two * hv);
                op.a2_di[p] = -two * d / (hv * hv) - half_r;
                op.a2_up[p] = d / (hv * hv) + c / (two * hv);
            }
        }
    }
    op
}

/// Applies the one-dimensional operators to `u` at every unknown node.
fn apply_split<T: Real>(
    op: &SplitOperators<T>,
    g: &GridSpec<T>,
    u: &[T],
    a1u: &mut [T],
    a2u: &mut [T],
) {
    for i in 1..g.n_s - 1 {
        for j in 0..g.n_v {
            let p = g.idx(i, j);
            a1u[p] = op.a1_lo[p] * u[g.idx(i - 1, j)]
                + op.a1_di[p] * u[p]
                + op.a1_up[p] * u[g.idx(i + 1, j)];
            let lo = if j > 0 { u[g.idx(i, j - 1)] } else { T::zero() };
            let up = if j + 1 < g.n_v { u[g.idx(i, j + 1)] } else { T::zero() };
            a2u[p] = op.a2_lo[p] * lo + op.a2_di[p] * u[p] + op.a2_up[p] * up;
        }
    }
}

/// Explicit mixed-derivative term `diff_sv * f_SV` at the unknown nodes.
/// Sign-adapted seven-point stencils (diagonal pairs for positive
/// coefficients, anti-diagonal for negative) keep the off-axis weights
/// aligned with the correlation direction. One-sided in `V` on the
/// degenerate row; zero on the Neumann row, where `f_V = 0`.
fn apply_mixed<T: Real>(gen: &GeneratorStencil<T>, u: &[T], a0u: &mut [T]) {
    let g = &gen.grid;
    let hs = g.hs();
    let hv = g.hv();
    let two = T::of(2.0);
    for i in 1..g.n_s - 1 {
        for j in 0..g.n_v {
            let p = g.idx(i, j);
            let coeff = gen.diff_sv[p];
            if coeff == T::zero() || j == g.n_v - 1 {
                a0u[p] = T::zero();
            } else if j == 0 {
                let fs_up = (u[g.idx(i + 1, 1)] - u[g.idx(i - 1, 1)]) / (two * hs);
                let fs_lo = (u[g.idx(i + 1, 0)] - u[g.idx(i - 1, 0)]) / (two * hs);
                a0u[p] = coeff * (fs_up - fs_lo) / hv;
            } else if coeff > T::zero() {
                a0u[p] = coeff
                    * (u[g.idx(i + 1, j + 1)] + u[g.idx(i - 1, j - 1)] + two * u[p]
                        - u[g.idx(i + 1, j)]
                        - u[g.idx(i - 1, j)]
                        - u[g.idx(i, j + 1)]
                        - u[g.idx(i, j - 1)])
                    / (two * hs * hv);
            } else {
                a0u[p] = coeff
                    * (u[g.idx(i + 1, j)] + u[g.idx(i - 1, j)] + u[g.idx(i, j + 1)]
                        + u[g.idx(i, j - 1)]
                        - u[g.idx(i + 1, j - 1)]
                        - u[g.idx(i - 1, j + 1)]
                        - two * u[p])
                    / (two * hs * hv);
            }
        }
    }
}

fn validate_inputs<T: Real>(
    rn: &RiskNeutralParams<T>,
    payoff: &PayoffSpec<T>,
    grid: &GridSpec<T>,
    cfg: &SolverConfig<T>,
) -> Result<(), Error> {
    let mut violations = grid.validate();
    violations.extend(payoff.validate());
    if !(rn.rho.abs() <= T::one()) {
        violations.push(crate::Violation::new(
            "rho",
            format!("must lie in [-1, 1] (got {})", rn.rho),
        ));
    }
    if !(rn.xi >= T::zero()) {
        violations.push(crate::Violation::new("xi", format!("must be >= 0 (got {})", rn.xi)));
    }
    if !violations.is_empty() {
        return Err(Error::InvalidParams(violations));
    }
    cfg.validate()
}

/// Solves the backward equation to `t = 0`.
pub fn solve<T: Real>(
    rn: &RiskNeutralParams<T>,
    payoff: &PayoffSpec<T>,
    grid: &GridSpec<T>,
    cfg: &SolverConfig<T>,
) -> Result<PriceSurface<T>, Error> {
    Ok(solve_with_captures(rn, payoff, grid, cfg, &[])?.0)
}

/// Solves the backward equation, additionally returning the slices reached
/// after the listed step indices (step `k` lives at calendar time
/// `T - (k + 1) dt`). Indices must be `< n_t`; the list need not be sorted.
pub fn solve_with_captures<T: Real>(
    rn: &RiskNeutralParams<T>,
    payoff: &PayoffSpec<T>,
    grid: &GridSpec<T>,
    cfg: &SolverConfig<T>,
    capture_steps: &[usize],
) -> Result<(PriceSurface<T>, Vec<PriceSurface<T>>), Error> {
    validate_inputs(rn, payoff, grid, cfg)?;
    if let Some(&bad) = capture_steps.iter().find(|&&k| k >= grid.n_t) {
        return Err(Error::Range(format!(
            "capture step {} beyond the {} time steps",
            bad, grid.n_t
        )));
    }
    let maturity = payoff.maturity;
    let dt = maturity / T::of_usize(grid.n_t);
    let mode = rn.mode;

    // Terminal slice.
    let mut u = vec![T::zero(); grid.n_nodes()];
    for i in 0..grid.n_s {
        for j in 0..grid.n_v {
            u[grid.idx(i, j)] = payoff.eval(grid.s(i), grid.v(j))?;
        }
    }

    let mut captures: Vec<Option<PriceSurface<T>>> = vec![None; capture_steps.len()];
    let mut capture = |step: usize, u: &[T]| {
        for (slot, &want) in captures.iter_mut().zip(capture_steps) {
            if want == step {
                *slot = Some(PriceSurface {
                    values: u.to_vec(),
                    grid: *grid,
                    t: maturity - T::of_usize(step + 1) * dt,
                    mode,
                });
            }
        }
    };

    if mode == ModeIndex::GROUND {
        // The ground-state equation is an ODE in t; step the exact
        // exponential factor so discounting carries no scheme error.
        let factor = (-rn.r * dt).exp();
        for step in 0..grid.n_t {
            for x in u.iter_mut() {
                *x *= factor;
            }
            capture(step, &u);
        }
        let surface = PriceSurface { values: u, grid: *grid, t: T::zero(), mode };
        let captured = captures.into_iter().map(|c| c.expect("capture hit")).collect();
        return Ok((surface, captured));
    }

    let gen = build_generator(rn, grid)?;
    let op = split_operators(&gen, rn.r);
    let boundary = SBoundary {
        payoff,
        rn_r: rn.r,
        nf: mode.n_as::<T>(),
        grid: *grid,
    };

    let n_nodes = grid.n_nodes();
    let mut a1u = vec![T::zero(); n_nodes];
    let mut a2u = vec![T::zero(); n_nodes];
    let mut a0u = vec![T::zero(); n_nodes];
    let mut y0 = vec![T::zero(); n_nodes];

    let g = *grid;
    let m_s = g.n_s - 2; // unknowns per S-line

    for step in 0..grid.n_t {
        let tau_new = T::of_usize(step + 1) * dt;
        let theta = if step < cfg.rannacher_steps { T::one() } else { cfg.theta };
        let theta_dt = theta * dt;

        apply_split(&op, &g, &u, &mut a1u, &mut a2u);
        apply_mixed(&gen, &u, &mut a0u);

        // Explicit predictor with the full operator.
        y0.copy_from_slice(&u);
        for i in 1..g.n_s - 1 {
            for j in 0..g.n_v {
                let p = g.idx(i, j);
                y0[p] = u[p] + dt * (a1u[p] + a2u[p] + a0u[p]);
            }
        }
        boundary.apply(&mut y0, tau_new);

        // Implicit correction along S, one tridiagonal system per V-row.
        let s_lines: Vec<Vec<T>> = (0..g.n_v)
            .into_par_iter()
            .map(|j| {
                let mut lo = vec![T::zero(); m_s];
                let mut di = vec![T::zero(); m_s];
                let mut up = vec![T::zero(); m_s];
                let mut rhs = vec![T::zero(); m_s];
                let mut scratch = vec![T::zero(); m_s];
                for k in 0..m_s {
                    let p = g.idx(k + 1, j);
                    lo[k] = -theta_dt * op.a1_lo[p];
                    di[k] = T::one() - theta_dt * op.a1_di[p];
                    up[k] = -theta_dt * op.a1_up[p];
                    rhs[k] = y0[p] - theta_dt * a1u[p];
                }
                rhs[0] = rhs[0] - lo[0] * y0[g.idx(0, j)];
                rhs[m_s - 1] = rhs[m_s - 1] - up[m_s - 1] * y0[g.idx(g.n_s - 1, j)];
                tridiag::solve_in_place(&lo, &di, &up, &mut rhs, &mut scratch);
                rhs
            })
            .collect();
        let mut y1 = y0.clone();
        for (j, line) in s_lines.iter().enumerate() {
            for (k, &val) in line.iter().enumerate() {
                y1[g.idx(k + 1, j)] = val;
            }
        }

        // Implicit correction along V, one tridiagonal system per interior
        // S-column; boundary rows are unknowns (degenerate / Neumann).
        let v_lines: Vec<Vec<T>> = (1..g.n_s - 1)
            .into_par_iter()
            .map(|i| {
                let n_v = g.n_v;
                let mut lo = vec![T::zero(); n_v];
                let mut di = vec![T::zero(); n_v];
                let mut up = vec![T::zero(); n_v];
                let mut rhs = vec![T::zero(); n_v];
                let mut scratch = vec![T::zero(); n_v];
                for j in 0..n_v {
                    let p = g.idx(i, j);
                    lo[j] = -theta_dt * op.a2_lo[p];
                    di[j] = T::one() - theta_dt * op.a2_di[p];
                    up[j] = -theta_dt * op.a2_up[p];
                    rhs[j] = y1[p] - theta_dt * a2u[p];
                }
                tridiag::solve_in_place(&lo, &di, &up, &mut rhs, &mut scratch);
                rhs
            })
            .collect();
        for (off, line) in v_lines.iter().enumerate() {
            let i = off + 1;
            for (j, &val) in line.iter().enumerate() {
                u[g.idx(i, j)] = val;
            }
        }
        boundary.apply(&mut u, tau_new);

        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                step,
                context: format!("mode {} solve on {}x{} grid", mode, g.n_s, g.n_v),
            });
        }
        capture(step, &u);
    }

    let surface = PriceSurface { values: u, grid: g, t: T::zero(), mode };
    let captured = captures.into_iter().map(|c| c.expect("capture hit")).collect();
    Ok((surface, captured))
}

/// Bilinear interpolation of the surface at `(s0, v0)`.
pub fn price_at<T: Real>(surface: &PriceSurface<T>, s0: T, v0: T) -> Result<T, Error> {
    let g = &surface.grid;
    let (i, j, ws, wv) = g.locate(s0, v0).ok_or_else(|| {
        Error::Range(format!(
            "query ({}, {}) outside grid [{}, {}] x [{}, {}]",
            s0, v0, g.s_min, g.s_max, g.v_min, g.v_max
        ))
    })?;
    let one = T::one();
    let f00 = surface.values[g.idx(i, j)];
    let f10 = surface.values[g.idx(i + 1, j)];
    let f01 = surface.values[g.idx(i, j + 1)];
    let f11 = surface.values[g.idx(i + 1, j + 1)];
    Ok((one - ws) * (one - wv) * f00
        + ws * (one - wv) * f10
        + (one - ws) * wv * f01
        + ws * wv * f11)
}

/// One level of a grid-refinement study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow<T> {
    pub level: usize,
    pub h_s: T,
    pub h_v: T,
    pub dt: T,
    pub price: T,
    /// Absolute error against the closed-form oracle when one exists,
    /// otherwise the Richardson estimate against the finest level.
    pub error: T,
    /// `log2` of the previous level's error over this one; `None` on the
    /// first row.
    pub observed_order: Option<T>,
}

/// Writes the study as CSV with columns `level,h_s,h_v,dt,price,error,order`.
pub fn write_convergence_csv<T: Real, W: std::io::Write>(
    rows: &[ConvergenceRow<T>],
    w: &mut W,
) -> std::io::Result<()> {
    writeln!(w, "level,h_s,h_v,dt,price,error,order")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            row.level,
            fmt_sig(row.h_s),
            fmt_sig(row.h_v),
            fmt_sig(row.dt),
            fmt_sig(row.price),
            fmt_sig(row.error),
            row.observed_order.map(fmt_sig).unwrap_or_default()
        )?;
    }
    Ok(())
}

/// Closed-form value of the configuration when one exists: any `call`/`put`
/// with `n = 0`, or constant variance (`xi = 0` with `mu_bar = 0` or
/// `m = 0`).
pub fn closed_form_oracle<T: Real>(
    rn: &RiskNeutralParams<T>,
    payoff: &PayoffSpec<T>,
    s0: T,
) -> Option<T> {
    let kind = match payoff.kind {
        PayoffKind::Call => OptionKind::Call,
        PayoffKind::Put => OptionKind::Put,
        PayoffKind::CustomTabulated { .. } => return None,
    };
    let constant_variance =
        rn.xi == T::zero() && (rn.mu_bar == T::zero() || rn.mode.m == 0);
    if rn.mode.n != 0 && !constant_variance {
        return None;
    }
    generalized_bs_price(
        &BsInputs {
            s: s0,
            k: payoff.strike,
            r: rn.r,
            sigma: rn.v0.max(T::zero()).sqrt(),
            tau: payoff.maturity,
            kind,
        },
        rn.mode.n,
    )
    .ok()
}

/// Repeats the solve over `levels` grids, halving every spacing and the time
/// step between levels, and reports the price at `(s0, rn.v0)` with its
/// error and the observed order.
pub fn convergence_study<T: Real>(
    rn: &RiskNeutralParams<T>,
    payoff: &PayoffSpec<T>,
    base_grid: &GridSpec<T>,
    levels: usize,
    cfg: &SolverConfig<T>,
    s0: T,
) -> Result<Vec<ConvergenceRow<T>>, Error> {
    if levels < 2 {
        return Err(Error::Domain(format!("levels must be >= 2 (got {})", levels)));
    }
    let mut prices = Vec::with_capacity(levels);
    let mut grids = Vec::with_capacity(levels);
    for level in 0..levels {
        let grid = base_grid.refined(level as u32);
        let surface = solve(rn, payoff, &grid, cfg).map_err(|e| match e {
            Error::NonFinite { step, context } => Error::NonFinite {
                step,
                context: format!("level {}: {}", level, context),
            },
            other => other,
        })?;
        prices.push(price_at(&surface, s0, rn.v0)?);
        grids.push(grid);
    }
    let oracle = closed_form_oracle(rn, payoff, s0);
    let errors: Vec<T> = match oracle {
        Some(truth) => prices.iter().map(|&p| (p - truth).abs()).collect(),
        None => {
            // Richardson against the finest level; the finest row gets the
            // standard order-2 remainder estimate.
            let finest = prices[levels - 1];
            let mut e: Vec<T> = prices.iter().map(|&p| (p - finest).abs()).collect();
            e[levels - 1] = (prices[levels - 1] - prices[levels - 2]).abs() / T::of(3.0);
            e
        }
    };
    let mut rows = Vec::with_capacity(levels);
    for level in 0..levels {
        let grid = &grids[level];
        let observed_order = if level == 0 {
            None
        } else if errors[level] > T::zero() && errors[level - 1] > T::zero() {
            Some((errors[level - 1] / errors[level]).log2())
        } else {
            None
        };
        rows.push(ConvergenceRow {
            level,
            h_s: grid.hs(),
            h_v: grid.hv(),
            dt: payoff.maturity / T::of_usize(grid.n_t),
            price: prices[level],
            error: errors[level],
            observed_order,
        });
    }
    Ok(rows)
}
