//! The mode-indexed spatial generator on a grid, and pointwise residual
//! evaluation of the pricing equation.
//!
//! For mode `(n, m)` with risk-neutral coefficients the generator applied to
//! `f(t, S, V)` reads
//!
//! ```text
//! df/dt + n r S f_S + m mu_bar V f_V
//!       + (n^2/2) V S^2 f_SS + (m^2/2) xi^2 V^2 f_VV
//!       + n m rho xi S V^(3/2) f_SV  - r f = 0
//! ```
//!
//! The cross coefficient stores `V^(3/2)` rather than `sigma^3` (identical
//! since `V = sigma^2`), with `V` clamped at zero so round-off below the
//! variance axis cannot enter a square root. At `(n, m) = (1, 1)` this is
//! exactly the classical two-factor equation; at `(0, 0)` every spatial
//! coefficient vanishes and only the discounting term `-r` survives.

use crate::error::Error;
use crate::grid::GridSpec;
use crate::model::{ModeIndex, RiskNeutralParams};
use crate::pde::PriceSurface;
use crate::{fmt_sig, Real};

/// Per-node coefficients of the discretized spatial operator.
///
/// Frozen per grid: the coefficients are time-independent, so one stencil
/// serves a whole backward solve.
#[derive(Debug, Clone)]
pub struct GeneratorStencil<T> {
    pub grid: GridSpec<T>,
    /// Coefficient of `f_S`: `n r S`.
    pub conv_s: Vec<T>,
    /// Coefficient of `f_V`: `m mu_bar V`.
    pub conv_v: Vec<T>,
    /// Coefficient of `f_SS`: `n^2 V S^2 / 2`.
    pub diff_ss: Vec<T>,
    /// Coefficient of `f_VV`: `m^2 xi^2 V^2 / 2`.
    pub diff_vv: Vec<T>,
    /// Coefficient of `f_SV`: `n m rho xi S V^(3/2)`.
    pub diff_sv: Vec<T>,
    /// Zeroth-order term `-r`.
    pub zeroth: T,
    pub mode: ModeIndex,
}

/// Evaluates the generator coefficients at every grid node.
pub fn build_generator<T: Real>(
    rn: &RiskNeutralParams<T>,
    grid: &GridSpec<T>,
) -> Result<GeneratorStencil<T>, Error> {
    let violations = grid.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidParams(violations));
    }
    let nf = rn.mode.n_as::<T>();
    let mf = rn.mode.m_as::<T>();
    let half = T::of(0.5);
    let n_nodes = grid.n_nodes();
    let mut conv_s = vec![T::zero(); n_nodes];
    let mut conv_v = vec![T::zero(); n_nodes];
    let mut diff_ss = vec![T::zero(); n_nodes];
    let mut diff_vv = vec![T::zero(); n_nodes];
    let mut diff_sv = vec![T::zero(); n_nodes];
    for i in 0..grid.n_s {
        let s = grid.s(i);
        for j in 0..grid.n_v {
            let v = grid.v(j).max(T::zero());
            let p = grid.idx(i, j);
            conv_s[p] = nf * rn.r * s;
            conv_v[p] = mf * rn.mu_bar * v;
            diff_ss[p] = half * nf * nf * v * s * s;
            diff_vv[p] = half * mf * mf * rn.xi * rn.xi * v * v;
            diff_sv[p] = nf * mf * rn.rho * rn.xi * s * v * v.sqrt();
        }
    }
    Ok(GeneratorStencil {
        grid: *grid,
        conv_s,
        conv_v,
        diff_ss,
        diff_vv,
        diff_sv,
        zeroth: -rn.r,
        mode: rn.mode,
    })
}

impl<T: Real> GeneratorStencil<T> {
    /// CSV dump for inspection: node indices, coordinates, and the five
    /// coefficient columns.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "i,j,S,V,conv_s,conv_v,diff_ss,diff_vv,diff_sv")?;
        for i in 0..self.grid.n_s {
            for j in 0..self.grid.n_v {
                let p = self.grid.idx(i, j);
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    i,
                    j,
                    fmt_sig(self.grid.s(i)),
                    fmt_sig(self.grid.v(j)),
                    fmt_sig(self.conv_s[p]),
                    fmt_sig(self.conv_v[p]),
                    fmt_sig(self.diff_ss[p]),
                    fmt_sig(self.diff_vv[p]),
                    fmt_sig(self.diff_sv[p])
                )?;
            }
        }
        Ok(())
    }
}

/// Central-difference residual of the pricing equation between two adjacent
/// time slices, evaluated at the midpoint: the time derivative is the
/// difference quotient and the spatial operator acts on the slice average.
/// A true solution yields residuals of size `O(h^2 + dt)`.
///
/// `earlier` is the slice at the smaller calendar time, `later` the one `dt`
/// after. Returns the `(n_s - 2) x (n_v - 2)` interior residuals, `i`-major.
pub fn residual<T: Real>(
    earlier: &PriceSurface<T>,
    later: &PriceSurface<T>,
    gen: &GeneratorStencil<T>,
    dt: T,
) -> Result<Vec<T>, Error> {
    let grid = &gen.grid;
    if !earlier.grid.same_nodes(grid) || !later.grid.same_nodes(grid) {
        return Err(Error::Dimension(
            "surfaces and stencil must share one grid".to_string(),
        ));
    }
    if !(dt > T::zero()) {
        return Err(Error::Domain(format!("dt must be > 0 (got {})", dt)));
    }
    let half = T::of(0.5);
    let two = T::of(2.0);
    let four = T::of(4.0);
    let hs = grid.hs();
    let hv = grid.hv();
    let mut out = Vec::with_capacity((grid.n_s - 2) * (grid.n_v - 2));
    let mid = |p: usize| half * (earlier.values[p] + later.values[p]);
    for i in 1..grid.n_s - 1 {
        for j in 1..grid.n_v - 1 {
            let p = grid.idx(i, j);
            let f_t = (later.values[p] - earlier.values[p]) / dt;
            let c = mid(p);
            let e = mid(grid.idx(i + 1, j));
            let w = mid(grid.idx(i - 1, j));
            let n = mid(grid.idx(i, j + 1));
            let s = mid(grid.idx(i, j - 1));
            let ne = mid(grid.idx(i + 1, j + 1));
            let nw = mid(grid.idx(i - 1, j + 1));
            let se = mid(grid.idx(i + 1, j - 1));
            let sw = mid(grid.idx(i - 1, j - 1));
            let f_s = (e - w) / (two * hs);
            let f_v = (n - s) / (two * hv);
            let f_ss = (e - two * c + w) / (hs * hs);
            let f_vv = (n - two * c + s) / (hv * hv);
            let f_sv = (ne - nw - se + sw) / (four * hs * hv);
            out.push(
                f_t + gen.conv_s[p] * f_s
                    + gen.conv_v[p] * f_v
                    + gen.diff_ss[p] * f_ss
                    + gen.diff_vv[p] * f_vv
                    + gen.diff_sv[p] * f_sv
                    + gen.zeroth * c,
            );
        }
    }
    Ok(out)
}

/// Max-norm and RMS of a residual array.
pub fn residual_norms<T: Real>(res: &[T]) -> (T, T) {
    let max = res.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()));
    let ss = res.iter().map(|&x| x * x).sum::<T>();
    let rms = (ss / T::of_usize(res.len().max(1))).sqrt();
    (max, rms)
}
