//! Uniform rectangular `(S, V)` grids and flat node storage.

use crate::error::Violation;
use crate::Real;

/// Node spacing rule. Only uniform spacing is implemented; the enum exists so
/// a stretched grid can be added without a signature change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spacing {
    #[default]
    Uniform,
}

/// A rectangular grid over the security axis `[s_min, s_max]` and the
/// variance axis `[v_min, v_max]`, with `n_s x n_v` nodes and `n_t` backward
/// time steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub s_min: T,
    pub s_max: T,
    pub v_min: T,
    pub v_max: T,
    /// Node count along the security axis (>= 3).
    pub n_s: usize,
    /// Node count along the variance axis (>= 3).
    pub n_v: usize,
    /// Time step count (>= 1).
    pub n_t: usize,
    pub spacing: Spacing,
}

impl<T: Real> GridSpec<T> {
    /// Uniform grid over `[0, s_max] x [0, v_max]`.
    pub fn new(s_max: T, v_max: T, n_s: usize, n_v: usize, n_t: usize) -> Self {
        Self {
            s_min: T::zero(),
            s_max,
            v_min: T::zero(),
            v_max,
            n_s,
            n_v,
            n_t,
            spacing: Spacing::Uniform,
        }
    }

    /// Conventional pricing domain for a given strike, spot and initial
    /// variance: `s_max = max(4K, 4*S0)`, `v_max = max(16*V0, 1)`. Keeps the
    /// far-field boundary error below the interior tolerance for maturities
    /// up to about two years.
    pub fn default_domain(strike: T, s0: T, v0: T, n_s: usize, n_v: usize, n_t: usize) -> Self {
        let four = T::of(4.0);
        let s_max = (four * strike).max(four * s0);
        let v_max = (T::of(16.0) * v0).max(T::one());
        Self::new(s_max, v_max, n_s, n_v, n_t)
    }

    /// Checks every typed bound; empty list means the grid is usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.s_min >= T::zero()) {
            v.push(Violation::new("grid.s_min", format!("must be >= 0 (got {})", self.s_min)));
        }
        if !(self.v_min >= T::zero()) {
            v.push(Violation::new("grid.v_min", format!("must be >= 0 (got {})", self.v_min)));
        }
        if !(self.s_max > self.s_min) {
            v.push(Violation::new("grid.s_max", format!("must exceed s_min (got {})", self.s_max)));
        }
        if !(self.v_max > self.v_min) {
            v.push(Violation::new("grid.v_max", format!("must exceed v_min (got {})", self.v_max)));
        }
        if self.n_s < 3 {
            v.push(Violation::new("grid.n_s", format!("must be >= 3 (got {})", self.n_s)));
        }
        if self.n_v < 3 {
            v.push(Violation::new("grid.n_v", format!("must be >= 3 (got {})", self.n_v)));
        }
        if self.n_t < 1 {
            v.push(Violation::new("grid.n_t", format!("must be >= 1 (got {})", self.n_t)));
        }
        v
    }

    /// Spacing along the security axis.
    pub fn hs(&self) -> T {
        (self.s_max - self.s_min) / T::of_usize(self.n_s - 1)
    }

    /// Spacing along the variance axis.
    pub fn hv(&self) -> T {
        (self.v_max - self.v_min) / T::of_usize(self.n_v - 1)
    }

    /// Security coordinate of node column `i`.
    pub fn s(&self, i: usize) -> T {
        self.s_min + T::of_usize(i) * self.hs()
    }

    /// Variance coordinate of node row `j`.
    pub fn v(&self, j: usize) -> T {
        self.v_min + T::of_usize(j) * self.hv()
    }

    /// Total node count.
    pub fn n_nodes(&self) -> usize {
        self.n_s * self.n_v
    }

    /// Flat index of node `(i, j)`; `i`-major so a fixed-`i` variance line is
    /// contiguous.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_v + j
    }

    /// Grid refined `levels` times: every cell halved in both axes and in
    /// time.
    pub fn refined(&self, levels: u32) -> Self {
        let f = 1usize << levels;
        Self {
            n_s: (self.n_s - 1) * f + 1,
            n_v: (self.n_v - 1) * f + 1,
            n_t: self.n_t * f,
            ..*self
        }
    }

    /// True if both grids describe the same node set.
    pub fn same_nodes(&self, other: &Self) -> bool {
        self.n_s == other.n_s
            && self.n_v == other.n_v
            && self.s_min == other.s_min
            && self.s_max == other.s_max
            && self.v_min == other.v_min
            && self.v_max == other.v_max
    }

    /// Bilinear interpolation weights for a query point `(s, v)` inside the
    /// grid: returns the anchor cell `(i, j)` and fractional offsets.
    pub(crate) fn locate(&self, s: T, v: T) -> Option<(usize, usize, T, T)> {
        if s < self.s_min || s > self.s_max || v < self.v_min || v > self.v_max {
            return None;
        }
        let hs = self.hs();
        let hv = self.hv();
        let fi = ((s - self.s_min) / hs).floor();
        let fj = ((v - self.v_min) / hv).floor();
        let mut i = fi.to_usize().unwrap_or(0);
        let mut j = fj.to_usize().unwrap_or(0);
        i = i.min(self.n_s - 2);
        j = j.min(self.n_v - 2);
        let ws = (s - self.s(i)) / hs;
        let wv = (v - self.v(j)) / hv;
        Some((i, j, ws, wv))
    }
}
