//! Domain types, parameter validation, and the real-world to risk-neutral
//! parameter mapping.
//!
//! The real-world dynamics are the coupled lognormal pair
//!
//! ```text
//! dS = n (phi S dt + sqrt(V) S dW1)
//! dV = m (mu  V dt + xi      V dW2),   corr(dW1, dW2) = rho
//! ```
//!
//! with the risk-neutral measure obtained by `phi -> r` and
//! `mu -> mu_bar = mu - lambda2 * xi`. The market price of security risk
//! `lambda1 = (phi - r) / sigma` cancels out of the risk-neutral equation and
//! is never materialized.

use crate::error::{Error, Violation};
use crate::grid::GridSpec;
use crate::Real;

/// The mode pair `(n, m)` selecting a member of the operator family; the
/// security sector scales with `n`, the variance sector with `m`. Modes are
/// non-negative by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    /// Security mode.
    pub n: u32,
    /// Variance mode.
    pub m: u32,
}

impl ModeIndex {
    pub const fn new(n: u32, m: u32) -> Self {
        Self { n, m }
    }

    /// The pure-discounting ground state `(0, 0)`.
    pub const GROUND: Self = Self::new(0, 0);
    /// The classical two-factor equation `(1, 1)`.
    pub const CLASSICAL: Self = Self::new(1, 1);

    pub fn n_as<T: Real>(&self) -> T {
        T::of_usize(self.n as usize)
    }

    pub fn m_as<T: Real>(&self) -> T {
        T::of_usize(self.m as usize)
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.n, self.m)
    }
}

/// Real-world dynamics parameters plus market data.
///
/// `mu_bar` may be left `None`, in which case [`to_risk_neutral`] derives it
/// as `mu - lambda2 * xi`; when supplied, validation checks it for
/// consistency with that identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    /// Security drift, per unit time.
    pub phi: T,
    /// Variance drift, per unit time.
    pub mu: T,
    /// Initial variance `V0 = sigma0^2`, >= 0.
    pub v0: T,
    /// Vol-of-vol scale, >= 0.
    pub xi: T,
    /// Noise correlation, in [-1, 1].
    pub rho: T,
    /// Risk-free rate, per unit time.
    pub r: T,
    /// Market price of volatility risk, taken time-constant.
    pub lambda2: T,
    /// Risk-neutral variance drift; derived from the other fields when
    /// absent.
    pub mu_bar: Option<T>,
}

impl<T: Real> ModelParams<T> {
    /// The risk-neutral variance drift implied by `mu`, `lambda2` and `xi`.
    pub fn implied_mu_bar(&self) -> T {
        self.mu - self.lambda2 * self.xi
    }
}

/// Relative tolerance for the `mu_bar = mu - lambda2 * xi` consistency check;
/// configs round-trip through decimal text, so exact equality is too strict.
fn consistency_tol<T: Real>(scale: T) -> T {
    T::of(1e-9) * scale.abs().max(T::one())
}

/// Checks every typed invariant of `params`; the returned list is empty
/// exactly when all of them hold.
pub fn validate_params<T: Real>(params: &ModelParams<T>) -> Vec<Violation> {
    let mut v = Vec::new();
    let one = T::one();
    if !(params.rho >= -one && params.rho <= one) {
        v.push(Violation::new(
            "rho",
            format!("must lie in [-1, 1] (got {})", params.rho),
        ));
    }
    if !(params.v0 >= T::zero()) {
        v.push(Violation::new("v0", format!("must be >= 0 (got {})", params.v0)));
    }
    if !(params.xi >= T::zero()) {
        v.push(Violation::new("xi", format!("must be >= 0 (got {})", params.xi)));
    }
    for (field, value) in [
        ("phi", params.phi),
        ("mu", params.mu),
        ("r", params.r),
        ("lambda2", params.lambda2),
    ] {
        if !value.is_finite() {
            v.push(Violation::new(field, "must be finite".to_string()));
        }
    }
    if let Some(mu_bar) = params.mu_bar {
        if !mu_bar.is_finite() {
            v.push(Violation::new("mu_bar", "must be finite".to_string()));
        } else {
            let implied = params.implied_mu_bar();
            if (mu_bar - implied).abs() > consistency_tol(implied) {
                v.push(Violation::new(
                    "mu_bar",
                    format!(
                        "inconsistent with mu - lambda2*xi (got {}, expected {})",
                        mu_bar, implied
                    ),
                ));
            }
        }
    }
    v
}

/// Coefficients of the risk-neutral pricing equation for one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskNeutralParams<T> {
    pub r: T,
    pub mu_bar: T,
    pub xi: T,
    pub rho: T,
    pub mode: ModeIndex,
    /// Initial variance, carried along so simulation under this measure can
    /// start the variance factor.
    pub v0: T,
}

/// Maps validated real-world parameters to the risk-neutral coefficient set
/// for `mode`.
///
/// `mu_bar = mu - lambda2 * xi`; `r`, `xi`, `rho` pass through unchanged.
pub fn to_risk_neutral<T: Real>(
    params: &ModelParams<T>,
    mode: ModeIndex,
) -> Result<RiskNeutralParams<T>, Error> {
    let violations = validate_params(params);
    if !violations.is_empty() {
        return Err(Error::InvalidParams(violations));
    }
    Ok(RiskNeutralParams {
        r: params.r,
        mu_bar: params.mu_bar.unwrap_or_else(|| params.implied_mu_bar()),
        xi: params.xi,
        rho: params.rho,
        mode,
        v0: params.v0,
    })
}

/// Payoff shape at maturity.
#[derive(Debug, Clone, PartialEq)]
pub enum PayoffKind<T> {
    Call,
    Put,
    /// Arbitrary terminal values tabulated node-by-node on `grid`
    /// (`i`-major); evaluated elsewhere by bilinear interpolation.
    CustomTabulated { values: Vec<T>, grid: GridSpec<T> },
}

/// A European payoff: kind, strike and maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffSpec<T> {
    pub kind: PayoffKind<T>,
    /// Strike `K > 0`.
    pub strike: T,
    /// Maturity `T > 0`, in the same time unit as the rates.
    pub maturity: T,
}

impl<T: Real> PayoffSpec<T> {
    pub fn call(strike: T, maturity: T) -> Self {
        Self {
            kind: PayoffKind::Call,
            strike,
            maturity,
        }
    }

    pub fn put(strike: T, maturity: T) -> Self {
        Self {
            kind: PayoffKind::Put,
            strike,
            maturity,
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.strike > T::zero()) {
            out.push(Violation::new(
                "payoff.strike",
                format!("must be > 0 (got {})", self.strike),
            ));
        }
        if !(self.maturity > T::zero()) {
            out.push(Violation::new(
                "payoff.maturity",
                format!("must be > 0 (got {})", self.maturity),
            ));
        }
        if let PayoffKind::CustomTabulated { values, grid } = &self.kind {
            if values.len() != grid.n_nodes() {
                out.push(Violation::new(
                    "payoff.values",
                    format!(
                        "table length {} does not cover the {}x{} grid",
                        values.len(),
                        grid.n_s,
                        grid.n_v
                    ),
                ));
            }
            if values.iter().any(|x| !x.is_finite()) {
                out.push(Violation::new("payoff.values", "must all be finite".to_string()));
            }
        }
        out
    }

    /// Terminal value at `(s, v)`. Calls and puts ignore `v`; tabulated
    /// payoffs interpolate bilinearly and reject points off their table.
    pub fn eval(&self, s: T, v: T) -> Result<T, Error> {
        match &self.kind {
            PayoffKind::Call => Ok((s - self.strike).max(T::zero())),
            PayoffKind::Put => Ok((self.strike - s).max(T::zero())),
            PayoffKind::CustomTabulated { values, grid } => {
                let (i, j, ws, wv) = grid.locate(s, v).ok_or_else(|| {
                    Error::Range(format!("payoff table does not cover (S, V) = ({}, {})", s, v))
                })?;
                let one = T::one();
                let f00 = values[grid.idx(i, j)];
                let f10 = values[grid.idx(i + 1, j)];
                let f01 = values[grid.idx(i, j + 1)];
                let f11 = values[grid.idx(i + 1, j + 1)];
                Ok((one - ws) * (one - wv) * f00
                    + ws * (one - wv) * f10
                    + (one - ws) * wv * f01
                    + ws * wv * f11)
            }
        }
    }

    /// Whether the payoff is a function of `s` alone.
    pub fn is_v_independent(&self) -> bool {
        !matches!(self.kind, PayoffKind::CustomTabulated { .. })
    }
}
