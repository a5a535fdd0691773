//! Run configuration: JSON schema, defaults, flag overrides, and the
//! mapping onto engine types.
//!
//! Precedence is flags > file > defaults. A manifest emitted by a previous
//! run can be passed back as `--config`: its embedded `config` object is the
//! fully resolved configuration, so the run replays exactly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mgmodes_core::grid::GridSpec;
use mgmodes_core::model::{ModeIndex, ModelParams, PayoffKind, PayoffSpec, RiskNeutralParams};
use mgmodes_core::pde::SolverConfig;
use mgmodes_core::sde::Scheme;
use mgmodes_core::{kkmodes, mc::McConfig, model};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffConfig {
    pub kind: String,
    pub strike: f64,
    pub maturity: f64,
    /// Node values for `kind = "custom"`, row-major over the run grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub s_min: Option<f64>,
    pub s_max: Option<f64>,
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
    pub n_s: Option<usize>,
    pub n_v: Option<usize>,
    pub n_t: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub theta: f64,
    pub rannacher_steps: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { theta: 0.5, rannacher_steps: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    /// `"euler"` or `"log-euler"`.
    pub scheme: String,
    pub antithetic: bool,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            paths: 100_000,
            steps: 200,
            seed: 42,
            scheme: "log-euler".to_string(),
            antithetic: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HedgeSection {
    pub rebalances: Vec<usize>,
    pub paths: usize,
    pub histogram_bins: usize,
}

impl Default for HedgeSection {
    fn default() -> Self {
        Self { rebalances: vec![52, 208], paths: 10_000, histogram_bins: 40 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KkSection {
    pub l: f64,
    pub mass: f64,
    pub c: f64,
    pub gamma: f64,
    /// `"spacelike"` or `"timelike"`.
    pub signature: String,
    pub n_max: i64,
    pub samples: usize,
}

impl Default for KkSection {
    fn default() -> Self {
        Self {
            l: std::f64::consts::FRAC_1_PI / 2.0,
            mass: 0.0,
            c: 1.0,
            gamma: 1.0,
            signature: "spacelike".to_string(),
            n_max: 10,
            samples: 256,
        }
    }
}

/// The on-disk configuration. Model parameters sit at the top level; the
/// numbered sections carry the numerics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub phi: f64,
    pub mu: f64,
    pub v0: f64,
    pub xi: f64,
    pub rho: f64,
    pub r: f64,
    pub lambda2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_bar: Option<f64>,
    pub n: u32,
    pub m: u32,
    /// Spot; defaults to the strike.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    pub payoff: PayoffConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub hedge: HedgeSection,
    #[serde(default)]
    pub kk: KkSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

/// Flag overrides (precedence: flags > file > defaults).
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub n: Option<u32>,
    pub m: Option<u32>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
}

impl RunConfig {
    /// Reads a config file, unwrapping the `config` object when the file is
    /// an emitted manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("cannot read {}: {}", path.display(), e)))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::config("config", format!("invalid JSON: {}", e)))?;
        let config_value = match value.get("config") {
            Some(inner) if inner.is_object() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(config_value)
            .map_err(|e| CliError::config("config", format!("schema error: {}", e)))
    }

    pub fn apply_overrides(&mut self, ov: &Overrides) {
        if let Some(n) = ov.n {
            self.n = n;
        }
        if let Some(m) = ov.m {
            self.m = m;
        }
        if let Some(seed) = ov.seed {
            self.mc.seed = seed;
        }
        if let Some(paths) = ov.paths {
            self.mc.paths = paths;
        }
    }

    pub fn spot(&self) -> f64 {
        self.s0.unwrap_or(self.payoff.strike)
    }

    pub fn mode(&self) -> ModeIndex {
        ModeIndex::new(self.n, self.m)
    }

    pub fn model_params(&self) -> ModelParams<f64> {
        ModelParams {
            phi: self.phi,
            mu: self.mu,
            v0: self.v0,
            xi: self.xi,
            rho: self.rho,
            r: self.r,
            lambda2: self.lambda2,
            mu_bar: self.mu_bar,
        }
    }

    pub fn grid_spec(&self) -> GridSpec<f64> {
        let mut g = GridSpec::default_domain(
            self.payoff.strike,
            self.spot(),
            self.v0,
            self.grid.n_s.unwrap_or(201),
            self.grid.n_v.unwrap_or(51),
            self.grid.n_t.unwrap_or(200),
        );
        if let Some(x) = self.grid.s_min {
            g.s_min = x;
        }
        if let Some(x) = self.grid.s_max {
            g.s_max = x;
        }
        if let Some(x) = self.grid.v_min {
            g.v_min = x;
        }
        if let Some(x) = self.grid.v_max {
            g.v_max = x;
        }
        g
    }

    pub fn payoff_spec(&self) -> Result<PayoffSpec<f64>, CliError> {
        let kind = match self.payoff.kind.as_str() {
            "call" => PayoffKind::Call,
            "put" => PayoffKind::Put,
            "custom" => {
                let values = self.payoff.values.clone().ok_or_else(|| {
                    CliError::config("payoff.values", "required for kind = custom".to_string())
                })?;
                PayoffKind::CustomTabulated { values, grid: self.grid_spec() }
            }
            other => {
                return Err(CliError::config(
                    "payoff.kind",
                    format!("must be call, put or custom (got {:?})", other),
                ))
            }
        };
        Ok(PayoffSpec {
            kind,
            strike: self.payoff.strike,
            maturity: self.payoff.maturity,
        })
    }

    pub fn solver_config(&self) -> SolverConfig<f64> {
        SolverConfig {
            theta: self.solver.theta,
            rannacher_steps: self.solver.rannacher_steps,
        }
    }

    pub fn scheme(&self) -> Result<Scheme, CliError> {
        match self.mc.scheme.as_str() {
            "euler" => Ok(Scheme::Euler),
            "log-euler" => Ok(Scheme::LogEuler),
            other => Err(CliError::config(
                "mc.scheme",
                format!("must be euler or log-euler (got {:?})", other),
            )),
        }
    }

    pub fn mc_config(&self) -> Result<McConfig, CliError> {
        Ok(McConfig {
            paths: self.mc.paths,
            steps: self.mc.steps,
            seed: self.mc.seed,
            scheme: self.scheme()?,
            antithetic: self.mc.antithetic,
        })
    }

    pub fn kk_params(&self) -> Result<kkmodes::KKParams<f64>, CliError> {
        let signature = match self.kk.signature.as_str() {
            "spacelike" => kkmodes::Signature::Spacelike,
            "timelike" => kkmodes::Signature::Timelike,
            other => {
                return Err(CliError::config(
                    "kk.signature",
                    format!("must be spacelike or timelike (got {:?})", other),
                ))
            }
        };
        Ok(kkmodes::KKParams {
            l: self.kk.l,
            mass: self.kk.mass,
            c: self.kk.c,
            gamma: self.kk.gamma,
            signature,
        })
    }

    /// Validates model, payoff and grid; first violation becomes the error.
    pub fn risk_neutral(&self) -> Result<RiskNeutralParams<f64>, CliError> {
        let params = self.model_params();
        let mut violations = model::validate_params(&params);
        violations.extend(self.payoff_spec()?.validate());
        violations.extend(self.grid_spec().validate());
        if let Some(v) = violations.first() {
            return Err(CliError::Config { field: v.field.to_string(), message: v.message.clone() });
        }
        model::to_risk_neutral(&params, self.mode()).map_err(CliError::from_core)
    }

    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("mgmodes_out"))
    }
}
