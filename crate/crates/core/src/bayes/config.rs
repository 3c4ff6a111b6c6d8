use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model variants compared in the rolling-window exercise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Harmonic regression with iid errors, no random effect.
    Baseline,
    /// CAR-AR random effect with ρ held fixed.
    CarArRhoFixed(f64),
    /// CAR-AR random effect with ρ estimated.
    CarAr,
    /// CAR-AR with Dirichlet-process clustering of harmonic coefficients.
    CarArBnp,
}

impl Variant {
    pub fn has_random_effect(&self) -> bool {
        !matches!(self, Variant::Baseline)
    }

    pub fn is_bnp(&self) -> bool {
        matches!(self, Variant::CarArBnp)
    }

    /// Short name used for output directories.
    pub fn name(&self) -> String {
        match self {
            Variant::Baseline => "baseline".into(),
            Variant::CarArRhoFixed(r) => format!("car_ar_rho{r}"),
            Variant::CarAr => "car_ar".into(),
            Variant::CarArBnp => "car_ar_bnp".into(),
        }
    }
}

fn default_s0_scale() -> f64 {
    0.1
}
fn default_shape() -> f64 {
    1.0
}
fn default_scale() -> f64 {
    0.01
}
fn default_beta0_var() -> f64 {
    100.0
}

/// Prior hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Prior mean of the harmonic coefficients; zeros when absent.
    #[serde(default)]
    pub m0: Option<Vec<f64>>,
    /// Full prior covariance of the harmonic coefficients (row-major rows);
    /// `s0_scale · I` when absent.
    #[serde(default)]
    pub s0: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_s0_scale")]
    pub s0_scale: f64,
    #[serde(default = "default_shape")]
    pub a_sigma: f64,
    #[serde(default = "default_scale")]
    pub b_sigma: f64,
    #[serde(default = "default_shape")]
    pub a_tau: f64,
    #[serde(default = "default_scale")]
    pub b_tau: f64,
    /// Prior variance of the global intercept (mean zero).
    #[serde(default = "default_beta0_var")]
    pub beta0_var: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            m0: None,
            s0: None,
            s0_scale: default_s0_scale(),
            a_sigma: default_shape(),
            b_sigma: default_scale(),
            a_tau: default_shape(),
            b_tau: default_scale(),
            beta0_var: default_beta0_var(),
        }
    }
}

impl Hyperparams {
    pub fn prior_mean(&self, dim: usize) -> Result<DVector<f64>> {
        match &self.m0 {
            None => Ok(DVector::zeros(dim)),
            Some(m) if m.len() == dim => Ok(DVector::from_column_slice(m)),
            Some(m) => Err(Error::invalid(format!("m0 has length {}, expected {dim}", m.len()))),
        }
    }

    pub fn prior_cov(&self, dim: usize) -> Result<DMatrix<f64>> {
        let s = match &self.s0 {
            None => DMatrix::identity(dim, dim) * self.s0_scale,
            Some(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::invalid(format!("S0 must be {dim}x{dim}")));
                }
                DMatrix::from_fn(dim, dim, |i, j| rows[i][j])
            }
        };
        if (&s - s.transpose()).abs().max() > 1e-12 {
            return Err(Error::invalid("S0 is not symmetric"));
        }
        if dim > 0 && s.clone().cholesky().is_none() {
            return Err(Error::invalid("S0 is not positive definite"));
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("s0_scale", self.s0_scale),
            ("a_sigma", self.a_sigma),
            ("b_sigma", self.b_sigma),
            ("a_tau", self.a_tau),
            ("b_tau", self.b_tau),
            ("beta0_var", self.beta0_var),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn default_alpha() -> f64 {
    1.0
}
fn default_aux() -> usize {
    50
}

/// Dirichlet-process settings: concentration and auxiliary components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnpConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_aux")]
    pub n_aux: usize,
}

impl Default for BnpConfig {
    fn default() -> Self {
        BnpConfig {
            alpha: default_alpha(),
            n_aux: default_aux(),
        }
    }
}

fn default_iters() -> usize {
    10_000
}
fn default_burnin() -> usize {
    5_000
}
fn default_thin() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_burnin")]
    pub burnin: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    /// Keep the full latent field of every retained draw (memory heavy).
    #[serde(default)]
    pub keep_latent: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iters: default_iters(),
            burnin: default_burnin(),
            thin: default_thin(),
            keep_latent: false,
        }
    }
}

impl McmcConfig {
    /// Number of retained draws.
    pub fn n_draws(&self) -> usize {
        (self.iters - self.burnin) / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1"));
        }
        if self.burnin >= self.iters {
            return Err(Error::invalid(format!(
                "burn-in {} must be below iterations {}",
                self.burnin, self.iters
            )));
        }
        if self.n_draws() == 0 {
            return Err(Error::invalid("settings retain no draws"));
        }
        Ok(())
    }
}

/// Everything needed to fit one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub frequencies: Vec<f64>,
    #[serde(default)]
    pub hyper: Hyperparams,
    #[serde(default)]
    pub bnp: Option<BnpConfig>,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(variant: Variant, frequencies: Vec<f64>) -> Self {
        ModelConfig {
            variant,
            frequencies,
            hyper: Hyperparams::default(),
            bnp: variant.is_bnp().then(BnpConfig::default),
            mcmc: McmcConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.mcmc.validate()?;
        if let Variant::CarArRhoFixed(r) = self.variant {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::invalid(format!("fixed rho {r} must lie in [0, 1)")));
            }
        }
        if let Some(b) = &self.bnp {
            if !(b.alpha > 0.0) || b.n_aux == 0 {
                return Err(Error::invalid("BNP needs alpha > 0 and at least one auxiliary component"));
            }
        }
        Ok(())
    }

    pub fn bnp_or_default(&self) -> BnpConfig {
        self.bnp.clone().unwrap_or_default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: ModelConfig = serde_json::from_reader(std::fs::File::open(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}
