//! Sweep configuration files (TOML).
//!
//! ```toml
//! n_list = [250, 500]
//! k_list = [5, 10]
//! beta_list = [0, 5, 10]
//! b_list = [1, 0.5, 0.1]
//! methods = ["SC", "SCORE", "L2", "RSC", "GIBBS", "VB", "VEMB", "VEMG"]
//! n_seeds = 20
//! base_seed = 20240601
//! output_path = "results/desk_runs.csv"
//!
//! [gibbs]
//! n_iter = 1000
//! burn_in = 500
//! ```
//!
//! Optional tables `[spectral]`, `[gibbs]`, `[vb]` and `[vem]` override
//! method parameters; unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gibbs::GibbsConfig;
use crate::model::{Method, ScenarioConfig};
use crate::spectral::{RscTau, SpectralKind, SpectralVariant};
use crate::vb::VbConfig;
use crate::vem::{VemConfig, VemModel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralSettings {
    /// SCORE ratio clip; absent means `ln(n)`.
    pub score_clip: Option<f64>,
    /// RSC regularizer; absent means the total degree.
    pub rsc_tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsSettings {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub a: f64,
    pub b: f64,
    pub paper_literal_beta: bool,
    pub randomized_sweep: bool,
}

impl Default for GibbsSettings {
    fn default() -> Self {
        let g = GibbsConfig::default();
        Self {
            n_iter: g.n_iter,
            burn_in: g.burn_in,
            thin: g.thin,
            a: g.a,
            b: g.b_prior,
            paper_literal_beta: g.paper_literal_beta,
            randomized_sweep: g.randomized_sweep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VbSettings {
    pub beta: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub d_const: f64,
}

impl Default for VbSettings {
    fn default() -> Self {
        let v = VbConfig::default();
        Self { beta: v.beta_hyper, max_iter: v.max_iter, tol: v.tol, d_const: v.d_const }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VemSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub inner_tol: f64,
    pub inner_max: usize,
    pub eta: f64,
}

impl Default for VemSettings {
    fn default() -> Self {
        let v = VemConfig::new(VemModel::Bernoulli);
        Self { tol: v.tol, max_iter: v.max_iter, inner_tol: v.inner_tol, inner_max: v.inner_max, eta: v.eta }
    }
}

/// Per-method parameters shared by sweeps and single runs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodSettings {
    pub spectral: SpectralSettings,
    pub gibbs: GibbsSettings,
    pub vb: VbSettings,
    pub vem: VemSettings,
}

impl MethodSettings {
    pub fn spectral_variant(&self, kind: SpectralKind) -> SpectralVariant {
        SpectralVariant {
            kind,
            score_clip: self.spectral.score_clip,
            rsc_tau: self.spectral.rsc_tau.map_or(RscTau::TotalDegree, RscTau::Value),
        }
    }

    pub fn gibbs_config(&self) -> GibbsConfig {
        let g = &self.gibbs;
        GibbsConfig {
            a: g.a,
            b_prior: g.b,
            alpha_dir: None,
            n_iter: g.n_iter,
            burn_in: g.burn_in,
            thin: g.thin,
            paper_literal_beta: g.paper_literal_beta,
            randomized_sweep: g.randomized_sweep,
        }
    }

    pub fn vb_config(&self) -> VbConfig {
        VbConfig { beta_hyper: self.vb.beta, max_iter: self.vb.max_iter, tol: self.vb.tol, d_const: self.vb.d_const }
    }

    pub fn vem_config(&self, model: VemModel) -> VemConfig {
        VemConfig {
            tol: self.vem.tol,
            max_iter: self.vem.max_iter,
            inner_tol: self.vem.inner_tol,
            inner_max: self.vem.inner_max,
            eta: self.vem.eta,
            ..VemConfig::new(model)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Validation(e);
        self.spectral_variant(SpectralKind::Score).validate().map_err(|e| invalid(e.to_string()))?;
        self.spectral_variant(SpectralKind::Regularized).validate().map_err(|e| invalid(e.to_string()))?;
        self.gibbs_config().validate(1).map_err(|e| invalid(e.to_string()))?;
        self.vb_config().validate().map_err(|e| invalid(e.to_string()))?;
        self.vem_config(VemModel::Bernoulli).validate().map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n_list: Vec<usize>,
    pub k_list: Vec<usize>,
    pub beta_list: Vec<f64>,
    pub b_list: Vec<f64>,
    pub methods: Vec<Method>,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub output_path: Option<PathBuf>,
    pub settings: MethodSettings,
}

/// File layout; method tables sit at the top level next to the grid.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n_list: Vec<usize>,
    k_list: Vec<usize>,
    beta_list: Vec<f64>,
    b_list: Vec<f64>,
    methods: Vec<Method>,
    n_seeds: usize,
    base_seed: u64,
    #[serde(default)]
    output_path: Option<PathBuf>,
    #[serde(default)]
    spectral: SpectralSettings,
    #[serde(default)]
    gibbs: GibbsSettings,
    #[serde(default)]
    vb: VbSettings,
    #[serde(default)]
    vem: VemSettings,
}

/// One grid point; `seed` fields are filled in per replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub n: usize,
    pub k: usize,
    pub beta: f64,
    pub b: f64,
}

impl SweepConfig {
    /// Cells in the fixed order n, k, beta, b (outermost first).
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.n_list {
            for &k in &self.k_list {
                for &beta in &self.beta_list {
                    for &b in &self.b_list {
                        out.push(Cell { n, k, beta, b });
                    }
                }
            }
        }
        out
    }

    pub fn task_count(&self) -> usize {
        self.cells().len() * self.methods.len() * self.n_seeds
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Validation(m));
        for (name, len) in [
            ("n_list", self.n_list.len()),
            ("k_list", self.k_list.len()),
            ("beta_list", self.beta_list.len()),
            ("b_list", self.b_list.len()),
            ("methods", self.methods.len()),
        ] {
            if len == 0 {
                return fail(format!("{name} must not be empty"));
            }
        }
        if self.n_seeds == 0 {
            return fail("n_seeds must be at least 1".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return fail(format!("method {m} listed twice"));
            }
        }
        for cell in self.cells() {
            ScenarioConfig { n: cell.n, k: cell.k, beta: cell.beta, b: cell.b, seed: 0 }
                .validate()
                .map_err(|e| ConfigError::Validation(format!("cell (n={}, k={}, beta={}, b={}): {e}", cell.n, cell.k, cell.beta, cell.b)))?;
        }
        self.settings.validate()
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_config_str(text: &str) -> Result<SweepConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let config = SweepConfig {
        n_list: raw.n_list,
        k_list: raw.k_list,
        beta_list: raw.beta_list,
        b_list: raw.b_list,
        methods: raw.methods,
        n_seeds: raw.n_seeds,
        base_seed: raw.base_seed,
        output_path: raw.output_path,
        settings: MethodSettings { spectral: raw.spectral, gibbs: raw.gibbs, vb: raw.vb, vem: raw.vem },
    };
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<SweepConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config_str(&text)
}
