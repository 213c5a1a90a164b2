//! Experiment configuration.
//!
//! The file format is TOML with four tables, `[model]`, `[grid]`,
//! `[propagation]` and `[output]`. Unknown keys are rejected. Every key is
//! optional; model-dependent defaults are filled in by [`ExperimentConfig::resolve`].

use std::path::{Path, PathBuf};

use purity_core::model::{CouplingCase, ModelKind};
use purity_core::propagator::Method;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, HarnessResult};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "PURITY_OUTPUT_ROOT";

const DEFAULT_OUTPUT_ROOT: &str = "purity-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModelChoice {
    #[default]
    OneOne,
    TwoTwoCase1,
    TwoTwoCase2,
}

impl ModelChoice {
    pub fn kind(self) -> ModelKind {
        match self {
            ModelChoice::OneOne => ModelKind::OneOne,
            ModelChoice::TwoTwoCase1 => ModelKind::TwoTwo(CouplingCase::CaseI),
            ModelChoice::TwoTwoCase2 => ModelKind::TwoTwo(CouplingCase::CaseII),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelChoice::OneOne => "one_one",
            ModelChoice::TwoTwoCase1 => "two_two_case1",
            ModelChoice::TwoTwoCase2 => "two_two_case2",
        }
    }

    pub fn n_modes(self) -> usize {
        match self {
            ModelChoice::OneOne => 2,
            _ => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MethodChoice {
    #[default]
    Krylov,
    Chebyshev,
}

impl From<MethodChoice> for Method {
    fn from(m: MethodChoice) -> Self {
        match m {
            MethodChoice::Krylov => Method::Krylov,
            MethodChoice::Chebyshev => Method::Chebyshev,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: ModelChoice,
    /// `[γ_A, γ_B]` for one_one, `[γ₁, γ₂]` for the 2+2 models.
    pub gammas: Option<[f64; 2]>,
    /// Action offset `Δ`.
    pub offset: Option<f64>,
    pub j_star: Option<f64>,
    pub hbar_list: Option<Vec<f64>>,
    pub delta_list: Option<Vec<f64>>,
    /// Explicit per-mode truncation; empty or absent means automatic.
    pub mode_dims: Option<Vec<usize>>,
    /// Quadrature points per angle for the torus average.
    pub quad_points: Option<usize>,
    pub fd_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    /// Final time in units of `δt`.
    pub scaled_t_max: f64,
    pub samples: usize,
    pub spacing: Spacing,
    /// First nonzero `δt` for log spacing.
    pub log_start: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            scaled_t_max: 5.0,
            samples: 101,
            spacing: Spacing::Linear,
            log_start: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationSection {
    pub method: MethodChoice,
    pub krylov_dim: usize,
    pub target_error: f64,
    /// Step chosen as `step_phase · ħ / (spectral half-width)` unless
    /// `step_dt` is set.
    pub step_phase: f64,
    pub step_dt: Option<f64>,
    pub quantum: bool,
    pub echo: bool,
    /// Concurrent sweep cells; 0 uses all cores.
    pub jobs: usize,
}

impl Default for PropagationSection {
    fn default() -> Self {
        Self {
            method: MethodChoice::Krylov,
            krylov_dim: 30,
            target_error: 1e-10,
            step_phase: 10.0,
            step_dt: None,
            quantum: true,
            echo: false,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub gnuplot: bool,
    /// Trailing fraction of samples used for the plateau estimate.
    pub plateau_fraction: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            gnuplot: true,
            plateau_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub propagation: PropagationSection,
    pub output: OutputSection,
}

/// Configuration with every model-dependent default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub model: ModelChoice,
    pub gammas: [f64; 2],
    pub offset: f64,
    pub j_star: f64,
    pub hbar_list: Vec<f64>,
    pub delta_list: Vec<f64>,
    pub mode_dims: Option<Vec<usize>>,
    pub quad_points: usize,
    pub fd_step: Option<f64>,
    pub grid: GridSection,
    pub propagation: PropagationSection,
    pub output_dir: PathBuf,
    pub gnuplot: bool,
    pub plateau_fraction: f64,
    /// Defaults that are not taken from the source parameter set.
    pub non_reference_defaults: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> HarnessResult<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> HarnessResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn resolve(&self) -> HarnessResult<ResolvedConfig> {
        let m = &self.model;
        let kind = m.kind;
        let mut notes = Vec::new();
        let two_two = kind != ModelChoice::OneOne;
        let gammas = m
            .gammas
            .unwrap_or(if two_two { [1.0, 0.64] } else { [1.0, 0.6456] });
        let j_star = m.j_star.unwrap_or(match kind {
            ModelChoice::TwoTwoCase2 => 0.2,
            _ => 0.1,
        });
        let hbar_list = match &m.hbar_list {
            Some(l) => l.clone(),
            None if two_two => {
                notes.push("hbar = 0.1 default for the 2+2 models".to_string());
                vec![0.1]
            }
            None => vec![0.01],
        };
        let delta_list = m.delta_list.clone().unwrap_or(match kind {
            ModelChoice::TwoTwoCase2 => vec![0.02],
            _ => vec![0.04],
        });
        let output_dir = self
            .output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
        let resolved = ResolvedConfig {
            model: kind,
            gammas,
            offset: m.offset.unwrap_or(1.2),
            j_star,
            hbar_list,
            delta_list,
            mode_dims: m.mode_dims.clone().filter(|d| !d.is_empty()),
            quad_points: m.quad_points.unwrap_or(16),
            fd_step: m.fd_step,
            grid: self.grid.clone(),
            propagation: self.propagation.clone(),
            output_dir,
            gnuplot: self.output.gnuplot,
            plateau_fraction: self.output.plateau_fraction,
            non_reference_defaults: notes,
        };
        resolved.validate()?;
        Ok(resolved)
    }
}

fn positive(name: &str, x: f64) -> HarnessResult<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(HarnessError::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

impl ResolvedConfig {
    pub fn validate(&self) -> HarnessResult<()> {
        if self.hbar_list.is_empty() {
            return Err(HarnessError::Config("hbar_list must not be empty".into()));
        }
        if self.delta_list.is_empty() {
            return Err(HarnessError::Config("delta_list must not be empty".into()));
        }
        for &h in &self.hbar_list {
            positive("hbar", h)?;
        }
        for &d in &self.delta_list {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(HarnessError::Config(format!("delta must be nonnegative, got {d}")));
            }
        }
        positive("j_star", self.j_star)?;
        positive("gamma", self.gammas[0])?;
        positive("gamma", self.gammas[1])?;
        if !self.offset.is_finite() {
            return Err(HarnessError::Config("offset must be finite".into()));
        }
        if let Some(dims) = &self.mode_dims {
            if dims.len() != self.model.n_modes() {
                return Err(HarnessError::Config(format!(
                    "mode_dims needs {} entries for {}, got {}",
                    self.model.n_modes(),
                    self.model.as_str(),
                    dims.len()
                )));
            }
            if dims.iter().any(|&d| d < 2) {
                return Err(HarnessError::Config("every mode dimension must be at least 2".into()));
            }
        }
        if self.quad_points < 3 {
            return Err(HarnessError::Config("quad_points must be at least 3".into()));
        }
        if let Some(h) = self.fd_step {
            positive("fd_step", h)?;
        }
        positive("scaled_t_max", self.grid.scaled_t_max)?;
        if self.grid.samples < 2 {
            return Err(HarnessError::Config("samples must be at least 2".into()));
        }
        if self.grid.spacing == Spacing::Log {
            positive("log_start", self.grid.log_start)?;
            if self.grid.log_start >= self.grid.scaled_t_max {
                return Err(HarnessError::Config("log_start must be below scaled_t_max".into()));
            }
        }
        let p = &self.propagation;
        if p.krylov_dim < 4 {
            return Err(HarnessError::Config("krylov_dim must be at least 4".into()));
        }
        positive("target_error", p.target_error)?;
        positive("step_phase", p.step_phase)?;
        if let Some(dt) = p.step_dt {
            positive("step_dt", dt)?;
        }
        if !(self.plateau_fraction > 0.0 && self.plateau_fraction <= 1.0) {
            return Err(HarnessError::Config("plateau_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Sample points in units of `δt`, starting at 0.
    pub fn scaled_times(&self) -> Vec<f64> {
        let g = &self.grid;
        let n = g.samples;
        match g.spacing {
            Spacing::Linear => (0..n)
                .map(|k| g.scaled_t_max * k as f64 / (n - 1) as f64)
                .collect(),
            Spacing::Log => {
                let (a, b) = (g.log_start.ln(), g.scaled_t_max.ln());
                std::iter::once(0.0)
                    .chain((0..n - 1).map(|k| {
                        if n == 2 {
                            g.scaled_t_max
                        } else {
                            (a + (b - a) * k as f64 / (n - 2) as f64).exp()
                        }
                    }))
                    .collect()
            }
        }
    }

    /// Cartesian product `hbar_list × delta_list`, ħ-major.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.hbar_list
            .iter()
            .flat_map(|&h| self.delta_list.iter().map(move |&d| (h, d)))
            .collect()
    }
}
