//! Single runs and sweeps.

use std::time::Instant;

use log::{info, warn};
use purity_core::entanglement::{purity_of, Bipartition};
use purity_core::fock::SpaceConfig;
use purity_core::model::{build_1x1, build_2x2, total_h, ModelSpec, OneOneParams, TwoTwoParams};
use purity_core::propagator::{echo_evolve, evolve_observed, EvolutionReport, PropagationConfig, TimeGrid};
use purity_core::semiclassics::{
    averaged_coupling, closed_form, default_fd_step, mixed_hessian, purity_prediction, spectral_norm,
    u_matrix, validity_window, PacketSpec, UMatrix,
};
use purity_core::states::{
    coherent_state, default_mode_dim, n_eff_estimate, product_state, truncation_margin, CoherentSpec,
    MARGIN_WARNING,
};
use purity_core::StateVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{summarize, Curves, Summary};
use crate::config::{ModelChoice, ResolvedConfig};
use crate::error::{HarnessError, HarnessResult};

/// Which channels a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Channels {
    pub quantum: bool,
    pub echo: bool,
}

impl Channels {
    pub fn from_config(cfg: &ResolvedConfig) -> Self {
        Self {
            quantum: cfg.propagation.quantum,
            echo: cfg.propagation.echo,
        }
    }

    pub fn semiclassical_only() -> Self {
        Self {
            quantum: false,
            echo: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Semiclassics {
    pub hessian: Vec<Vec<f64>>,
    pub hessian_norm: f64,
    pub u_eigenvalues: Vec<f64>,
    pub u_rank: usize,
    pub u_trace: f64,
    pub validity_t_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub semiclassical_seconds: f64,
    pub quantum_seconds: f64,
    pub echo_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportSummary {
    pub steps: usize,
    pub rejected_steps: usize,
    pub matvecs: usize,
    pub max_norm_drift: f64,
    pub max_error_estimate: f64,
    pub step_dt: f64,
}

/// Everything produced for one `(ħ, δ)` cell.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub label: String,
    pub model: ModelChoice,
    pub hbar: f64,
    pub delta: f64,
    pub mode_dims: Vec<usize>,
    pub n_eff: f64,
    pub curves: Curves,
    pub semiclassics: Semiclassics,
    pub summary: Summary,
    pub truncation_margin: Vec<f64>,
    pub propagation: Option<ReportSummary>,
    pub warnings: Vec<String>,
    pub timing: Timing,
}

pub fn cell_label(model: ModelChoice, hbar: f64, delta: f64) -> String {
    format!("{}_hbar{}_delta{}", model.as_str(), hbar, delta)
}

fn numerical(label: &str) -> impl Fn(purity_core::Error) -> HarnessError + '_ {
    move |source| HarnessError::Numerical {
        cell: label.to_string(),
        source,
    }
}

pub fn mode_dims(cfg: &ResolvedConfig, hbar: f64) -> Vec<usize> {
    cfg.mode_dims
        .clone()
        .unwrap_or_else(|| vec![default_mode_dim(cfg.j_star, hbar); cfg.model.n_modes()])
}

pub fn build_model(cfg: &ResolvedConfig, hbar: f64, delta: f64) -> purity_core::Result<ModelSpec> {
    let space = SpaceConfig::new(mode_dims(cfg, hbar))?;
    let [g1, g2] = cfg.gammas;
    match cfg.model {
        ModelChoice::OneOne => build_1x1(
            &OneOneParams {
                gamma_a: g1,
                gamma_b: g2,
                delta_offset: cfg.offset,
                hbar,
                delta,
            },
            &space,
        ),
        _ => {
            let purity_core::model::ModelKind::TwoTwo(case) = cfg.model.kind() else {
                unreachable!()
            };
            build_2x2(
                &TwoTwoParams {
                    gamma_1: g1,
                    gamma_2: g2,
                    delta_offset: cfg.offset,
                    hbar,
                    delta,
                    coupling_case: case,
                },
                &space,
            )
        }
    }
}

/// Full semiclassical chain: torus average, mixed Hessian, `u`.
pub fn semiclassical_u(
    model: &ModelSpec,
    cfg: &ResolvedConfig,
) -> purity_core::Result<(UMatrix, nalgebra::DMatrix<f64>)> {
    let j_star = vec![cfg.j_star; model.space.n_modes()];
    let vbar = averaged_coupling(&model.classical_coupling, cfg.quad_points);
    let step = cfg.fd_step.unwrap_or_else(|| default_fd_step(&j_star));
    let hess = mixed_hessian(&vbar, &j_star, model.d_a, step)?;
    let packet = PacketSpec::coherent(j_star, model.d_a)?;
    Ok((u_matrix(&packet, &hess)?, hess))
}

/// Physical sample times for the configured grid.
pub fn physical_times(cfg: &ResolvedConfig, delta: f64) -> Vec<f64> {
    let scale = if delta > 0.0 { 1.0 / delta } else { 1.0 };
    cfg.scaled_times().into_iter().map(|s| s * scale).collect()
}

pub fn initial_state(model: &ModelSpec, j_star: f64) -> purity_core::Result<StateVector> {
    let spec = CoherentSpec::new(j_star, model.hbar)?;
    let factors = model
        .space
        .mode_dims()
        .iter()
        .map(|&d| coherent_state(&spec, d))
        .collect::<purity_core::Result<Vec<_>>>()?;
    product_state(&factors)
}

pub fn run_experiment(cfg: &ResolvedConfig, hbar: f64, delta: f64) -> HarnessResult<RunRecord> {
    run_channels(cfg, hbar, delta, Channels::from_config(cfg))
}

pub fn run_channels(
    cfg: &ResolvedConfig,
    hbar: f64,
    delta: f64,
    channels: Channels,
) -> HarnessResult<RunRecord> {
    let label = cell_label(cfg.model, hbar, delta);
    let err = numerical(&label);
    let start = Instant::now();
    let mut warnings: Vec<String> = cfg.non_reference_defaults.clone();

    let model = build_model(cfg, hbar, delta).map_err(&err)?;
    let t = physical_times(cfg, delta);
    let delta_t: Vec<f64> = t.iter().map(|x| x * delta).collect();

    let (u, hess) = semiclassical_u(&model, cfg).map_err(&err)?;
    let hess_norm = spectral_norm(&hess);
    let t_valid = validity_window(hess_norm, delta, hbar);
    let t_end = *t.last().expect("grid has at least two samples");
    if t_end > t_valid {
        warnings.push(format!(
            "grid extends to t = {t_end} beyond the stationary-phase window t_max = {t_valid:.6}"
        ));
    }
    let semiclassical: Vec<f64> = t.iter().map(|&x| purity_prediction(&u, delta, x)).collect();
    let closed: Vec<f64> = delta_t
        .iter()
        .map(|&x| closed_form(cfg.model.kind(), cfg.j_star, x))
        .collect();
    let semiclassical_seconds = start.elapsed().as_secs_f64();

    let psi0 = initial_state(&model, cfg.j_star).map_err(&err)?;
    let margin = truncation_margin(&psi0);
    if margin.iter().any(|&m| m > MARGIN_WARNING) {
        warnings.push(format!(
            "initial state has weight {:.3e} in the top five levels of some mode",
            margin.iter().cloned().fold(0.0, f64::max)
        ));
    }
    let part = Bipartition::new(&model.space, model.d_a).map_err(&err)?;
    let grid = TimeGrid::new(t.clone()).map_err(&err)?;

    let mut quantum = None;
    let mut report_summary = None;
    let q_start = Instant::now();
    if channels.quantum {
        let h = total_h(&model).map_err(&err)?;
        let step_dt = cfg
            .propagation
            .step_dt
            .unwrap_or_else(|| PropagationConfig::auto_step(&h, hbar, cfg.propagation.step_phase));
        let pcfg = PropagationConfig {
            method: cfg.propagation.method.into(),
            step_dt,
            krylov_dim: cfg.propagation.krylov_dim,
            target_error_per_step: cfg.propagation.target_error,
            ..Default::default()
        };
        let mut values = vec![0.0; t.len()];
        let report: EvolutionReport = evolve_observed(&h, hbar, &psi0, &grid, &pcfg, |k, psi, _| {
            values[k] = purity_of(psi, &part)?;
            Ok(())
        })
        .map_err(&err)?;
        info!(
            "{label}: {} steps, {} matvecs in {:.2}s",
            report.steps,
            report.matvecs,
            q_start.elapsed().as_secs_f64()
        );
        report_summary = Some(ReportSummary {
            steps: report.steps,
            rejected_steps: report.rejected_steps,
            matvecs: report.matvecs,
            max_norm_drift: report.max_norm_drift,
            max_error_estimate: report.max_error_estimate,
            step_dt,
        });
        quantum = Some(values);
    }
    let quantum_seconds = q_start.elapsed().as_secs_f64();

    let e_start = Instant::now();
    let echo = if channels.echo {
        let pcfg = PropagationConfig {
            method: cfg.propagation.method.into(),
            step_dt: cfg.propagation.step_dt.unwrap_or(t_end.max(1.0) / 64.0),
            krylov_dim: cfg.propagation.krylov_dim,
            target_error_per_step: cfg.propagation.target_error,
            ..Default::default()
        };
        let states = echo_evolve(&model, &psi0, &grid, &pcfg).map_err(&err)?;
        Some(
            states
                .iter()
                .map(|s| purity_of(s.amplitudes(), &part))
                .collect::<purity_core::Result<Vec<_>>>()
                .map_err(&err)?,
        )
    } else {
        None
    };
    let echo_seconds = e_start.elapsed().as_secs_f64();

    for w in &warnings {
        warn!("{label}: {w}");
    }
    let curves = Curves {
        t,
        delta_t,
        quantum,
        echo,
        semiclassical: Some(semiclassical),
        closed_form: Some(closed),
    };
    let summary = summarize(&label, &curves, t_valid, cfg.plateau_fraction);
    let semiclassics = Semiclassics {
        hessian: hess.row_iter().map(|r| r.iter().copied().collect()).collect(),
        hessian_norm: hess_norm,
        u_eigenvalues: u.eigenvalues(),
        u_rank: u.rank,
        u_trace: u.trace,
        validity_t_max: t_valid,
    };
    Ok(RunRecord {
        label: label.clone(),
        model: cfg.model,
        hbar,
        delta,
        mode_dims: model.space.mode_dims().to_vec(),
        n_eff: n_eff_estimate(cfg.j_star, hbar),
        curves,
        semiclassics,
        summary,
        truncation_margin: margin,
        propagation: report_summary,
        warnings,
        timing: Timing {
            semiclassical_seconds,
            quantum_seconds,
            echo_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

/// Outcome of one sweep cell.
#[derive(Debug)]
pub struct CellOutcome {
    pub hbar: f64,
    pub delta: f64,
    pub result: HarnessResult<RunRecord>,
}

/// Runs every `(ħ, δ)` cell with at most `jobs` cells in flight (0 = all
/// cores). A failing cell does not stop the others; outcomes keep the cell
/// order of [`ResolvedConfig::cells`].
pub fn run_sweep_with(cfg: &ResolvedConfig, channels: Channels, jobs: usize) -> Vec<CellOutcome> {
    let cells = cfg.cells();
    let run = || {
        cells
            .par_iter()
            .map(|&(hbar, delta)| CellOutcome {
                hbar,
                delta,
                result: run_channels(cfg, hbar, delta, channels),
            })
            .collect::<Vec<_>>()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(run),
        Err(e) => {
            warn!("falling back to the global thread pool: {e}");
            run()
        }
    }
}

pub fn run_sweep(cfg: &ResolvedConfig) -> Vec<CellOutcome> {
    run_sweep_with(cfg, Channels::from_config(cfg), cfg.propagation.jobs)
}
