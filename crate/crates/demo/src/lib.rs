//! wasm-bindgen front end for the static page in `www/`.
//!
//! Each export returns a flat `Float64Array`; the page reshapes it into
//! columns. The plain-Rust functions underneath are what the tests call.

use purity_core::entanglement::{purity_of, Bipartition};
use purity_core::model::{build_1x1, build_2x2, total_h, CouplingCase, ModelKind, ModelSpec};
use purity_core::propagator::{evolve_observed, PropagationConfig, TimeGrid};
use purity_core::semiclassics::{
    averaged_coupling, closed_form, default_fd_step, mixed_hessian, phase_space_purity_mc,
    purity_prediction, u_matrix, PacketSpec, UMatrix,
};
use purity_core::states::{coherent_state, default_mode_dim, product_state, CoherentSpec};
use purity_core::{Error, OneOneParams, Result, SpaceConfig, TwoTwoParams};
use wasm_bindgen::prelude::*;

/// Largest Hilbert space the page may ask for.
pub const MAX_DIM: usize = 4096;

const J_STAR: f64 = 0.1;
const QUAD_POINTS: usize = 4;

fn kind_of(name: &str) -> Result<ModelKind> {
    match name {
        "one_one" => Ok(ModelKind::OneOne),
        "two_two_case1" => Ok(ModelKind::TwoTwo(CouplingCase::CaseI)),
        "two_two_case2" => Ok(ModelKind::TwoTwo(CouplingCase::CaseII)),
        other => Err(Error::Domain(format!("unknown model '{other}'"))),
    }
}

fn model(kind: ModelKind, hbar: f64, delta: f64, dim: usize) -> Result<ModelSpec> {
    match kind {
        ModelKind::OneOne => build_1x1(&OneOneParams::reference(hbar, delta), &SpaceConfig::new(vec![dim; 2])?),
        ModelKind::TwoTwo(case) => {
            build_2x2(&TwoTwoParams::reference(hbar, delta, case), &SpaceConfig::new(vec![dim; 4])?)
        }
    }
}

fn u_of(m: &ModelSpec, j_star: f64) -> Result<(PacketSpec, UMatrix)> {
    let j = vec![j_star; m.space.n_modes()];
    let vbar = averaged_coupling(&m.classical_coupling, QUAD_POINTS);
    let w = mixed_hessian(&vbar, &j, m.d_a, default_fd_step(&j))?;
    let packet = PacketSpec::coherent(j, m.d_a)?;
    let u = u_matrix(&packet, &w)?;
    Ok((packet, u))
}

fn grid(x_max: f64, samples: usize) -> Result<Vec<f64>> {
    if samples < 2 || !(x_max > 0.0 && x_max.is_finite()) {
        return Err(Error::Domain("need at least two samples and a positive range".into()));
    }
    Ok((0..samples).map(|k| x_max * k as f64 / (samples - 1) as f64).collect())
}

/// Rows `(δt, determinant prediction, closed form)`.
pub fn semiclassical_rows(kind: &str, j_star: f64, delta_t_max: f64, samples: usize) -> Result<Vec<[f64; 3]>> {
    let kind = kind_of(kind)?;
    // the classical coupling does not depend on ħ or the truncation
    let (_, u) = u_of(&model(kind, 1.0, 0.0, 2)?, j_star)?;
    Ok(grid(delta_t_max, samples)?
        .into_iter()
        .map(|x| [x, purity_prediction(&u, 1.0, x), closed_form(kind, j_star, x)])
        .collect())
}

/// Rows `(δt, quantum purity, determinant prediction)` for the 1+1 model.
pub fn quantum_rows(hbar: f64, delta: f64, delta_t_max: f64, samples: usize) -> Result<Vec<[f64; 3]>> {
    if !(delta > 0.0) {
        return Err(Error::Domain("delta must be positive".into()));
    }
    let dim = default_mode_dim(J_STAR, hbar);
    if dim * dim > MAX_DIM {
        return Err(Error::Domain(format!("{dim}² states exceed the demo limit of {MAX_DIM}")));
    }
    let m = model(ModelKind::OneOne, hbar, delta, dim)?;
    let (_, u) = u_of(&m, J_STAR)?;
    let h = total_h(&m)?;
    let spec = CoherentSpec::new(J_STAR, hbar)?;
    let psi0 = product_state(&[coherent_state(&spec, dim)?, coherent_state(&spec, dim)?])?;
    let part = Bipartition::new(&m.space, 1)?;

    let delta_t = grid(delta_t_max, samples)?;
    let times = TimeGrid::new(delta_t.iter().map(|x| x / delta).collect())?;
    let cfg = PropagationConfig {
        step_dt: PropagationConfig::auto_step(&h, hbar, 10.0),
        ..Default::default()
    };
    let mut rows = Vec::with_capacity(samples);
    evolve_observed(&h, hbar, &psi0, &times, &cfg, |k, psi, _| {
        let x = delta_t[k];
        rows.push([x, purity_of(psi, &part)?, purity_prediction(&u, 1.0, x)]);
        Ok(())
    })?;
    Ok(rows)
}

/// `(mean, standard error, determinant prediction)` of the phase-space
/// integral for the 1+1 model.
pub fn mc_estimate(hbar: f64, delta_t: f64, samples: usize, seed: u64) -> Result<[f64; 3]> {
    let m = model(ModelKind::OneOne, hbar, 1.0, 2)?;
    let (packet, u) = u_of(&m, J_STAR)?;
    let vbar = averaged_coupling(&m.classical_coupling, QUAD_POINTS);
    let est = phase_space_purity_mc(&vbar, &packet, hbar, 1.0, delta_t, samples, seed)?;
    Ok([est.mean, est.stderr, purity_prediction(&u, 1.0, delta_t)])
}

fn flatten(rows: Vec<[f64; 3]>) -> Vec<f64> {
    rows.into_iter().flatten().collect()
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn semiclassical_curve(kind: &str, j_star: f64, delta_t_max: f64, samples: usize) -> std::result::Result<Vec<f64>, JsError> {
    semiclassical_rows(kind, j_star, delta_t_max, samples).map(flatten).map_err(js)
}

#[wasm_bindgen]
pub fn quantum_curve(hbar: f64, delta: f64, delta_t_max: f64, samples: usize) -> std::result::Result<Vec<f64>, JsError> {
    quantum_rows(hbar, delta, delta_t_max, samples).map(flatten).map_err(js)
}

#[wasm_bindgen]
pub fn mc_check(hbar: f64, delta_t: f64, samples: usize, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    mc_estimate(hbar, delta_t, samples, seed as u64).map(|r| r.to_vec()).map_err(js)
}
