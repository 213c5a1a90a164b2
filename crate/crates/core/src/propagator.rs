//! Time evolution `ψ(t) = exp(−iHt/ħ) ψ₀` for time-independent sparse `H`.
//!
//! Two schemes are available: a Lanczos (Krylov) approximation of the
//! exponential action with adaptive step halving, and a Chebyshev expansion
//! over Gershgorin spectral bounds. ħ is always an explicit argument.
//!
//! The echo evolution replaces `H` by `δ·V̄`, where `V̄` is the part of `V`
//! that commutes with a diagonal `H₀`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{inner, norm, SparseOperator, StateVector};
use crate::model::ModelSpec;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Allowed norm drift of a single step before renormalization.
pub const NORM_DRIFT_LIMIT: f64 = 1e-9;

/// Relative tolerance on `H - H†`.
pub const HERMITIAN_CHECK: f64 = 1e-12;

const MIN_STEP_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Krylov,
    Chebyshev,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationConfig {
    pub method: Method,
    /// Initial (and largest) time step.
    pub step_dt: f64,
    pub krylov_dim: usize,
    pub target_error_per_step: f64,
    pub renormalize_each_step: bool,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            method: Method::Krylov,
            step_dt: 0.1,
            krylov_dim: 30,
            target_error_per_step: 1e-10,
            renormalize_each_step: true,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_dt > 0.0 && self.step_dt.is_finite()) {
            return Err(Error::Domain(format!("step_dt must be positive, got {}", self.step_dt)));
        }
        if self.krylov_dim < 4 {
            return Err(Error::Domain(format!(
                "krylov_dim must be at least 4, got {}",
                self.krylov_dim
            )));
        }
        if !(self.target_error_per_step > 0.0) {
            return Err(Error::Domain("target_error_per_step must be positive".into()));
        }
        Ok(())
    }

    /// A step for which the Krylov/Chebyshev phase per step is about `phase`
    /// radians given the spectral half-width of `h`.
    pub fn auto_step(h: &SparseOperator, hbar: f64, phase: f64) -> f64 {
        let (lo, hi) = h.gershgorin_bounds();
        let half_width = 0.5 * (hi - lo);
        if half_width <= 0.0 {
            1.0
        } else {
            phase * hbar / half_width
        }
    }
}

/// Strictly increasing nonnegative sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    sample_times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(sample_times: Vec<f64>) -> Result<Self> {
        if sample_times.is_empty() {
            return Err(Error::Domain("time grid is empty".into()));
        }
        if sample_times[0] < 0.0 || !sample_times.iter().all(|t| t.is_finite()) {
            return Err(Error::Domain("sample times must be finite and nonnegative".into()));
        }
        if sample_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("sample times must be strictly increasing".into()));
        }
        Ok(Self { sample_times })
    }

    /// `n` evenly spaced samples on `[t0, t1]`.
    pub fn linear(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Self::new(vec![t0]);
        }
        Self::new((0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.sample_times
    }

    pub fn len(&self) -> usize {
        self.sample_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_times.is_empty()
    }
}

/// Bookkeeping of a propagation run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvolutionReport {
    pub steps: usize,
    pub rejected_steps: usize,
    pub matvecs: usize,
    pub max_norm_drift: f64,
    pub max_error_estimate: f64,
}

pub fn check_hermitian(h: &SparseOperator) -> Result<()> {
    let scale = h.entries().map(|(_, _, v)| v.norm()).fold(0.0, f64::max).max(1.0);
    let defect = h.hermiticity_defect();
    if defect > HERMITIAN_CHECK * scale {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// `ψ(t_k) ≈ exp(−iHt_k/ħ) ψ₀` for every grid time.
pub fn evolve(
    h: &SparseOperator,
    hbar: f64,
    psi0: &StateVector,
    grid: &TimeGrid,
    cfg: &PropagationConfig,
) -> Result<Vec<StateVector>> {
    evolve_with_report(h, hbar, psi0, grid, cfg).map(|(states, _)| states)
}

pub fn evolve_with_report(
    h: &SparseOperator,
    hbar: f64,
    psi0: &StateVector,
    grid: &TimeGrid,
    cfg: &PropagationConfig,
) -> Result<(Vec<StateVector>, EvolutionReport)> {
    let mut out = Vec::with_capacity(grid.len());
    let report = evolve_observed(h, hbar, psi0, grid, cfg, |_, psi, report| {
        out.push(StateVector::with_tolerance(
            psi.to_vec(),
            psi0.space().clone(),
            NORM_DRIFT_LIMIT * (report.steps.max(1) as f64),
        )?);
        Ok(())
    })?;
    Ok((out, report))
}

/// Like [`evolve_with_report`] but hands each sampled state to `observe`
/// instead of storing it.
pub fn evolve_observed<F>(
    h: &SparseOperator,
    hbar: f64,
    psi0: &StateVector,
    grid: &TimeGrid,
    cfg: &PropagationConfig,
    mut observe: F,
) -> Result<EvolutionReport>
where
    F: FnMut(usize, &[Complex64], &EvolutionReport) -> Result<()>,
{
    cfg.validate()?;
    if !(hbar > 0.0 && hbar.is_finite()) {
        return Err(Error::Domain(format!("hbar must be positive, got {hbar}")));
    }
    if h.dim() != psi0.space().total_dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: psi0.space().total_dim(),
        });
    }
    check_hermitian(h)?;

    let mut stepper: Box<dyn Stepper> = match cfg.method {
        Method::Krylov => Box::new(KrylovStepper::new(h, hbar, cfg)),
        Method::Chebyshev => Box::new(ChebyshevStepper::new(h, hbar, cfg)),
    };

    let mut report = EvolutionReport::default();
    let mut psi = psi0.amplitudes().to_vec();
    let mut t = 0.0;
    let mut dt = cfg.step_dt;
    for (k, &target) in grid.times().iter().enumerate() {
        while t < target {
            let remaining = target - t;
            let tau = dt.min(remaining);
            match stepper.step(&psi, tau, &mut report) {
                Ok((next, err)) => {
                    if err > cfg.target_error_per_step {
                        report.rejected_steps += 1;
                        dt = tau * 0.5;
                        if dt < cfg.step_dt * MIN_STEP_FRACTION {
                            return Err(Error::Propagation(format!(
                                "step size collapsed below {dt:e} at t = {t}"
                            )));
                        }
                        continue;
                    }
                    report.max_error_estimate = report.max_error_estimate.max(err);
                    psi = next;
                    let n = norm(&psi);
                    let drift = (n - 1.0).abs();
                    report.max_norm_drift = report.max_norm_drift.max(drift);
                    if drift > NORM_DRIFT_LIMIT {
                        return Err(Error::Propagation(format!(
                            "norm drift {drift:e} exceeds {NORM_DRIFT_LIMIT:e} at t = {t}"
                        )));
                    }
                    if cfg.renormalize_each_step {
                        psi.iter_mut().for_each(|z| *z /= n);
                    }
                    report.steps += 1;
                    t = if tau == remaining { target } else { t + tau };
                    // recover towards the configured step after a rejection
                    if err < cfg.target_error_per_step * 1e-3 && dt < cfg.step_dt {
                        dt = (dt * 1.5).min(cfg.step_dt);
                    }
                }
                Err(e) => {
                    report.rejected_steps += 1;
                    dt = tau * 0.5;
                    if dt < cfg.step_dt * MIN_STEP_FRACTION {
                        return Err(e);
                    }
                }
            }
        }
        observe(k, &psi, &report)?;
    }
    Ok(report)
}

trait Stepper {
    /// Returns `exp(−iHτ/ħ)ψ` and an estimate of the local error.
    fn step(
        &mut self,
        psi: &[Complex64],
        tau: f64,
        report: &mut EvolutionReport,
    ) -> Result<(Vec<Complex64>, f64)>;
}

struct KrylovStepper<'a> {
    h: &'a SparseOperator,
    hbar: f64,
    m: usize,
    basis: Vec<Vec<Complex64>>,
    w: Vec<Complex64>,
}

impl<'a> KrylovStepper<'a> {
    fn new(h: &'a SparseOperator, hbar: f64, cfg: &PropagationConfig) -> Self {
        let m = cfg.krylov_dim.min(h.dim().max(1));
        Self {
            h,
            hbar,
            m,
            basis: Vec::with_capacity(m + 1),
            w: vec![ZERO; h.dim()],
        }
    }
}

impl Stepper for KrylovStepper<'_> {
    fn step(
        &mut self,
        psi: &[Complex64],
        tau: f64,
        report: &mut EvolutionReport,
    ) -> Result<(Vec<Complex64>, f64)> {
        let dim = psi.len();
        let beta0 = norm(psi);
        if beta0 == 0.0 {
            return Ok((psi.to_vec(), 0.0));
        }
        self.basis.clear();
        self.basis.push(psi.iter().map(|z| z / beta0).collect());

        let mut alpha = Vec::with_capacity(self.m);
        let mut beta = Vec::with_capacity(self.m);
        let breakdown_tol = 1e-13;
        let mut residual = 0.0;
        for j in 0..self.m {
            self.h.apply_into(&self.basis[j], &mut self.w)?;
            report.matvecs += 1;
            let a = inner(&self.basis[j], &self.w).re;
            alpha.push(a);
            // full reorthogonalization, twice for stability
            for _ in 0..2 {
                for v in &self.basis {
                    let proj = inner(v, &self.w);
                    for (wi, vi) in self.w.iter_mut().zip(v) {
                        *wi -= proj * vi;
                    }
                }
            }
            let b = norm(&self.w);
            if !b.is_finite() {
                return Err(Error::Propagation("Lanczos produced non-finite vector".into()));
            }
            if b < breakdown_tol * (a.abs() + 1.0) {
                // invariant subspace: the projection is exact
                residual = 0.0;
                break;
            }
            if j + 1 == self.m {
                residual = b;
                break;
            }
            beta.push(b);
            self.basis.push(self.w.iter().map(|z| z / b).collect());
        }

        let k = alpha.len();
        let t_mat = DMatrix::from_fn(k, k, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t_mat);
        let phase = tau / self.hbar;
        // y = Q exp(−iΛτ/ħ) Qᵀ e₁
        let coeffs: DVector<Complex64> = DVector::from_fn(k, |r, _| {
            (0..k)
                .map(|s| {
                    let q0 = eig.eigenvectors[(0, s)];
                    let qr = eig.eigenvectors[(r, s)];
                    Complex64::from_polar(qr * q0, -eig.eigenvalues[s] * phase)
                })
                .sum()
        });
        let err = beta0 * residual * coeffs[k - 1].norm();

        let mut out = vec![ZERO; dim];
        for (c, v) in coeffs.iter().zip(&self.basis) {
            let c = c * beta0;
            for (o, vi) in out.iter_mut().zip(v) {
                *o += c * vi;
            }
        }
        Ok((out, err))
    }
}

struct ChebyshevStepper<'a> {
    h: &'a SparseOperator,
    hbar: f64,
    centre: f64,
    radius: f64,
    tol: f64,
}

impl<'a> ChebyshevStepper<'a> {
    fn new(h: &'a SparseOperator, hbar: f64, cfg: &PropagationConfig) -> Self {
        let (lo, hi) = h.gershgorin_bounds();
        // small padding keeps the scaled spectrum strictly inside [-1, 1]
        let pad = 1e-8 * (hi - lo).abs().max(1.0);
        Self {
            h,
            hbar,
            centre: 0.5 * (hi + lo),
            radius: 0.5 * (hi - lo) + pad,
            tol: cfg.target_error_per_step,
        }
    }

    /// `H̃x = (H − c)x / r`.
    fn scaled_apply(&self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        self.h.apply_into(x, y)?;
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = (*yi - self.centre * xi) / self.radius;
        }
        Ok(())
    }
}

impl Stepper for ChebyshevStepper<'_> {
    fn step(
        &mut self,
        psi: &[Complex64],
        tau: f64,
        report: &mut EvolutionReport,
    ) -> Result<(Vec<Complex64>, f64)> {
        let x = self.radius * tau / self.hbar;
        let bessel = bessel_j_sequence(x, self.tol * 1e-3);
        let n_terms = bessel.len();
        let global = Complex64::from_polar(1.0, -self.centre * tau / self.hbar);

        let dim = psi.len();
        let mut prev = psi.to_vec();
        let mut out: Vec<Complex64> = prev.iter().map(|z| z * bessel[0]).collect();
        if n_terms == 1 {
            return Ok((out.into_iter().map(|z| z * global).collect(), 0.0));
        }
        let mut cur = vec![ZERO; dim];
        self.scaled_apply(&prev, &mut cur)?;
        report.matvecs += 1;
        let mut minus_i_pow = Complex64::new(0.0, -1.0);
        for (o, c) in out.iter_mut().zip(&cur) {
            *o += 2.0 * bessel[1] * minus_i_pow * c;
        }
        let mut next = vec![ZERO; dim];
        for jk in bessel.iter().skip(2) {
            self.scaled_apply(&cur, &mut next)?;
            report.matvecs += 1;
            minus_i_pow *= Complex64::new(0.0, -1.0);
            let coeff = 2.0 * jk * minus_i_pow;
            for ((nx, pv), o) in next.iter_mut().zip(&prev).zip(out.iter_mut()) {
                *nx = 2.0 * *nx - pv;
                *o += coeff * *nx;
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
        }
        let err = 2.0 * bessel[n_terms - 1].abs() * norm(psi);
        Ok((out.into_iter().map(|z| z * global).collect(), err))
    }
}

/// `J_0(x), …, J_K(x)` for `x ≥ 0`, truncated once the terms beyond `x`
/// drop below `cutoff`. Miller's backward recurrence normalized with
/// `J_0 + 2 Σ J_2k = 1`.
pub fn bessel_j_sequence(x: f64, cutoff: f64) -> Vec<f64> {
    if x == 0.0 {
        return vec![1.0];
    }
    let start = (x + 30.0 + 12.0 * x.cbrt()).ceil() as usize;
    let start = start + start % 2;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = 2.0 * k as f64 / x * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm: f64 = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    for v in &mut vals {
        *v /= norm;
    }
    let mut keep = vals.len();
    for k in (0..vals.len()).rev() {
        if (k as f64) < x || vals[k].abs() > cutoff {
            keep = k + 1;
            break;
        }
    }
    vals.truncate(keep.max(2));
    vals
}

/// Time average of `V` under a diagonal `H₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalAverage {
    pub vbar: SparseOperator,
    /// Off-diagonal coupled pairs `(r, c)` with `E_r ≈ E_c` among the weighted states.
    pub degenerate_pairs: Vec<(usize, usize)>,
}

/// Infinite-time average of `V` under `H₀`: the entries of `V` that connect
/// equal `H₀` energies. For nondegenerate `H₀` this is the diagonal of `V`.
///
/// `weights`, when given, restricts the degeneracy report to basis states
/// whose weight exceeds `weight_floor`.
pub fn diagonal_average(
    v: &SparseOperator,
    h0: &SparseOperator,
    weights: Option<(&[f64], f64)>,
) -> Result<DiagonalAverage> {
    if v.dim() != h0.dim() {
        return Err(Error::DimensionMismatch {
            expected: h0.dim(),
            found: v.dim(),
        });
    }
    if !h0.is_diagonal() {
        return Err(Error::Domain("H0 must be diagonal in the Fock basis".into()));
    }
    let energies: Vec<f64> = h0.diagonal().iter().map(|z| z.re).collect();
    let scale = energies.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let tol = 1e-10 * scale;

    let mut degenerate_pairs = Vec::new();
    let mut kept = Vec::new();
    for (r, c, val) in v.entries() {
        if (energies[r] - energies[c]).abs() <= tol {
            kept.push((r, c, val));
            if r < c {
                let relevant = match weights {
                    Some((w, floor)) => w[r] > floor || w[c] > floor,
                    None => true,
                };
                if relevant {
                    degenerate_pairs.push((r, c));
                }
            }
        }
    }
    if !degenerate_pairs.is_empty() {
        log::warn!(
            "H0 has {} degenerate coupled pairs; time average is block diagonal",
            degenerate_pairs.len()
        );
    }
    let vbar = SparseOperator::from_triplets(v.dim(), kept)?.into_hermitian(HERMITIAN_CHECK)?;
    Ok(DiagonalAverage {
        vbar,
        degenerate_pairs,
    })
}

/// Evolution under the effective echo Hamiltonian `δ·V̄` alone.
pub fn echo_evolve(
    model: &ModelSpec,
    psi0: &StateVector,
    grid: &TimeGrid,
    cfg: &PropagationConfig,
) -> Result<Vec<StateVector>> {
    let weights: Vec<f64> = psi0.amplitudes().iter().map(|z| z.norm_sqr()).collect();
    let avg = diagonal_average(&model.v, &model.h0, Some((&weights, 1e-12)))?;
    if avg.vbar.is_diagonal() {
        let phases: Vec<f64> = avg.vbar.diagonal().iter().map(|z| z.re).collect();
        let factor = model.delta / model.hbar;
        grid.times()
            .iter()
            .map(|&t| {
                let amps = psi0
                    .amplitudes()
                    .iter()
                    .zip(&phases)
                    .map(|(a, e)| a * Complex64::from_polar(1.0, -factor * t * e))
                    .collect();
                StateVector::new(amps, psi0.space().clone())
            })
            .collect()
    } else {
        let heff = avg.vbar.scaled(Complex64::new(model.delta, 0.0));
        evolve(&heff, model.hbar, psi0, grid, cfg)
    }
}
