//! Semiclassical purity prediction for Gaussian wave packets.
//!
//! The chain is: classical coupling `v(j, θ)` → torus average `v̄(j)` →
//! mixed Hessian `W = ∂²v̄/∂j_A∂j_B` at the packet centre →
//! `u = Λ_A⁻¹ W Λ_B⁻¹ Wᵀ` → `I(t) = det(𝟙 + (δt)² u)^{-1/2}`.
//!
//! [`phase_space_purity_mc`] evaluates the underlying Gaussian phase-space
//! integral by sampling, without expanding the phase, and serves as an
//! independent check of the determinant formula.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CouplingCase, ModelKind};

/// Relative singular-value cutoff used for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Relative change of the Hessian under step halving that triggers a warning.
pub const RICHARDSON_WARNING: f64 = 1e-6;

pub const MIN_MC_SAMPLES: usize = 10_000;

const MC_CHUNKS: u64 = 64;

type CouplingFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// Classical coupling `v(j, θ)` on `d_A + d_B` degrees of freedom.
#[derive(Clone)]
pub struct ClassicalCoupling {
    pub d_a: usize,
    pub d_b: usize,
    f: Arc<CouplingFn>,
}

impl fmt::Debug for ClassicalCoupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClassicalCoupling")
            .field("d_a", &self.d_a)
            .field("d_b", &self.d_b)
            .finish_non_exhaustive()
    }
}

impl ClassicalCoupling {
    pub fn new<F>(d_a: usize, d_b: usize, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            d_a,
            d_b,
            f: Arc::new(f),
        }
    }

    pub fn dof(&self) -> usize {
        self.d_a + self.d_b
    }

    pub fn evaluate(&self, j: &[f64], theta: &[f64]) -> f64 {
        (self.f)(j, theta)
    }
}

/// Angle average of `v(j, ·)` on the uniform `n^d` tensor grid. Exact for
/// trigonometric polynomials whose degree in each angle is below `n`.
pub fn torus_average(v: &ClassicalCoupling, j: &[f64], quad_points_per_angle: usize) -> Result<f64> {
    let d = v.dof();
    if j.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: j.len(),
        });
    }
    if quad_points_per_angle < 3 {
        return Err(Error::Domain(format!(
            "need at least 3 quadrature points per angle, got {quad_points_per_angle}"
        )));
    }
    let n = quad_points_per_angle;
    let nodes: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
    let total = n.pow(d as u32);
    let mut theta = vec![0.0; d];
    let mut sum = 0.0;
    for flat in 0..total {
        let mut rem = flat;
        for slot in theta.iter_mut().rev() {
            *slot = nodes[rem % n];
            rem /= n;
        }
        sum += v.evaluate(j, &theta);
    }
    Ok(sum / total as f64)
}

/// `j ↦ v̄(j)` as a closure over [`torus_average`].
pub fn averaged_coupling(
    v: &ClassicalCoupling,
    quad_points_per_angle: usize,
) -> impl Fn(&[f64]) -> f64 + Send + Sync + Clone {
    let v = v.clone();
    move |j: &[f64]| torus_average(&v, j, quad_points_per_angle).expect("validated dimensions")
}

/// Default finite-difference step `1e-3 · max(|j*|, 1)`.
pub fn default_fd_step(j_star: &[f64]) -> f64 {
    1e-3 * j_star.iter().fold(1.0f64, |m, x| m.max(x.abs()))
}

fn mixed_fd<F: Fn(&[f64]) -> f64>(vbar: &F, j_star: &[f64], d_a: usize, h: f64) -> DMatrix<f64> {
    let d_b = j_star.len() - d_a;
    let mut j = j_star.to_vec();
    DMatrix::from_fn(d_a, d_b, |k, l| {
        let l = d_a + l;
        let mut eval = |sk: f64, sl: f64| {
            j[k] = j_star[k] + sk * h;
            j[l] = j_star[l] + sl * h;
            let val = vbar(&j);
            j[k] = j_star[k];
            j[l] = j_star[l];
            val
        };
        (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h * h)
    })
}

/// `W_kl = ∂²v̄ / ∂j_{A,k} ∂j_{B,l}` at `j*` by central differences.
///
/// The first `d_a` entries of `j_star` belong to subsystem A. Logs a warning
/// when halving the step moves the result by more than [`RICHARDSON_WARNING`].
pub fn mixed_hessian<F: Fn(&[f64]) -> f64>(
    vbar: &F,
    j_star: &[f64],
    d_a: usize,
    fd_step: f64,
) -> Result<DMatrix<f64>> {
    if d_a == 0 || d_a >= j_star.len() {
        return Err(Error::DimensionMismatch {
            expected: j_star.len(),
            found: d_a,
        });
    }
    let scale = j_star.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(fd_step > 0.0) || fd_step < 1e-12 * scale.max(f64::MIN_POSITIVE) || fd_step < 1e-150 {
        return Err(Error::StepUnderflow {
            step: fd_step,
            scale,
        });
    }
    let w = mixed_fd(vbar, j_star, d_a, fd_step);
    let w_half = mixed_fd(vbar, j_star, d_a, 0.5 * fd_step);
    let size = w.amax().max(w_half.amax());
    if size > 0.0 {
        let change = (&w - &w_half).amax() / size;
        if change > RICHARDSON_WARNING {
            log::warn!("mixed Hessian changed by {change:.2e} under step halving");
        }
    }
    Ok(w)
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let top = sv.max();
    if top <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * top).count()
}

/// Packet centre and action-space squeezing matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketSpec {
    pub j_star: Vec<f64>,
    pub lambda_a: DMatrix<f64>,
    pub lambda_b: DMatrix<f64>,
}

impl PacketSpec {
    pub fn new(j_star: Vec<f64>, lambda_a: DMatrix<f64>, lambda_b: DMatrix<f64>) -> Result<Self> {
        if !lambda_a.is_square() || !lambda_b.is_square() {
            return Err(Error::Domain("squeezing matrices must be square".into()));
        }
        if lambda_a.nrows() + lambda_b.nrows() != j_star.len() {
            return Err(Error::DimensionMismatch {
                expected: j_star.len(),
                found: lambda_a.nrows() + lambda_b.nrows(),
            });
        }
        for lam in [&lambda_a, &lambda_b] {
            let asym = (lam - lam.transpose()).amax();
            if asym > 1e-12 * lam.amax().max(1.0) {
                return Err(Error::Domain("squeezing matrix is not symmetric".into()));
            }
            if Cholesky::new(lam.clone()).is_none() {
                return Err(Error::Singular("squeezing matrix is not positive definite".into()));
            }
        }
        Ok(Self {
            j_star,
            lambda_a,
            lambda_b,
        })
    }

    /// Product of coherent states: `Λ = diag(1/(2j*_k))`.
    pub fn coherent(j_star: Vec<f64>, d_a: usize) -> Result<Self> {
        if j_star.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::Domain("coherent packet actions must be positive".into()));
        }
        let lam = |range: std::ops::Range<usize>| {
            DMatrix::from_diagonal(&DVector::from_iterator(
                range.len(),
                j_star[range].iter().map(|x| 1.0 / (2.0 * x)),
            ))
        };
        let (a, b) = (lam(0..d_a), lam(d_a..j_star.len()));
        Self::new(j_star, a, b)
    }

    pub fn d_a(&self) -> usize {
        self.lambda_a.nrows()
    }

    pub fn d_b(&self) -> usize {
        self.lambda_b.nrows()
    }

    /// The same packet with the roles of A and B exchanged.
    pub fn swapped(&self) -> Self {
        let d_a = self.d_a();
        let mut j = self.j_star[d_a..].to_vec();
        j.extend_from_slice(&self.j_star[..d_a]);
        Self {
            j_star: j,
            lambda_a: self.lambda_b.clone(),
            lambda_b: self.lambda_a.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UMatrix {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    pub trace: f64,
}

impl UMatrix {
    /// Eigenvalues (real parts), ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .matrix
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// `u = Λ_A⁻¹ W Λ_B⁻¹ Wᵀ`.
pub fn u_matrix(packet: &PacketSpec, hess: &DMatrix<f64>) -> Result<UMatrix> {
    if hess.nrows() != packet.d_a() || hess.ncols() != packet.d_b() {
        return Err(Error::DimensionMismatch {
            expected: packet.d_a() * packet.d_b(),
            found: hess.len(),
        });
    }
    let inv_a = packet
        .lambda_a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("Λ_A".into()))?;
    let inv_b = packet
        .lambda_b
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("Λ_B".into()))?;
    let matrix = inv_a * hess * inv_b * hess.transpose();
    let rank = numerical_rank(&matrix);
    let trace = matrix.trace();
    Ok(UMatrix {
        matrix,
        rank,
        trace,
    })
}

/// `I(t) = 1 / √det(𝟙 + (δt)² u)`.
///
/// Evaluated as `∏(1 + zλ)` over the eigenvalues of `u`: expanding the
/// determinant of `𝟙 + zu` directly cancels catastrophically once `zu` is large.
/// `u` is similar to a positive semidefinite matrix, so round-off below zero is
/// clamped.
pub fn purity_prediction(u: &UMatrix, delta: f64, t: f64) -> f64 {
    let z = (delta * t).powi(2);
    if z == 0.0 {
        return 1.0;
    }
    let log_det: f64 = u.eigenvalues().iter().map(|&l| (z * l.max(0.0)).ln_1p()).sum();
    (-0.5 * log_det).exp()
}

/// Small-`δt` expansion `1 − ½(δt)² tr u`.
pub fn linear_response(u: &UMatrix, delta: f64, t: f64) -> f64 {
    1.0 - 0.5 * (delta * t).powi(2) * u.trace
}

/// Power `r` of the asymptotic decay `I ≍ const·(δt)^{-r}`.
pub fn asymptotic_exponent(u: &UMatrix) -> usize {
    u.rank
}

/// Largest `t` with `δ t ‖W‖ < 1/ħ`; infinite for a vanishing Hessian.
pub fn validity_window(hess_norm: f64, delta: f64, hbar: f64) -> f64 {
    let denom = delta * hbar * hess_norm;
    if denom > 0.0 {
        1.0 / denom
    } else {
        f64::INFINITY
    }
}

/// Closed forms of the determinant formula for the reference models as a
/// function of `δt`, with all packet actions equal to `j_star`.
pub fn closed_form(kind: ModelKind, j_star: f64, delta_t: f64) -> f64 {
    match kind {
        ModelKind::OneOne => 1.0 / (1.0 + (8.0 * j_star * delta_t).powi(2)).sqrt(),
        ModelKind::TwoTwo(CouplingCase::CaseI) => 1.0 / (1.0 + (8.0 * j_star * delta_t).powi(2)),
        ModelKind::TwoTwo(CouplingCase::CaseII) => {
            1.0 / (1.0 + (16.0 * j_star * delta_t).powi(2)).sqrt()
        }
    }
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

fn sampler(lambda: &DMatrix<f64>, hbar: f64) -> Result<DMatrix<f64>> {
    // density ∝ exp(−x·Λx/ħ): covariance ħ/2 · Λ⁻¹
    let cov = lambda
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("squeezing matrix".into()))?
        * (0.5 * hbar);
    Cholesky::new(cov)
        .map(|c| c.l())
        .ok_or_else(|| Error::Singular("packet covariance".into()))
}

/// Phase-space purity integral
/// `⟨exp(−i(δt/ħ)Φ)⟩` with
/// `Φ = v̄(j_A, j_B) − v̄(j̃_A, j_B) + v̄(j̃_A, j̃_B) − v̄(j_A, j̃_B)`
/// for `j, j̃` drawn independently from the packet density.
///
/// Samples are split into fixed chunks, each with its own ChaCha stream, so
/// the result does not depend on the thread count.
pub fn phase_space_purity_mc<F>(
    vbar: &F,
    packet: &PacketSpec,
    hbar: f64,
    delta: f64,
    t: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::Domain(format!(
            "need at least {MIN_MC_SAMPLES} samples, got {n_samples}"
        )));
    }
    let d_a = packet.d_a();
    let d = packet.j_star.len();
    let chol_a = sampler(&packet.lambda_a, hbar)?;
    let chol_b = sampler(&packet.lambda_b, hbar)?;
    let k = delta * t / hbar;

    let per_chunk = n_samples.div_ceil(MC_CHUNKS as usize);
    let partial: Vec<(f64, f64, usize)> = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk as usize * per_chunk;
            let count = per_chunk.min(n_samples.saturating_sub(start));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let mut draw = |chol: &DMatrix<f64>, centre: &[f64], out: &mut [f64]| {
                let z = DVector::from_fn(chol.nrows(), |_, _| {
                    StandardNormal.sample(&mut rng)
                });
                let x = chol * z;
                for ((o, c), xi) in out.iter_mut().zip(centre).zip(x.iter()) {
                    *o = c + xi;
                }
            };
            let (mut s, mut s2) = (0.0, 0.0);
            let mut ja = vec![0.0; d_a];
            let mut jb = vec![0.0; d - d_a];
            let mut ta = vec![0.0; d_a];
            let mut tb = vec![0.0; d - d_a];
            let mut buf = vec![0.0; d];
            let mut eval = |a: &[f64], b: &[f64]| {
                buf[..d_a].copy_from_slice(a);
                buf[d_a..].copy_from_slice(b);
                vbar(&buf)
            };
            for _ in 0..count {
                draw(&chol_a, &packet.j_star[..d_a], &mut ja);
                draw(&chol_b, &packet.j_star[d_a..], &mut jb);
                draw(&chol_a, &packet.j_star[..d_a], &mut ta);
                draw(&chol_b, &packet.j_star[d_a..], &mut tb);
                let phi = eval(&ja, &jb) - eval(&ta, &jb) + eval(&ta, &tb) - eval(&ja, &tb);
                let c = (k * phi).cos();
                s += c;
                s2 += c * c;
            }
            (s, s2, count)
        })
        .collect();

    let (s, s2, n) = partial
        .iter()
        .fold((0.0, 0.0, 0usize), |acc, p| (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2));
    let nf = n as f64;
    let mean = s / nf;
    let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    let stderr = (var / nf).sqrt();
    if stderr > 0.01 {
        log::warn!("phase-space estimate has large standard error {stderr:.3e}");
    }
    Ok(McEstimate {
        mean,
        stderr,
        samples: n,
    })
}
