//! Product coherent-state initial conditions and their action-space statistics.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{SpaceConfig, StateVector};

/// Largest Poisson weight allowed beyond the truncation.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Weight above level `N - 5` that triggers a truncation warning.
pub const MARGIN_WARNING: f64 = 1e-8;

/// Coherent state `|α⟩` centred on the classical action `j*`, with `α = √(j*/ħ)` real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentSpec {
    pub j_star: f64,
    pub hbar: f64,
}

impl CoherentSpec {
    pub fn new(j_star: f64, hbar: f64) -> Result<Self> {
        if !(j_star >= 0.0 && j_star.is_finite()) {
            return Err(Error::Domain(format!("j* must be nonnegative, got {j_star}")));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::Domain(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { j_star, hbar })
    }

    pub fn alpha(&self) -> f64 {
        (self.j_star / self.hbar).sqrt()
    }

    pub fn mean_occupation(&self) -> f64 {
        self.j_star / self.hbar
    }

    /// Action-space squeezing `Λ = 1/(2j*)`.
    pub fn squeezing(&self) -> f64 {
        1.0 / (2.0 * self.j_star)
    }
}

/// Default Fock truncation: `⌈⟨n⟩ + 8√⟨n⟩⌉ + 4`.
pub fn default_mode_dim(j_star: f64, hbar: f64) -> usize {
    let mean = j_star / hbar;
    ((mean + 8.0 * mean.sqrt()).ceil() as usize + 4).max(2)
}

/// Rough count of action eigenstates covered by a coherent packet, `√(8j*/ħ)`.
pub fn n_eff_estimate(j_star: f64, hbar: f64) -> f64 {
    (8.0 * j_star / hbar).sqrt()
}

/// Poisson weights `e^{-μ} μⁿ / n!` for `n < len`, by recurrence.
fn poisson_weights(mean: f64, len: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(len);
    if len == 0 {
        return w;
    }
    // log-space start keeps large means from underflowing at n = 0
    let mode = mean.floor() as usize;
    let log_pmf = |n: usize| -> f64 { -mean + n as f64 * mean.ln() - ln_factorial(n) };
    if mean == 0.0 {
        w.push(1.0);
        w.resize(len, 0.0);
        return w;
    }
    let anchor = mode.min(len - 1);
    let mut vals = vec![0.0; len];
    vals[anchor] = log_pmf(anchor).exp();
    for n in (0..anchor).rev() {
        vals[n] = vals[n + 1] * (n + 1) as f64 / mean;
    }
    for n in anchor + 1..len {
        vals[n] = vals[n - 1] * mean / n as f64;
    }
    w.extend(vals);
    w
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Poisson probability of `n ≥ dim`.
fn poisson_tail(mean: f64, dim: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut term = (-mean + dim as f64 * mean.ln() - ln_factorial(dim)).exp();
    let mut sum = 0.0;
    let mut n = dim;
    loop {
        sum += term;
        n += 1;
        term *= mean / n as f64;
        if (n as f64) > mean && term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Smallest truncation whose Poisson tail is below [`TAIL_TOLERANCE`].
pub fn minimal_mode_dim(mean: f64) -> usize {
    let mut dim = 2;
    while poisson_tail(mean, dim) >= TAIL_TOLERANCE {
        dim += 1;
    }
    dim
}

/// Single-mode coherent state `e^{αa⁺ − α*a}|0⟩` on `dim` Fock levels.
pub fn coherent_state(spec: &CoherentSpec, dim: usize) -> Result<StateVector> {
    let space = SpaceConfig::new(vec![dim])?;
    let mean = spec.mean_occupation();
    let tail = poisson_tail(mean, dim);
    if tail >= TAIL_TOLERANCE {
        return Err(Error::Truncation {
            dim,
            tail,
            suggested: minimal_mode_dim(mean),
        });
    }
    let amps = poisson_weights(mean, dim)
        .into_iter()
        .map(|p| Complex64::new(p.sqrt(), 0.0))
        .collect();
    StateVector::normalized(amps, space)
}

/// Kronecker product of single-mode states, mode 0 slowest.
pub fn product_state(factors: &[StateVector]) -> Result<StateVector> {
    if factors.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    let dims: Vec<usize> = factors
        .iter()
        .flat_map(|f| f.space().mode_dims().iter().copied())
        .collect();
    let space = SpaceConfig::new(dims)?;
    let mut amps = vec![Complex64::new(1.0, 0.0)];
    for f in factors {
        amps = amps
            .iter()
            .flat_map(|&a| f.amplitudes().iter().map(move |&b| a * b))
            .collect();
    }
    StateVector::normalized(amps, space)
}

/// Marginal Fock-level distribution of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDensity {
    pub probabilities: Vec<f64>,
    pub participation_ratio: f64,
}

pub fn action_density(state: &StateVector, mode: usize) -> Result<ActionDensity> {
    let space = state.space();
    if mode >= space.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: space.n_modes(),
            found: mode,
        });
    }
    let mut p = vec![0.0; space.mode_dims()[mode]];
    for (i, a) in state.amplitudes().iter().enumerate() {
        p[space.occupation_of(i, mode)] += a.norm_sqr();
    }
    let total: f64 = p.iter().sum();
    for x in &mut p {
        *x /= total;
    }
    let participation_ratio = 1.0 / p.iter().map(|x| x * x).sum::<f64>();
    Ok(ActionDensity {
        probabilities: p,
        participation_ratio,
    })
}

/// Per-mode probability above level `N - 5`; entries over [`MARGIN_WARNING`]
/// mean the truncation is tight.
pub fn truncation_margin(state: &StateVector) -> Vec<f64> {
    (0..state.space().n_modes())
        .map(|mode| {
            let density = action_density(state, mode).expect("mode in range");
            let cut = density.probabilities.len().saturating_sub(5);
            density.probabilities[cut..].iter().sum()
        })
        .collect()
}
