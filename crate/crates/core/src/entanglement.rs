//! Reduced density matrices and purity for contiguous bipartitions.
//!
//! For a pure state with amplitudes reshaped into the `dim_A × dim_B` matrix
//! `C`, `ρ_A = C C†` and the purity is `tr ρ_A² = ‖C C†‖²_F = ‖C† C‖²_F`. The
//! Gram matrix is always formed on the smaller side.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{SpaceConfig, StateVector};

/// Minimum number of samples in a plateau window.
pub const MIN_WINDOW: usize = 8;

/// Split of the mode list into `A` (leading modes) and `B` (the rest).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bipartition {
    pub d_a_modes: usize,
    pub d_b_modes: usize,
    pub dim_a: usize,
    pub dim_b: usize,
}

impl Bipartition {
    pub fn new(space: &SpaceConfig, d_a_modes: usize) -> Result<Self> {
        let n = space.n_modes();
        if d_a_modes == 0 || d_a_modes >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: d_a_modes,
            });
        }
        let dims = space.mode_dims();
        Ok(Self {
            d_a_modes,
            d_b_modes: n - d_a_modes,
            dim_a: dims[..d_a_modes].iter().product(),
            dim_b: dims[d_a_modes..].iter().product(),
        })
    }

    pub fn total_dim(&self) -> usize {
        self.dim_a * self.dim_b
    }

    /// Roles of `A` and `B` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            d_a_modes: self.d_b_modes,
            d_b_modes: self.d_a_modes,
            dim_a: self.dim_b,
            dim_b: self.dim_a,
        }
    }

    fn check(&self, amplitudes: &[Complex64]) -> Result<()> {
        if amplitudes.len() != self.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.total_dim(),
                found: amplitudes.len(),
            });
        }
        Ok(())
    }
}

/// `C[a, b] = ψ[a·dim_B + b]`.
pub fn coefficient_matrix(amplitudes: &[Complex64], part: &Bipartition) -> Result<DMatrix<Complex64>> {
    part.check(amplitudes)?;
    Ok(DMatrix::from_row_slice(part.dim_a, part.dim_b, amplitudes))
}

/// `ρ_A = tr_B |ψ⟩⟨ψ| = C C†`.
pub fn reduced_density(state: &StateVector, part: &Bipartition) -> Result<DMatrix<Complex64>> {
    let c = coefficient_matrix(state.amplitudes(), part)?;
    Ok(&c * c.adjoint())
}

/// Purity of raw (assumed normalized) amplitudes.
pub fn purity_of(amplitudes: &[Complex64], part: &Bipartition) -> Result<f64> {
    let c = coefficient_matrix(amplitudes, part)?;
    let gram = if part.dim_b <= part.dim_a {
        c.adjoint() * &c
    } else {
        &c * c.adjoint()
    };
    Ok(gram.iter().map(|z| z.norm_sqr()).sum())
}

/// `I = tr_A ρ_A²`.
pub fn purity(state: &StateVector, part: &Bipartition) -> Result<f64> {
    purity_of(state.amplitudes(), part)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    QuantumFull,
    QuantumEcho,
    Semiclassical,
    ClosedForm,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::QuantumFull => "quantum_full",
            Provenance::QuantumEcho => "quantum_echo",
            Provenance::Semiclassical => "semiclassical",
            Provenance::ClosedForm => "closed_form",
        }
    }
}

/// Sampled purity curve `(t, I(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PuritySeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
    pub metadata: BTreeMap<String, String>,
}

impl PuritySeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch(values.len(), times.len()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("sample times must be strictly increasing".into()));
        }
        Ok(Self {
            times,
            values,
            provenance,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Purity at every sample; samples are processed in parallel.
pub fn purity_series(
    states: &[StateVector],
    times: &[f64],
    part: &Bipartition,
    provenance: Provenance,
) -> Result<PuritySeries> {
    if states.len() != times.len() {
        return Err(Error::LengthMismatch(states.len(), times.len()));
    }
    let values = states
        .par_iter()
        .map(|s| purity(s, part))
        .collect::<Result<Vec<_>>>()?;
    PuritySeries::new(times.to_vec(), values, provenance)
}

/// Mean and (population) standard deviation of the trailing `window_fraction`
/// of the samples.
pub fn plateau_estimate(series: &PuritySeries, window_fraction: f64) -> Result<(f64, f64)> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::Domain(format!(
            "window fraction must lie in (0, 1], got {window_fraction}"
        )));
    }
    let n = series.len();
    let count = ((n as f64) * window_fraction).round() as usize;
    if count < MIN_WINDOW {
        return Err(Error::WindowTooShort(count, MIN_WINDOW));
    }
    let window = &series.values[n - count..];
    let mean = window.iter().sum::<f64>() / count as f64;
    let var = window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
    Ok((mean, var.sqrt()))
}
