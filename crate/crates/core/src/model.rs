//! Quantum and classical Hamiltonians of the coupled anharmonic-oscillator
//! models: one mode per subsystem (1+1) and two modes per subsystem (2+2).
//!
//! Each builder returns the operators `H₀` and `V` together with the closed
//! classical counterparts `h₀(j)` and `v(j, θ)` in action-angle variables.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{embed, lowering_op, op_combine, op_multiply, SparseOperator, SpaceConfig};
use crate::semiclassics::ClassicalCoupling;

const HERMITIAN_TOL: f64 = 1e-12;

pub type ClassicalH0 = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneOneParams {
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub delta_offset: f64,
    pub hbar: f64,
    pub delta: f64,
}

impl OneOneParams {
    /// `γ_A = 1`, `γ_B = 0.6456`, `Δ = 1.2`.
    pub fn reference(hbar: f64, delta: f64) -> Self {
        Self {
            gamma_a: 1.0,
            gamma_b: 0.6456,
            delta_offset: 1.2,
            hbar,
            delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CouplingCase {
    /// `V = V₁₃ + V₂₄`
    CaseI,
    /// `V = V₁₃ + V₁₄ + V₂₃ + V₂₄`
    CaseII,
}

impl CouplingCase {
    /// Coupled mode pairs, zero-based (mode 0,1 in A; 2,3 in B).
    pub fn pairs(self) -> &'static [(usize, usize)] {
        match self {
            CouplingCase::CaseI => &[(0, 2), (1, 3)],
            CouplingCase::CaseII => &[(0, 2), (0, 3), (1, 2), (1, 3)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoTwoParams {
    pub gamma_1: f64,
    pub gamma_2: f64,
    pub delta_offset: f64,
    pub hbar: f64,
    pub delta: f64,
    pub coupling_case: CouplingCase,
}

impl TwoTwoParams {
    /// `γ₁ = 1`, `γ₂ = 0.64`, `Δ = 1.2`.
    pub fn reference(hbar: f64, delta: f64, coupling_case: CouplingCase) -> Self {
        Self {
            gamma_1: 1.0,
            gamma_2: 0.64,
            delta_offset: 1.2,
            hbar,
            delta,
            coupling_case,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    OneOne,
    TwoTwo(CouplingCase),
}

/// A fully assembled model: `H = H₀ + δ·V` on a truncated Fock space.
#[derive(Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub space: SpaceConfig,
    pub d_a: usize,
    pub d_b: usize,
    pub h0: SparseOperator,
    pub v: SparseOperator,
    pub delta: f64,
    pub hbar: f64,
    /// Mode pairs `(k, l)` whose product term `V_kl` makes up `V`.
    pub coupling_pairs: Vec<(usize, usize)>,
    pub classical_coupling: ClassicalCoupling,
    pub classical_h0: ClassicalH0,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("kind", &self.kind)
            .field("mode_dims", &self.space.mode_dims())
            .field("d_a", &self.d_a)
            .field("d_b", &self.d_b)
            .field("delta", &self.delta)
            .field("hbar", &self.hbar)
            .field("coupling_pairs", &self.coupling_pairs)
            .finish_non_exhaustive()
    }
}

fn check_modes(space: &SpaceConfig, expected: usize) -> Result<()> {
    if space.n_modes() != expected {
        return Err(Error::ModeCount {
            expected,
            found: space.n_modes(),
        });
    }
    Ok(())
}

fn check_physical(hbar: f64, delta: f64) -> Result<()> {
    if !(hbar > 0.0 && hbar.is_finite()) {
        return Err(Error::Domain(format!("hbar must be positive, got {hbar}")));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("delta must be nonnegative, got {delta}")));
    }
    Ok(())
}

/// `(a⁺ + a)²` on a single mode.
pub fn quadrature_squared(dim: usize) -> Result<SparseOperator> {
    let a = lowering_op(dim)?;
    let one = Complex64::new(1.0, 0.0);
    let x = op_combine(&[(one, &a), (one, &a.adjoint())])?;
    op_multiply(&x, &x)?.into_hermitian(HERMITIAN_TOL)
}

/// `V_kl = ħ² (a_k⁺ + a_k)² (a_l⁺ + a_l)²`.
pub fn pair_coupling(space: &SpaceConfig, k: usize, l: usize, hbar: f64) -> Result<SparseOperator> {
    let xk = embed(&quadrature_squared(space.mode_dims()[k])?, k, space)?;
    let xl = embed(&quadrature_squared(space.mode_dims()[l])?, l, space)?;
    op_multiply(&xk, &xl)?
        .scaled(Complex64::new(hbar * hbar, 0.0))
        .into_hermitian(HERMITIAN_TOL)
}

fn coupling_sum(space: &SpaceConfig, pairs: &[(usize, usize)], hbar: f64) -> Result<SparseOperator> {
    let terms = pairs
        .iter()
        .map(|&(k, l)| pair_coupling(space, k, l, hbar))
        .collect::<Result<Vec<_>>>()?;
    let one = Complex64::new(1.0, 0.0);
    let weighted: Vec<_> = terms.iter().map(|t| (one, t)).collect();
    op_combine(&weighted)?.into_hermitian(HERMITIAN_TOL)
}

/// `16 j_k j_l sin²θ_k sin²θ_l` summed over the coupled pairs.
fn classical_pair_sum(pairs: Vec<(usize, usize)>, d_a: usize, d_b: usize) -> ClassicalCoupling {
    ClassicalCoupling::new(d_a, d_b, move |j: &[f64], theta: &[f64]| {
        pairs
            .iter()
            .map(|&(k, l)| {
                16.0 * j[k] * j[l] * theta[k].sin().powi(2) * theta[l].sin().powi(2)
            })
            .sum()
    })
}

/// 1+1 model: `H₀ = γ_A(ħn_A − Δ)² + γ_B(ħn_B − Δ)²`, `V = ħ²(a_A⁺+a_A)²(a_B⁺+a_B)²`.
pub fn build_1x1(p: &OneOneParams, space: &SpaceConfig) -> Result<ModelSpec> {
    check_modes(space, 2)?;
    check_physical(p.hbar, p.delta)?;
    let OneOneParams {
        gamma_a,
        gamma_b,
        delta_offset: off,
        hbar,
        ..
    } = *p;

    let diag: Vec<f64> = (0..space.total_dim())
        .map(|i| {
            let na = space.occupation_of(i, 0) as f64;
            let nb = space.occupation_of(i, 1) as f64;
            gamma_a * (hbar * na - off).powi(2) + gamma_b * (hbar * nb - off).powi(2)
        })
        .collect();
    let h0 = SparseOperator::real_diagonal(&diag);

    let pairs = vec![(0, 1)];
    let v = coupling_sum(space, &pairs, hbar)?;

    Ok(ModelSpec {
        kind: ModelKind::OneOne,
        space: space.clone(),
        d_a: 1,
        d_b: 1,
        h0,
        v,
        delta: p.delta,
        hbar,
        classical_coupling: classical_pair_sum(pairs.clone(), 1, 1),
        coupling_pairs: pairs,
        classical_h0: Arc::new(move |j: &[f64]| {
            gamma_a * (j[0] - off).powi(2) + gamma_b * (j[1] - off).powi(2)
        }),
    })
}

/// 2+2 model: `H₀ = γ₁(ħn₁−Δ)(ħn₂−Δ) + γ₂(ħn₃−Δ)(ħn₄−Δ)`; modes 1,2 form A and 3,4 form B.
pub fn build_2x2(p: &TwoTwoParams, space: &SpaceConfig) -> Result<ModelSpec> {
    check_modes(space, 4)?;
    check_physical(p.hbar, p.delta)?;
    let TwoTwoParams {
        gamma_1,
        gamma_2,
        delta_offset: off,
        hbar,
        ..
    } = *p;

    let diag: Vec<f64> = (0..space.total_dim())
        .map(|i| {
            let x = |m: usize| hbar * space.occupation_of(i, m) as f64 - off;
            gamma_1 * x(0) * x(1) + gamma_2 * x(2) * x(3)
        })
        .collect();
    let h0 = SparseOperator::real_diagonal(&diag);

    let pairs = p.coupling_case.pairs().to_vec();
    let v = coupling_sum(space, &pairs, hbar)?;

    Ok(ModelSpec {
        kind: ModelKind::TwoTwo(p.coupling_case),
        space: space.clone(),
        d_a: 2,
        d_b: 2,
        h0,
        v,
        delta: p.delta,
        hbar,
        classical_coupling: classical_pair_sum(pairs.clone(), 2, 2),
        coupling_pairs: pairs,
        classical_h0: Arc::new(move |j: &[f64]| {
            gamma_1 * (j[0] - off) * (j[1] - off) + gamma_2 * (j[2] - off) * (j[3] - off)
        }),
    })
}

/// `H = H₀ + δ·V`.
pub fn total_h(m: &ModelSpec) -> Result<SparseOperator> {
    op_combine(&[
        (Complex64::new(1.0, 0.0), &m.h0),
        (Complex64::new(m.delta, 0.0), &m.v),
    ])
}

/// Classical energy `h₀(j) + δ·v(j, θ)`.
pub fn classical_hamiltonian(m: &ModelSpec, j: &[f64], theta: &[f64]) -> Result<f64> {
    let d = m.d_a + m.d_b;
    if j.len() != d || theta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if j.len() != d { j.len() } else { theta.len() },
        });
    }
    if let Some(bad) = j.iter().find(|&&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::Domain(format!("actions must be nonnegative, got {bad}")));
    }
    Ok((m.classical_h0)(j) + m.delta * m.classical_coupling.evaluate(j, theta))
}
