//! Sparse operators and states on a truncated multi-mode bosonic Fock space.
//!
//! Basis states `|n_0, n_1, …, n_{M-1}⟩` are laid out row-major: mode 0 is the
//! slowest-varying index. A bipartition `A ⊗ B` is always a contiguous split
//! of the mode list, so reshaping an amplitude vector into a `dim_A × dim_B`
//! matrix needs no permutation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Magnitude below which canonicalized entries are dropped.
pub const DROP_TOLERANCE: f64 = 1e-15;

/// Default tolerance on `‖ψ‖ - 1` accepted by [`StateVector::new`].
pub const DEFAULT_NORM_TOLERANCE: f64 = 1e-10;

const PARALLEL_ROWS: usize = 1 << 14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceConfig {
    mode_dims: Vec<usize>,
    total_dim: usize,
}

impl SpaceConfig {
    pub fn new(mode_dims: Vec<usize>) -> Result<Self> {
        if mode_dims.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if let Some(&bad) = mode_dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidDimension(bad));
        }
        let total_dim = mode_dims.iter().product();
        Ok(Self {
            mode_dims,
            total_dim,
        })
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn n_modes(&self) -> usize {
        self.mode_dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Distance in the flat index between neighbouring Fock levels of `mode`.
    pub fn stride(&self, mode: usize) -> usize {
        self.mode_dims[mode + 1..].iter().product()
    }

    /// Flat index of an occupation-number tuple.
    pub fn index_of(&self, occupation: &[usize]) -> Result<usize> {
        if occupation.len() != self.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_modes(),
                found: occupation.len(),
            });
        }
        let mut index = 0;
        for (&n, &d) in occupation.iter().zip(&self.mode_dims) {
            if n >= d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: n,
                });
            }
            index = index * d + n;
        }
        Ok(index)
    }

    /// Occupation numbers of every mode for a flat basis index.
    pub fn occupation(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.n_modes()];
        for (slot, &d) in occ.iter_mut().zip(&self.mode_dims).rev() {
            *slot = index % d;
            index /= d;
        }
        occ
    }

    /// Occupation of a single mode for a flat basis index.
    pub fn occupation_of(&self, index: usize, mode: usize) -> usize {
        (index / self.stride(mode)) % self.mode_dims[mode]
    }

    /// Sub-space made of the modes `range`, used for bipartitions.
    pub fn subspace(&self, range: std::ops::Range<usize>) -> Result<Self> {
        Self::new(self.mode_dims[range].to_vec())
    }
}

/// Complex sparse matrix in canonical CSR form.
///
/// Rows are sorted by column, duplicate entries are summed and entries with
/// magnitude below [`DROP_TOLERANCE`] are removed.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
    hermitian: bool,
}

impl SparseOperator {
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, Complex64)>,
    {
        let mut entries: Vec<(usize, usize, Complex64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= dim || c >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.max(c),
                });
            }
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals = Vec::with_capacity(entries.len());
        let mut it = entries.into_iter().peekable();
        while let Some((r, c, mut v)) = it.next() {
            while let Some(&(r2, c2, v2)) = it.peek() {
                if (r2, c2) != (r, c) {
                    break;
                }
                v += v2;
                it.next();
            }
            if v.norm() >= DROP_TOLERANCE {
                row_ptr[r + 1] += 1;
                cols.push(c);
                vals.push(v);
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            dim,
            row_ptr,
            cols,
            vals,
            hermitian: false,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
            hermitian: true,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::real_diagonal(&vec![1.0; dim])
    }

    /// Diagonal operator with real entries; flagged hermitian.
    pub fn real_diagonal(diag: &[f64]) -> Self {
        let mut op = Self::from_triplets(
            diag.len(),
            diag.iter()
                .enumerate()
                .map(|(i, &d)| (i, i, Complex64::new(d, 0.0))),
        )
        .expect("diagonal indices are in range");
        op.hermitian = true;
        op
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    /// Checks that the operator is hermitian within `tol` and sets the hint.
    pub fn into_hermitian(mut self, tol: f64) -> Result<Self> {
        let defect = self.hermiticity_defect();
        if defect > tol {
            return Err(Error::NotHermitian(defect));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries().all(|(r, c, _)| r == c)
    }

    pub fn is_zero(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn adjoint(&self) -> Self {
        let mut op = Self::from_triplets(self.dim, self.entries().map(|(r, c, v)| (c, r, v.conj())))
            .expect("transpose keeps indices in range");
        op.hermitian = self.hermitian;
        op
    }

    /// Largest `|A_rc - conj(A_cr)|` over the stored pattern.
    pub fn hermiticity_defect(&self) -> f64 {
        self.entries()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut op = self.clone();
        for v in &mut op.vals {
            *v *= factor;
        }
        op.hermitian = self.hermitian && factor.im == 0.0;
        op.drop_small()
    }

    fn drop_small(self) -> Self {
        if self.vals.iter().all(|v| v.norm() >= DROP_TOLERANCE) {
            return self;
        }
        let hermitian = self.hermitian;
        let mut op = Self::from_triplets(self.dim, self.entries()).expect("indices in range");
        op.hermitian = hermitian;
        op
    }

    /// Dense copy, for tests and small diagnostics.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, ZERO);
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }

    /// Writes `self · x` into `y`.
    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        for len in [x.len(), y.len()] {
            if len != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    found: len,
                });
            }
        }
        let row = |(r, out): (usize, &mut Complex64)| {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        };
        if self.dim >= PARALLEL_ROWS {
            y.par_iter_mut().enumerate().for_each(row);
        } else {
            y.iter_mut().enumerate().for_each(row);
        }
        Ok(())
    }

    /// Extreme eigenvalue bounds from Gershgorin discs (hermitian operators).
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..self.dim {
            let mut centre = 0.0;
            let mut radius = 0.0;
            for (c, v) in self.row(r) {
                if c == r {
                    centre = v.re;
                } else {
                    radius += v.norm();
                }
            }
            lo = lo.min(centre - radius);
            hi = hi.max(centre + radius);
        }
        if self.dim == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }
}

fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Single-mode annihilation operator `a` with `a|n⟩ = √n |n-1⟩`.
pub fn lowering_op(dim: usize) -> Result<SparseOperator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    SparseOperator::from_triplets(
        dim,
        (1..dim).map(|n| (n - 1, n, Complex64::new((n as f64).sqrt(), 0.0))),
    )
}

/// Single-mode creation operator `a⁺`, the adjoint of [`lowering_op`].
pub fn raising_op(dim: usize) -> Result<SparseOperator> {
    Ok(lowering_op(dim)?.adjoint())
}

/// `a⁺a = diag(0, 1, …, dim-1)`; callers apply any ħ factor themselves.
pub fn number_op(dim: usize) -> Result<SparseOperator> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let diag: Vec<f64> = (0..dim).map(|n| n as f64).collect();
    Ok(SparseOperator::real_diagonal(&diag))
}

/// Lifts a single-mode operator to `𝟙 ⊗ … ⊗ op ⊗ … ⊗ 𝟙` on `space`.
pub fn embed(op: &SparseOperator, mode: usize, space: &SpaceConfig) -> Result<SparseOperator> {
    if mode >= space.n_modes() {
        return Err(Error::Embedding {
            mode,
            op_dim: op.dim(),
            reason: format!("space has only {} modes", space.n_modes()),
        });
    }
    let local = space.mode_dims()[mode];
    if op.dim() != local {
        return Err(Error::Embedding {
            mode,
            op_dim: op.dim(),
            reason: format!("mode has {local} levels"),
        });
    }
    let stride = space.stride(mode);
    let total = space.total_dim();

    // Columns within a row stay sorted because the map m -> i + (m - n)·stride
    // is monotone in m.
    let mut row_ptr = Vec::with_capacity(total + 1);
    row_ptr.push(0);
    let mut cols = Vec::with_capacity(total / local * op.nnz());
    let mut vals = Vec::with_capacity(cols.capacity());
    for i in 0..total {
        let n = (i / stride) % local;
        let base = i - n * stride;
        for (m, v) in op.row(n) {
            cols.push(base + m * stride);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Ok(SparseOperator {
        dim: total,
        row_ptr,
        cols,
        vals,
        hermitian: op.hermitian,
    })
}

/// Sparse linear combination `Σ c_k A_k`.
pub fn op_combine(terms: &[(Complex64, &SparseOperator)]) -> Result<SparseOperator> {
    let Some((_, first)) = terms.first() else {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    };
    let dim = first.dim();
    for (_, op) in terms {
        ensure_dim(dim, op.dim())?;
    }
    let mut out = SparseOperator::from_triplets(
        dim,
        terms
            .iter()
            .flat_map(|&(c, op)| op.entries().map(move |(r, col, v)| (r, col, c * v))),
    )?;
    out.hermitian = terms.iter().all(|(c, op)| op.hermitian && c.im == 0.0);
    Ok(out)
}

/// Sparse product `A · B`.
pub fn op_multiply(a: &SparseOperator, b: &SparseOperator) -> Result<SparseOperator> {
    ensure_dim(a.dim(), b.dim())?;
    let dim = a.dim();
    let mut scratch = vec![ZERO; dim];
    let mut touched = vec![false; dim];
    let mut live: Vec<usize> = Vec::new();

    let mut row_ptr = Vec::with_capacity(dim + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for r in 0..dim {
        for (k, av) in a.row(r) {
            for (c, bv) in b.row(k) {
                if !touched[c] {
                    touched[c] = true;
                    live.push(c);
                }
                scratch[c] += av * bv;
            }
        }
        live.sort_unstable();
        for &c in &live {
            let v = scratch[c];
            if v.norm() >= DROP_TOLERANCE {
                cols.push(c);
                vals.push(v);
            }
            scratch[c] = ZERO;
            touched[c] = false;
        }
        live.clear();
        row_ptr.push(cols.len());
    }
    Ok(SparseOperator {
        dim,
        row_ptr,
        cols,
        vals,
        hermitian: false,
    })
}

/// `[A, B] = AB - BA`.
pub fn commutator(a: &SparseOperator, b: &SparseOperator) -> Result<SparseOperator> {
    let ab = op_multiply(a, b)?;
    let ba = op_multiply(b, a)?;
    op_combine(&[(Complex64::new(1.0, 0.0), &ab), (Complex64::new(-1.0, 0.0), &ba)])
}

/// Matrix-vector action; the result is never renormalized.
pub fn apply(op: &SparseOperator, state: &[Complex64]) -> Result<Vec<Complex64>> {
    let mut out = vec![ZERO; op.dim()];
    op.apply_into(state, &mut out)?;
    Ok(out)
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨x|y⟩`, antilinear in the first argument.
pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// Real expectation value `⟨ψ|A|ψ⟩` of a hermitian operator.
pub fn expectation(op: &SparseOperator, psi: &[Complex64]) -> Result<f64> {
    let a_psi = apply(op, psi)?;
    Ok(inner(psi, &a_psi).re)
}

/// Normalized amplitudes on a [`SpaceConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    space: SpaceConfig,
    norm_tolerance: f64,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>, space: SpaceConfig) -> Result<Self> {
        Self::with_tolerance(amplitudes, space, DEFAULT_NORM_TOLERANCE)
    }

    pub fn with_tolerance(
        amplitudes: Vec<Complex64>,
        space: SpaceConfig,
        norm_tolerance: f64,
    ) -> Result<Self> {
        ensure_dim(space.total_dim(), amplitudes.len())?;
        let n = norm(&amplitudes);
        if (n - 1.0).abs() > norm_tolerance {
            return Err(Error::NotNormalized {
                norm: n,
                tolerance: norm_tolerance,
            });
        }
        Ok(Self {
            amplitudes,
            space,
            norm_tolerance,
        })
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(mut amplitudes: Vec<Complex64>, space: SpaceConfig) -> Result<Self> {
        ensure_dim(space.total_dim(), amplitudes.len())?;
        let n = norm(&amplitudes);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized {
                norm: n,
                tolerance: DEFAULT_NORM_TOLERANCE,
            });
        }
        for a in &mut amplitudes {
            *a /= n;
        }
        Self::new(amplitudes, space)
    }

    /// Basis vector `|n_0, …⟩`.
    pub fn basis(space: SpaceConfig, occupation: &[usize]) -> Result<Self> {
        let idx = space.index_of(occupation)?;
        let mut amps = vec![ZERO; space.total_dim()];
        amps[idx] = Complex64::new(1.0, 0.0);
        Self::new(amps, space)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn space(&self) -> &SpaceConfig {
        &self.space
    }

    pub fn norm_tolerance(&self) -> f64 {
        self.norm_tolerance
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }
}
