//! Checks against independent dense-matrix oracles.

use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use purity_core::entanglement::{purity, reduced_density, Bipartition};
use purity_core::fock::{
    apply, commutator, embed, expectation, lowering_op, op_multiply, raising_op, SpaceConfig,
    SparseOperator, StateVector,
};
use purity_core::model::{build_1x1, build_2x2, total_h, CouplingCase, OneOneParams, TwoTwoParams};
use purity_core::propagator::{
    diagonal_average, echo_evolve, evolve, evolve_with_report, Method, PropagationConfig, TimeGrid,
};
use purity_core::states::{coherent_state, default_mode_dim, product_state, CoherentSpec};
use purity_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn random_state(space: &SpaceConfig, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..space.total_dim())
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    StateVector::normalized(amps, space.clone()).unwrap()
}

fn dense_kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// exp(−iHt/ħ)ψ by full diagonalization.
fn dense_propagate(h: &SparseOperator, hbar: f64, psi: &[Complex64], t: f64) -> Vec<Complex64> {
    let eig = SymmetricEigen::new(h.to_dense());
    let q = &eig.eigenvectors;
    let coeffs = q.adjoint() * DVector::from_column_slice(psi);
    let phased = DVector::from_fn(coeffs.len(), |k, _| {
        coeffs[k] * Complex64::from_polar(1.0, -eig.eigenvalues[k] * t / hbar)
    });
    (q * phased).iter().copied().collect()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn embedded_hopping_commutator_matches_kronecker() {
    let space = SpaceConfig::new(vec![2, 2]).unwrap();
    let a = lowering_op(2).unwrap();
    let ad = raising_op(2).unwrap();
    let x = op_multiply(&embed(&a, 0, &space).unwrap(), &embed(&ad, 1, &space).unwrap()).unwrap();
    let y = op_multiply(&embed(&ad, 0, &space).unwrap(), &embed(&a, 1, &space).unwrap()).unwrap();
    let sparse = commutator(&x, &y).unwrap().to_dense();

    let id = DMatrix::<Complex64>::identity(2, 2);
    let (ad_d, a_d) = (ad.to_dense(), a.to_dense());
    let xd = dense_kron(&a_d, &id) * dense_kron(&id, &ad_d);
    let yd = dense_kron(&ad_d, &id) * dense_kron(&id, &a_d);
    let dense = &xd * &yd - &yd * &xd;
    assert!((sparse - dense).iter().all(|z| z.norm() < 1e-14));
}

#[test]
fn embed_matches_kronecker_on_three_modes() {
    let space = SpaceConfig::new(vec![3, 2, 4]).unwrap();
    let x = {
        let a = lowering_op(2).unwrap();
        purity_core::fock::op_combine(&[(c(0.3), &a), (Complex64::new(0.0, 1.1), &a.adjoint())])
            .unwrap()
    };
    let embedded = embed(&x, 1, &space).unwrap().to_dense();
    let oracle = DMatrix::<Complex64>::identity(3, 3)
        .kronecker(&x.to_dense())
        .kronecker(&DMatrix::<Complex64>::identity(4, 4));
    assert!((embedded - oracle).iter().all(|z| z.norm() < 1e-15));
}

#[test]
fn embed_preserves_spectrum() {
    let space = SpaceConfig::new(vec![3, 4]).unwrap();
    let a = lowering_op(4).unwrap();
    let x = purity_core::fock::op_combine(&[(c(1.0), &a), (c(1.0), &a.adjoint())]).unwrap();
    let single = SymmetricEigen::new(x.to_dense()).eigenvalues;
    let full = SymmetricEigen::new(embed(&x, 1, &space).unwrap().to_dense()).eigenvalues;
    let mut expected: Vec<f64> = single.iter().flat_map(|&e| std::iter::repeat_n(e, 3)).collect();
    let mut got: Vec<f64> = full.iter().copied().collect();
    expected.sort_by(f64::total_cmp);
    got.sort_by(f64::total_cmp);
    for (e, g) in expected.iter().zip(&got) {
        assert_abs_diff_eq!(e, g, epsilon = 1e-12);
    }
    assert!(embed(&x, 1, &space).unwrap().hermiticity_defect() < 1e-15);
}

#[test]
fn apply_matches_dense_matvec() {
    let space = SpaceConfig::new(vec![3, 4]).unwrap();
    let m = build_1x1(&OneOneParams::reference(0.2, 0.3), &space).unwrap();
    let h = total_h(&m).unwrap();
    let psi = random_state(&space, 11);
    let sparse = apply(&h, psi.amplitudes()).unwrap();
    let dense = h.to_dense() * DVector::from_column_slice(psi.amplitudes());
    assert!(max_diff(&sparse, dense.as_slice()) < 1e-14);
}

#[test]
fn total_h_matches_dense_sum() {
    let space = SpaceConfig::new(vec![3, 3]).unwrap();
    let m = build_1x1(&OneOneParams::reference(0.1, 0.25), &space).unwrap();
    let dense = m.h0.to_dense() + m.v.to_dense() * c(0.25);
    assert!((total_h(&m).unwrap().to_dense() - dense).iter().all(|z| z.norm() < 1e-15));
}

#[test]
fn reference_coupling_from_dense_quadratures() {
    // V = ħ² X²⊗X² with X = a + a⁺ built densely on 3 levels
    let hbar = 0.5;
    let space = SpaceConfig::new(vec![3, 3]).unwrap();
    let m = build_1x1(&OneOneParams::reference(hbar, 0.1), &space).unwrap();
    let a = lowering_op(3).unwrap().to_dense();
    let x = &a + a.adjoint();
    let x2 = &x * &x;
    let oracle = x2.kronecker(&x2) * c(hbar * hbar);
    assert!((m.v.to_dense() - oracle).iter().all(|z| z.norm() < 1e-14));
}

#[test]
fn purity_matches_explicit_partial_trace() {
    for (dims, seed) in [(vec![4, 5], 1u64), (vec![5, 6], 2), (vec![2, 3, 2], 3)] {
        let space = SpaceConfig::new(dims.clone()).unwrap();
        let psi = random_state(&space, seed);
        let part = Bipartition::new(&space, 1).unwrap();
        // ρ_A[a, a'] = Σ_b ψ[a, b] ψ*[a', b]
        let mut rho = DMatrix::from_element(part.dim_a, part.dim_a, c(0.0));
        for a in 0..part.dim_a {
            for ap in 0..part.dim_a {
                for b in 0..part.dim_b {
                    rho[(a, ap)] += psi.amplitudes()[a * part.dim_b + b]
                        * psi.amplitudes()[ap * part.dim_b + b].conj();
                }
            }
        }
        let oracle = (&rho * &rho).trace().re;
        assert_abs_diff_eq!(purity(&psi, &part).unwrap(), oracle, epsilon = 1e-12);
        let rd = reduced_density(&psi, &part).unwrap();
        assert!((rd - &rho).iter().all(|z| z.norm() < 1e-14));
    }
}

#[test]
fn reduced_density_is_positive() {
    let space = SpaceConfig::new(vec![5, 6]).unwrap();
    for seed in 0..5 {
        let psi = random_state(&space, seed);
        let rho = reduced_density(&psi, &Bipartition::new(&space, 1).unwrap()).unwrap();
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-12);
        let ev = SymmetricEigen::new(rho).eigenvalues;
        assert!(ev.iter().all(|&e| e > -1e-12));
    }
}

#[test]
fn krylov_and_chebyshev_match_dense_diagonalization() {
    let space = SpaceConfig::new(vec![8, 8]).unwrap();
    let hbar = 0.1;
    let m = build_1x1(&OneOneParams::reference(hbar, 0.3), &space).unwrap();
    let h = total_h(&m).unwrap();
    let psi = random_state(&space, 5);
    let grid = TimeGrid::new(vec![0.0, 0.7, 2.0]).unwrap();
    let oracle = dense_propagate(&h, hbar, psi.amplitudes(), 2.0);
    for method in [Method::Krylov, Method::Chebyshev] {
        let cfg = PropagationConfig {
            method,
            step_dt: 0.05,
            ..Default::default()
        };
        let out = evolve(&h, hbar, &psi, &grid, &cfg).unwrap();
        assert_eq!(out.len(), 3);
        assert!(max_diff(out[0].amplitudes(), psi.amplitudes()) < 1e-15);
        let err = max_diff(out[2].amplitudes(), &oracle);
        assert!(err < 1e-8, "{method:?}: {err:e}");
    }
}

#[test]
fn adaptive_halving_recovers_from_large_step() {
    let space = SpaceConfig::new(vec![8, 8]).unwrap();
    let hbar = 0.1;
    let m = build_1x1(&OneOneParams::reference(hbar, 0.3), &space).unwrap();
    let h = total_h(&m).unwrap();
    let psi = random_state(&space, 9);
    let cfg = PropagationConfig {
        step_dt: 5.0,
        krylov_dim: 12,
        ..Default::default()
    };
    let grid = TimeGrid::new(vec![2.0]).unwrap();
    let (out, report) = evolve_with_report(&h, hbar, &psi, &grid, &cfg).unwrap();
    assert!(report.rejected_steps > 0);
    let oracle = dense_propagate(&h, hbar, psi.amplitudes(), 2.0);
    assert!(max_diff(out[0].amplitudes(), &oracle) < 1e-8);
}

#[test]
fn unitarity_energy_and_time_reversal() {
    let hbar = 0.05;
    let dim = default_mode_dim(0.1, hbar);
    let space = SpaceConfig::new(vec![dim, dim]).unwrap();
    let m = build_1x1(&OneOneParams::reference(hbar, 0.2), &space).unwrap();
    let h = total_h(&m).unwrap();
    let coh = coherent_state(&CoherentSpec::new(0.1, hbar).unwrap(), dim).unwrap();
    let psi = product_state(&[coh.clone(), coh]).unwrap();
    let grid = TimeGrid::linear(0.0, 10.0, 11).unwrap();
    let cfg = PropagationConfig {
        renormalize_each_step: false,
        step_dt: PropagationConfig::auto_step(&h, hbar, 10.0),
        ..Default::default()
    };
    let (out, report) = evolve_with_report(&h, hbar, &psi, &grid, &cfg).unwrap();
    assert!(report.max_norm_drift < 1e-9);
    let e0 = expectation(&h, psi.amplitudes()).unwrap();
    for s in &out {
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-9);
        let e = expectation(&h, s.amplitudes()).unwrap();
        assert!(((e - e0) / e0).abs() < 1e-8);
    }

    let minus_h = h.scaled(c(-1.0));
    let back = evolve(
        &minus_h,
        hbar,
        out.last().unwrap(),
        &TimeGrid::new(vec![10.0]).unwrap(),
        &cfg,
    )
    .unwrap();
    assert!(max_diff(back[0].amplitudes(), psi.amplitudes()) < 1e-7);
}

#[test]
fn interaction_picture_leaves_purity_unchanged() {
    let hbar = 0.2;
    let space = SpaceConfig::new(vec![6, 6]).unwrap();
    let m = build_1x1(&OneOneParams::reference(hbar, 0.3), &space).unwrap();
    let h = total_h(&m).unwrap();
    let single = SpaceConfig::new(vec![6]).unwrap();
    let psi = product_state(&[random_state(&single, 1), random_state(&single, 2)]).unwrap();
    let part = Bipartition::new(&space, 1).unwrap();
    let cfg = PropagationConfig {
        step_dt: 0.1,
        ..Default::default()
    };
    let t = 7.5;
    let forward = evolve(&h, hbar, &psi, &TimeGrid::new(vec![t]).unwrap(), &cfg).unwrap();
    // U₀†(t) is the exact diagonal phase e^{+iE t/ħ}
    let echo: Vec<Complex64> = forward[0]
        .amplitudes()
        .iter()
        .zip(m.h0.diagonal())
        .map(|(a, e)| a * Complex64::from_polar(1.0, e.re * t / hbar))
        .collect();
    let echo = StateVector::new(echo, space.clone()).unwrap();
    let p1 = purity(&forward[0], &part).unwrap();
    let p2 = purity(&echo, &part).unwrap();
    assert!(p1 < 0.9999);
    assert_abs_diff_eq!(p1, p2, epsilon = 1e-10);
}

#[test]
fn diagonal_average_of_reference_coupling() {
    let hbar = 0.1;
    let space = SpaceConfig::new(vec![6, 6]).unwrap();
    let m = build_1x1(&OneOneParams::reference(hbar, 0.04), &space).unwrap();
    let avg = diagonal_average(&m.v, &m.h0, None).unwrap();
    assert!(avg.vbar.is_diagonal());
    assert!(avg.degenerate_pairs.is_empty());
    for i in 0..space.total_dim() {
        let na = space.occupation_of(i, 0);
        let nb = space.occupation_of(i, 1);
        if na < 5 && nb < 5 {
            let expected = hbar * hbar * (2 * na + 1) as f64 * (2 * nb + 1) as f64;
            assert_abs_diff_eq!(avg.vbar.get(i, i).re, expected, epsilon = 1e-14);
        }
    }
    // ħ²(2n_A+1)(2n_B+1) → 4 j_A j_B with j = ħn fixed
    let (ja, jb): (f64, f64) = (0.1, 0.1);
    let mut prev = f64::INFINITY;
    for hbar in [0.01, 0.001, 0.0001] {
        let (na, nb) = (ja / hbar, jb / hbar);
        let gap = (hbar * hbar * (2.0 * na + 1.0) * (2.0 * nb + 1.0) - 4.0 * ja * jb).abs();
        assert!(gap < prev);
        prev = gap;
    }
    assert!(prev < 1e-4);
}

#[test]
fn echo_with_zero_coupling_is_identity() {
    let hbar = 0.1;
    let space = SpaceConfig::new(vec![5, 5]).unwrap();
    let m = build_1x1(&OneOneParams::reference(hbar, 0.0), &space).unwrap();
    let psi = random_state(&space, 4);
    let out = echo_evolve(&m, &psi, &TimeGrid::linear(0.0, 30.0, 4).unwrap(), &Default::default()).unwrap();
    for s in out {
        assert_eq!(s.amplitudes(), psi.amplitudes());
    }
}

#[test]
fn echo_purity_linear_response_limit() {
    let hbar = 0.1;
    let dim = default_mode_dim(0.1, hbar);
    let space = SpaceConfig::new(vec![dim, dim]).unwrap();
    let m = build_1x1(&OneOneParams::reference(hbar, 0.01), &space).unwrap();
    let coh = coherent_state(&CoherentSpec::new(0.1, hbar).unwrap(), dim).unwrap();
    let psi = product_state(&[coh.clone(), coh]).unwrap();
    let part = Bipartition::new(&space, 1).unwrap();
    let mut prev_gap = f64::INFINITY;
    for dt in [0.1, 0.05, 0.025] {
        let t = dt / m.delta;
        let s = echo_evolve(&m, &psi, &TimeGrid::new(vec![t]).unwrap(), &Default::default()).unwrap();
        let gap = 1.0 - purity(&s[0], &part).unwrap();
        assert!(gap >= 0.0);
        // O((δt)²): quartering as δt halves
        if prev_gap.is_finite() {
            assert!((prev_gap / gap - 4.0).abs() < 0.1, "{}", prev_gap / gap);
        }
        prev_gap = gap;
    }
}

#[test]
fn two_two_model_evolution_small() {
    let hbar = 0.5;
    let space = SpaceConfig::new(vec![4, 4, 4, 4]).unwrap();
    let m = build_2x2(&TwoTwoParams::reference(hbar, 0.1, CouplingCase::CaseII), &space).unwrap();
    let h = total_h(&m).unwrap();
    let psi = random_state(&space, 21);
    let oracle = dense_propagate(&h, hbar, psi.amplitudes(), 1.5);
    let out = evolve(&h, hbar, &psi, &TimeGrid::new(vec![1.5]).unwrap(), &Default::default()).unwrap();
    assert!(max_diff(out[0].amplitudes(), &oracle) < 1e-8);
}
