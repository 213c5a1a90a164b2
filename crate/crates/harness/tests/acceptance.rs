//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria whose numbers are listed in `KNOWN_FAILURES` still run and print
//! FAIL at full tolerance, but do not fail the process.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use purity_core::entanglement::{purity, purity_of, Bipartition};
use purity_core::fock::{expectation, SpaceConfig, StateVector};
use purity_core::model::{build_1x1, total_h, CouplingCase, ModelKind, OneOneParams};
use purity_core::propagator::{evolve_with_report, Method, PropagationConfig, TimeGrid};
use purity_core::semiclassics::{
    averaged_coupling, linear_response, phase_space_purity_mc, purity_prediction, torus_average, PacketSpec,
};
use purity_core::states::{coherent_state, n_eff_estimate, product_state, CoherentSpec};
use purity_core::Complex64;
use purity_harness::analysis::{fit_slope, plateau, plateau_onset, window_points};
use purity_harness::experiment::{build_model, run_channels, run_experiment, run_sweep, semiclassical_u, Channels};
use purity_harness::{ExperimentConfig, ResolvedConfig, RunRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_FAILURES: &[u32] = &[3, 4];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(text: &str) -> ResolvedConfig {
    ExperimentConfig::from_toml_str(text)
        .and_then(|c| c.resolve())
        .expect("acceptance config is valid")
}

fn run(cfg: &ResolvedConfig) -> RunRecord {
    let (h, d) = cfg.cells()[0];
    run_experiment(cfg, h, d).expect("run succeeds")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn closed_1x1(x: f64) -> f64 {
    1.0 / (1.0 + (0.8 * x).powi(2)).sqrt()
}

fn criterion_1() -> Outcome {
    let cfg = config(
        "[model]\nhbar_list = [0.01]\ndelta_list = [0.04]\n[grid]\nscaled_t_max = 2.0\nsamples = 5\n",
    );
    let rec = run(&cfg);
    let q = rec.curves.quantum.as_ref().unwrap();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for k in [1, 2, 4] {
        let x = rec.curves.delta_t[k];
        let d = rel(q[k], closed_1x1(x));
        worst = worst.max(d);
        parts.push(format!("δt={x}: I={:.4} vs {:.4}", q[k], closed_1x1(x)));
    }
    outcome(worst < 0.05, format!("{}; max rel dev {:.3}% (< 5%)", parts.join(", "), 100.0 * worst))
}

fn criterion_2() -> Outcome {
    let cfg = config(
        "[model]\nhbar_list = [0.04, 0.02, 0.01]\ndelta_list = [0.04]\n[grid]\nscaled_t_max = 3.0\nsamples = 31\n",
    );
    let recs: Vec<RunRecord> = run_sweep(&cfg).into_iter().map(|o| o.result.unwrap()).collect();
    let mut worst: f64 = 0.0;
    for a in 0..recs.len() {
        for b in a + 1..recs.len() {
            let (qa, qb) = (recs[a].curves.quantum.as_ref().unwrap(), recs[b].curves.quantum.as_ref().unwrap());
            for (k, &x) in recs[a].curves.delta_t.iter().enumerate() {
                if (0.3 - 1e-9..=3.0 + 1e-9).contains(&x) {
                    worst = worst.max((qa[k] - qb[k]).abs() / qa[k].min(qb[k]));
                }
            }
        }
    }
    outcome(worst < 0.10, format!("1/ħ ∈ {{25,50,100}}: max pairwise dev {:.2}% over δt ∈ [0.3,3] (< 10%)", 100.0 * worst))
}

fn criterion_3() -> Outcome {
    let cfg = config(
        "[model]\nhbar_list = [0.01]\ndelta_list = [0.04, 0.08, 0.16]\n[grid]\nscaled_t_max = 3.0\nsamples = 61\n",
    );
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    for o in run_sweep(&cfg) {
        let rec = o.result.unwrap();
        let q = rec.curves.quantum.as_ref().unwrap();
        let d = rec
            .curves
            .t
            .iter()
            .zip(&rec.curves.delta_t)
            .zip(q)
            .filter(|((t, _), _)| **t > 10.0)
            .map(|((_, &x), &v)| rel(v, closed_1x1(x)))
            .fold(0.0, f64::max);
        worst = worst.max(d);
        parts.push(format!("δ={}: {:.2}%", rec.delta, 100.0 * d));
    }
    outcome(worst < 0.10, format!("max rel dev for t > 10, δt ≤ 3: {} (< 10%)", parts.join(", ")))
}

fn criterion_4() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (kind, expected, scaled_t_max, samples) in
        [("two_two_case1", -2.0, 12.0, 61), ("two_two_case2", -1.0, 8.0, 41)]
    {
        let sc = config(&format!(
            "[model]\nkind = \"{kind}\"\n[grid]\nspacing = \"log\"\nlog_start = 0.01\nscaled_t_max = 1000.0\nsamples = 600\n"
        ));
        let (h, d) = sc.cells()[0];
        let pred = run_channels(&sc, h, d, Channels::semiclassical_only()).unwrap();
        let sc_slope = pred.summary.slope_semiclassical;
        let sc_ok = sc_slope.is_some_and(|s| (s - expected).abs() <= 0.05);

        let qc = config(&format!(
            "[model]\nkind = \"{kind}\"\n[grid]\nscaled_t_max = {scaled_t_max}\nsamples = {samples}\n\
             [propagation]\nmethod = \"chebyshev\"\nstep_phase = 20.0\n"
        ));
        let rec = run(&qc);
        let q = rec.curves.quantum.as_ref().unwrap();
        let (plateau_mean, _) = plateau(q, 0.2).unwrap();
        let onset = plateau_onset(q, plateau_mean);
        let pts = window_points(&rec.curves.delta_t, q, (0.01, 0.2), |k| k < onset);
        let q_slope = fit_slope(&pts).map(|f| f.slope);
        let q_ok = match (q_slope, sc_slope) {
            (Some(a), Some(b)) => (a - b).abs() <= 0.25,
            _ => false,
        };
        pass &= sc_ok && q_ok;
        let show = |s: Option<f64>| s.map_or("unavailable".to_string(), |v| format!("{v:.4}"));
        parts.push(format!(
            "{kind}: semiclassical slope {} (target {expected} ± 0.05) {}, quantum slope {} ({} window points before plateau {:.3} reached at δt={:.2}) {}",
            show(sc_slope),
            if sc_ok { "ok" } else { "FAIL" },
            show(q_slope),
            pts.len(),
            plateau_mean,
            rec.curves.delta_t.get(onset).copied().unwrap_or(f64::NAN),
            if q_ok { "ok" } else { "FAIL" },
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_5() -> Outcome {
    let cfg = config(
        "[model]\nhbar_list = [0.02]\ndelta_list = [0.01]\n[grid]\nscaled_t_max = 2.0\nsamples = 41\n[propagation]\necho = true\n",
    );
    let rec = run(&cfg);
    let d = rec.summary.echo_max_rel_dev.unwrap();
    outcome(d < 0.02, format!("echo vs full max rel dev {:.3}% over δt ≤ 2 (< 2%)", 100.0 * d))
}

fn criterion_6() -> Outcome {
    let cfg = config("[model]\nhbar_list = [0.01]\ndelta_list = [0.04]\nquad_points = 4\n");
    let (hbar, delta) = cfg.cells()[0];
    let model = build_model(&cfg, hbar, delta).unwrap();
    let (u, _) = semiclassical_u(&model, &cfg).unwrap();
    let vbar = averaged_coupling(&model.classical_coupling, cfg.quad_points);
    let packet = PacketSpec::coherent(vec![cfg.j_star; 2], 1).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for x in [0.5, 1.0, 2.0] {
        let t = x / delta;
        let est = phase_space_purity_mc(&vbar, &packet, hbar, delta, t, 1_000_000, 7).unwrap();
        let pred = purity_prediction(&u, delta, t);
        let z = (est.mean - pred) / est.stderr;
        pass &= z.abs() < 3.0;
        parts.push(format!("δt={x}: {:.5}±{:.1e} vs {:.5} (z={z:+.2})", est.mean, est.stderr, pred));
    }
    outcome(pass, format!("{} (|z| < 3)", parts.join(", ")))
}

fn criterion_7() -> Outcome {
    let cfg = config("");
    let model = build_model(&cfg, 0.01, 0.04).unwrap();
    let mut torus_err: f64 = 0.0;
    for &(ja, jb) in &[(0.1, 0.1), (0.37, 1.9), (2.5, 0.03)] {
        let avg = torus_average(&model.classical_coupling, &[ja, jb], 16).unwrap();
        torus_err = torus_err.max((avg - 4.0 * ja * jb).abs() / (4.0 * ja * jb));
    }
    let (u, _) = semiclassical_u(&model, &cfg).unwrap();
    let u_err = (u.matrix[(0, 0)] - 0.64).abs();
    let rank = |kind: &str| {
        let c = config(&format!("[model]\nkind = \"{kind}\"\n"));
        let (h, d) = c.cells()[0];
        semiclassical_u(&build_model(&c, h, d).unwrap(), &c).unwrap().0.rank
    };
    let (r1, r2) = (rank("two_two_case1"), rank("two_two_case2"));
    let pass = torus_err < 1e-14 && u_err < 1e-10 && r1 == 2 && r2 == 1;
    outcome(
        pass,
        format!("torus rel err {torus_err:.1e}; |u − 0.64| = {u_err:.1e} (< 1e-10); rank Case I = {r1}, Case II = {r2}"),
    )
}

fn random_state(rng: &mut ChaCha8Rng, dims: &[usize]) -> StateVector {
    let space = SpaceConfig::new(dims.to_vec()).unwrap();
    let amps = (0..space.total_dim())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    StateVector::normalized(amps, space).unwrap()
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<Complex64> {
    let m = DMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    m.qr().q()
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok && !failures.contains(&what.to_string()) {
            failures.push(what.to_string());
        }
    };
    for case in 0..64 {
        let dims = [[2, 3], [4, 5], [5, 6], [3, 3]][case % 4];
        let (da, db) = (dims[0], dims[1]);
        let psi = random_state(&mut rng, &dims);
        let part = Bipartition::new(psi.space(), 1).unwrap();
        let p = purity(&psi, &part).unwrap();
        check(p >= 1.0 / da.min(db) as f64 - 1e-12 && p <= 1.0 + 1e-12, "purity bounds");

        let swapped: Vec<Complex64> = (0..da * db)
            .map(|i| psi.amplitudes()[(i % da) * db + i / da])
            .collect();
        let p_swap = purity_of(&swapped, &part.swapped()).unwrap();
        check((p - p_swap).abs() < 1e-12, "A-B symmetry");

        let c = DMatrix::from_row_slice(da, db, psi.amplitudes());
        let ua = random_unitary(&mut rng, da);
        let ub = random_unitary(&mut rng, db);
        let rotated = &ua * &c * ub.transpose();
        let flat: Vec<Complex64> = (0..da * db).map(|i| rotated[(i / db, i % db)]).collect();
        check((purity_of(&flat, &part).unwrap() - p).abs() < 1e-12, "local-unitary invariance");

        let mut rho = DMatrix::<Complex64>::zeros(da, da);
        for a in 0..da {
            for a2 in 0..da {
                for b in 0..db {
                    rho[(a, a2)] += psi.amplitudes()[a * db + b] * psi.amplitudes()[a2 * db + b].conj();
                }
            }
        }
        let brute = (&rho * &rho).trace().re;
        check((brute - p).abs() < 1e-12, "brute-force partial trace");

        let fa = random_state(&mut rng, &[da]);
        let fb = random_state(&mut rng, &[db]);
        let prod = product_state(&[fa, fb]).unwrap();
        check((purity(&prod, &part).unwrap() - 1.0).abs() < 1e-12, "product-state purity");
    }

    let space = SpaceConfig::new(vec![14, 14]).unwrap();
    let model = build_1x1(&OneOneParams::reference(0.1, 0.1), &space).unwrap();
    let h = total_h(&model).unwrap();
    let coh = coherent_state(&CoherentSpec::new(0.1, 0.1).unwrap(), 14).unwrap();
    let psi0 = product_state(&[coh.clone(), coh]).unwrap();
    let e0 = expectation(&h, psi0.amplitudes()).unwrap();
    for method in [Method::Krylov, Method::Chebyshev] {
        let cfg = PropagationConfig {
            method,
            step_dt: PropagationConfig::auto_step(&h, 0.1, 10.0),
            renormalize_each_step: false,
            ..Default::default()
        };
        let grid = TimeGrid::linear(0.0, 50.0, 11).unwrap();
        let (states, report) = evolve_with_report(&h, 0.1, &psi0, &grid, &cfg).unwrap();
        check(report.max_norm_drift < 1e-9, "unitarity");
        for s in &states {
            let e = expectation(&h, s.amplitudes()).unwrap();
            check((e - e0).abs() < 1e-8 * e0.abs().max(1.0), "energy conservation");
        }
    }

    for kind in [ModelKind::OneOne, ModelKind::TwoTwo(CouplingCase::CaseI), ModelKind::TwoTwo(CouplingCase::CaseII)] {
        let text = match kind {
            ModelKind::OneOne => "",
            ModelKind::TwoTwo(CouplingCase::CaseI) => "[model]\nkind = \"two_two_case1\"\n",
            _ => "[model]\nkind = \"two_two_case2\"\n",
        };
        let cfg = config(text);
        let (hb, d) = cfg.cells()[0];
        let (u, _) = semiclassical_u(&build_model(&cfg, hb, d).unwrap(), &cfg).unwrap();
        for k in 1..=20 {
            let x = 0.1 * k as f64 / 20.0 / u.trace.sqrt();
            let exact = purity_prediction(&u, 1.0, x);
            let lin = linear_response(&u, 1.0, x);
            let bound = (x * x * u.trace).powi(2);
            check((exact - lin).abs() <= bound, "linear response");
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(elapsed < 60.0, "runtime");
    let pass = failures.is_empty();
    outcome(
        pass,
        if pass {
            format!("purity bounds, A↔B symmetry, local-unitary invariance, product purity, brute-force partial trace, unitarity, energy, linear response ({elapsed:.1}s)")
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

fn criterion_9() -> Outcome {
    let cfg = config(
        "[model]\nhbar_list = [0.1]\ndelta_list = [0.04]\n[grid]\nscaled_t_max = 50.0\nsamples = 201\n",
    );
    let rec = run(&cfg);
    let mean = rec.summary.plateau_mean.unwrap();
    let target = 1.0 / n_eff_estimate(0.1, 0.1);
    let ratio = mean / target;
    outcome(
        (1.0 / 3.0..=3.0).contains(&ratio),
        format!("plateau {mean:.4} vs 1/√(8j*/ħ) = {target:.4}, ratio {ratio:.2} (within ×3)"),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut unexpected = 0;
    for (id, f) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        let status = match (o.pass, KNOWN_FAILURES.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("criterion {id}: {status} [{secs:.1}s] {}", o.detail);
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
