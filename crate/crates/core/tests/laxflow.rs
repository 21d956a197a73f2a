mod common;

use common::*;
use gaussgeo::laxflow::*;
use gaussgeo::manifold::TangentN;
use gaussgeo::matcore::SymMatrix;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn tangent(cov: &[f64], mean: &[f64]) -> TangentN {
    let n = mean.len();
    TangentN::new(
        SymMatrix::new(DMatrix::from_row_slice(n, n, cov)).unwrap(),
        DVector::from_row_slice(mean),
    )
    .unwrap()
}

fn closed_state(orbit: &LaxOrbit, t: f64) -> LaxState {
    LaxState::from_l(&orbit.at(t).unwrap().l).unwrap()
}

#[test]
fn orbit_starts_at_v() {
    let xi = random_tangent(&mut rng(50), 3, 1.0);
    let c = closed_form_l(&xi, 0.0).unwrap();
    let v = gaussgeo::sympair::build_v(&xi).matrix().into_matrix();
    assert!((&c.l - &v).norm() < 1e-15);
    let assembled = LaxMatrices::build(&LaxState::initial(&xi), &xi.mean).unwrap();
    assert_eq!(assembled.l, v);
}

#[test]
fn scalar_riccati_for_several_amplitudes() {
    for alpha in [0.3, 1.0, 1.7] {
        let xi = tangent(&[0.0], &[alpha]);
        let exact = |t: f64| -2f64.sqrt() * alpha * (alpha * t / 2f64.sqrt()).tanh();
        for rhs in [LaxRhs::V1, LaxRhs::V2] {
            let traj = integrate(rhs, &xi, 1.0, 1e-3).unwrap();
            for s in traj.iter().step_by(50) {
                assert!((s.state.q[(0, 0)] - exact(s.t)).abs() < 1e-10, "{rhs} {alpha} {}", s.t);
            }
        }
        let orbit = LaxOrbit::new(&xi).unwrap();
        assert!((closed_state(&orbit, 0.8).q[(0, 0)] - exact(0.8)).abs() < 1e-12);
    }
}

#[test]
fn scalar_case_at_half() {
    let xi = tangent(&[0.0], &[1.0]);
    let traj = integrate(LaxRhs::V1, &xi, 0.5, 1e-3).unwrap();
    let end = &traj.last().unwrap().state;
    let closed = closed_state(&LaxOrbit::new(&xi).unwrap(), 0.5);
    assert!(end.distance(&closed) < 1e-12);
    assert!((end.r[0] - 1.0 / (0.5 / 2f64.sqrt()).cosh().powi(2)).abs() < 1e-12);
}

#[test]
fn integrator_follows_the_closed_form() {
    let mut r = rng(51);
    for n in [1, 2, 3] {
        for _ in 0..4 {
            let xi = random_tangent(&mut r, n, 1.5);
            let orbit = LaxOrbit::new(&xi).unwrap();
            let traj = integrate(LaxRhs::V1, &xi, 1.0, 1e-3).unwrap();
            for s in traj.iter().step_by(100) {
                assert!(s.state.distance(&closed_state(&orbit, s.t)) < 1e-11);
            }
        }
    }
}

#[test]
fn second_system_needs_commuting_data() {
    // a₀ an eigenvector of A₀ makes A₀ and a₀a₀ᵀ commute
    let commuting = tangent(&[0.7, 0.0, 0.0, -0.4], &[0.9, 0.0]);
    let a = integrate(LaxRhs::V1, &commuting, 1.0, 1e-3).unwrap();
    let b = integrate(LaxRhs::V2, &commuting, 1.0, 1e-3).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(x.state.distance(&y.state) < 1e-10);
    }
    let generic = tangent(&[0.7, 0.3, 0.3, -0.4], &[0.9, 0.2]);
    let a = integrate(LaxRhs::V1, &generic, 1.0, 1e-3).unwrap();
    let b = integrate(LaxRhs::V2, &generic, 1.0, 1e-3).unwrap();
    let gap = a.last().unwrap().state.distance(&b.last().unwrap().state);
    assert!(gap > 1e-4, "{gap}");
}

#[test]
fn trace_of_q_tracks_the_border() {
    let xi = random_tangent(&mut rng(52), 3, 1.0);
    let dt = 1e-3;
    let traj = integrate(LaxRhs::V1, &xi, 1.0, dt).unwrap();
    let f: Vec<f64> = traj.iter().map(|s| -s.state.r.dot(&xi.mean)).collect();
    // composite Simpson, 1000 intervals
    let mut integral = f[0] + f[f.len() - 1];
    for (i, v) in f.iter().enumerate().take(f.len() - 1).skip(1) {
        integral += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    integral *= dt / 3.0;
    let change = traj.last().unwrap().state.q.trace() - traj[0].state.q.trace();
    assert!((change - integral).abs() < 1e-11);
}

#[test]
fn verification_on_reference_data() {
    let xi = tangent(&[1.0], &[1.0]);
    let traj = integrate(LaxRhs::V1, &xi, 1.0, 1e-3).unwrap();
    let v = verify_lax(&traj, &xi.mean, 1e-3).unwrap();
    assert!(v.commutator <= 1e-5, "{v:?}");
    assert!(v.spectral <= 1e-7, "{v:?}");
    let coarse = verify_lax(&traj, &xi.mean, 1e-2).unwrap();
    assert!(coarse.commutator <= 1e-5, "{coarse:?}");
}

#[test]
fn zero_border_is_static() {
    let xi = tangent(&[0.5, 0.1, 0.1, -0.2], &[0.0, 0.0]);
    let traj = integrate(LaxRhs::V1, &xi, 1.0, 1e-2).unwrap();
    assert!(traj.iter().all(|s| s.state == traj[0].state));
    let v = verify_lax(&traj, &xi.mean, 1e-2).unwrap();
    assert_eq!(v.commutator, 0.0);
    assert_eq!(v.spectral, 0.0);
}

#[test]
fn wrong_step_is_rejected() {
    let xi = tangent(&[1.0], &[1.0]);
    let traj = integrate(LaxRhs::V1, &xi, 0.1, 1e-2).unwrap();
    assert!(verify_lax(&traj, &xi.mean, 1e-3).is_err());
    assert!(verify_lax(&traj, &xi.mean, 1.5e-2).is_err());
    assert!(integrate(LaxRhs::V1, &xi, 1.0, 0.0).is_err());
    assert!(integrate(LaxRhs::V1, &xi, -1.0, 1e-3).is_err());
}

#[test]
fn perturbed_flow_fails_verification() {
    let xi = random_tangent(&mut rng(53), 2, 1.0);
    let mut traj = integrate(LaxRhs::V1, &xi, 1.0, 1e-3).unwrap();
    for s in traj.iter_mut() {
        s.state.q[(0, 1)] += 1e-3 * s.t;
    }
    let v = verify_lax(&traj, &xi.mean, 1e-3).unwrap();
    assert!(v.commutator > 1e-4, "{v:?}");
}

#[test]
fn final_partial_step_lands_on_t_end() {
    let xi = tangent(&[0.2], &[0.5]);
    let traj = integrate(LaxRhs::V1, &xi, 0.105, 1e-2).unwrap();
    assert_eq!(traj.len(), 12);
    assert_eq!(traj.last().unwrap().t, 0.105);
    let exact = closed_state(&LaxOrbit::new(&xi).unwrap(), 0.105);
    assert!(traj.last().unwrap().state.distance(&exact) < 1e-10);
}

#[test]
fn step_halving_estimate() {
    let xi = random_tangent(&mut rng(54), 2, 1.0);
    let rich = richardson(LaxRhs::V1, &xi, 1.0, 0.1).unwrap();
    let exact = closed_state(&LaxOrbit::new(&xi).unwrap(), 1.0);
    let actual = rich.fine.distance(&exact);
    assert!(rich.estimate > 0.25 * actual && rich.estimate < 4.0 * actual, "{} {actual}", rich.estimate);
}

#[test]
fn rhs_names() {
    assert_eq!("v2".parse::<LaxRhs>().unwrap(), LaxRhs::V2);
    assert_eq!(LaxRhs::default(), LaxRhs::V1);
    assert_eq!(LaxRhs::V1.to_string(), "v1");
    assert!("v3".parse::<LaxRhs>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn closed_form_keeps_the_lax_pattern(seed in 0u64..100_000, n in 1usize..4, t in -1.5f64..1.5) {
        let xi = random_tangent(&mut rng(seed), n, 1.5);
        let orbit = LaxOrbit::new(&xi).unwrap();
        let c = orbit.at(t).unwrap();
        prop_assert!(c.sparsity < 1e-10);
        prop_assert!(sigma_residual(&c.l).unwrap() < 1e-10);
        prop_assert!(c.l.trace().abs() < 1e-12);
        let spec0 = power_traces(orbit.v(), 2 * n + 1);
        for (a, b) in power_traces(&c.l, 2 * n + 1).iter().zip(&spec0) {
            prop_assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
        // the reassembled state reproduces L exactly
        let rebuilt = LaxMatrices::build(&LaxState::from_l(&c.l).unwrap(), &xi.mean).unwrap();
        prop_assert!((rebuilt.l - &c.l).norm() < 1e-10);
    }

    #[test]
    fn closed_form_solves_the_lax_equation(seed in 0u64..100_000, n in 1usize..4, t in -1.0f64..1.0) {
        let xi = random_tangent(&mut rng(seed), n, 1.5);
        let orbit = LaxOrbit::new(&xi).unwrap();
        let h = 1e-3;
        let l = |s: f64| orbit.at(s).unwrap().l;
        let dl = ((l(t + h) - l(t - h)) * 8.0 - (l(t + 2.0 * h) - l(t - 2.0 * h))) / (12.0 * h);
        let state = LaxState::from_l(&l(t)).unwrap();
        let lm = LaxMatrices::build(&state, &xi.mean).unwrap();
        prop_assert!((dl - lm.commutator()).norm() < 1e-8);
    }

    #[test]
    fn integrated_flow_is_isospectral(seed in 0u64..100_000, n in 1usize..4) {
        let xi = random_tangent(&mut rng(seed), n, 1.5);
        let traj = integrate(LaxRhs::V1, &xi, 1.0, 1e-2).unwrap();
        let v = verify_lax(&traj, &xi.mean, 1e-2).unwrap();
        prop_assert!(v.spectral < 1e-7, "{v:?}");
        prop_assert!(v.commutator < 1e-5, "{v:?}");
        for s in &traj {
            let lm = LaxMatrices::build(&s.state, &xi.mean).unwrap();
            prop_assert!(sigma_residual(&lm.l).unwrap() < 1e-14);
            prop_assert!(sparsity_residual(&lm.l, &xi.mean) == 0.0);
        }
    }
}
