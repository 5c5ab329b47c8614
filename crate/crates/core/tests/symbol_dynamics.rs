use std::f64::consts::PI;

use npspec::geometry::{local_geometry, SurfaceChart, Vec3};
use npspec::symbol_dynamics::{
    angular_moment, birkhoff_average, classify_leaf, e2_max, gradient, hamiltonian,
    hamiltonian_vector_field, integrate_flow, integrate_joint_flow, leaf_fiber,
    moment_map_singular_values, poisson_bracket, principal_symbol_np, solve_leaf_equation,
    CotangentState, FlowField, FlowSettings, LeafClassTag, ProbeBudget,
};
use npspec::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spheroid() -> SurfaceChart {
    SurfaceChart::spheroid(1.0, 2.0).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng) -> CotangentState {
    let u = [rng.random_range(0.3..PI - 0.3), rng.random_range(0.0..2.0 * PI)];
    let xi = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
    CotangentState::new(u, xi)
}

#[test]
fn homogeneity_of_symbol_and_hamiltonian() {
    let chart = spheroid();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let s = random_state(&mut rng);
        let geom = s.geometry(&chart).unwrap();
        let xi = s.xi_vector();
        let p = principal_symbol_np(&geom, &xi).unwrap();
        let h = hamiltonian(&geom, &xi, false).unwrap();
        assert!(h > 0.0);
        for t in [2.0, 10.0, 100.0] {
            let pt = principal_symbol_np(&geom, &(xi * t)).unwrap();
            assert!((pt - p / t).abs() < 1e-12 * p.abs());
            let ht = hamiltonian(&geom, &(xi * t), false).unwrap();
            assert!((ht - h / (t * t)).abs() < 1e-12 * h);
        }
    }
}

#[test]
fn hamiltonian_field_is_tangent_to_level_sets() {
    let chart = spheroid();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let s = random_state(&mut rng);
        let (du, dxi) = hamiltonian_vector_field(&chart, &s, FlowField::Regularized).unwrap();
        let g = gradient(&chart, &s, FlowField::Regularized).unwrap();
        let pairing = du[0] * g.du[0] + du[1] * g.du[1] + dxi[0] * g.dxi[0] + dxi[1] * g.dxi[1];
        assert!(pairing.abs() < 1e-6);
    }
}

#[test]
fn angular_momentum_generates_rotation() {
    let chart = spheroid();
    let s = CotangentState::new([1.1, 0.4], [0.3, -0.9]);
    let (du, dxi) = hamiltonian_vector_field(&chart, &s, FlowField::AngularMomentum).unwrap();
    assert!((du[1].abs() - 1.0).abs() < 1e-12 && du[0].abs() < 1e-12);
    assert!(dxi[0].abs() < 1e-8 && dxi[1].abs() < 1e-8);
    // the integrated flow matches a finite rotation
    let traj = integrate_flow(&chart, &s, 0.7, &FlowSettings::with_field(FlowField::AngularMomentum)).unwrap();
    let end = traj.last().state.to_frame(&chart, npspec::geometry::Frame::standard()).unwrap();
    assert!((end.u[1] - (0.4 - 0.7)).abs() < 1e-10);
    assert!((end.xi[0] - 0.3).abs() < 1e-10 && (end.xi[1] + 0.9).abs() < 1e-10);
}

#[test]
fn rotation_equivariance_of_f2() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let x = Vec3::new(rng.random(), rng.random(), rng.random());
        let v = Vec3::new(rng.random(), rng.random(), rng.random());
        let a: f64 = rng.random_range(0.0..2.0 * PI);
        let (s, c) = a.sin_cos();
        let rot = |p: &Vec3| Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z);
        assert!((angular_moment(&rot(&x), &rot(&v)) - angular_moment(&x, &v)).abs() < 1e-12);
    }
}

#[test]
fn poisson_bracket_vanishes_on_surfaces_of_revolution() {
    let chart = spheroid();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let s = random_state(&mut rng);
        let b = poisson_bracket(&chart, &s, FlowField::AngularMomentum, FlowField::Regularized).unwrap();
        assert!(b.abs() < 1e-6, "{b}");
        let sv = moment_map_singular_values(&chart, &s).unwrap();
        assert!(sv[1] > 1e-6 * sv[0]);
    }
}

#[test]
fn conservation_over_long_flows() {
    let chart = spheroid();
    let s = CotangentState::new([1.0, 0.3], [0.6, 0.8]);
    let traj = integrate_flow(&chart, &s, 100.0, &FlowSettings::default()).unwrap();
    assert!(traj.h_drift() < 1e-8, "H drift {}", traj.h_drift());
    assert!(traj.f2_drift(&chart).unwrap() < 1e-8);
    // a state through the poles exercises frame switching
    let s = CotangentState::new([1.0, 0.3], [1.0, 0.0]);
    let h0 = hamiltonian(&s.geometry(&chart).unwrap(), &s.xi_vector(), false).unwrap();
    let s = CotangentState::new([1.0, 0.3], [h0.sqrt(), 0.0]);
    let traj = integrate_flow(&chart, &s, 100.0, &FlowSettings::default()).unwrap();
    assert!(traj.stats.frame_switches > 0);
    assert!(traj.h_drift() < 1e-8, "H drift {}", traj.h_drift());
    assert!(traj.f2_drift(&chart).unwrap() < 1e-8);
}

#[test]
fn sphere_equator_is_invariant() {
    let chart = SurfaceChart::sphere(1.0).unwrap();
    let s = CotangentState::new([0.5 * PI, 0.0], [0.0, 1.3]);
    let traj = integrate_flow(&chart, &s, 50.0, &FlowSettings::default()).unwrap();
    for p in &traj.points {
        let (x, _) = p.state.embed(&chart).unwrap();
        assert!(x.z.abs() < 1e-8);
    }
    let csv = traj.to_csv(&chart).unwrap();
    assert!(csv.starts_with("t,u1,u2,xi1,xi2,H,f2\n"));
}

#[test]
fn joint_flow_commutes() {
    let chart = spheroid();
    let s = CotangentState::new([1.2, 0.5], [0.4, 0.7]);
    let settings = FlowSettings::default();
    let (_, a) = integrate_joint_flow(&chart, &s, [3.0, 1.0], &settings).unwrap();
    // rotation first, then the Hamiltonian flow
    let r = integrate_flow(&chart, &s, 1.0, &FlowSettings::with_field(FlowField::AngularMomentum)).unwrap();
    let b = integrate_flow(&chart, &r.last().state, 3.0, &settings).unwrap();
    let (xa, va) = a.last().state.embed(&chart).unwrap();
    let (xb, vb) = b.last().state.embed(&chart).unwrap();
    assert!((xa - xb).norm() < 1e-8 && (va - vb).norm() < 1e-8);
}

#[test]
fn flow_guards() {
    let chart = spheroid();
    let zero = CotangentState::new([1.0, 0.0], [0.0, 0.0]);
    assert!(matches!(
        integrate_flow(&chart, &zero, 1.0, &FlowSettings::default()),
        Err(Error::FlowBlowup { .. })
    ));
}

#[test]
fn fibers_lie_on_the_unit_level_set() {
    let sphere = SurfaceChart::sphere(1.0).unwrap();
    let geom = local_geometry(&sphere, [0.8, 1.0]).unwrap();
    let fiber = leaf_fiber(&geom, None, 64).unwrap();
    assert!(fiber.samples.iter().all(|s| (s.radius - 1.0).abs() < 1e-12));
    let pole = local_geometry(&spheroid(), [0.0, 0.0]).unwrap();
    let fiber = leaf_fiber(&pole, None, 64).unwrap();
    assert!(fiber.samples.iter().all(|s| (s.radius - 2.0).abs() < 1e-10));
    for chart in [sphere, spheroid()] {
        for u in [[0.4, 0.2], [1.3, 2.0], [2.9, 5.0]] {
            let geom = local_geometry(&chart, u).unwrap();
            for e2 in [None, Some(0.0), Some(0.2)] {
                let Ok(fiber) = leaf_fiber(&geom, e2, 32) else { continue };
                for s in &fiber.samples {
                    let xi = geom.ambient_to_covector(&Vec3::from(s.xi));
                    let h = hamiltonian(&geom, &xi, false).unwrap();
                    assert!((h - 1.0).abs() < 1e-10);
                    if let Some(e) = e2 {
                        assert!((angular_moment(&geom.x, &Vec3::from(s.xi)) - e).abs() < 1e-8);
                    }
                }
            }
        }
    }
}

#[test]
fn sphere_equator_fiber_orientation() {
    let chart = SurfaceChart::sphere(1.0).unwrap();
    let geom = local_geometry(&chart, [0.5 * PI, 0.0]).unwrap();
    let fiber = leaf_fiber(&geom, Some(0.0), 1).unwrap();
    let th: Vec<f64> = fiber.samples.iter().map(|s| s.theta).collect();
    assert_eq!(th.len(), 2);
    assert!((th[0] - 0.5 * PI).abs() < 1e-9 && (th[1] - 1.5 * PI).abs() < 1e-9);
}

#[test]
fn leaf_equation_on_the_sphere() {
    let chart = SurfaceChart::sphere(1.0).unwrap();
    let r = solve_leaf_equation(&chart, 0.0, 0.5).unwrap();
    assert_eq!(r.n, 2);
    assert!((r.thetas[0] - 2.0 * PI / 3.0).abs() < 1e-9);
    assert!((r.thetas[1] - 4.0 * PI / 3.0).abs() < 1e-9);
    assert_eq!(solve_leaf_equation(&chart, 0.0, 1.0).unwrap().n, 1);
    assert_eq!(solve_leaf_equation(&chart, 0.0, 1.2).unwrap().n, 0);
    let torus = SurfaceChart::torus(2.0, 1.0).unwrap();
    assert!(matches!(solve_leaf_equation(&torus, 0.0, 0.1), Err(Error::NotAxisymmetric(_))));
    let geom = local_geometry(&chart, [0.5 * PI, 0.0]).unwrap();
    assert_eq!(leaf_fiber(&geom, Some(1.5), 1).unwrap_err(), Error::EmptyFiber);
}

#[test]
fn double_roots_at_the_threshold_count_once() {
    let chart = SurfaceChart::sphere(1.0).unwrap();
    // at e2 = -R the double root sits at theta = 0 and its copies straddle the wrap-around
    for pz in [0.24383618062352275, -0.6, 0.0, 0.9] {
        let threshold = (1.0f64 - pz * pz).sqrt();
        for e2 in [threshold, -threshold] {
            let r = solve_leaf_equation(&chart, pz, e2).unwrap();
            assert_eq!(r.n, 1, "p_z = {pz}, e2 = {e2}: {:?}", r.thetas);
        }
    }
}

#[test]
fn leaf_classification_on_the_sphere() {
    let chart = SurfaceChart::sphere(1.0).unwrap();
    let (emax, _) = e2_max(&chart).unwrap();
    assert!((emax - 1.0).abs() < 1e-6);
    let budget = ProbeBudget::default();
    assert_eq!(classify_leaf(&chart, emax, &budget).unwrap().tag, LeafClassTag::Circle);
    assert_eq!(classify_leaf(&chart, 1.1, &budget).unwrap().tag, LeafClassTag::Empty);
    match classify_leaf(&chart, 0.5, &budget).unwrap().tag {
        LeafClassTag::TorusPeriodic { theta_per, p, q } => {
            assert!((theta_per.abs() - PI).abs() < 1e-8, "{theta_per}");
            assert_eq!((p, q), (1, 2));
        }
        other => panic!("unexpected class {other:?}"),
    }
}

#[test]
fn birkhoff_averages() {
    let chart = SurfaceChart::sphere(1.0).unwrap();
    let s = CotangentState::new([1.0, 0.0], [0.5, 0.8]);
    let one = birkhoff_average(&chart, &|_, _| 1.0, &s, 64.0, 4, None).unwrap();
    assert!(one.averages.iter().all(|a| (a - 1.0).abs() < 1e-12));
    // x3^2 along a great circle averages to (1 - n_z^2) / 2
    let (x, v) = s.embed(&chart).unwrap();
    let n = x.cross(&v).normalize();
    let oracle = 0.5 * (1.0 - n.z * n.z);
    let t = 2048.0;
    let tr = birkhoff_average(&chart, &|x, _| x.z * x.z, &s, t, 6, None).unwrap();
    let errs: Vec<f64> = tr.averages.iter().map(|a| (a - oracle).abs()).collect();
    for (e, tc) in errs.iter().zip(&tr.times) {
        // bounded oscillation of a periodic observable decays like 1/T
        assert!(e * tc < 5.0, "{e} at {tc}");
    }
    assert!(errs.last().unwrap() < &2e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn sphere_root_count_matches_closed_form(pz in -0.99f64..0.99, e2 in -1.5f64..1.5) {
        let chart = SurfaceChart::sphere(1.0).unwrap();
        let rr = (1.0 - pz * pz).sqrt();
        prop_assume!((e2.abs() - rr).abs() > 1e-6);
        let n = solve_leaf_equation(&chart, pz, e2).unwrap().n;
        prop_assert_eq!(n, if e2.abs() < rr { 2 } else { 0 });
    }
}
