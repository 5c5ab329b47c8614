use std::f64::consts::PI;

use faer::Mat;
use npspec::geometry::{build_quadrature_mesh, QuadratureMesh, SurfaceChart};
use npspec::helmholtz::{
    helmholtz_fundamental, quasistatic_deviation, resonance_csv, resonance_lambda,
    resonance_operator, resonance_search, static_mu1, HelmholtzContext, QuasiStaticParams,
    ResonanceTarget,
};
use npspec::Error;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn sphere_mesh() -> QuadratureMesh {
    build_quadrature_mesh(&SurfaceChart::sphere(1.0).unwrap(), [12, 24]).unwrap()
}

fn max_diff(a: &Mat<Complex64>, b: impl Fn(usize, usize) -> Complex64) -> f64 {
    let mut d: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            d = d.max((a[(i, j)] - b(i, j)).norm());
        }
    }
    d
}

fn params(omega: f64) -> QuasiStaticParams {
    QuasiStaticParams::new(1.0, 1.0, c(1.0), c(1.0), omega).unwrap()
}

#[test]
fn fundamental_solution_solves_helmholtz() {
    let k = c(0.3);
    let f = |x: f64, y: f64, z: f64| helmholtz_fundamental(k, (x * x + y * y + z * z).sqrt()).unwrap();
    let h = 1e-3;
    let (x, y, z) = (1.0, 0.0, 0.0);
    let lap = (f(x + h, y, z) + f(x - h, y, z) + f(x, y + h, z) + f(x, y - h, z) + f(x, y, z + h)
        + f(x, y, z - h)
        - f(x, y, z) * 6.0)
        / (h * h);
    assert!((lap + k * k * f(x, y, z)).norm() < 1e-6);
}

#[test]
fn assembly_reduces_to_the_static_operators() {
    let mesh = sphere_mesh();
    let ctx = HelmholtzContext::new(&mesh).unwrap();
    let (s, k) = ctx.laplace_pair().unwrap();
    let (sh, kh) = ctx.assemble(c(0.0)).unwrap();
    assert!(max_diff(&sh.entries, |i, j| c(s.entries[(i, j)])) < 1e-12);
    assert!(max_diff(&kh.entries, |i, j| c(k.entries[(i, j)])) < 1e-12);
    // |S^k - S| = O(k) from the constant kernel term -ik/(4 pi)
    let ks = [1e-1, 1e-2, 1e-3];
    let diffs: Vec<f64> = ks
        .iter()
        .map(|kk| {
            let (sk, _) = ctx.assemble(c(*kk)).unwrap();
            let d = Mat::from_fn(s.len(), s.len(), |i, j| sk.entries[(i, j)] - c(s.entries[(i, j)]));
            d.norm_l2()
        })
        .collect();
    let slope = (diffs[0] / diffs[2]).ln() / (ks[0] / ks[2]).ln();
    assert!((slope - 1.0).abs() < 0.1, "{slope}");
    let (sk, _) = ctx.assemble(Complex64::new(0.4, 0.1)).unwrap();
    assert!(max_diff(&sk.entries, |i, j| sk.entries[(j, i)]) < 1e-10);
}

#[test]
fn sphere_helmholtz_single_layer_on_constants() {
    // S^k 1 = -e^{ik} sin(k) / k on the unit sphere
    let mesh = sphere_mesh();
    let ctx = HelmholtzContext::new(&mesh).unwrap();
    let k = 0.7;
    let (sk, _) = ctx.assemble(c(k)).unwrap();
    let expected = -(Complex64::i() * k).exp() * k.sin() / k;
    let basis = ctx.basis();
    let one = basis.from_nodal(&vec![1.0; mesh.len()]);
    let re: Vec<f64> = (0..one.len()).map(|i| (0..one.len()).map(|j| sk.entries[(i, j)].re * one[j]).sum()).collect();
    let im: Vec<f64> = (0..one.len()).map(|i| (0..one.len()).map(|j| sk.entries[(i, j)].im * one[j]).sum()).collect();
    let (re, im) = (basis.to_nodal(&re), basis.to_nodal(&im));
    for (a, b) in re.iter().zip(&im) {
        assert!((Complex64::new(*a, *b) - expected).norm() < 1e-6);
    }
}

#[test]
fn guard_rejects_large_wavenumbers() {
    let mesh = sphere_mesh();
    let ctx = HelmholtzContext::new(&mesh).unwrap();
    assert!(matches!(ctx.assemble(c(1.5)), Err(Error::WavenumberTooLarge(..))));
    assert!(matches!(
        resonance_search(&ctx, &params(5.0), ResonanceTarget { lambda: 1.0 / 6.0, np_index: None }, None),
        Err(Error::WavenumberTooLarge(..))
    ));
    let wide = HelmholtzContext::new(&mesh).unwrap().with_guard(10.0).unwrap();
    assert!(wide.assemble(c(1.5)).is_ok());
}

#[test]
fn interior_resonance_makes_s_singular() {
    // S^k annihilates constants on the unit sphere when sin(k) = 0
    let mesh = sphere_mesh();
    let ctx = HelmholtzContext::new(&mesh).unwrap().with_guard(10.0).unwrap();
    let r = resonance_operator(&ctx, c(1.0), c(1.0), c(PI), c(PI), 1);
    assert!(matches!(r, Err(Error::SingularS(_))), "{:?}", r.map(|_| ()));
}

#[test]
fn static_reduction_of_the_resonance_operator() {
    let mesh = sphere_mesh();
    let ctx = HelmholtzContext::new(&mesh).unwrap();
    let (_, kstar) = ctx.laplace_pair().unwrap();
    let (mu0, mu1) = (c(1.0), c(-0.3));
    let m = resonance_operator(&ctx, mu0, mu1, c(0.0), c(0.0), 1).unwrap();
    let c1 = 0.5 * (1.0 / mu0 + 1.0 / mu1);
    let c2 = 1.0 / mu0 - 1.0 / mu1;
    let d = max_diff(&m.entries, |i, j| {
        c2 * kstar.entries[(i, j)] + if i == j { c1 } else { c(0.0) }
    });
    assert!(d < 1e-10, "{d:e}");
    let m2 = resonance_operator(&ctx, mu0, mu1, c(0.3), c(0.2), 2).unwrap();
    let m1 = resonance_operator(&ctx, mu0, mu1, c(0.3), c(0.2), 1).unwrap();
    let sq = &m1.entries * &m1.entries;
    assert!(max_diff(&m2.entries, |i, j| sq[(i, j)]) < 1e-12);
    // singular exactly at the contrast of the eigenvalue 1/6
    let smallest = |mu1: f64| {
        let m = resonance_operator(&ctx, mu0, c(mu1), c(0.0), c(0.0), 1).unwrap();
        m.entries.singular_values().unwrap().into_iter().fold(f64::INFINITY, f64::min)
    };
    assert!(smallest(-0.5) < 1e-10);
    assert!(smallest(-0.3) > 1e-2);
    assert!((resonance_lambda(mu0, c(-0.5)).unwrap().re - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn static_resonance_is_recovered() {
    let mesh = sphere_mesh();
    let ctx = HelmholtzContext::new(&mesh).unwrap();
    let target = ResonanceTarget { lambda: 1.0 / 6.0, np_index: Some(1) };
    let sol = resonance_search(&ctx, &params(0.0), target, None).unwrap();
    assert!(sol.residual < 1e-10);
    assert!((sol.params.mu1 - c(-0.5)).norm() < 1e-10);
    assert!(sol.dev_phi < 1e-10 && sol.dev_lambda < 1e-10);
    assert_eq!(sol.m, 1);
    let norm: f64 = sol.coefficients.iter().map(|z| z.norm_sqr()).sum();
    assert!((norm - 1.0).abs() < 1e-12);
    let sol = resonance_search(&ctx, &params(0.05), target, None).unwrap();
    let seed = static_mu1(sol.static_lambda, 1.0).unwrap();
    assert!((sol.params.mu1 - c(seed)).norm() < 0.05 * 0.05);
    assert_eq!(
        resonance_search(&ctx, &params(0.0), ResonanceTarget { lambda: 0.5, np_index: None }, None).unwrap_err(),
        Error::LambdaHalf
    );
}

#[test]
fn quasistatic_sweep_on_the_sphere() {
    let mesh = sphere_mesh();
    let ctx = HelmholtzContext::new(&mesh).unwrap();
    let target = ResonanceTarget { lambda: 1.0 / 6.0, np_index: None };
    let omegas = [0.2, 0.1, 0.05, 0.025];
    let sweep = quasistatic_deviation(&ctx, &params(0.0), target, &omegas).unwrap();
    let slope = sweep.slope_lambda.unwrap();
    assert!((1.7..=2.3).contains(&slope), "{slope}");
    for (s, w) in sweep.solutions.iter().zip(&omegas) {
        assert_eq!(s.params.omega, *w);
        assert!(s.residual < 1e-10);
        // rotation invariance keeps the resonant density among degree-one harmonics
        assert!(s.dev_phi < 1e-10);
    }
    for pair in sweep.solutions.windows(2) {
        assert!(pair[1].residual <= 1e-10 && pair[1].dev_lambda < pair[0].dev_lambda);
    }
    let csv = resonance_csv(&sweep.solutions);
    assert!(csv.starts_with("omega,mu1_re,mu1_im,residual,dev_phi,dev_lambda\n"));
    assert_eq!(csv.lines().count(), 5);
    assert!(quasistatic_deviation(&ctx, &params(0.0), target, &[0.1, 0.2, 0.05, 0.01]).is_err());
    assert!(quasistatic_deviation(&ctx, &params(0.0), target, &[0.1, 0.05]).is_err());
}

#[test]
fn quasistatic_sweep_on_the_spheroid() {
    let mesh = build_quadrature_mesh(&SurfaceChart::spheroid(1.0, 2.0).unwrap(), [12, 24]).unwrap();
    let ctx = HelmholtzContext::new(&mesh).unwrap();
    let target = ResonanceTarget { lambda: 0.3264, np_index: None };
    let sweep = quasistatic_deviation(&ctx, &params(0.0), target, &[0.2, 0.1, 0.05, 0.025]).unwrap();
    let sp = sweep.slope_phi.unwrap();
    let sl = sweep.slope_lambda.unwrap();
    assert!((1.7..=2.3).contains(&sp), "{sp}");
    assert!((1.7..=2.3).contains(&sl), "{sl}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn fundamental_is_unimodular_for_real_k(k in 0.0f64..5.0, r in 0.01f64..10.0) {
        let g = helmholtz_fundamental(c(k), r).unwrap();
        prop_assert!((g.norm() * 4.0 * PI * r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn wavenumbers_have_nonnegative_imaginary_part(re in -3.0f64..3.0, im in -3.0f64..3.0, w in 0.0f64..2.0) {
        let p = QuasiStaticParams::new(1.0, 1.0, c(1.0), Complex64::new(re, im), w);
        prop_assume!(p.is_ok());
        let p = p.unwrap();
        prop_assert!(p.k1().im >= 0.0 && p.k0().im >= 0.0);
        prop_assert!((p.k1() * p.k1() - Complex64::new(re, im) * w * w).norm() < 1e-12);
    }
}
