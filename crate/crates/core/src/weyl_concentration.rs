//! Curvature volumes of symbol fibers, generalized Weyl counts, concentration ratios of
//! windowed eigenfunctions and the quantum-variance diagnostic.
//!
//! At a point with principal curvature data `kappa_tilde` (see [`kappa_tilde`]) the unit
//! level set of the symbol in the cotangent plane is the radial graph
//! `{r(omega) omega}` with `r(omega) = sum kappa_tilde_i omega_i^2`. All volumes below are
//! integrals over that graph or over its intersection with a leaf `f2 = e2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::quadrature::gauss_legendre_on;
use crate::geometry::{local_geometry, PointGeometry, QuadratureMesh, Vec3};
use crate::spectral::{select_window, NpSpectrum, SpectralValue, SpectralWindow, ALPHA_RANGE};
use crate::symbol_dynamics::{angular_moment, fiber_radius, leaf_roots, principal_frame, LeafFiber};

/// Exponent of the curvature factor in the curvature-volume integrand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExponentConvention {
    /// `d - 1 + 2 alpha`.
    AsPrinted,
    /// `d - 2 + 2 alpha`, the power that matches the fiber volume.
    Consistent,
}

impl ExponentConvention {
    pub fn exponent(self, d: usize, alpha: f64) -> f64 {
        match self {
            ExponentConvention::AsPrinted => d as f64 - 1.0 + 2.0 * alpha,
            ExponentConvention::Consistent => d as f64 - 2.0 + 2.0 * alpha,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureVolumeSpec {
    pub alpha: f64,
    /// Ambient dimension.
    pub d: usize,
    /// Leaf restriction `f2 = e2`; only meaningful for surfaces in three dimensions.
    pub e2: Option<f64>,
    pub convention: ExponentConvention,
}

impl CurvatureVolumeSpec {
    pub fn new(alpha: f64, d: usize, e2: Option<f64>, convention: ExponentConvention) -> Result<Self> {
        check_alpha(alpha)?;
        if d < 3 {
            return Err(Error::invalid("d", format!("ambient dimension {d} is below 3")));
        }
        if e2.is_some() && d != 3 {
            return Err(Error::invalid("e2", "leaf restrictions need d = 3"));
        }
        Ok(CurvatureVolumeSpec {
            alpha,
            d,
            e2,
            convention,
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(ALPHA_RANGE[0]..=ALPHA_RANGE[1]).contains(&alpha) {
        return Err(Error::invalid("alpha", format!("{alpha} is outside [-2, 2]")));
    }
    Ok(())
}

/// `kappa_tilde_i = sum_j kappa_j - kappa_i`.
pub fn kappa_tilde(kappas: &[f64]) -> Vec<f64> {
    let total: f64 = kappas.iter().sum();
    kappas.iter().map(|k| total - k).collect()
}

/// Quadrature nodes and weights on the unit sphere `S^n` embedded in `R^(n+1)`.
///
/// Hyperspherical coordinates with Gauss-Legendre nodes in every polar angle and an
/// equispaced rule in the azimuth.
fn sphere_rule(n: usize, order: usize) -> Vec<(Vec<f64>, f64)> {
    if n == 1 {
        let m = 2 * order;
        return (0..m)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m as f64;
                (vec![t.cos(), t.sin()], 2.0 * PI / m as f64)
            })
            .collect();
    }
    let inner = sphere_rule(n - 1, order);
    let (thetas, weights) = gauss_legendre_on(order, 0.0, PI);
    let mut out = Vec::with_capacity(thetas.len() * inner.len());
    for (t, w) in thetas.iter().zip(&weights) {
        let (s, c) = t.sin_cos();
        let jac = w * s.powi(n as i32 - 1);
        for (omega, wi) in &inner {
            let mut v = Vec::with_capacity(n + 1);
            v.push(c);
            v.extend(omega.iter().map(|o| s * o));
            out.push((v, jac * wi));
        }
    }
    out
}

/// Polar-angle order of the rule on spheres of dimension two and higher.
const SPHERE_ORDER: usize = 48;

/// Periodic trapezoid rule on the circle, doubled until converged to round-off.
fn circle_integral(f: impl Fn(f64) -> f64) -> f64 {
    let eval = |n: usize| -> f64 {
        let h = 2.0 * PI / n as f64;
        (0..n).map(|j| f(h * j as f64)).sum::<f64>() * h
    };
    let mut n = 64;
    let mut prev = eval(n);
    while n < 1 << 16 {
        n *= 2;
        let next = eval(n);
        if (next - prev).abs() <= 1e-15 * next.abs().max(1e-300) {
            return next;
        }
        prev = next;
    }
    prev
}

/// `r(omega)` and `sum kappa_tilde_i^2 omega_i^2`.
fn radius_terms(kt: &[f64], omega: &[f64]) -> (f64, f64) {
    kt.iter().zip(omega).fold((0.0, 0.0), |(r, s), (k, o)| {
        (r + k * o * o, s + k * k * o * o)
    })
}

/// Fiber-volume integrand `r^(1+2 alpha) r^(d-3) sqrt(r^2 + |grad r|^2)`.
fn fiber_integrand(kt: &[f64], omega: &[f64], alpha: f64) -> f64 {
    let (r, s) = radius_terms(kt, omega);
    let r = r.abs();
    let d = kt.len() as f64 + 1.0;
    let grad2 = 4.0 * (s - r * r).max(0.0);
    r.powf(1.0 + 2.0 * alpha) * r.powf(d - 3.0) * (r * r + grad2).sqrt()
}

fn curvature_integrand(kt: &[f64], omega: &[f64], exponent: f64) -> f64 {
    let (r, s) = radius_terms(kt, omega);
    r.abs().powf(exponent) * s.sqrt()
}

/// Integral of a function of `omega` over the unit sphere `S^(len - 1)`.
fn sphere_integral(dim: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    if dim == 2 {
        circle_integral(|t| f(&[t.cos(), t.sin()]))
    } else {
        sphere_rule(dim - 1, SPHERE_ORDER)
            .iter()
            .map(|(omega, w)| w * f(omega))
            .sum()
    }
}

fn check_kappas(kt: &[f64]) -> Result<()> {
    if kt.len() < 2 {
        return Err(Error::invalid("kappa_tilde", "needs at least two entries"));
    }
    if kt.iter().any(|k| !k.is_finite()) {
        return Err(Error::invalid("kappa_tilde", "entries must be finite"));
    }
    Ok(())
}

fn check_assumption(geom: &PointGeometry) -> Result<()> {
    let [k1, k2] = geom.kappas;
    if !(k1 * k2 > 0.0) {
        return Err(Error::invalid(
            "geometry",
            format!("principal curvatures ({k1}, {k2}) are not of one strict sign"),
        ));
    }
    Ok(())
}

/// Whether the point lies on the axis of revolution.
fn on_axis(geom: &PointGeometry) -> bool {
    geom.x.x.hypot(geom.x.y) < 1e-12
}

/// Leaf roots of `f2 = e2` for curvature data `kt`, or `None` when the leaf is the full fiber.
fn leaf_angles(geom: &PointGeometry, kt: [f64; 2], e2: f64) -> Result<Option<Vec<f64>>> {
    if on_axis(geom) {
        return if e2.abs() <= 1e-12 {
            Ok(None)
        } else {
            Err(Error::EmptyFiber)
        };
    }
    let roots = leaf_roots(geom.x.x.hypot(geom.x.y), kt, e2);
    if roots.is_empty() {
        return Err(Error::EmptyFiber);
    }
    Ok(Some(roots))
}

/// Curvature volume `G` from principal data, over the full sphere of directions.
pub fn curvature_volume_from_kappas(kappa_tilde: &[f64], spec: &CurvatureVolumeSpec) -> Result<f64> {
    check_kappas(kappa_tilde)?;
    if kappa_tilde.len() + 1 != spec.d {
        return Err(Error::invalid(
            "kappa_tilde",
            format!("expected {} entries for d = {}", spec.d - 1, spec.d),
        ));
    }
    if spec.e2.is_some() {
        return Err(Error::invalid("e2", "leaf restrictions need a point geometry"));
    }
    let e = spec.convention.exponent(spec.d, spec.alpha);
    Ok(sphere_integral(kappa_tilde.len(), |o| curvature_integrand(kappa_tilde, o, e)))
}

/// Curvature volume `G` at a surface point, optionally restricted to a leaf.
///
/// With a leaf restriction the integral is the sum of the integrand over the leaf roots.
pub fn curvature_volume_g(geom: &PointGeometry, spec: &CurvatureVolumeSpec) -> Result<f64> {
    if spec.d != 3 {
        return Err(Error::invalid("d", "point geometries are surfaces in d = 3"));
    }
    check_assumption(geom)?;
    let (_, kt) = principal_frame(geom);
    let e = spec.convention.exponent(3, spec.alpha);
    let full = || circle_integral(|t| curvature_integrand(&kt, &[t.cos(), t.sin()], e));
    match spec.e2 {
        None => Ok(full()),
        Some(e2) => Ok(match leaf_angles(geom, kt, e2)? {
            None => full(),
            Some(roots) => roots
                .iter()
                .map(|t| curvature_integrand(&kt, &[t.cos(), t.sin()], e))
                .sum(),
        }),
    }
}

/// Fiber volume from principal data in any dimension.
///
/// `int_{S^(d-2)} r^(1+2 alpha) dsigma` over the radial graph, including its exact
/// Jacobian `r^(d-3) sqrt(r^2 + |grad r|^2)`.
pub fn fiber_weighted_volume_nd(kappa_tilde: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_kappas(kappa_tilde)?;
    Ok(sphere_integral(kappa_tilde.len(), |o| fiber_integrand(kappa_tilde, o, alpha)))
}

/// Fiber volume `int |xi|^(1+2 alpha) dsigma` of a surface fiber.
///
/// Full fibers are integrated exactly in the angle with the arc-length Jacobian
/// `sqrt(r^2 + r'^2)`; leaf-restricted fibers carry the counting measure.
pub fn fiber_weighted_volume(fiber: &LeafFiber, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if fiber.samples.is_empty() {
        return Err(Error::EmptyFiber);
    }
    if fiber.is_discrete() {
        return Ok(fiber
            .samples
            .iter()
            .map(|s| s.radius.abs().powf(1.0 + 2.0 * alpha))
            .sum());
    }
    fiber_weighted_volume_nd(&fiber.kappa_tilde, alpha)
}

/// Fiber volume at a point for the symbol scaled by `scale`.
fn point_fiber_volume(geom: &PointGeometry, alpha: f64, e2: Option<f64>, scale: f64) -> Result<f64> {
    check_assumption(geom)?;
    let (_, kt) = principal_frame(geom);
    let kt = [kt[0] * scale, kt[1] * scale];
    let leaf = match e2 {
        None => None,
        Some(e) => leaf_angles(geom, kt, e)?,
    };
    match leaf {
        None => fiber_weighted_volume_nd(&kt, alpha),
        Some(roots) => Ok(roots
            .iter()
            .map(|t| fiber_radius(kt, *t).abs().powf(1.0 + 2.0 * alpha))
            .sum()),
    }
}

/// Curvature volume, fiber volume and their quotient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub g: f64,
    pub v: f64,
    pub ratio: f64,
    /// `1 <= V / G <= 2` up to `1e-9`.
    pub holds: bool,
}

const SANDWICH_TOL: f64 = 1e-9;

fn sandwich(g: f64, v: f64) -> SandwichReport {
    let ratio = v / g;
    SandwichReport {
        g,
        v,
        ratio,
        holds: ratio >= 1.0 - SANDWICH_TOL && ratio <= 2.0 + SANDWICH_TOL,
    }
}

/// Compares the fiber volume with the curvature volume under the consistent exponent.
pub fn sandwich_check_kappas(kappa_tilde: &[f64], alpha: f64) -> Result<SandwichReport> {
    let spec = CurvatureVolumeSpec::new(alpha, kappa_tilde.len() + 1, None, ExponentConvention::Consistent)?;
    let g = curvature_volume_from_kappas(kappa_tilde, &spec)?;
    let v = fiber_weighted_volume_nd(kappa_tilde, alpha)?;
    Ok(sandwich(g, v))
}

/// [`sandwich_check_kappas`] at a surface point.
pub fn sandwich_check(geom: &PointGeometry, alpha: f64) -> Result<SandwichReport> {
    check_assumption(geom)?;
    let (_, kt) = principal_frame(geom);
    sandwich_check_kappas(&kt, alpha)
}

/// Predicted concentration ratio between two points: the quotient of their fiber volumes.
pub fn predicted_ratio(
    geom_p: &PointGeometry,
    geom_q: &PointGeometry,
    alpha: f64,
    e2: Option<f64>,
) -> Result<f64> {
    predicted_ratio_scaled(geom_p, geom_q, alpha, e2, 1.0)
}

/// [`predicted_ratio`] for the symbol multiplied by a constant `scale`.
pub fn predicted_ratio_scaled(
    geom_p: &PointGeometry,
    geom_q: &PointGeometry,
    alpha: f64,
    e2: Option<f64>,
    scale: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::invalid("scale", "must be positive and finite"));
    }
    let vp = point_fiber_volume(geom_p, alpha, e2, scale)?;
    let vq = point_fiber_volume(geom_q, alpha, e2, scale)?;
    Ok(vp / vq)
}

/// Default bump radius `max(3 spacing, h^(1/4) diam)`.
pub fn bump_radius(h: f64, mesh: &QuadratureMesh) -> f64 {
    (3.0 * mesh.spacing()).max(h.powf(0.25) * mesh.diameter())
}

/// Smooth bump `exp(-1 / (1 - (d / delta)^2))` in chordal distance from `center`,
/// normalized so that its mesh integral is one.
pub fn bump(mesh: &QuadratureMesh, center: &Vec3, delta: f64) -> Result<Vec<f64>> {
    let min = 3.0 * mesh.spacing();
    if !(delta >= min) {
        return Err(Error::BumpUnresolved { delta, min });
    }
    let values = mesh.sample(|x| {
        let t = (x - center).norm() / delta;
        if t < 1.0 {
            (-1.0 / (1.0 - t * t)).exp()
        } else {
            0.0
        }
    });
    let total = mesh.integrate(&values);
    if !(total > 0.0) {
        return Err(Error::BumpUnresolved { delta, min });
    }
    Ok(values.into_iter().map(|v| v / total).collect())
}

/// Measured and predicted concentration ratios between two points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    /// Chart parameters of the two points.
    pub p: [f64; 2],
    pub q: [f64; 2],
    pub x_p: [f64; 3],
    pub x_q: [f64; 3],
    pub delta: f64,
    pub alpha: f64,
    pub window: SpectralWindow,
    pub measured_ratio: f64,
    pub predicted_ratio: f64,
    pub n_pairs: usize,
}

/// Windowed concentration of `|D|^alpha` eigenfunctions near `p` relative to `q`.
///
/// The measured ratio is `sum c_i int chi_p |D^alpha phi_i|^2 / sum c_i int chi_q ...`
/// over the pairs of the window. When the window restricts `m h` the prediction uses the
/// leaf through the middle of that range.
#[allow(clippy::too_many_arguments)]
pub fn concentration_ratio(
    spectrum: &NpSpectrum,
    mesh: &QuadratureMesh,
    p: [f64; 2],
    q: [f64; 2],
    delta: f64,
    alpha: f64,
    window: &SpectralWindow,
) -> Result<ConcentrationReport> {
    check_alpha(alpha)?;
    let gp = local_geometry(mesh.chart(), p)?;
    let gq = local_geometry(mesh.chart(), q)?;
    let chi_p = bump(mesh, &gp.x, delta)?;
    let chi_q = bump(mesh, &gq.x, delta)?;
    let sel = select_window(&spectrum.pairs, window);
    if sel.empty {
        return Err(Error::EmptyWindow);
    }
    let support = |chi: &[f64]| -> Vec<(usize, f64)> {
        chi.iter()
            .zip(mesh.weights())
            .enumerate()
            .filter(|(_, (c, _))| **c > 0.0)
            .map(|(i, (c, w))| (i, c * w))
            .collect()
    };
    let (sp, sq) = (support(&chi_p), support(&chi_q));
    let (mut num, mut den) = (0.0, 0.0);
    for pair in &sel.pairs {
        let psi = spectrum.modulated(pair, alpha)?;
        num += pair.c * sp.iter().map(|(i, w)| w * psi[*i] * psi[*i]).sum::<f64>();
        den += pair.c * sq.iter().map(|(i, w)| w * psi[*i] * psi[*i]).sum::<f64>();
    }
    let e2 = window.m_range.map(|[lo, hi]| 0.5 * (lo + hi));
    let predicted = predicted_ratio(&gp, &gq, alpha, e2)?;
    let measured = num / den;
    if !(measured.is_finite() && measured > 0.0) {
        return Err(Error::invalid("window", "eigenfunctions vanish on a bump"));
    }
    Ok(ConcentrationReport {
        p,
        q,
        x_p: gp.x.into(),
        x_q: gq.x.into(),
        delta,
        alpha,
        window: *window,
        measured_ratio: measured,
        predicted_ratio: predicted,
        n_pairs: sel.pairs.len(),
    })
}

/// Concentration CSV with header `h,measured_ratio,predicted_ratio,n_pairs`.
pub fn concentration_csv(reports: &[ConcentrationReport]) -> String {
    let mut out = String::from("h,measured_ratio,predicted_ratio,n_pairs\n");
    for r in reports {
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{}\n",
            r.window.h, r.measured_ratio, r.predicted_ratio, r.n_pairs
        ));
    }
    out
}

/// Eigenvalue count against phase-space volume for one `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylReport {
    pub h: f64,
    pub window: SpectralWindow,
    pub count: usize,
    pub volume: f64,
    /// `count / volume`, zero when the volume vanishes.
    pub ratio: f64,
}

/// Reports over an `h` sweep with the least-squares slope of `log count` against `log h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylSweep {
    pub reports: Vec<WeylReport>,
    /// `None` when fewer than two counts are positive.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

/// Azimuthal samples for leaf-restricted annulus areas.
const ANNULUS_SAMPLES: usize = 4096;

/// Area of `{xi : H(x, xi) in [a, b]}` at a point, optionally with `f2(xi)` in `m_range`.
fn annulus_area(geom: &PointGeometry, [a, b]: [f64; 2], m_range: Option<[f64; 2]>) -> f64 {
    let (frame, [k1, k2]) = principal_frame(geom);
    let (inv_a, inv_b) = (1.0 / a, if b.is_finite() { 1.0 / b } else { 0.0 });
    let Some([lo, hi]) = m_range else {
        // int_0^{2 pi} r^2 = pi (3 k1^2 + 2 k1 k2 + 3 k2^2) / 4
        let loop_r2 = PI * (3.0 * k1 * k1 + 2.0 * k1 * k2 + 3.0 * k2 * k2) / 4.0;
        return 0.5 * (inv_a - inv_b) * loop_r2;
    };
    let dt = 2.0 * PI / ANNULUS_SAMPLES as f64;
    let mut area = 0.0;
    for j in 0..ANNULUS_SAMPLES {
        let t = (j as f64 + 0.5) * dt;
        let (s, c) = t.sin_cos();
        let r = k1 * c * c + k2 * s * s;
        let (mut r_in, mut r_out) = (r.abs() * inv_b.sqrt(), r.abs() * inv_a.sqrt());
        // f2 is linear along the ray: f2 = rho * slope
        let slope = angular_moment(&geom.x, &(frame[0] * c + frame[1] * s));
        if slope.abs() < 1e-300 {
            if !(lo <= 0.0 && 0.0 <= hi) {
                continue;
            }
        } else {
            let (e0, e1) = if slope > 0.0 { (lo / slope, hi / slope) } else { (hi / slope, lo / slope) };
            r_in = r_in.max(e0);
            r_out = r_out.min(e1);
        }
        if r_out > r_in {
            area += 0.5 * (r_out * r_out - r_in * r_in) * dt;
        }
    }
    area
}

/// Phase-space volume `(2 pi h)^-2 int_{H in window} dx dxi` of a window.
pub fn phase_space_volume(mesh: &QuadratureMesh, window: &SpectralWindow) -> Result<f64> {
    let [a, b] = window.energy_interval();
    if !(a > 0.0) {
        return Err(Error::invalid("window.r", "must be positive for a finite volume"));
    }
    if !(a < b) {
        return Ok(0.0);
    }
    let total: f64 = mesh
        .nodes()
        .iter()
        .zip(mesh.weights())
        .map(|(n, w)| w * annulus_area(&n.geom, [a, b], window.m_range))
        .sum();
    Ok(total / (2.0 * PI * window.h).powi(2))
}

/// Counts eigenvalues in the window at every `h` and compares with the phase-space volume.
pub fn weyl_count(
    values: &[SpectralValue],
    mesh: &QuadratureMesh,
    window: &SpectralWindow,
    hs: &[f64],
) -> Result<WeylSweep> {
    let mut reports = Vec::with_capacity(hs.len());
    for &h in hs {
        let w = window.at(h)?;
        let count = values.iter().filter(|v| w.contains(**v)).count();
        let volume = phase_space_volume(mesh, &w)?;
        let ratio = if volume > 0.0 { count as f64 / volume } else { 0.0 };
        reports.push(WeylReport {
            h,
            window: w,
            count,
            volume,
            ratio,
        });
    }
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.count > 0)
        .map(|r| (r.h.ln(), (r.count as f64).ln()))
        .collect();
    let (slope, intercept) = match linear_fit(&pts) {
        Some((s, i)) => (Some(s), Some(i)),
        None => (None, None),
    };
    Ok(WeylSweep {
        reports,
        slope,
        intercept,
    })
}

/// Least-squares line through the points.
fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Weyl CSV with header `h,count,volume,ratio`.
pub fn weyl_csv(reports: &[WeylReport]) -> String {
    let mut out = String::from("h,count,volume,ratio\n");
    for r in reports {
        out.push_str(&format!("{:.17e},{},{:.17e},{:.17e}\n", r.h, r.count, r.volume, r.ratio));
    }
    out
}

/// Modulation exponent of the variance diagnostic.
pub const VARIANCE_ALPHA: f64 = -0.5;

/// Nodal fiber-volume density at `alpha`, normalized to unit mesh integral.
pub fn fiber_volume_density(mesh: &QuadratureMesh, alpha: f64) -> Result<Vec<f64>> {
    let raw = mesh
        .nodes()
        .iter()
        .map(|n| point_fiber_volume(&n.geom, alpha, None, 1.0))
        .collect::<Result<Vec<f64>>>()?;
    let total = mesh.integrate(&raw);
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Windowed deviation of eigenfunction matrix elements from the fiber-volume prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub h: f64,
    pub n_pairs: usize,
    /// `int a0 w dsigma` with `w` the normalized fiber-volume density.
    pub prediction: f64,
    pub mean_diagonal: f64,
    /// Mean over the window of `(diagonal_i - prediction)^2`.
    pub variance: f64,
}

/// Quantum variance of `a0` over the pairs of a window.
///
/// The diagonal of pair `i` is `(c_i / 2) <a0 psi_i, psi_i>` with `psi_i = |D|^(-1/2) phi_i`;
/// the factor one half makes it equal one for `a0 = 1`, since `c_i <psi_i, psi_i> = 2`.
pub fn quantum_variance(
    spectrum: &NpSpectrum,
    mesh: &QuadratureMesh,
    a0: &dyn Fn(&Vec3) -> f64,
    window: &SpectralWindow,
) -> Result<VarianceReport> {
    let sel = select_window(&spectrum.pairs, window);
    if sel.empty {
        return Err(Error::EmptyWindow);
    }
    let a = mesh.sample(a0);
    let w = fiber_volume_density(mesh, VARIANCE_ALPHA)?;
    let weighted: Vec<f64> = a.iter().zip(&w).map(|(x, y)| x * y).collect();
    let prediction = mesh.integrate(&weighted);
    let mut diagonals = Vec::with_capacity(sel.pairs.len());
    for pair in &sel.pairs {
        let psi = spectrum.modulated(pair, VARIANCE_ALPHA)?;
        let apsi: Vec<f64> = psi.iter().zip(&a).map(|(p, x)| p * x).collect();
        diagonals.push(0.5 * pair.c * mesh.inner(&apsi, &psi));
    }
    let n = diagonals.len() as f64;
    Ok(VarianceReport {
        h: window.h,
        n_pairs: diagonals.len(),
        prediction,
        mean_diagonal: diagonals.iter().sum::<f64>() / n,
        variance: diagonals.iter().map(|d| (d - prediction).powi(2)).sum::<f64>() / n,
    })
}

/// Slope of `log variance` against `log h` over reports with positive variance.
pub fn variance_trend(reports: &[VarianceReport]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| r.variance > 0.0)
        .map(|r| (r.h.ln(), r.variance.ln()))
        .collect();
    linear_fit(&pts).map(|(s, _)| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_tilde_examples() {
        assert_eq!(kappa_tilde(&[2.0, 3.0]), vec![3.0, 2.0]);
        assert_eq!(kappa_tilde(&[1.0, 1.0]), vec![1.0, 1.0]);
        assert_eq!(kappa_tilde(&[1.0, 2.0, 3.0]), vec![5.0, 4.0, 3.0]);
    }

    #[test]
    fn sphere_rules_integrate_area() {
        let s2: f64 = sphere_rule(2, 16).iter().map(|(_, w)| w).sum();
        assert!((s2 - 4.0 * PI).abs() < 1e-12);
        let s3: f64 = sphere_rule(3, 16).iter().map(|(_, w)| w).sum();
        assert!((s3 - 2.0 * PI * PI).abs() < 1e-12);
        // second moment of a coordinate on S^2 is 4 pi / 3
        let m: f64 = sphere_rule(2, 16).iter().map(|(o, w)| w * o[2] * o[2]).sum();
        assert!((m - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn line_fit() {
        let (s, i) = linear_fit(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]).unwrap();
        assert!((s - 2.0).abs() < 1e-14 && (i - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[(1.0, 1.0)]).is_none());
    }
}
