//! Fibers of the moment map over a point and the leaves of surfaces of revolution.
//!
//! Fibers are built in the principal frame `(v1, v2)` at a point. On a surface of
//! revolution `v1` is the azimuthal principal direction `e_z x x / |e_z x x|` and
//! `v2 = nu x v1`, so that `(v1 x v2) . nu > 0`. The covector of angle `theta` on the
//! fiber `{H = 1}` is `xi(theta) = r(theta) (cos(theta) v1 + sin(theta) v2)` with
//! `r(theta) = kt1 cos^2(theta) + kt2 sin^2(theta)`, where `kt1 = II(v2, v2)` and
//! `kt2 = II(v1, v1)`.

use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::flow::{FlowSettings, Stepper};
use super::{
    azimuthal_direction, gradient, normal_curvature, state_at_direction,
    CotangentState, FlowField,
};
use crate::error::{Error, Result};
use crate::geometry::{local_geometry, PointGeometry, SurfaceChart, Vec3};

/// Distance from the axis below which a point counts as a pole.
const AXIS_TOL: f64 = 1e-12;

/// One covector of a fiber with its quadrature weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberSample {
    /// Angle in the principal frame.
    pub theta: f64,
    /// Unit direction `(cos, sin)` in the principal frame.
    pub omega: [f64; 2],
    pub radius: f64,
    /// `2 pi / n` on full fibers, 1 (counting measure) on leaf-restricted fibers.
    pub weight: f64,
    /// The covector as an ambient tangent vector.
    pub xi: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct LeafFiber {
    pub x: Vec3,
    pub normal: Vec3,
    /// Principal frame `(v1, v2)`.
    pub frame: [Vec3; 2],
    /// `(kt1, kt2)` with `r = kt1 cos^2 + kt2 sin^2`.
    pub kappa_tilde: [f64; 2],
    pub e2: Option<f64>,
    pub samples: Vec<FiberSample>,
}

impl LeafFiber {
    pub fn radius(&self, theta: f64) -> f64 {
        fiber_radius(self.kappa_tilde, theta)
    }

    /// Whether the fiber is a finite set of leaf roots rather than a full circle.
    pub fn is_discrete(&self) -> bool {
        self.e2.is_some() && self.x.x.hypot(self.x.y) >= AXIS_TOL
    }
}

pub(crate) fn fiber_radius(kt: [f64; 2], theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    kt[0] * c * c + kt[1] * s * s
}

/// Principal frame and `kappa_tilde` at a point, with the azimuthal convention whenever
/// the azimuthal direction is principal.
pub(crate) fn principal_frame(geom: &PointGeometry) -> ([Vec3; 2], [f64; 2]) {
    let nu = geom.normal;
    let az = azimuthal_direction(&geom.x);
    let on_axis = geom.x.x.hypot(geom.x.y) < 1e-12;
    let az_tangent = az - nu * az.dot(&nu);
    let v1 = if !on_axis && az_tangent.norm() > 1.0 - 1e-9 {
        let v2 = nu.cross(&az);
        let [e1, e2] = geom.principal_dirs;
        let mixed = geom.kappas[0] * az.dot(&e1) * v2.dot(&e1) / e1.norm_squared()
            + geom.kappas[1] * az.dot(&e2) * v2.dot(&e2) / e2.norm_squared();
        let scale = geom.kappas[0].abs().max(geom.kappas[1].abs()).max(1e-300);
        if mixed.abs() <= 1e-8 * scale {
            az
        } else {
            geom.principal_dirs[0].normalize()
        }
    } else if on_axis {
        let t = az - nu * az.dot(&nu);
        if t.norm() > 1e-6 {
            t.normalize()
        } else {
            geom.principal_dirs[0].normalize()
        }
    } else {
        geom.principal_dirs[0].normalize()
    };
    let v2 = nu.cross(&v1);
    let kt = [normal_curvature(geom, &v2), normal_curvature(geom, &v1)];
    ([v1, v2], kt)
}

fn sample(frame: &[Vec3; 2], kt: [f64; 2], theta: f64, weight: f64) -> FiberSample {
    let r = fiber_radius(kt, theta);
    let (s, c) = theta.sin_cos();
    let xi = (frame[0] * c + frame[1] * s) * r;
    FiberSample {
        theta,
        omega: [c, s],
        radius: r,
        weight,
        xi: [xi.x, xi.y, xi.z],
    }
}

/// Fiber `{H(x, .) = 1}` over a point, optionally restricted to `f2 = e2`.
///
/// Without `e2` the fiber is sampled at `n_samples` equispaced angles. With `e2` the
/// samples are the roots of the leaf equation at the point.
pub fn leaf_fiber(geom: &PointGeometry, e2: Option<f64>, n_samples: usize) -> Result<LeafFiber> {
    let (frame, kt) = principal_frame(geom);
    let full = |n: usize| -> Vec<FiberSample> {
        (0..n)
            .map(|j| sample(&frame, kt, 2.0 * PI * j as f64 / n as f64, 2.0 * PI / n as f64))
            .collect()
    };
    let samples = match e2 {
        None => {
            if n_samples == 0 {
                return Err(Error::invalid("n_samples", "must be positive"));
            }
            full(n_samples)
        }
        Some(e) => {
            let rr = geom.x.x.hypot(geom.x.y);
            if rr < AXIS_TOL {
                if e.abs() <= 1e-12 {
                    full(n_samples.max(1))
                } else {
                    return Err(Error::EmptyFiber);
                }
            } else {
                let roots = leaf_roots(rr, kt, e);
                if roots.is_empty() {
                    return Err(Error::EmptyFiber);
                }
                roots.into_iter().map(|th| sample(&frame, kt, th, 1.0)).collect()
            }
        }
    };
    Ok(LeafFiber {
        x: geom.x,
        normal: geom.normal,
        frame,
        kappa_tilde: kt,
        e2,
        samples,
    })
}

/// Roots of the leaf equation at a surface point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafRoots {
    /// Polar chart parameter of the point (azimuth 0).
    pub u1: f64,
    /// Distance from the axis.
    pub axis_distance: f64,
    pub kappa_tilde: [f64; 2],
    /// Fiber angles in `[0, 2 pi)`, ascending.
    pub thetas: Vec<f64>,
    pub n: usize,
    /// On the axis with `e2 = 0` every angle solves the equation.
    pub full_circle: bool,
}

/// `f2(theta) - e2 = -R r(theta) cos(theta) - e2`.
fn leaf_residual(rr: f64, kt: [f64; 2], e2: f64, th: f64) -> f64 {
    -rr * fiber_radius(kt, th) * th.cos() - e2
}

fn leaf_residual_derivative(rr: f64, kt: [f64; 2], th: f64) -> f64 {
    let (s, c) = th.sin_cos();
    let r = fiber_radius(kt, th);
    let dr = 2.0 * (kt[1] - kt[0]) * s * c;
    -rr * (dr * c - r * s)
}

/// Coefficients (ascending powers of `t = tan(theta / 2)`) of the degree-6 polynomial
/// `-R (kt1 (1 - t^2)^2 + 4 kt2 t^2)(1 - t^2) - e2 (1 + t^2)^3`.
pub(crate) fn leaf_polynomial(rr: f64, kt: [f64; 2], e2: f64) -> [f64; 7] {
    let (a, b) = (kt[0], kt[1]);
    let q = [
        -rr * a - e2,
        rr * (3.0 * a - 4.0 * b) - 3.0 * e2,
        rr * (4.0 * b - 3.0 * a) - 3.0 * e2,
        rr * a - e2,
    ];
    [q[0], 0.0, q[1], 0.0, q[2], 0.0, q[3]]
}

/// Real roots of a polynomial (ascending coefficients) from companion-matrix eigenvalues.
pub(crate) fn real_polynomial_roots(coeffs: &[f64], imag_tol: f64) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].abs() <= 1e-13 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let comp = Mat::from_fn(deg, deg, |i, j| {
        if j == deg - 1 {
            -coeffs[i] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let Ok(eig) = comp.eigenvalues() else {
        return Vec::new();
    };
    eig.into_iter()
        .filter(|z| z.im.abs() <= imag_tol * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .collect()
}

/// Leaf-equation roots on the fiber over a point at distance `rr` from the axis.
pub(crate) fn leaf_roots(rr: f64, kt: [f64; 2], e2: f64) -> Vec<f64> {
    let tol = 1e-9;
    let mut cands: Vec<f64> = real_polynomial_roots(&leaf_polynomial(rr, kt, e2), 1e-5)
        .into_iter()
        .map(|t| 2.0 * t.atan())
        .collect();
    cands.push(PI);
    let mut roots: Vec<f64> = Vec::new();
    for th0 in cands {
        let mut th = th0;
        for _ in 0..50 {
            let f = leaf_residual(rr, kt, e2, th);
            let d = leaf_residual_derivative(rr, kt, th);
            if f == 0.0 || d == 0.0 {
                break;
            }
            let step = f / d;
            if step.abs() > 0.1 {
                break;
            }
            th -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let accept = tol * (1.0 + rr * kt[0].abs().max(kt[1].abs()));
        if leaf_residual(rr, kt, e2, th).abs() >= accept {
            continue;
        }
        let th = th.rem_euclid(2.0 * PI);
        // Newton converges only linearly onto a double root, so its copies can land a few
        // 1e-5 apart; nearby roots with a vanishing residual between them are one root
        let dup = roots.iter().any(|&r| {
            // signed shortest arc from r to th
            let d = (th - r + PI).rem_euclid(2.0 * PI) - PI;
            d.abs() < 1e-6 || (d.abs() < 1e-3 && leaf_residual(rr, kt, e2, r + 0.5 * d).abs() < accept)
        });
        if !dup {
            roots.push(th);
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Polar parameter of the meridian point with height `p_z` (azimuth zero).
fn meridian_parameter(chart: &SurfaceChart, p_z: f64) -> Result<f64> {
    let z = |th: f64| chart.point([th, 0.0]).z;
    let (top, bottom) = (z(0.0), z(PI));
    if !(p_z <= top && p_z >= bottom) {
        return Err(Error::invalid("p_z", format!("height {p_z} is outside [{bottom}, {top}]")));
    }
    // the height is monotone along the meridian of a star-shaped surface of revolution
    let (mut a, mut b) = (0.0, PI);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if z(m) > p_z {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Solves the leaf equation `f2(xi(theta)) = e2` on the fiber over the meridian point of
/// height `p_z`, through the substitution `t = tan(theta / 2)`.
pub fn solve_leaf_equation(chart: &SurfaceChart, p_z: f64, e2: f64) -> Result<LeafRoots> {
    if !chart.is_axisymmetric() {
        return Err(Error::NotAxisymmetric(chart.kind_name()));
    }
    let u1 = meridian_parameter(chart, p_z)?;
    let geom = local_geometry(chart, [u1, 0.0])?;
    let (_, kt) = principal_frame(&geom);
    let rr = geom.x.x.hypot(geom.x.y);
    let on_axis = rr < 1e-12;
    let thetas = if on_axis { Vec::new() } else { leaf_roots(rr, kt, e2) };
    Ok(LeafRoots {
        u1,
        axis_distance: rr,
        kappa_tilde: kt,
        n: thetas.len(),
        thetas,
        full_circle: on_axis && e2.abs() <= 1e-12,
    })
}

/// `max_theta r(theta) |cos(theta)|` for `r = kt1 c^2 + kt2 (1 - c^2)`.
fn fiber_moment_max(kt: [f64; 2]) -> f64 {
    // g(c) = kt2 c + (kt1 - kt2) c^3 on [0, 1]
    let g = |c: f64| kt[1] * c + (kt[0] - kt[1]) * c * c * c;
    let mut best = g(1.0).max(g(0.0));
    let d = kt[1] - kt[0];
    if d > 0.0 {
        let c2 = kt[1] / (3.0 * d);
        if c2 > 0.0 && c2 < 1.0 {
            best = best.max(g(c2.sqrt()));
        }
    }
    best
}

/// `max |f2|` over the bundle `{H = 1}` of a surface of revolution, with the polar
/// parameter where it is attained.
pub fn e2_max(chart: &SurfaceChart) -> Result<(f64, f64)> {
    if !chart.is_axisymmetric() {
        return Err(Error::NotAxisymmetric(chart.kind_name()));
    }
    let value = |th: f64| -> Result<f64> {
        let geom = local_geometry(chart, [th, 0.0])?;
        let (_, kt) = principal_frame(&geom);
        Ok(geom.x.x.hypot(geom.x.y) * fiber_moment_max(kt))
    };
    let n = 256;
    let mut best = (0.0, 0.0);
    for j in 1..n {
        let th = PI * j as f64 / n as f64;
        let v = value(th)?;
        if v > best.0 {
            best = (v, th);
        }
    }
    // golden-section refinement
    let (mut a, mut b) = ((best.1 - PI / n as f64).max(0.0), (best.1 + PI / n as f64).min(PI));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (value(x1)?, value(x2)?);
    while b - a > 1e-12 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = value(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = value(x1)?;
        }
    }
    let th = 0.5 * (a + b);
    Ok((value(th)?.max(best.0), th))
}

/// Budget for orbit probes in [`classify_leaf`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeBudget {
    /// Longest flow time spent looking for one turning point.
    pub t_max: f64,
    pub cf_depth: usize,
    pub cf_tolerance: f64,
}

impl Default for ProbeBudget {
    fn default() -> Self {
        ProbeBudget {
            t_max: 1e3,
            cf_depth: 12,
            cf_tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LeafClassTag {
    Empty,
    Circle,
    /// Azimuthal advance `theta_per` between consecutive height turning points, with
    /// `theta_per / 2 pi = p / q`.
    TorusPeriodic { theta_per: f64, p: i64, q: i64 },
    /// No convergent within the budget; the rotation number is an estimate.
    TorusQuasiPeriodic { theta_per: f64, rotation_number: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafClass {
    pub tag: LeafClassTag,
    pub e2: f64,
    pub e2_max: f64,
}

/// Convergent `p / q` of `x` within `depth` terms and tolerance `tol`.
pub(crate) fn rational_approximation(x: f64, depth: usize, tol: f64) -> Option<(i64, i64)> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..depth {
        let a = r.floor();
        if a.abs() > 1e12 {
            return None;
        }
        let ai = a as i64;
        let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
        let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() < tol {
            return Some((h1, k1));
        }
        let frac = r - a;
        if frac.abs() < 1e-300 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

/// Vertical velocity `dz/dt` along the regularized flow.
fn vertical_velocity(chart: &SurfaceChart, s: &CotangentState) -> Result<f64> {
    let g = gradient(chart, s, FlowField::Regularized)?;
    let geom = s.geometry(chart)?;
    Ok(geom.tangents[0].z * g.dxi[0] + geom.tangents[1].z * g.dxi[1])
}

/// Classifies the leaf `{rho(H) = rho(1), f2 = e2}` of a surface of revolution.
///
/// Leaves with `|e2|` above the maximum are empty and the extremal leaf is a circle.
/// Other leaves are tori: one orbit is integrated between consecutive turning points of
/// the height and its azimuthal advance is tested for rationality. The `e2 = 0` leaf
/// consists of meridian orbits through the poles, which close after one azimuthal
/// advance of `pi`.
pub fn classify_leaf(chart: &SurfaceChart, e2: f64, budget: &ProbeBudget) -> Result<LeafClass> {
    let (emax, th_star) = e2_max(chart)?;
    let rel = 1e-9;
    let tag = if e2.abs() > emax * (1.0 + rel) {
        LeafClassTag::Empty
    } else if e2.abs() >= emax * (1.0 - rel) {
        LeafClassTag::Circle
    } else if e2 == 0.0 {
        LeafClassTag::TorusPeriodic {
            theta_per: PI,
            p: 1,
            q: 2,
        }
    } else {
        let theta_per = azimuthal_advance(chart, e2, th_star, budget)?;
        let x = theta_per.abs() / (2.0 * PI);
        match rational_approximation(x, budget.cf_depth, budget.cf_tolerance) {
            Some((p, q)) => LeafClassTag::TorusPeriodic { theta_per, p, q },
            None => LeafClassTag::TorusQuasiPeriodic {
                theta_per,
                rotation_number: x,
            },
        }
    };
    Ok(LeafClass {
        tag,
        e2,
        e2_max: emax,
    })
}

/// Azimuthal advance between two consecutive height turning points of an orbit on the
/// leaf `f2 = e2`, started over the meridian point with polar parameter `u1`.
pub(crate) fn azimuthal_advance(
    chart: &SurfaceChart,
    e2: f64,
    u1: f64,
    budget: &ProbeBudget,
) -> Result<f64> {
    let geom = local_geometry(chart, [u1, 0.0])?;
    let fiber = leaf_fiber(&geom, Some(e2), 1)?;
    let smp = fiber.samples[0];
    let p = crate::geometry::unit_sphere(u1, 0.0);
    let state = state_at_direction(chart, &p, &Vec3::from(smp.xi))?;
    let mut stepper = Stepper::new(chart, &state, FlowSettings::default(), Vec::new())?;
    let azimuth = |s: &Stepper| -> Result<f64> {
        let (x, _) = s.state.embed(chart)?;
        Ok(x.y.atan2(x.x))
    };
    let event = |c: &SurfaceChart, s: &CotangentState| vertical_velocity(c, s);
    let mut last = azimuth(&stepper)?;
    let mut unwrapped = last;
    let mut track = |now: f64, unwrapped: &mut f64| {
        *unwrapped += (now - last + PI).rem_euclid(2.0 * PI) - PI;
        last = now;
    };
    let mut marks = Vec::new();
    for _ in 0..2 {
        let t_stop = stepper.t + budget.t_max;
        loop {
            // short chunks keep the azimuth unwrapping unambiguous
            let hit = stepper.advance_to_event((stepper.t + 0.25).min(t_stop), &event)?;
            track(azimuth(&stepper)?, &mut unwrapped);
            if hit {
                marks.push(unwrapped);
                stepper.advance(1e-6)?;
                track(azimuth(&stepper)?, &mut unwrapped);
                break;
            }
            if stepper.t >= t_stop {
                return Err(Error::invalid(
                    "budget.t_max",
                    "no height turning point within the probe budget",
                ));
            }
        }
    }
    Ok(marks[1] - marks[0])
}
