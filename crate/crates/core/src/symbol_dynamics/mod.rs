//! Principal symbols, Hamiltonians and their flows on the cotangent bundle of a surface.
//!
//! States are chart coordinates `u` with covector components `xi` in a [`Frame`].
//! Sphere-topology charts can be read in any rotated frame, and flows switch frames
//! before reaching a coordinate pole. All derivatives in `xi` are analytic; derivatives
//! in `u` use fourth-order central differences of analytic chart data.

mod flow;
mod leaf;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

pub use flow::{
    birkhoff_average, integrate_flow, integrate_joint_flow, BirkhoffTrace, FlowSettings,
    FlowStats, Trajectory, TrajectoryPoint,
};
pub use leaf::{
    classify_leaf, e2_max, leaf_fiber, solve_leaf_equation, FiberSample, LeafClass, LeafClassTag,
    LeafFiber, LeafRoots, ProbeBudget,
};
pub(crate) use leaf::{fiber_radius, leaf_roots, principal_frame};

use crate::error::{Error, Result};
use crate::geometry::{
    geometry_in_frame, spherical_coordinates, Frame, PointGeometry, SurfaceChart,
    Topology, Vec3,
};
use crate::spectral::rho;

/// Finite-difference step in chart coordinates.
const FD_STEP: f64 = 2e-3;

/// Frames are switched once `sin(theta)` drops below this value.
const POLE_SWITCH: f64 = 0.5;

/// A point of the cotangent bundle in chart coordinates of `frame`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CotangentState {
    pub u: [f64; 2],
    pub xi: [f64; 2],
    pub frame: Frame,
}

/// Which Hamiltonian generates a flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowField {
    /// `H = p^2`.
    Hamiltonian,
    /// `rho(H)`.
    Regularized,
    /// `f2 = xi_1 x_2 - xi_2 x_1`, the angular momentum about the z-axis.
    AngularMomentum,
}

/// Value and gradient of a function on the cotangent bundle.
#[derive(Clone, Copy, Debug)]
pub struct Gradient {
    pub value: f64,
    pub du: [f64; 2],
    pub dxi: [f64; 2],
}

impl CotangentState {
    pub fn new(u: [f64; 2], xi: [f64; 2]) -> Self {
        CotangentState {
            u,
            xi,
            frame: Frame::standard(),
        }
    }

    pub fn xi_vector(&self) -> Vector2<f64> {
        Vector2::new(self.xi[0], self.xi[1])
    }

    pub fn geometry(&self, chart: &SurfaceChart) -> Result<PointGeometry> {
        geometry_in_frame(chart, &self.frame, self.u)
    }

    /// Position and ambient tangent vector `xi#` of the state.
    pub fn embed(&self, chart: &SurfaceChart) -> Result<(Vec3, Vec3)> {
        let geom = self.geometry(chart)?;
        Ok((geom.x, geom.covector_to_ambient(&self.xi_vector())))
    }

    /// State at position `x = X(u)` with the ambient tangent covector `v`.
    pub fn from_ambient(chart: &SurfaceChart, frame: Frame, u: [f64; 2], v: &Vec3) -> Result<Self> {
        let geom = geometry_in_frame(chart, &frame, u)?;
        let xi = geom.ambient_to_covector(v);
        Ok(CotangentState {
            u,
            xi: [xi.x, xi.y],
            frame,
        })
    }

    /// The same point of the cotangent bundle read in another frame.
    pub fn to_frame(&self, chart: &SurfaceChart, frame: Frame) -> Result<Self> {
        if frame == self.frame {
            return Ok(*self);
        }
        if chart.topology() != Topology::Sphere {
            return Err(Error::UnsupportedTopology("torus"));
        }
        let (_, v) = self.embed(chart)?;
        let p = self.frame.direction(self.u);
        Self::from_ambient(chart, frame, frame.coordinates(&p), &v)
    }

    /// Moves sphere-topology states away from the coordinate poles of their frame.
    pub(crate) fn away_from_pole(&self, chart: &SurfaceChart) -> Result<Self> {
        if chart.topology() == Topology::Sphere && self.u[0].sin() < POLE_SWITCH {
            let p = self.frame.direction(self.u);
            self.to_frame(chart, Frame::equator_at(&p))
        } else {
            Ok(*self)
        }
    }

    /// Standard chart coordinates, when the state is not on the polar axis.
    pub fn standard_coordinates(&self, chart: &SurfaceChart) -> Result<([f64; 2], [f64; 2])> {
        if self.frame.is_standard() {
            return Ok((self.u, self.xi));
        }
        let p = self.frame.direction(self.u);
        let [th, _] = spherical_coordinates(&p);
        if th.sin() < 1e-9 {
            return Ok((spherical_coordinates(&p), [f64::NAN; 2]));
        }
        let s = self.to_frame(chart, Frame::standard())?;
        Ok((s.u, s.xi))
    }
}

/// `|xi|_g`.
pub fn covector_norm(geom: &PointGeometry, xi: &Vector2<f64>) -> f64 {
    (xi.transpose() * geom.g_inv * xi)[0].sqrt()
}

/// NP principal symbol `tr_g(A) |xi|^-1 - <A xi#, xi#> |xi|^-3`.
pub fn principal_symbol_np(geom: &PointGeometry, xi: &Vector2<f64>) -> Result<f64> {
    Ok(symbol_with_gradient(&geom.g_inv, &geom.a, xi)?.0)
}

/// Symbol value and its gradient in `xi` for metric inverse `gi` and second fundamental form `a`.
fn symbol_with_gradient(
    gi: &Matrix2<f64>,
    a: &Matrix2<f64>,
    xi: &Vector2<f64>,
) -> Result<(f64, Vector2<f64>)> {
    let gx = gi * xi;
    let s2 = xi.dot(&gx);
    if !(s2 > 0.0) {
        return Err(Error::ZeroCovector);
    }
    let s = s2.sqrt();
    let b = gi * a * gi;
    let bx = b * xi;
    let q = xi.dot(&bx);
    let tr = (gi * a).trace();
    let p = tr / s - q / (s2 * s);
    let dp = gx * (-tr / (s2 * s) + 3.0 * q / (s2 * s2 * s)) - bx * (2.0 / (s2 * s));
    Ok((p, dp))
}

/// `H = p^2`, or `rho(H)` when `regularized`.
pub fn hamiltonian(geom: &PointGeometry, xi: &Vector2<f64>, regularized: bool) -> Result<f64> {
    let p = principal_symbol_np(geom, xi)?;
    Ok(if regularized { rho(p * p) } else { p * p })
}

/// Angular momentum `f2 = xi_1 x_2 - xi_2 x_1` of an embedded state.
pub fn angular_moment(x: &Vec3, xi: &Vec3) -> f64 {
    xi.x * x.y - xi.y * x.x
}

/// `V^i = g^ij <X_j, e_z x X>`, the chart components of the rotation generator.
fn rotation_components(geom: &PointGeometry) -> Vector2<f64> {
    let z = Vec3::new(-geom.x.y, geom.x.x, 0.0);
    geom.g_inv * Vector2::new(geom.tangents[0].dot(&z), geom.tangents[1].dot(&z))
}

/// Value of `which` at chart point `u` of `frame` with covector `xi`, and its `xi`-gradient.
fn value_and_xi_gradient(
    chart: &SurfaceChart,
    frame: &Frame,
    u: [f64; 2],
    xi: &Vector2<f64>,
    which: FlowField,
) -> Result<(f64, Vector2<f64>)> {
    let geom = geometry_in_frame(chart, frame, u)?;
    match which {
        FlowField::AngularMomentum => {
            let v = rotation_components(&geom);
            Ok((-xi.dot(&v), -v))
        }
        FlowField::Hamiltonian | FlowField::Regularized => {
            let (p, dp) = symbol_with_gradient(&geom.g_inv, &geom.a, xi)?;
            let h = p * p;
            let dh = dp * (2.0 * p);
            if which == FlowField::Regularized {
                let e = (-h).exp();
                Ok((rho(h), dh * e))
            } else {
                Ok((h, dh))
            }
        }
    }
}

/// Value and full gradient of `which` at a state.
pub fn gradient(chart: &SurfaceChart, state: &CotangentState, which: FlowField) -> Result<Gradient> {
    let xi = state.xi_vector();
    let (value, dxi) = value_and_xi_gradient(chart, &state.frame, state.u, &xi, which)?;
    let mut du = [0.0; 2];
    for (i, d) in du.iter_mut().enumerate() {
        let at = |s: f64| {
            let mut u = state.u;
            u[i] += s;
            value_and_xi_gradient(chart, &state.frame, u, &xi, which).map(|v| v.0)
        };
        let h = FD_STEP;
        *d = (at(-2.0 * h)? - 8.0 * at(-h)? + 8.0 * at(h)? - at(2.0 * h)?) / (12.0 * h);
    }
    Ok(Gradient {
        value,
        du,
        dxi: [dxi.x, dxi.y],
    })
}

/// Hamiltonian vector field `(u', xi') = (d_xi f, -d_u f)`.
pub fn hamiltonian_vector_field(
    chart: &SurfaceChart,
    state: &CotangentState,
    which: FlowField,
) -> Result<([f64; 2], [f64; 2])> {
    let g = gradient(chart, state, which)?;
    Ok((g.dxi, [-g.du[0], -g.du[1]]))
}

/// Poisson bracket `{f, g} = d_xi f . d_u g - d_u f . d_xi g`.
pub fn poisson_bracket(
    chart: &SurfaceChart,
    state: &CotangentState,
    f: FlowField,
    g: FlowField,
) -> Result<f64> {
    let a = gradient(chart, state, f)?;
    let b = gradient(chart, state, g)?;
    Ok(a.dxi[0] * b.du[0] + a.dxi[1] * b.du[1] - a.du[0] * b.dxi[0] - a.du[1] * b.dxi[1])
}

/// Singular values of the `2 x 4` Jacobian of `(rho(H), f2)` at a state, descending.
pub fn moment_map_singular_values(chart: &SurfaceChart, state: &CotangentState) -> Result<[f64; 2]> {
    let a = gradient(chart, state, FlowField::Regularized)?;
    let b = gradient(chart, state, FlowField::AngularMomentum)?;
    let ra = [a.du[0], a.du[1], a.dxi[0], a.dxi[1]];
    let rb = [b.du[0], b.du[1], b.dxi[0], b.dxi[1]];
    let dot = |x: &[f64; 4], y: &[f64; 4]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    // eigenvalues of the 2x2 Gram matrix J J^T
    let (p, q, s) = (dot(&ra, &ra), dot(&ra, &rb), dot(&rb, &rb));
    let mid = 0.5 * (p + s);
    let rad = (0.25 * (p - s).powi(2) + q * q).sqrt();
    Ok([(mid + rad).sqrt(), (mid - rad).max(0.0).sqrt()])
}

/// Unit azimuthal direction `e_z x x / |e_z x x|`, or `e_x` on the axis.
pub(crate) fn azimuthal_direction(x: &Vec3) -> Vec3 {
    let z = Vec3::new(-x.y, x.x, 0.0);
    let n = z.norm();
    if n < 1e-14 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        z / n
    }
}

/// Normal curvature `II(v, v)` of a unit tangent vector.
pub(crate) fn normal_curvature(geom: &PointGeometry, v: &Vec3) -> f64 {
    let [e1, e2] = geom.principal_dirs;
    let (c1, c2) = (v.dot(&e1) / e1.norm(), v.dot(&e2) / e2.norm());
    geom.kappas[0] * c1 * c1 + geom.kappas[1] * c2 * c2
}

/// State on a sphere-topology chart at the unit direction `p` with ambient covector `v`.
pub fn state_at_direction(chart: &SurfaceChart, p: &Vec3, v: &Vec3) -> Result<CotangentState> {
    let [th, _] = spherical_coordinates(p);
    let frame = if th.sin() < POLE_SWITCH {
        Frame::equator_at(p)
    } else {
        Frame::standard()
    };
    CotangentState::from_ambient(chart, frame, frame.coordinates(p), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::local_geometry;

    #[test]
    fn sphere_symbol_and_hamiltonian() {
        let chart = SurfaceChart::sphere(1.0).unwrap();
        let geom = local_geometry(&chart, [0.7, 1.2]).unwrap();
        let xi = Vector2::new(0.3, -0.8);
        let n = covector_norm(&geom, &xi);
        assert!((principal_symbol_np(&geom, &xi).unwrap() - 1.0 / n).abs() < 1e-12);
        assert!((hamiltonian(&geom, &xi, false).unwrap() - 1.0 / (n * n)).abs() < 1e-12);
        assert_eq!(principal_symbol_np(&geom, &Vector2::zeros()), Err(Error::ZeroCovector));
    }

    #[test]
    fn spheroid_pole_symbol() {
        let chart = SurfaceChart::spheroid(1.0, 2.0).unwrap();
        let geom = local_geometry(&chart, [0.0, 0.0]).unwrap();
        let xi = Vector2::new(0.4, 1.1);
        let n = covector_norm(&geom, &xi);
        assert!((principal_symbol_np(&geom, &xi).unwrap() - 2.0 / n).abs() < 1e-10);
    }

    #[test]
    fn angular_moment_examples() {
        let x = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(angular_moment(&x, &Vec3::new(0.0, 0.0, 1.0)), 0.0);
        assert_eq!(angular_moment(&x, &Vec3::new(0.0, 2.5, 0.0)), -2.5);
    }

    #[test]
    fn frame_change_round_trip() {
        let chart = SurfaceChart::spheroid(1.0, 2.0).unwrap();
        let s = CotangentState::new([0.9, 2.0], [0.3, -0.7]);
        let f = Frame::pole_at(&Vec3::new(0.3, -0.2, 0.9).normalize());
        let back = s.to_frame(&chart, f).unwrap().to_frame(&chart, Frame::standard()).unwrap();
        for i in 0..2 {
            assert!((back.u[i] - s.u[i]).abs() < 1e-12);
            assert!((back.xi[i] - s.xi[i]).abs() < 1e-12);
        }
        let g0 = s.geometry(&chart).unwrap();
        let g1 = s.to_frame(&chart, f).unwrap();
        let h0 = hamiltonian(&g0, &s.xi_vector(), false).unwrap();
        let h1 = hamiltonian(&g1.geometry(&chart).unwrap(), &g1.xi_vector(), false).unwrap();
        assert!((h0 - h1).abs() < 1e-12);
    }
}
