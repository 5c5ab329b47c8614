//! Extrinsic differential geometry of parametrized closed surfaces.

mod chart;
mod mesh;
pub mod quadrature;

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};

pub use chart::{
    ChartJet, ChartKind, Expression, Frame, GenericSurface, RevolutionProfile, SurfaceChart, Topology, Vec3,
};
#[allow(unused_imports)]
pub(crate) use chart::{spherical_coordinates, tangent_basis, unit_sphere};
pub use mesh::{build_quadrature_mesh, AxisymLayout, MeshNode, QuadratureMesh};

use crate::error::{Error, Result};

/// Threshold on `|X_1 x X_2|` below which a chart point is considered degenerate.
pub const REGULARITY_EPS: f64 = 1e-10;

/// Curvature data at one surface point.
///
/// `g`, `a` and the coordinate tangents refer to the chart coordinates of `frame`
/// (the standard frame away from the coordinate poles).
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub u: [f64; 2],
    pub frame: Frame,
    pub x: Vec3,
    pub normal: Vec3,
    /// Coordinate tangent vectors `X_1`, `X_2`.
    pub tangents: [Vec3; 2],
    pub g: Matrix2<f64>,
    pub g_inv: Matrix2<f64>,
    /// Second fundamental form `A_ij = <X_i, d_j nu>`.
    pub a: Matrix2<f64>,
    pub mean_curvature: f64,
    /// Principal curvatures, ascending.
    pub kappas: [f64; 2],
    /// Unit principal directions matching `kappas`.
    pub principal_dirs: [Vec3; 2],
    /// `|X_1 x X_2|`.
    pub area_element: f64,
}

impl PointGeometry {
    /// Builds the geometry from a chart jet. `orientation` flips `X_1 x X_2` to the outward side.
    pub fn from_jet(u: [f64; 2], frame: Frame, jet: &ChartJet, orientation: f64) -> Result<Self> {
        let cross = jet.du[0].cross(&jet.du[1]);
        let area_element = cross.norm();
        if !(area_element >= REGULARITY_EPS) {
            return Err(Error::DegenerateChart {
                u1: u[0],
                u2: u[1],
                norm: area_element,
            });
        }
        let normal = cross * (orientation / area_element);
        let [x1, x2] = jet.du;
        let g = Matrix2::new(x1.dot(&x1), x1.dot(&x2), x1.dot(&x2), x2.dot(&x2));
        let g_inv = g
            .try_inverse()
            .ok_or(Error::DegenerateChart {
                u1: u[0],
                u2: u[1],
                norm: area_element,
            })?;
        let a12 = -jet.duu[0][1].dot(&normal);
        let a = Matrix2::new(
            -jet.duu[0][0].dot(&normal),
            a12,
            a12,
            -jet.duu[1][1].dot(&normal),
        );
        let (kappas, coeffs) = principal_pairs(&g, &a);
        let principal_dirs = coeffs.map(|c| x1 * c.x + x2 * c.y);
        Ok(PointGeometry {
            u,
            frame,
            x: jet.x,
            normal,
            tangents: jet.du,
            g,
            g_inv,
            a,
            mean_curvature: 0.5 * (kappas[0] + kappas[1]),
            kappas,
            principal_dirs,
            area_element,
        })
    }

    /// `tr_g A = (d - 1) H`.
    pub fn trace_a(&self) -> f64 {
        (self.g_inv * self.a).trace()
    }

    /// Ambient tangent vector of a covector `xi` (index raised with `g`).
    pub fn covector_to_ambient(&self, xi: &Vector2<f64>) -> Vec3 {
        let v = self.g_inv * xi;
        self.tangents[0] * v.x + self.tangents[1] * v.y
    }

    /// Chart covector of an ambient tangent vector.
    pub fn ambient_to_covector(&self, v: &Vec3) -> Vector2<f64> {
        Vector2::new(v.dot(&self.tangents[0]), v.dot(&self.tangents[1]))
    }
}

/// Generalized symmetric eigenpairs of `(a, g)`: ascending values with g-orthonormal vectors.
fn principal_pairs(g: &Matrix2<f64>, a: &Matrix2<f64>) -> ([f64; 2], [Vector2<f64>; 2]) {
    // g = L L^T, M = L^{-1} A L^{-T}
    let l11 = g[(0, 0)].sqrt();
    let l21 = g[(1, 0)] / l11;
    let l22 = (g[(1, 1)] - l21 * l21).sqrt();
    let linv = Matrix2::new(1.0 / l11, 0.0, -l21 / (l11 * l22), 1.0 / l22);
    let m = linv * a * linv.transpose();
    let (p, q, s) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
    let mid = 0.5 * (p + s);
    let rad = (0.25 * (p - s) * (p - s) + q * q).sqrt();
    let (k1, k2) = (mid - rad, mid + rad);
    let scale = p.abs().max(s.abs()).max(q.abs()).max(1e-300);
    let y2 = if rad <= 1e-14 * scale {
        Vector2::new(0.0, 1.0)
    } else {
        let c1 = Vector2::new(q, k2 - p);
        let c2 = Vector2::new(k2 - s, q);
        if c1.norm() >= c2.norm() {
            c1.normalize()
        } else {
            c2.normalize()
        }
    };
    let y1 = Vector2::new(y2.y, -y2.x);
    let lt_inv = linv.transpose();
    ([k1, k2], [lt_inv * y1, lt_inv * y2])
}

/// Local geometry at standard chart parameters `u`.
///
/// At the coordinate poles of sphere-topology charts the geometry is evaluated in
/// an equatorial rotated frame; scalar invariants do not depend on that choice.
pub fn local_geometry(chart: &SurfaceChart, u: [f64; 2]) -> Result<PointGeometry> {
    match chart.topology() {
        Topology::Sphere if u[0].sin() < 1e-4 => {
            let p = unit_sphere(u[0], u[1]);
            let frame = Frame::equator_at(&p);
            let jet = chart.jet(&frame, [0.5 * PI, 0.0])?;
            let mut geom = PointGeometry::from_jet(u, frame, &jet, chart.orientation())?;
            geom.u = u;
            Ok(geom)
        }
        _ => geometry_in_frame(chart, &Frame::standard(), u),
    }
}

/// Local geometry at coordinates `u` of the given frame.
pub fn geometry_in_frame(chart: &SurfaceChart, frame: &Frame, u: [f64; 2]) -> Result<PointGeometry> {
    let jet = chart.jet(frame, u)?;
    PointGeometry::from_jet(u, *frame, &jet, chart.orientation())
}

/// Outcome of [`check_assumption_a`].
#[derive(Clone, Debug)]
pub struct AssumptionReport {
    pub holds: bool,
    /// Smallest signed margin over the nodes; positive iff the assumption holds.
    pub worst_margin: f64,
    pub violating_nodes: Vec<usize>,
    /// Sampled directions never left the exact principal-value range.
    pub sampling_consistent: bool,
}

/// Signed distance of `m(x, omega) = <A g^-1 omega, g^-1 omega> - tr_g A` from zero.
///
/// The range of `m` over unit covectors is `[-k_max, -k_min]`; the margin is
/// `min(|k1|, |k2|)` when the curvatures share a strict sign and `-min(|k1|, |k2|)` otherwise.
pub fn assumption_margin(geom: &PointGeometry) -> f64 {
    let [k1, k2] = geom.kappas;
    let m = k1.abs().min(k2.abs());
    if k1 * k2 > 0.0 {
        m
    } else {
        -m
    }
}

/// Checks Assumption (A) at every mesh node, cross-checking with `n_dirs` sampled covectors.
pub fn check_assumption_a(mesh: &QuadratureMesh, n_dirs: usize) -> Result<AssumptionReport> {
    if n_dirs < 8 {
        return Err(Error::invalid("n_dirs", "need at least 8 sampled directions"));
    }
    let mut worst = f64::INFINITY;
    let mut violating = Vec::new();
    let mut consistent = true;
    for (i, node) in mesh.nodes().iter().enumerate() {
        let geom = &node.geom;
        let margin = assumption_margin(geom);
        worst = worst.min(margin);
        if margin <= 0.0 {
            violating.push(i);
        }
        let tr = geom.trace_a();
        let (lo, hi) = (-geom.kappas[1], -geom.kappas[0]);
        let tol = 1e-9 * (1.0 + tr.abs());
        for j in 0..n_dirs {
            let ang = PI * j as f64 / n_dirs as f64;
            // unit covector: omega = g (cos e1 + sin e2) for g-orthonormal directions
            let v = geom.principal_dirs[0] * ang.cos() + geom.principal_dirs[1] * ang.sin();
            let omega = geom.ambient_to_covector(&v);
            let w = geom.g_inv * omega;
            let m = (geom.a * w).dot(&w) - tr;
            if m < lo - tol || m > hi + tol {
                consistent = false;
            }
        }
    }
    Ok(AssumptionReport {
        holds: violating.is_empty(),
        worst_margin: worst,
        violating_nodes: violating,
        sampling_consistent: consistent,
    })
}
