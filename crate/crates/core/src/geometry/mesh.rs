//! Tensor-product quadrature meshes on a chart.

use std::f64::consts::PI;

use super::quadrature::gauss_legendre;
use super::{local_geometry, PointGeometry, SurfaceChart, Topology, Vec3};
use crate::error::{Error, Result};

pub const MIN_NODES_PER_AXIS: usize = 8;

#[derive(Clone, Debug)]
pub struct MeshNode {
    pub u: [f64; 2],
    pub geom: PointGeometry,
}

/// Ring structure of a mesh on a surface of revolution: node `k * n_azimuth + l`
/// sits on profile node `k` at azimuth `2 pi l / n_azimuth`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AxisymLayout {
    pub n_rings: usize,
    pub n_azimuth: usize,
}

/// Product quadrature on a chart: Gauss-Legendre in the cosine of the polar angle on
/// sphere-topology charts and the trapezoid rule in periodic directions. Nodes are ordered with `u2` fastest.
#[derive(Clone, Debug)]
pub struct QuadratureMesh {
    chart: SurfaceChart,
    resolution: [usize; 2],
    u1: Vec<f64>,
    u2: Vec<f64>,
    nodes: Vec<MeshNode>,
    weights: Vec<f64>,
    total_area: f64,
    axisym: Option<AxisymLayout>,
}

/// Builds the product-rule mesh with `resolution = [n1, n2]` nodes per axis.
pub fn build_quadrature_mesh(chart: &SurfaceChart, resolution: [usize; 2]) -> Result<QuadratureMesh> {
    let [n1, n2] = resolution;
    if n1 < MIN_NODES_PER_AXIS || n2 < MIN_NODES_PER_AXIS {
        return Err(Error::ResolutionTooLow {
            n1,
            n2,
            min: MIN_NODES_PER_AXIS,
        });
    }
    let (u1, w1) = match chart.topology() {
        Topology::Sphere => {
            if n2 % 2 != 0 {
                return Err(Error::invalid(
                    "resolution",
                    "azimuthal node count must be even on sphere-topology charts",
                ));
            }
            // Gauss-Legendre in cos(theta); the weight drops the sin(theta) carried by
            // the area element
            let (t, w) = gauss_legendre(n1);
            let theta: Vec<f64> = t.iter().rev().map(|x| x.acos()).collect();
            let w1 = w
                .iter()
                .rev()
                .zip(&theta)
                .map(|(wi, th)| wi / th.sin())
                .collect();
            (theta, w1)
        }
        Topology::Torus => (
            (0..n1).map(|k| 2.0 * PI * k as f64 / n1 as f64).collect(),
            vec![2.0 * PI / n1 as f64; n1],
        ),
    };
    let u2: Vec<f64> = (0..n2).map(|l| 2.0 * PI * l as f64 / n2 as f64).collect();
    let w2 = 2.0 * PI / n2 as f64;
    let mut nodes = Vec::with_capacity(n1 * n2);
    let mut weights = Vec::with_capacity(n1 * n2);
    for (k, &a) in u1.iter().enumerate() {
        for &b in &u2 {
            let geom = local_geometry(chart, [a, b])?;
            if !geom.x.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidSurface(format!("non-finite point at u = ({a}, {b})")));
            }
            weights.push(w1[k] * w2 * geom.area_element);
            nodes.push(MeshNode { u: [a, b], geom });
        }
    }
    let total_area = weights.iter().sum();
    let axisym = chart.is_axisymmetric().then_some(AxisymLayout {
        n_rings: n1,
        n_azimuth: n2,
    });
    Ok(QuadratureMesh {
        chart: chart.clone(),
        resolution,
        u1,
        u2,
        nodes,
        weights,
        total_area,
        axisym,
    })
}

impl QuadratureMesh {
    pub fn chart(&self) -> &SurfaceChart {
        &self.chart
    }

    pub fn resolution(&self) -> [usize; 2] {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[MeshNode] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn axisym(&self) -> Option<AxisymLayout> {
        self.axisym
    }

    /// Grid of the first chart coordinate.
    pub fn u1_grid(&self) -> &[f64] {
        &self.u1
    }

    /// Grid of the second chart coordinate.
    pub fn u2_grid(&self) -> &[f64] {
        &self.u2
    }

    pub fn position(&self, i: usize) -> Vec3 {
        self.nodes[i].geom.x
    }

    pub fn normal(&self, i: usize) -> Vec3 {
        self.nodes[i].geom.normal
    }

    /// Typical node spacing `sqrt(area / N)`.
    pub fn spacing(&self) -> f64 {
        (self.total_area / self.len() as f64).sqrt()
    }

    /// Largest chordal distance between nodes.
    pub fn diameter(&self) -> f64 {
        let mut d2: f64 = 0.0;
        for (i, a) in self.nodes.iter().enumerate() {
            for b in &self.nodes[i + 1..] {
                d2 = d2.max((a.geom.x - b.geom.x).norm_squared());
            }
        }
        d2.sqrt()
    }

    /// Enclosed volume from the divergence theorem, `(1/3) sum w <x, nu>`.
    pub fn signed_volume(&self) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(n, w)| w * n.geom.x.dot(&n.geom.normal) / 3.0)
            .sum()
    }

    /// Weighted integral of nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Weighted L2 inner product of nodal vectors.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    /// Nodal values of a function of position.
    pub fn sample(&self, f: impl Fn(&Vec3) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|n| f(&n.geom.x)).collect()
    }

    /// Node table with header `u1,u2,x,y,z,nu_x,nu_y,nu_z,kappa1,kappa2,H`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u1,u2,x,y,z,nu_x,nu_y,nu_z,kappa1,kappa2,H\n");
        for n in &self.nodes {
            let g = &n.geom;
            let row = [
                n.u[0],
                n.u[1],
                g.x.x,
                g.x.y,
                g.x.z,
                g.normal.x,
                g.normal.y,
                g.normal.z,
                g.kappas[0],
                g.kappas[1],
                g.mean_curvature,
            ];
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}
