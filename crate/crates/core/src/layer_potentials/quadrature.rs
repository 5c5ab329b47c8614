//! Rotated-pole quadrature for weakly singular surface kernels.
//!
//! For each target node the parameter sphere is rotated so the target sits at the
//! north pole. In those polar coordinates `dsigma = J sin(theta') dtheta' dphi'` and
//! the `1/r` singularity is cancelled by `sin(theta')`, so a Gauss-Legendre rule in
//! `theta'` times the trapezoid rule in `phi'` converges spectrally. Densities are
//! expanded in spherical harmonics of the parameter sphere, so the quadrature only
//! ever sees smooth band-limited integrands.

use std::f64::consts::PI;
use std::ops::{AddAssign, Mul};

use num_complex::Complex64;
use rayon::prelude::*;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};

use crate::geometry::quadrature::gauss_legendre_on;
use super::harmonics::Harmonics;
use crate::error::{Error, Result};
use crate::geometry::{unit_sphere, Frame, QuadratureMesh, Vec3};

/// Resolution of the rotated rule and interpolation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct QuadratureSettings {
    pub theta_nodes: usize,
    pub phi_nodes: usize,
}

impl QuadratureSettings {
    /// Rotated rule matching the mesh resolution.
    pub fn for_mesh(mesh: &QuadratureMesh) -> Self {
        let [n1, n2] = mesh.resolution();
        QuadratureSettings {
            theta_nodes: n1,
            phi_nodes: n2,
        }
    }
}

/// Scalar types a kernel may produce.
pub trait KernelScalar:
    Copy + Send + Sync + Default + AddAssign + Mul<f64, Output = Self> + 'static
{
    /// Number of real components.
    const PARTS: usize;
    fn part(&self, i: usize) -> f64;
    fn from_parts(p: &[f64]) -> Self;
}

impl KernelScalar for f64 {
    const PARTS: usize = 1;
    #[inline]
    fn part(&self, _: usize) -> f64 {
        *self
    }
    #[inline]
    fn from_parts(p: &[f64]) -> Self {
        p[0]
    }
}

impl KernelScalar for Complex64 {
    const PARTS: usize = 2;
    #[inline]
    fn part(&self, i: usize) -> f64 {
        if i == 0 {
            self.re
        } else {
            self.im
        }
    }
    #[inline]
    fn from_parts(p: &[f64]) -> Self {
        Complex64::new(p[0], p[1])
    }
}

/// A pair of kernels sharing one quadrature pass: single layer and normal derivative at the target.
pub trait LayerKernel: Sync {
    type T: KernelScalar;
    fn eval(&self, x: &Vec3, nu_x: &Vec3, y: &Vec3) -> (Self::T, Self::T);
}

/// Static kernels `-1/(4 pi r)` and `<x - y, nu_x> / (4 pi r^3)`.
pub struct LaplaceKernel;

impl LayerKernel for LaplaceKernel {
    type T = f64;
    #[inline]
    fn eval(&self, x: &Vec3, nu: &Vec3, y: &Vec3) -> (f64, f64) {
        let d = x - y;
        let r2 = d.norm_squared();
        let r = r2.sqrt();
        let inv = 1.0 / (4.0 * PI * r);
        (-inv, d.dot(nu) * inv / r2)
    }
}

/// Helmholtz kernels `-e^{ikr}/(4 pi r)` and `e^{ikr}(1 - ikr) <x - y, nu_x> / (4 pi r^3)`.
pub struct HelmholtzKernel {
    pub k: Complex64,
}

impl LayerKernel for HelmholtzKernel {
    type T = Complex64;
    #[inline]
    fn eval(&self, x: &Vec3, nu: &Vec3, y: &Vec3) -> (Complex64, Complex64) {
        let d = x - y;
        let r2 = d.norm_squared();
        let r = r2.sqrt();
        let ikr = Complex64::i() * self.k * r;
        let e = ikr.exp() / (4.0 * PI * r);
        (-e, e * (Complex64::new(1.0, 0.0) - ikr) * (d.dot(nu) / r2))
    }
}

/// Rotated product rule in `(theta', phi')`, with `sin(theta')` folded into the weights.
pub(crate) struct RotatedRule {
    pub theta: Vec<f64>,
    pub theta_w: Vec<f64>,
    pub n_phi: usize,
}

impl RotatedRule {
    pub(crate) fn new(theta_nodes: usize, phi_nodes: usize) -> Self {
        let (theta, w) = gauss_legendre_on(theta_nodes, 0.0, PI);
        let theta_w = theta.iter().zip(&w).map(|(t, wi)| wi * t.sin()).collect();
        RotatedRule {
            theta,
            theta_w,
            n_phi: phi_nodes,
        }
    }

    /// Graded rule resolving a near-singularity of angular width `scale` at `theta' = 0`.
    pub(crate) fn graded(scale: f64, per_panel: usize, phi_nodes: usize) -> Self {
        let (x, w) = gauss_legendre_on(per_panel, 0.0, 1.0);
        let mut breaks = vec![0.0];
        let mut b = scale.clamp(1e-12, PI);
        while b < PI {
            breaks.push(b);
            b *= 2.0;
        }
        breaks.push(PI);
        let mut theta = Vec::new();
        let mut theta_w = Vec::new();
        for p in breaks.windows(2) {
            let len = p[1] - p[0];
            for (xi, wi) in x.iter().zip(&w) {
                let t = p[0] + len * xi;
                theta.push(t);
                theta_w.push(wi * len * t.sin());
            }
        }
        RotatedRule {
            theta,
            theta_w,
            n_phi: phi_nodes,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.theta.len() * self.n_phi
    }

    /// Calls `f(p, weight)` for every point of the rule about the north pole.
    pub(crate) fn for_each_local(&self, mut f: impl FnMut(&Vec3, f64)) {
        let dphi = 2.0 * PI / self.n_phi as f64;
        let trig: Vec<(f64, f64)> = (0..self.n_phi).map(|b| (b as f64 * dphi).sin_cos()).collect();
        for (t, wt) in self.theta.iter().zip(&self.theta_w) {
            let (st, ct) = t.sin_cos();
            for &(sp, cp) in &trig {
                f(&Vec3::new(st * cp, st * sp, ct), wt * dphi);
            }
        }
    }

    /// Calls `f(p, weight)` for every rotated point about the pole `center`.
    pub(crate) fn for_each(&self, center: &Vec3, mut f: impl FnMut(&Vec3, f64)) {
        let rot = *Frame::pole_at(center).rotation();
        self.for_each_local(|p, w| f(&(rot * p), w));
    }
}

/// Harmonics at the template points of one ring, for a chunk of the rotated rule.
const POINT_CHUNK: usize = 512;

/// Columns of a row computation: either every harmonic, or the cosine families
/// `m = 0..=m_max` at targets of azimuth zero.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Columns {
    All,
    CosineFamilies(usize),
}

impl Columns {
    fn families(self, h: &Harmonics) -> Vec<i64> {
        match self {
            Columns::All => (-(h.l_max() as i64)..=h.l_max() as i64).collect(),
            Columns::CosineFamilies(m) => (0..=m as i64).collect(),
        }
    }
}

/// Values `S[Y_b](x_i)` and `K*[Y_b](x_i)` of the layer operators applied to the
/// harmonics, at the target nodes.
///
/// Targets on one ring share a template rule rotated about the pole to azimuth zero;
/// the rows of the other targets follow by an azimuthal rotation of the harmonics.
/// Returns, for each real component of the kernel, `targets.len() x ncols` blocks for
/// the single layer and for `K*`.
pub(crate) fn harmonic_rows<K: LayerKernel>(
    mesh: &QuadratureMesh,
    settings: &QuadratureSettings,
    kernel: &K,
    harmonics: &Harmonics,
    columns: Columns,
    targets: &[usize],
) -> Result<(Vec<Mat<f64>>, Vec<Mat<f64>>)> {
    mesh.chart().require_sphere_topology()?;
    let n2 = mesh.resolution()[1];
    let families = columns.families(harmonics);
    if matches!(columns, Columns::CosineFamilies(_)) && targets.iter().any(|i| i % n2 != 0) {
        return Err(Error::invalid("targets", "cosine families need targets at azimuth zero"));
    }
    let ranges: Vec<_> = families.iter().map(|&m| harmonics.family(m)).collect();
    let ncols: usize = ranges.iter().map(|r| r.len()).sum();
    let rule = RotatedRule::new(settings.theta_nodes, settings.phi_nodes);
    let parts = K::T::PARTS;
    let chart = mesh.chart();
    let u1 = mesh.u1_grid();
    let u2 = mesh.u2_grid();

    let mut by_ring: Vec<Vec<(usize, usize)>> = vec![Vec::new(); u1.len()];
    for (r, &i) in targets.iter().enumerate() {
        by_ring[i / n2].push((r, i % n2));
    }
    let blocks: Vec<(Vec<(usize, usize)>, Vec<Mat<f64>>)> = by_ring
        .into_par_iter()
        .enumerate()
        .filter(|(_, members)| !members.is_empty())
        .map(|(k, members)| {
            let template = Frame::pole_at(&unit_sphere(u1[k], 0.0));
            let mut q = Vec::with_capacity(rule.len());
            let mut qw = Vec::with_capacity(rule.len());
            rule.for_each_local(|p, w| {
                q.push(template.rotation() * p);
                qw.push(w);
            });
            let nt = members.len();
            let mut acc: Vec<Mat<f64>> = (0..2 * parts).map(|_| Mat::zeros(nt, ncols)).collect();
            let mut y = vec![0.0; harmonics.len()];
            for start in (0..q.len()).step_by(POINT_CHUNK) {
                let end = (start + POINT_CHUNK).min(q.len());
                let npts = end - start;
                let mut ymat = Mat::<f64>::zeros(npts, ncols);
                for (a, qa) in q[start..end].iter().enumerate() {
                    let ph = qa.y.atan2(qa.x);
                    match columns {
                        Columns::All => {
                            harmonics.eval(qa.z, ph, &mut y);
                            for (c, v) in y.iter().enumerate() {
                                ymat[(a, c)] = *v;
                            }
                        }
                        Columns::CosineFamilies(_) => {
                            let mut c = 0;
                            for (&m, r) in families.iter().zip(&ranges) {
                                harmonics.eval_family(m, qa.z, ph, &mut y[..r.len()]);
                                for v in &y[..r.len()] {
                                    ymat[(a, c)] = *v;
                                    c += 1;
                                }
                            }
                        }
                    }
                }
                let mut coef: Vec<Mat<f64>> = (0..2 * parts).map(|_| Mat::zeros(nt, npts)).collect();
                for (t, &(r, l)) in members.iter().enumerate() {
                    let i = targets[r];
                    let node = &mesh.nodes()[i];
                    let (x, nu) = (node.geom.x, node.geom.normal);
                    let (sp, cp) = u2[l].sin_cos();
                    for a in 0..npts {
                        let qa = &q[start + a];
                        let p = Vec3::new(cp * qa.x - sp * qa.y, sp * qa.x + cp * qa.y, qa.z);
                        let yp = chart.embed(&p);
                        let jw = qw[start + a] * chart.area_factor(&p);
                        let (ks, kk) = kernel.eval(&x, &nu, &yp);
                        for part in 0..parts {
                            coef[part][(t, a)] = ks.part(part) * jw;
                            coef[parts + part][(t, a)] = kk.part(part) * jw;
                        }
                    }
                }
                for (dst, c) in acc.iter_mut().zip(&coef) {
                    matmul(dst.as_mut(), Accum::Add, c.as_ref(), ymat.as_ref(), 1.0, Par::Seq);
                }
            }
            if matches!(columns, Columns::All) {
                let mut row = vec![0.0; ncols];
                for (t, &(_, l)) in members.iter().enumerate() {
                    if l == 0 {
                        continue;
                    }
                    for m in acc.iter_mut() {
                        for (c, v) in row.iter_mut().enumerate() {
                            *v = m[(t, c)];
                        }
                        harmonics.rotate_azimuth(u2[l], &mut row);
                        for (c, v) in row.iter().enumerate() {
                            m[(t, c)] = *v;
                        }
                    }
                }
            }
            (members, acc)
        })
        .collect();

    let mut out: Vec<Mat<f64>> = (0..2 * parts).map(|_| Mat::zeros(targets.len(), ncols)).collect();
    for (members, acc) in blocks {
        for (t, &(r, _)) in members.iter().enumerate() {
            for (dst, src) in out.iter_mut().zip(&acc) {
                for c in 0..ncols {
                    dst[(r, c)] = src[(t, c)];
                }
            }
        }
    }
    let k_parts = out.split_off(parts);
    Ok((out, k_parts))
}
