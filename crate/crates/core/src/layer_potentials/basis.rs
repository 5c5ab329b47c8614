//! Surface basis of spherical harmonics pulled back through the chart and
//! orthonormalized in `L2(dsigma)`.
//!
//! Operator matrices are Galerkin matrices in this basis. Nodal values of a basis
//! expansion are available on the mesh, and nodal data are projected onto the basis
//! with the mesh quadrature.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};

use super::harmonics::Harmonics;
use super::MeshKey;
use crate::error::{Error, Result};
use crate::geometry::{spherical_coordinates, QuadratureMesh, Vec3};
use crate::linalg::sym_eigen;

#[derive(Clone, Debug)]
pub struct SurfaceBasis {
    harmonics: Harmonics,
    mesh: MeshKey,
    weights: Vec<f64>,
    /// `Gram^{-1/2}`: maps orthonormal coefficients to harmonic coefficients.
    orth: Mat<f64>,
    /// Orthonormal basis functions at the nodes, `N x n`.
    nodal: Mat<f64>,
    /// Smallest eigenvalue of the Gram matrix of the harmonics in `L2(dsigma)`.
    gram_min: f64,
}

/// Largest harmonic degree the mesh integrates exactly against itself on the sphere.
pub fn max_degree(mesh: &QuadratureMesh) -> usize {
    let [n1, n2] = mesh.resolution();
    (n1 - 1).min((n2 - 1) / 2)
}

impl SurfaceBasis {
    /// Basis of all harmonics up to [`max_degree`].
    pub fn new(mesh: &QuadratureMesh) -> Result<Self> {
        Self::with_degree(mesh, max_degree(mesh))
    }

    pub fn with_degree(mesh: &QuadratureMesh, l_max: usize) -> Result<Self> {
        mesh.chart().require_sphere_topology()?;
        if l_max > max_degree(mesh) {
            return Err(Error::invalid(
                "degree",
                format!("the mesh resolves harmonics up to degree {}", max_degree(mesh)),
            ));
        }
        let harmonics = Harmonics::new(l_max);
        let n = harmonics.len();
        let raw = raw_nodal(mesh, &harmonics);
        let weighted = Mat::from_fn(mesh.len(), n, |i, j| raw[(i, j)] * mesh.weights()[i]);
        let mut gram = Mat::<f64>::zeros(n, n);
        matmul(gram.as_mut(), Accum::Replace, raw.transpose(), weighted.as_ref(), 1.0, Par::Seq);
        let gram = crate::linalg::symmetric_part(&gram);
        let eig = sym_eigen(&gram)?;
        let gram_min = eig.values[0];
        if !(gram_min > 0.0) {
            return Err(Error::NotPositiveDefinite(gram_min));
        }
        let orth = eig.function(|v| v.powf(-0.5));
        let mut nodal = Mat::<f64>::zeros(mesh.len(), n);
        matmul(nodal.as_mut(), Accum::Replace, raw.as_ref(), orth.as_ref(), 1.0, Par::Seq);
        Ok(SurfaceBasis {
            harmonics,
            mesh: MeshKey::of(mesh),
            weights: mesh.weights().to_vec(),
            orth,
            nodal,
            gram_min,
        })
    }

    /// Number of basis functions.
    pub fn len(&self) -> usize {
        self.harmonics.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn l_max(&self) -> usize {
        self.harmonics.l_max()
    }

    pub fn harmonics(&self) -> &Harmonics {
        &self.harmonics
    }

    pub fn mesh_key(&self) -> MeshKey {
        self.mesh
    }

    pub fn n_nodes(&self) -> usize {
        self.nodal.nrows()
    }

    /// Smallest Gram eigenvalue of the pulled-back harmonics.
    pub fn gram_min(&self) -> f64 {
        self.gram_min
    }

    /// Basis functions at the nodes, one column per function.
    pub fn nodal_matrix(&self) -> &Mat<f64> {
        &self.nodal
    }

    pub(crate) fn orthonormalizer(&self) -> &Mat<f64> {
        &self.orth
    }

    /// Nodal values of the expansion with coefficients `c`.
    pub fn to_nodal(&self, c: &[f64]) -> Vec<f64> {
        crate::linalg::mat_vec(&self.nodal, c)
    }

    /// `L2(dsigma)` projection of nodal data onto the basis.
    pub fn from_nodal(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.n_nodes());
        let wf: Vec<f64> = f.iter().zip(&self.weights).map(|(a, b)| a * b).collect();
        crate::linalg::mat_t_vec(&self.nodal, &wf)
    }

    /// Harmonic coefficients of an orthonormal expansion.
    pub fn harmonic_coefficients(&self, c: &[f64]) -> Vec<f64> {
        crate::linalg::mat_vec(&self.orth, c)
    }

    /// Value of the expansion at the chart point over the unit vector `p`.
    pub fn eval(&self, c: &[f64], p: &Vec3) -> f64 {
        let a = self.harmonic_coefficients(c);
        self.eval_harmonic(&a, p)
    }

    /// Value of a harmonic expansion at the chart point over `p`.
    pub(crate) fn eval_harmonic(&self, a: &[f64], p: &Vec3) -> f64 {
        let [th, ph] = spherical_coordinates(p);
        let mut y = vec![0.0; self.len()];
        self.harmonics.eval(th.cos(), ph, &mut y);
        y.iter().zip(a).map(|(u, v)| u * v).sum()
    }
}

/// Harmonics at the mesh nodes, `N x n`.
pub(crate) fn raw_nodal(mesh: &QuadratureMesh, h: &Harmonics) -> Mat<f64> {
    let mut raw = Mat::<f64>::zeros(mesh.len(), h.len());
    let mut y = vec![0.0; h.len()];
    for (i, node) in mesh.nodes().iter().enumerate() {
        h.eval(node.u[0].cos(), node.u[1], &mut y);
        for (j, v) in y.iter().enumerate() {
            raw[(i, j)] = *v;
        }
    }
    raw
}
