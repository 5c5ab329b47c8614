//! Galerkin discretizations of the single-layer and Neumann-Poincare operators.
//!
//! Operators act on coefficient vectors in a [`SurfaceBasis`]: spherical harmonics of
//! the parameter sphere pulled back to the surface and orthonormalized in
//! `L2(dsigma)`. In these coordinates the `L2` adjoint is the transpose. The action of
//! each operator on the harmonics is computed at the mesh nodes with a rotated-pole
//! quadrature and projected back with the mesh weights.

mod axisym;
mod basis;
pub mod harmonics;
mod jump;
pub(crate) mod quadrature;

use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use num_complex::Complex64;

pub use axisym::{assemble_axisym_blocks, assemble_axisym_blocks_with, AxisymBlock};
pub use basis::{max_degree, SurfaceBasis};
pub use jump::{verify_jump_relation, JumpResidual, JumpSettings, OFFSET_GUARD};
pub use quadrature::{
    HelmholtzKernel, KernelScalar, LaplaceKernel, LayerKernel, QuadratureSettings,
};

use crate::error::{Error, Result};
use crate::geometry::QuadratureMesh;
use crate::linalg::{asymmetry, mat_vec, sym_eigen, symmetric_part, SymEigen};
use quadrature::{harmonic_rows, Columns};

/// Default cap on the number of mesh nodes for dense assembly.
pub const DEFAULT_MAX_NODES: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OperatorKind {
    SingleLayer,
    NeumannPoincare,
    /// The discrete `K`, the `L2` adjoint of `K*`.
    NeumannPoincareAdjointTranspose,
    HelmholtzSingle { k: Complex64 },
    HelmholtzNP { k: Complex64 },
    FractionalD { alpha: f64 },
    SymmetrizedNP,
    /// Power of the quasi-static resonance operator.
    Resonance { power: usize },
}

/// How a matrix was produced.
#[derive(Clone, Debug, PartialEq)]
pub struct AssemblyInfo {
    pub scheme: String,
    pub quadrature: Option<QuadratureSettings>,
    /// Relative asymmetry `|A - A^T|_F / |A|_F` before explicit symmetrization.
    pub raw_asymmetry: Option<f64>,
}

impl AssemblyInfo {
    fn rotated(settings: QuadratureSettings, l_max: usize) -> Self {
        AssemblyInfo {
            scheme: format!(
                "Galerkin in spherical harmonics to degree {l_max}; rotated-pole Gauss-Legendre x trapezoid rule ({}x{})",
                settings.theta_nodes, settings.phi_nodes
            ),
            quadrature: Some(settings),
            raw_asymmetry: None,
        }
    }

    pub(crate) fn derived(scheme: impl Into<String>) -> Self {
        AssemblyInfo {
            scheme: scheme.into(),
            quadrature: None,
            raw_asymmetry: None,
        }
    }
}

/// Identifies the mesh a matrix was assembled on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MeshKey(u64);

impl MeshKey {
    pub fn of(mesh: &QuadratureMesh) -> Self {
        let mut h = DefaultHasher::new();
        mesh.resolution().hash(&mut h);
        mesh.chart().kind_name().hash(&mut h);
        for (node, w) in mesh.nodes().iter().zip(mesh.weights()) {
            for v in node.geom.x.iter() {
                v.to_bits().hash(&mut h);
            }
            w.to_bits().hash(&mut h);
        }
        MeshKey(h.finish())
    }

    pub fn value(&self) -> u64 {
        self.0
    }
}

/// Dense operator matrix in a surface basis.
#[derive(Clone, Debug)]
pub struct OperatorMatrix<T = f64> {
    pub entries: Mat<T>,
    pub kind: OperatorKind,
    pub basis: Arc<SurfaceBasis>,
    pub info: AssemblyInfo,
}

impl<T> OperatorMatrix<T> {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn mesh(&self) -> MeshKey {
        self.basis.mesh_key()
    }

    /// Both matrices live in the same basis on the same mesh.
    pub fn same_basis<U>(&self, other: &OperatorMatrix<U>) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis)
            || (self.basis.mesh_key() == other.basis.mesh_key()
                && self.basis.l_max() == other.basis.l_max())
    }
}

impl OperatorMatrix<f64> {
    /// Matrix-vector product on coefficients.
    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        mat_vec(&self.entries, c)
    }

    /// Applies the operator to nodal data: project, apply, evaluate at the nodes.
    pub fn apply_nodal(&self, f: &[f64]) -> Vec<f64> {
        self.basis.to_nodal(&self.apply(&self.basis.from_nodal(f)))
    }

    /// All entries finite.
    pub fn is_finite(&self) -> bool {
        let n = self.entries.nrows();
        (0..self.entries.ncols()).all(|j| (0..n).all(|i| self.entries[(i, j)].is_finite()))
    }
}

fn check_size(mesh: &QuadratureMesh, max_nodes: usize) -> Result<()> {
    if mesh.len() > max_nodes {
        return Err(Error::MeshTooLarge {
            n: mesh.len(),
            max: max_nodes,
        });
    }
    Ok(())
}

/// Galerkin matrix `B^T W R G^{-1/2}` from operator values `R` on the harmonics.
fn galerkin(basis: &SurfaceBasis, mesh: &QuadratureMesh, rows: &Mat<f64>) -> Mat<f64> {
    let n = basis.len();
    let w = mesh.weights();
    let weighted = Mat::from_fn(rows.nrows(), n, |i, j| rows[(i, j)] * w[i]);
    let mut tmp = Mat::<f64>::zeros(n, n);
    matmul(
        tmp.as_mut(),
        Accum::Replace,
        basis.nodal_matrix().transpose(),
        weighted.as_ref(),
        1.0,
        Par::Seq,
    );
    let mut out = Mat::<f64>::zeros(n, n);
    matmul(out.as_mut(), Accum::Replace, tmp.as_ref(), basis.orthonormalizer().as_ref(), 1.0, Par::Seq);
    out
}

/// Assembles `S` and `K*` in a given basis with explicit quadrature settings.
///
/// The single layer is returned symmetrized; its raw asymmetry is recorded.
pub fn assemble_laplace_pair_in(
    basis: &Arc<SurfaceBasis>,
    mesh: &QuadratureMesh,
    settings: &QuadratureSettings,
    max_nodes: usize,
) -> Result<(OperatorMatrix, OperatorMatrix)> {
    check_size(mesh, max_nodes)?;
    if basis.mesh_key() != MeshKey::of(mesh) {
        return Err(Error::MeshMismatch(basis.n_nodes(), mesh.len()));
    }
    let targets: Vec<usize> = (0..mesh.len()).collect();
    let (s_rows, k_rows) = harmonic_rows(
        mesh,
        settings,
        &LaplaceKernel,
        basis.harmonics(),
        Columns::All,
        &targets,
    )?;
    let s_raw = galerkin(basis, mesh, &s_rows[0]);
    drop(s_rows);
    let mut s_info = AssemblyInfo::rotated(*settings, basis.l_max());
    s_info.raw_asymmetry = Some(asymmetry(&s_raw));
    let single = OperatorMatrix {
        entries: symmetric_part(&s_raw),
        kind: OperatorKind::SingleLayer,
        basis: basis.clone(),
        info: s_info,
    };
    let np = OperatorMatrix {
        entries: galerkin(basis, mesh, &k_rows[0]),
        kind: OperatorKind::NeumannPoincare,
        basis: basis.clone(),
        info: AssemblyInfo::rotated(*settings, basis.l_max()),
    };
    Ok((single, np))
}

/// Assembles `S` and `K*` with default settings in a fresh basis.
pub fn assemble_laplace_pair(mesh: &QuadratureMesh) -> Result<(OperatorMatrix, OperatorMatrix)> {
    check_size(mesh, DEFAULT_MAX_NODES)?;
    let basis = Arc::new(SurfaceBasis::new(mesh)?);
    assemble_laplace_pair_in(&basis, mesh, &QuadratureSettings::for_mesh(mesh), DEFAULT_MAX_NODES)
}

/// Single-layer matrix with kernel `-1/(4 pi |x - y|)`.
pub fn assemble_single_layer(mesh: &QuadratureMesh) -> Result<OperatorMatrix> {
    Ok(assemble_laplace_pair(mesh)?.0)
}

/// Neumann-Poincare matrix `K*` with kernel `<x - y, nu(x)> / (4 pi |x - y|^3)`.
pub fn assemble_np(mesh: &QuadratureMesh) -> Result<OperatorMatrix> {
    Ok(assemble_laplace_pair(mesh)?.1)
}

/// The discrete `K`, the `L2` adjoint of `K*`.
pub fn np_adjoint(kstar: &OperatorMatrix) -> OperatorMatrix {
    OperatorMatrix {
        entries: kstar.entries.transpose().to_owned(),
        kind: OperatorKind::NeumannPoincareAdjointTranspose,
        basis: kstar.basis.clone(),
        info: kstar.info.clone(),
    }
}

/// Helmholtz single layer and NP matrices for wavenumber `k`.
///
/// The single layer is returned complex-symmetrized.
pub fn assemble_helmholtz_pair(
    basis: &Arc<SurfaceBasis>,
    mesh: &QuadratureMesh,
    k: Complex64,
    settings: &QuadratureSettings,
    max_nodes: usize,
) -> Result<(OperatorMatrix<Complex64>, OperatorMatrix<Complex64>)> {
    check_size(mesh, max_nodes)?;
    if basis.mesh_key() != MeshKey::of(mesh) {
        return Err(Error::MeshMismatch(basis.n_nodes(), mesh.len()));
    }
    let targets: Vec<usize> = (0..mesh.len()).collect();
    let (s_rows, k_rows) = harmonic_rows(
        mesh,
        settings,
        &HelmholtzKernel { k },
        basis.harmonics(),
        Columns::All,
        &targets,
    )?;
    let complex = |rows: &[Mat<f64>]| {
        let re = galerkin(basis, mesh, &rows[0]);
        let im = galerkin(basis, mesh, &rows[1]);
        Mat::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)]))
    };
    let s = complex(&s_rows);
    let n = s.nrows();
    let s_sym = Mat::from_fn(n, n, |i, j| (s[(i, j)] + s[(j, i)]) * 0.5);
    let info = AssemblyInfo::rotated(*settings, basis.l_max());
    Ok((
        OperatorMatrix {
            entries: s_sym,
            kind: OperatorKind::HelmholtzSingle { k },
            basis: basis.clone(),
            info: info.clone(),
        },
        OperatorMatrix {
            entries: complex(&k_rows),
            kind: OperatorKind::HelmholtzNP { k },
            basis: basis.clone(),
            info,
        },
    ))
}

/// Kelley residual `|S K* - K S|_F / |S K*|_F` with `K = K*^T`.
pub fn kelley_residual(s: &OperatorMatrix, kstar: &OperatorMatrix) -> Result<f64> {
    if !s.same_basis(kstar) {
        return Err(Error::MeshMismatch(s.len(), kstar.len()));
    }
    let sk = &s.entries * &kstar.entries;
    let ks = kstar.entries.transpose() * &s.entries;
    let diff = &sk - &ks;
    Ok(diff.norm_l2() / sk.norm_l2())
}

/// Eigen-factorization of the energy matrix `E = -S`.
#[derive(Clone, Debug)]
pub struct EnergyFactor {
    eig: SymEigen,
}

impl EnergyFactor {
    /// Factorizes `E = -S`; fails unless `E` is positive definite.
    pub fn new(s: &Mat<f64>) -> Result<Self> {
        let n = s.nrows();
        let e = Mat::from_fn(n, n, |i, j| -0.5 * (s[(i, j)] + s[(j, i)]));
        let eig = sym_eigen(&e)?;
        let min = eig.values.first().copied().unwrap_or(0.0);
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite(min));
        }
        Ok(EnergyFactor { eig })
    }

    pub fn len(&self) -> usize {
        self.eig.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eig.values.is_empty()
    }

    /// Eigenvalues of `E`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.values
    }

    /// `E^beta c`.
    pub fn apply_power(&self, beta: f64, c: &[f64]) -> Vec<f64> {
        self.eig.apply_function(|e| e.powf(beta), c)
    }

    /// `<E c, c>`.
    pub fn energy(&self, c: &[f64]) -> f64 {
        (0..self.len())
            .map(|j| {
                let p: f64 = self.eig.vectors.col_as_slice(j).iter().zip(c).map(|(a, b)| a * b).sum();
                p * p * self.eig.values[j]
            })
            .sum()
    }

    /// `E^beta` as a matrix.
    pub fn power(&self, beta: f64) -> Mat<f64> {
        self.eig.function(|e| e.powf(beta))
    }
}

/// Symmetrized NP operator together with the diagnostics of the symmetrization.
#[derive(Clone, Debug)]
pub struct SymmetrizedNp {
    /// `sym(E^1/2 K* E^-1/2)`, similar to `K*` up to the discarded antisymmetric part.
    pub matrix: OperatorMatrix,
    pub energy: EnergyFactor,
    /// `|S K* - K S| / |S K*|`.
    pub kelley_residual: f64,
    /// `|M - M^T| / |M|` of the conjugated matrix before symmetrization.
    pub symmetry_defect: f64,
}

/// Kelley symmetrization of `K*` through the energy matrix `E = -S`.
pub fn symmetrize_np(s: &OperatorMatrix, kstar: &OperatorMatrix) -> Result<SymmetrizedNp> {
    if !s.same_basis(kstar) {
        return Err(Error::MeshMismatch(s.len(), kstar.len()));
    }
    let energy = EnergyFactor::new(&s.entries)?;
    let kelley = kelley_residual(s, kstar)?;
    let half = energy.power(0.5);
    let mhalf = energy.power(-0.5);
    let m = &(&half * &kstar.entries) * &mhalf;
    let defect = asymmetry(&m);
    Ok(SymmetrizedNp {
        matrix: OperatorMatrix {
            entries: symmetric_part(&m),
            kind: OperatorKind::SymmetrizedNP,
            basis: kstar.basis.clone(),
            info: kstar.info.clone(),
        },
        energy,
        kelley_residual: kelley,
        symmetry_defect: defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_quadrature_mesh, SurfaceChart};
    use crate::linalg::sym_eigenvalues;

    fn sphere_mesh(n1: usize) -> QuadratureMesh {
        build_quadrature_mesh(&SurfaceChart::sphere(1.0).unwrap(), [n1, 2 * n1]).unwrap()
    }

    #[test]
    fn sphere_single_layer_on_harmonics() {
        let mesh = sphere_mesh(12);
        let (s, k) = assemble_laplace_pair(&mesh).unwrap();
        let ones = vec![1.0; mesh.len()];
        for v in s.apply_nodal(&ones) {
            assert!((v + 1.0).abs() < 1e-10);
        }
        // degree-3 zonal harmonic
        let f = mesh.sample(|p| 2.5 * p.z.powi(3) - 1.5 * p.z);
        let sf = s.apply_nodal(&f);
        let kf = k.apply_nodal(&f);
        for i in 0..mesh.len() {
            assert!((sf[i] + f[i] / 7.0).abs() < 1e-10);
            assert!((kf[i] - f[i] / 14.0).abs() < 1e-10);
        }
    }

    #[test]
    fn spheroid_gauss_identity_and_positivity() {
        let chart = SurfaceChart::spheroid(1.0, 2.0).unwrap();
        let mesh = build_quadrature_mesh(&chart, [16, 32]).unwrap();
        let (s, k) = assemble_laplace_pair(&mesh).unwrap();
        let ones = vec![1.0; mesh.len()];
        for v in np_adjoint(&k).apply_nodal(&ones) {
            assert!((v - 0.5).abs() < 2e-3);
        }
        let sym = symmetrize_np(&s, &k).unwrap();
        assert!(sym.energy.eigenvalues()[0] > 0.0);
        let ev = sym_eigenvalues(&sym.matrix.entries).unwrap();
        assert!(ev.iter().all(|&l| l > -0.505 && l <= 0.505));
        assert!((ev.last().unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn kelley_residual_decreases_under_refinement() {
        let chart = SurfaceChart::spheroid(1.0, 2.0).unwrap();
        let res: Vec<f64> = [10, 20]
            .iter()
            .map(|&n| {
                let mesh = build_quadrature_mesh(&chart, [n, 2 * n]).unwrap();
                let (s, k) = assemble_laplace_pair(&mesh).unwrap();
                kelley_residual(&s, &k).unwrap()
            })
            .collect();
        assert!(res[1] < 0.5 * res[0], "{res:?}");
    }

    #[test]
    fn mismatched_bases_are_rejected() {
        let (s, _) = assemble_laplace_pair(&sphere_mesh(8)).unwrap();
        let (_, k) = assemble_laplace_pair(&sphere_mesh(10)).unwrap();
        assert!(matches!(symmetrize_np(&s, &k), Err(Error::MeshMismatch(..))));
    }

    #[test]
    fn axisym_blocks_match_full_spectrum() {
        let mesh = sphere_mesh(12);
        let blocks = assemble_axisym_blocks(&mesh, 8).unwrap();
        assert_eq!(blocks.first().unwrap().m, -8);
        let mut from_blocks = Vec::new();
        for b in &blocks {
            let s = OperatorMatrix {
                entries: b.single_layer.clone(),
                kind: OperatorKind::SingleLayer,
                basis: Arc::new(SurfaceBasis::with_degree(&mesh, 0).unwrap()),
                info: AssemblyInfo::derived("block"),
            };
            let k = OperatorMatrix {
                entries: b.np.clone(),
                kind: OperatorKind::NeumannPoincare,
                ..s.clone()
            };
            let sym = symmetrize_np(&s, &k).unwrap();
            let ev = sym_eigenvalues(&sym.matrix.entries).unwrap();
            if b.m == 0 {
                assert!(ev.iter().any(|l| (l - 0.5).abs() < 1e-3));
            }
            if b.m.abs() <= 1 {
                assert_eq!(ev.iter().filter(|l| (*l - 1.0 / 6.0).abs() < 1e-3).count(), 1);
            }
            from_blocks.extend(ev);
        }
        from_blocks.sort_by(|a, b| b.total_cmp(a));
        let (s, k) = assemble_laplace_pair(&mesh).unwrap();
        let mut full = sym_eigenvalues(&symmetrize_np(&s, &k).unwrap().matrix.entries).unwrap();
        full.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in full.iter().zip(&from_blocks).take(20) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn block_profiles_are_orthonormal_on_the_mesh() {
        let chart = SurfaceChart::spheroid(1.0, 2.0).unwrap();
        let mesh = build_quadrature_mesh(&chart, [12, 24]).unwrap();
        let blocks = assemble_axisym_blocks(&mesh, 3).unwrap();
        for b in &blocks {
            let mut c = vec![0.0; b.len()];
            c[1] = 1.0;
            let f = b.to_nodal(&c);
            assert!((mesh.inner(&f, &f) - 1.0).abs() < 1e-10, "m = {}", b.m);
        }
    }

    #[test]
    fn jump_relation_on_sphere() {
        let mesh = sphere_mesh(12);
        let settings = JumpSettings::for_mesh(&mesh);
        let ones = vec![1.0; mesh.len()];
        let r = verify_jump_relation(&mesh, &ones, &settings).unwrap();
        assert!(r.interior < 5e-3, "{r:?}");
        let y2 = mesh.sample(|p| 1.5 * p.z * p.z - 0.5 + p.x * p.y);
        let r = verify_jump_relation(&mesh, &y2, &settings).unwrap();
        assert!(r.max() < 1e-2, "{r:?}");
    }

    #[test]
    fn jump_relation_guard() {
        let mesh = sphere_mesh(8);
        let mut settings = JumpSettings::for_mesh(&mesh);
        settings.offset = 1e-6 * mesh.spacing();
        let ones = vec![1.0; mesh.len()];
        assert!(matches!(
            verify_jump_relation(&mesh, &ones, &settings),
            Err(Error::OffsetTooSmall { .. })
        ));
    }
}
