//! Quasi-static Helmholtz layer potentials and the resonance operator of a transmission
//! problem, with a numerical search for resonant permeabilities near NP eigenvalues.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::QuadratureMesh;
use crate::layer_potentials::{
    assemble_helmholtz_pair, assemble_laplace_pair_in, AssemblyInfo, OperatorKind, OperatorMatrix,
    QuadratureSettings, SurfaceBasis, DEFAULT_MAX_NODES,
};

/// Default bound on `|k| diam` for quasi-static assembly.
pub const DEFAULT_GUARD: f64 = 2.0;

/// Reciprocal condition number of `S^k1` below which it counts as singular.
///
/// At an interior Dirichlet wavenumber the discrete `S^k` keeps a smallest singular
/// value at the discretization error level (about 1e-10 relative), so the threshold
/// sits well above that floor and well below the regular conditioning `~ 1 / l_max`.
pub const SINGULAR_S_RCOND: f64 = 1e-8;

/// Largest accepted smallest singular value of a resonance.
pub const RESONANCE_TOL: f64 = 1e-6;

/// Largest generalized-kernel order that is detected.
pub const MAX_KERNEL_ORDER: usize = 4;

/// Relative singular-value threshold for the kernel dimension of `M^j`.
const KERNEL_RTOL: f64 = 1e-6;

/// Eigenvalues of `K*` closer than this to the target span the reference eigenspace.
const EIGENSPACE_TOL: f64 = 1e-6;

const MAX_SECANT_STEPS: usize = 40;

/// `-e^{ikr} / (4 pi r)`.
pub fn helmholtz_fundamental(k: Complex64, r: f64) -> Result<Complex64> {
    if !(r > 0.0) {
        return Err(Error::ZeroDistance);
    }
    Ok(-(Complex64::i() * k * r).exp() / (4.0 * PI * r))
}

/// `omega sqrt(eps mu)` on the branch with nonnegative imaginary part.
fn wavenumber(omega: f64, eps_mu: Complex64) -> Complex64 {
    let k = eps_mu.sqrt() * omega;
    if k.im < 0.0 || (k.im == 0.0 && k.re < 0.0) {
        -k
    } else {
        k
    }
}

/// Material parameters of the exterior (index 0) and the inclusion (index 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiStaticParams {
    pub eps0: f64,
    pub mu0: f64,
    pub eps1: Complex64,
    pub mu1: Complex64,
    pub omega: f64,
}

impl QuasiStaticParams {
    pub fn new(eps0: f64, mu0: f64, eps1: Complex64, mu1: Complex64, omega: f64) -> Result<Self> {
        if !(eps0 > 0.0 && eps0.is_finite()) {
            return Err(Error::invalid("eps0", "must be positive"));
        }
        if !(mu0 > 0.0 && mu0.is_finite()) {
            return Err(Error::invalid("mu0", "must be positive"));
        }
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::invalid("omega", "must be nonnegative"));
        }
        if mu1.norm() == 0.0 || !mu1.is_finite() || !eps1.is_finite() {
            return Err(Error::invalid("mu1", "must be finite and nonzero"));
        }
        Ok(QuasiStaticParams {
            eps0,
            mu0,
            eps1,
            mu1,
            omega,
        })
    }

    pub fn k0(&self) -> Complex64 {
        wavenumber(self.omega, Complex64::new(self.eps0 * self.mu0, 0.0))
    }

    pub fn k1(&self) -> Complex64 {
        wavenumber(self.omega, self.eps1 * self.mu1)
    }

    pub fn with_mu1(mut self, mu1: Complex64) -> Self {
        self.mu1 = mu1;
        self
    }
}

/// `lambda(1/mu0, 1/mu1) = (mu0 + mu1) / (2 (mu0 - mu1))`, the NP eigenvalue at which the
/// static resonance operator `c1 I + c2 K*` is singular.
pub fn resonance_lambda(mu0: Complex64, mu1: Complex64) -> Result<Complex64> {
    let d = mu0 - mu1;
    if d.norm() == 0.0 {
        return Err(Error::DegenerateContrast);
    }
    Ok((mu0 + mu1) / (d * 2.0))
}

/// Inclusion permeability resonant with the NP eigenvalue `lambda` in the static limit.
pub fn static_mu1(lambda: f64, mu0: f64) -> Result<f64> {
    if (lambda - 0.5).abs() < 1e-14 {
        return Err(Error::LambdaHalf);
    }
    if (lambda + 0.5).abs() < 1e-14 {
        return Err(Error::DegenerateContrast);
    }
    Ok(mu0 * (2.0 * lambda - 1.0) / (2.0 * lambda + 1.0))
}

/// Static eigen data of the plain `K*` used as the reference for deviations.
struct StaticEigen {
    values: Vec<Complex64>,
    vectors: Mat<Complex64>,
}

/// Shared basis, quadrature and static operators for Helmholtz assembly on one mesh.
pub struct HelmholtzContext<'m> {
    mesh: &'m QuadratureMesh,
    basis: Arc<SurfaceBasis>,
    settings: QuadratureSettings,
    diameter: f64,
    guard: f64,
    laplace: OnceLock<(OperatorMatrix, OperatorMatrix)>,
    reference: OnceLock<StaticEigen>,
}

impl<'m> HelmholtzContext<'m> {
    pub fn new(mesh: &'m QuadratureMesh) -> Result<Self> {
        Ok(HelmholtzContext {
            mesh,
            basis: Arc::new(SurfaceBasis::new(mesh)?),
            settings: QuadratureSettings::for_mesh(mesh),
            diameter: mesh.diameter(),
            guard: DEFAULT_GUARD,
            laplace: OnceLock::new(),
            reference: OnceLock::new(),
        })
    }

    /// Replaces the bound on `|k| diam`.
    pub fn with_guard(mut self, guard: f64) -> Result<Self> {
        if !(guard > 0.0) {
            return Err(Error::invalid("guard", "must be positive"));
        }
        self.guard = guard;
        Ok(self)
    }

    pub fn mesh(&self) -> &QuadratureMesh {
        self.mesh
    }

    pub fn basis(&self) -> &Arc<SurfaceBasis> {
        &self.basis
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Static `S` and `K*` in the context basis.
    pub fn laplace_pair(&self) -> Result<&(OperatorMatrix, OperatorMatrix)> {
        if let Some(pair) = self.laplace.get() {
            return Ok(pair);
        }
        let pair = assemble_laplace_pair_in(&self.basis, self.mesh, &self.settings, DEFAULT_MAX_NODES)?;
        Ok(self.laplace.get_or_init(|| pair))
    }

    fn reference(&self) -> Result<&StaticEigen> {
        if let Some(r) = self.reference.get() {
            return Ok(r);
        }
        let (_, kstar) = self.laplace_pair()?;
        let eig = kstar.entries.eigen().map_err(|e| Error::Linalg(format!("{e:?}")))?;
        let n = kstar.len();
        let values = (0..n).map(|i| eig.S()[i]).collect();
        let vectors = Mat::from_fn(n, n, |i, j| eig.U()[(i, j)]);
        Ok(self.reference.get_or_init(|| StaticEigen { values, vectors }))
    }

    /// `S^k` and `K^{k*}` after checking the quasi-static guard.
    pub fn assemble(&self, k: Complex64) -> Result<(OperatorMatrix<Complex64>, OperatorMatrix<Complex64>)> {
        let kd = k.norm() * self.diameter;
        if kd > self.guard {
            return Err(Error::WavenumberTooLarge(kd, self.guard));
        }
        assemble_helmholtz_pair(&self.basis, self.mesh, k, &self.settings, DEFAULT_MAX_NODES)
    }
}

/// `S^k` and `K^{k*}` on a mesh in a fresh basis.
pub fn assemble_helmholtz_layers(
    mesh: &QuadratureMesh,
    k: Complex64,
) -> Result<(OperatorMatrix<Complex64>, OperatorMatrix<Complex64>)> {
    HelmholtzContext::new(mesh)?.assemble(k)
}

fn singular_values(m: &Mat<Complex64>) -> Result<Vec<f64>> {
    let mut s = m.singular_values().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// `M = (1/2)(I/mu0 + X/mu1) + K0*/mu0 - K1* X / mu1` with `X = (S^k1)^-1 S^k0`.
fn resonance_matrix(
    ctx: &HelmholtzContext,
    mu0: Complex64,
    mu1: Complex64,
    exterior: &(OperatorMatrix<Complex64>, OperatorMatrix<Complex64>),
    k1: Complex64,
) -> Result<Mat<Complex64>> {
    if mu0.norm() == 0.0 || mu1.norm() == 0.0 {
        return Err(Error::invalid("mu", "permeabilities must be nonzero"));
    }
    let (s1, k1s) = ctx.assemble(k1)?;
    let sv = singular_values(&s1.entries)?;
    let rcond = sv.last().copied().unwrap_or(0.0) / sv[0];
    if !(rcond > SINGULAR_S_RCOND) {
        return Err(Error::SingularS(rcond));
    }
    let x = s1.entries.partial_piv_lu().solve(&exterior.0.entries);
    let n = x.nrows();
    let (a0, a1) = (mu0.inv(), mu1.inv());
    let kx = &k1s.entries * &x;
    Ok(Mat::from_fn(n, n, |i, j| {
        let id = if i == j { a0 } else { Complex64::new(0.0, 0.0) };
        0.5 * (id + a1 * x[(i, j)]) + a0 * exterior.1.entries[(i, j)] - a1 * kx[(i, j)]
    }))
}

/// The resonance operator raised to the power `m`.
pub fn resonance_operator(
    ctx: &HelmholtzContext,
    mu0: Complex64,
    mu1: Complex64,
    k0: Complex64,
    k1: Complex64,
    m: usize,
) -> Result<OperatorMatrix<Complex64>> {
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    let exterior = ctx.assemble(k0)?;
    let base = resonance_matrix(ctx, mu0, mu1, &exterior, k1)?;
    let mut out = base.clone();
    for _ in 1..m {
        out = &out * &base;
    }
    Ok(OperatorMatrix {
        entries: out,
        kind: OperatorKind::Resonance { power: m },
        basis: ctx.basis.clone(),
        info: AssemblyInfo::derived("quasi-static resonance operator from Helmholtz layer potentials"),
    })
}

/// NP eigenvalue sought by a resonance search, optionally linked to a spectrum index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceTarget {
    pub lambda: f64,
    pub np_index: Option<usize>,
}

/// A resonant inclusion permeability with its density and deviations from the static pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSolution {
    pub params: QuasiStaticParams,
    pub target: ResonanceTarget,
    /// Generalized-kernel order, capped at [`MAX_KERNEL_ORDER`].
    pub m: usize,
    /// Smallest singular value of the resonance matrix.
    pub residual: f64,
    /// Null vector of the resonance matrix in basis coefficients, unit norm.
    pub coefficients: Vec<Complex64>,
    /// Nodal values of the density.
    pub phi: Vec<Complex64>,
    /// `lambda(1/mu0, 1/mu1)` at the resonance.
    pub lambda: Complex64,
    /// Static eigenvalue of the plain `K*` the branch starts from.
    pub static_lambda: f64,
    /// `L2` distance of the unit density from the static eigenspace.
    pub dev_phi: f64,
    /// `|lambda(1/mu0, 1/mu1) - static_lambda|`.
    pub dev_lambda: f64,
    pub iterations: usize,
}

/// Eigenvalue of `M` closest to zero.
fn smallest_eigenvalue(m: &Mat<Complex64>) -> Result<Complex64> {
    let ev = m.eigenvalues().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    ev.into_iter()
        .min_by(|a, b| a.norm().total_cmp(&b.norm()))
        .ok_or_else(|| Error::Linalg("empty matrix".into()))
}

/// Orthonormal basis of the static eigenspace of `lambda` and the eigenvalue itself.
fn static_eigenspace(ctx: &HelmholtzContext, lambda: f64) -> Result<(Vec<Vec<Complex64>>, f64)> {
    let reference = ctx.reference()?;
    let nearest = reference
        .values
        .iter()
        .map(|v| v.re)
        .min_by(|a, b| (a - lambda).abs().total_cmp(&(b - lambda).abs()))
        .ok_or_else(|| Error::Linalg("empty spectrum".into()))?;
    let n = reference.vectors.nrows();
    let mut q: Vec<Vec<Complex64>> = Vec::new();
    for (j, v) in reference.values.iter().enumerate() {
        if (v - nearest).norm() > EIGENSPACE_TOL {
            continue;
        }
        let mut u: Vec<Complex64> = (0..n).map(|i| reference.vectors[(i, j)]).collect();
        for _ in 0..2 {
            for b in &q {
                let dot: Complex64 = b.iter().zip(&u).map(|(x, y)| x.conj() * y).sum();
                u.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = u.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            q.push(u.into_iter().map(|x| x / norm).collect());
        }
    }
    Ok((q, nearest))
}

fn distance_to_span(q: &[Vec<Complex64>], v: &[Complex64]) -> f64 {
    let mut r = v.to_vec();
    for b in q {
        let dot: Complex64 = b.iter().zip(&r).map(|(x, y)| x.conj() * y).sum();
        r.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
    }
    let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    r.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt() / nv
}

/// Kernel dimension of `M^j` for `j = 1..=MAX_KERNEL_ORDER + 1` and the resulting order.
fn kernel_order(m: &Mat<Complex64>) -> Result<usize> {
    let mut power = m.clone();
    let mut prev = None;
    for j in 1..=MAX_KERNEL_ORDER + 1 {
        let sv = singular_values(&power)?;
        let dim = sv.iter().filter(|s| **s <= KERNEL_RTOL * sv[0]).count();
        if let Some(p) = prev {
            if dim == p {
                return Ok(j - 1);
            }
        }
        prev = Some(dim);
        power = &power * m;
    }
    Ok(MAX_KERNEL_ORDER)
}

/// Searches the inclusion permeability `mu1` at which the resonance operator is singular.
///
/// The eigenvalue of the resonance matrix closest to zero is driven to zero by a damped
/// secant iteration in the complex `mu1` plane, starting from `seed` or from the static
/// relation for the target eigenvalue.
pub fn resonance_search(
    ctx: &HelmholtzContext,
    params: &QuasiStaticParams,
    target: ResonanceTarget,
    seed: Option<Complex64>,
) -> Result<ResonanceSolution> {
    let (space, static_lambda) = static_eigenspace(ctx, target.lambda)?;
    let mu0 = Complex64::new(params.mu0, 0.0);
    let exterior = ctx.assemble(params.k0())?;
    let eval = |mu1: Complex64| -> Result<(Mat<Complex64>, Complex64)> {
        let m = resonance_matrix(ctx, mu0, mu1, &exterior, params.with_mu1(mu1).k1())?;
        let f = smallest_eigenvalue(&m)?;
        Ok((m, f))
    };
    let start = seed.unwrap_or_else(|| Complex64::new(static_mu1(static_lambda, params.mu0).unwrap_or(f64::NAN), 0.0));
    if !start.is_finite() {
        return Err(static_mu1(static_lambda, params.mu0).unwrap_err());
    }
    let mut x0 = start;
    let (_, mut f0) = eval(x0)?;
    let mut x1 = start * (1.0 + 1e-4) + Complex64::new(0.0, 1e-6 * start.norm());
    let (mut mat, mut f1) = eval(x1)?;
    let mut iterations = 2;
    for _ in 0..MAX_SECANT_STEPS {
        if f1.norm() <= f64::EPSILON * (mu0.inv().norm() + x1.inv().norm()) {
            break;
        }
        let df = f1 - f0;
        if df.norm() == 0.0 {
            break;
        }
        let mut step = -f1 * (x1 - x0) / df;
        let cap = 0.25 * x1.norm();
        if step.norm() > cap {
            step *= cap / step.norm();
        }
        x0 = x1;
        f0 = f1;
        x1 += step;
        let (m, f) = eval(x1)?;
        mat = m;
        f1 = f;
        iterations += 1;
        if step.norm() <= 1e-15 * x1.norm() {
            break;
        }
    }
    let svd = mat.svd().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let s = svd.S().column_vector();
    let n = mat.nrows();
    let imin = (0..n).min_by(|a, b| s[*a].re.total_cmp(&s[*b].re)).unwrap_or(0);
    let residual = s[imin].re;
    if !(residual <= RESONANCE_TOL) {
        return Err(Error::NoResonanceFound(residual));
    }
    let coefficients: Vec<Complex64> = (0..n).map(|i| svd.V()[(i, imin)]).collect();
    let re: Vec<f64> = coefficients.iter().map(|c| c.re).collect();
    let im: Vec<f64> = coefficients.iter().map(|c| c.im).collect();
    let phi = ctx
        .basis
        .to_nodal(&re)
        .into_iter()
        .zip(ctx.basis.to_nodal(&im))
        .map(|(a, b)| Complex64::new(a, b))
        .collect();
    let lambda = resonance_lambda(mu0, x1)?;
    Ok(ResonanceSolution {
        params: params.with_mu1(x1),
        target,
        m: kernel_order(&mat)?,
        residual,
        dev_phi: distance_to_span(&space, &coefficients),
        dev_lambda: (lambda - static_lambda).norm(),
        coefficients,
        phi,
        lambda,
        static_lambda,
        iterations,
    })
}

/// Resonances along an `omega` sweep with log-log slopes of both deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiStaticSweep {
    pub solutions: Vec<ResonanceSolution>,
    pub slope_phi: Option<f64>,
    pub slope_lambda: Option<f64>,
}

/// Deviations below this are treated as exact when fitting slopes.
const DEVIATION_FLOOR: f64 = 1e-13;

fn log_slope(pts: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = pts
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > DEVIATION_FLOOR)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Tracks the resonance branch of `target` over a decreasing `omega` schedule.
///
/// The branch is continued from the smallest `omega` upward, each search seeded with the
/// previous permeability. Solutions are returned in schedule order.
pub fn quasistatic_deviation(
    ctx: &HelmholtzContext,
    base: &QuasiStaticParams,
    target: ResonanceTarget,
    omegas: &[f64],
) -> Result<QuasiStaticSweep> {
    if omegas.len() < 4 {
        return Err(Error::invalid("omegas", "need at least four frequencies"));
    }
    if omegas.windows(2).any(|w| !(w[0] > w[1])) || omegas.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("omegas", "must be nonnegative and strictly decreasing"));
    }
    let mut solutions = Vec::with_capacity(omegas.len());
    let mut seed = None;
    for &omega in omegas.iter().rev() {
        let params = QuasiStaticParams { omega, ..*base };
        let sol = resonance_search(ctx, &params, target, seed)?;
        seed = Some(sol.params.mu1);
        solutions.push(sol);
    }
    solutions.reverse();
    let phi: Vec<(f64, f64)> = solutions.iter().map(|s| (s.params.omega, s.dev_phi)).collect();
    let lam: Vec<(f64, f64)> = solutions.iter().map(|s| (s.params.omega, s.dev_lambda)).collect();
    Ok(QuasiStaticSweep {
        slope_phi: log_slope(&phi),
        slope_lambda: log_slope(&lam),
        solutions,
    })
}

/// Sweep CSV with header `omega,mu1_re,mu1_im,residual,dev_phi,dev_lambda`.
pub fn resonance_csv(solutions: &[ResonanceSolution]) -> String {
    let mut out = String::from("omega,mu1_re,mu1_im,residual,dev_phi,dev_lambda\n");
    for s in solutions {
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            s.params.omega, s.params.mu1.re, s.params.mu1.im, s.residual, s.dev_phi, s.dev_lambda
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fundamental_solution() {
        let r = 0.7;
        let g0 = helmholtz_fundamental(Complex64::new(0.0, 0.0), r).unwrap();
        assert!((g0.re + 1.0 / (4.0 * PI * r)).abs() < 1e-15 && g0.im == 0.0);
        let g = helmholtz_fundamental(Complex64::new(2.5, 0.0), r).unwrap();
        assert!((g.norm() - 1.0 / (4.0 * PI * r)).abs() < 1e-15);
        assert_eq!(helmholtz_fundamental(Complex64::new(1.0, 0.0), 0.0), Err(Error::ZeroDistance));
    }

    #[test]
    fn wavenumber_branch() {
        let k = wavenumber(0.5, Complex64::new(-4.0, 0.0));
        assert!((k - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let k = wavenumber(1.0, Complex64::new(-4.0, -0.0));
        assert!(k.im >= 0.0);
        let k = wavenumber(1.0, Complex64::new(1.0, -1.0));
        assert!(k.im >= 0.0);
    }

    #[test]
    fn static_relation_round_trip() {
        for lambda in [1.0 / 6.0, 0.1, -0.3, 0.45] {
            let mu1 = static_mu1(lambda, 2.0).unwrap();
            let back = resonance_lambda(Complex64::new(2.0, 0.0), Complex64::new(mu1, 0.0)).unwrap();
            assert!((back.re - lambda).abs() < 1e-14 && back.im == 0.0);
        }
        assert!((static_mu1(1.0 / 6.0, 1.0).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(static_mu1(0.5, 1.0), Err(Error::LambdaHalf));
    }
}
