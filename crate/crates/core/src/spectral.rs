//! Eigenpairs of the symmetrized NP operator, the plasmonic eigenvalue map, fractional
//! powers `|D|^alpha` and Sobolev normalizers.
//!
//! `|D|^-1` is realized as `2E` with `E = -S` the single-layer energy matrix, and the
//! `H^-1/2` norm is the energy norm `<E phi, phi>`. Eigenfunctions are expansions in an
//! `L2(dsigma)`-orthonormal surface basis, so coefficient norms are `L2` norms.

use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layer_potentials::{
    symmetrize_np, AxisymBlock, EnergyFactor, OperatorMatrix, SurfaceBasis,
};
use crate::linalg::{asymmetry, mat_vec, sym_eigen, symmetric_part};

/// Allowed range of the fractional exponent.
pub const ALPHA_RANGE: [f64; 2] = [-2.0, 2.0];

/// `rho(r) = 1 - exp(-r)`.
pub fn rho(r: f64) -> f64 {
    -(-r).exp_m1()
}

/// Inverse of [`rho`] on `[0, 1)`; `+inf` at 1.
pub fn rho_inverse(y: f64) -> f64 {
    -(-y).ln_1p()
}

/// `lambda(gamma_c, gamma_m) = (gamma_c + gamma_m) / (2 (gamma_c - gamma_m))`.
pub fn plasmonic_map(gamma_c: f64, gamma_m: f64) -> Result<f64> {
    if gamma_c == gamma_m {
        return Err(Error::DegenerateContrast);
    }
    Ok((gamma_c + gamma_m) / (2.0 * (gamma_c - gamma_m)))
}

/// Permittivity `gamma_c = gamma_m (2 lambda + 1) / (2 lambda - 1)` with plasmonic
/// eigenvalue `lambda`.
pub fn eigenvalue_to_contrast(lambda: f64, gamma_m: f64) -> Result<f64> {
    if lambda == 0.5 {
        return Err(Error::LambdaHalf);
    }
    Ok(gamma_m * (2.0 * lambda + 1.0) / (2.0 * lambda - 1.0))
}

/// One NP eigenpair.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    /// Position in the spectrum sorted by `|lambda|` descending.
    pub index: usize,
    pub lambda_tilde: f64,
    /// Nodal values, unit norm in the weighted `L2(dsigma)` inner product.
    pub phi: Vec<f64>,
    /// Coefficients in the orthonormal basis the pair was computed in.
    pub coefficients: Vec<f64>,
    /// `|phi|_{H^-1/2}^-2 = 1 / <E phi, phi>`.
    pub c: f64,
    /// Azimuthal order for pairs from mode blocks.
    pub m: Option<i64>,
    /// `|K~ phi - lambda phi|` for the symmetrized operator `K~` pulled back to densities.
    pub residual: f64,
    /// `|K* phi - lambda phi|` for the assembled, unsymmetrized `K*`.
    pub plain_residual: f64,
    block: Option<usize>,
}

/// Eigenvalue with its optional azimuthal order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralValue {
    pub lambda: f64,
    pub m: Option<i64>,
}

impl From<&Eigenpair> for SpectralValue {
    fn from(p: &Eigenpair) -> Self {
        SpectralValue {
            lambda: p.lambda_tilde,
            m: p.m,
        }
    }
}

#[derive(Clone, Debug)]
struct BlockFactor {
    block: AxisymBlock,
    energy: EnergyFactor,
}

#[derive(Clone, Debug)]
enum Source {
    Full {
        basis: Arc<SurfaceBasis>,
        energy: EnergyFactor,
    },
    Blocks(Vec<BlockFactor>),
}

/// A complete set of eigenpairs together with the energy factorization they came from.
#[derive(Clone, Debug)]
pub struct NpSpectrum {
    pub pairs: Vec<Eigenpair>,
    /// `|M - M^T| / |M|` of `E^1/2 K* E^-1/2` before symmetrization (largest over blocks).
    pub symmetry_defect: f64,
    source: Source,
}

/// Symmetrized conjugate `sym(E^1/2 K E^-1/2)` with its defect.
fn conjugate(energy: &EnergyFactor, k: &Mat<f64>) -> (Mat<f64>, f64) {
    let m = &(&energy.power(0.5) * k) * &energy.power(-0.5);
    let defect = asymmetry(&m);
    (symmetric_part(&m), defect)
}

/// Eigenvectors of `sym` pulled back through `E^-1/2` and normalized, with residuals.
fn pull_back(
    energy: &EnergyFactor,
    sym: &Mat<f64>,
    kstar: &Mat<f64>,
) -> Result<Vec<(f64, Vec<f64>, f64, f64, f64)>> {
    let eig = sym_eigen(sym)?;
    let mut out = Vec::with_capacity(eig.values.len());
    for (j, &lambda) in eig.values.iter().enumerate() {
        let v = eig.vectors.col_as_slice(j);
        let mut c = energy.apply_power(-0.5, v);
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        c.iter_mut().for_each(|x| *x /= norm);
        // K~ c = E^-1/2 M E^1/2 c
        let back = energy.apply_power(0.5, &c);
        let mv = mat_vec(sym, &back);
        let kc = energy.apply_power(-0.5, &mv);
        let residual = dist(&kc, &c, lambda);
        let plain = dist(&mat_vec(kstar, &c), &c, lambda);
        let c_norm = sobolev_normalizer(energy, &c)?;
        out.push((lambda, c, c_norm, residual, plain));
    }
    Ok(out)
}

fn dist(kc: &[f64], c: &[f64], lambda: f64) -> f64 {
    kc.iter()
        .zip(c)
        .map(|(a, b)| (a - lambda * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Orders pairs by `|lambda|` descending, then by `m` and `lambda`, and assigns indices.
fn finalize(mut pairs: Vec<Eigenpair>) -> Vec<Eigenpair> {
    pairs.sort_by(|a, b| {
        b.lambda_tilde
            .abs()
            .total_cmp(&a.lambda_tilde.abs())
            .then(b.lambda_tilde.total_cmp(&a.lambda_tilde))
            .then(a.m.cmp(&b.m))
    });
    for (i, p) in pairs.iter_mut().enumerate() {
        p.index = i;
    }
    pairs
}

/// Full spectrum of the symmetrized NP operator.
///
/// Eigenvectors of `sym(E^1/2 K* E^-1/2)` are pulled back to densities through
/// `E^-1/2`. One pair is returned per basis function.
pub fn np_eigendecomposition(s: &OperatorMatrix, kstar: &OperatorMatrix) -> Result<NpSpectrum> {
    let sym = symmetrize_np(s, kstar)?;
    let basis = kstar.basis.clone();
    let raw = pull_back(&sym.energy, &sym.matrix.entries, &kstar.entries)?;
    let pairs = raw
        .into_iter()
        .map(|(lambda, c, c_norm, residual, plain)| Eigenpair {
            index: 0,
            lambda_tilde: lambda,
            phi: basis.to_nodal(&c),
            coefficients: c,
            c: c_norm,
            m: None,
            residual,
            plain_residual: plain,
            block: None,
        })
        .collect();
    Ok(NpSpectrum {
        pairs: finalize(pairs),
        symmetry_defect: sym.symmetry_defect,
        source: Source::Full {
            basis,
            energy: sym.energy,
        },
    })
}

/// Spectrum assembled from azimuthal mode blocks, each pair tagged with its order.
pub fn np_block_eigendecomposition(blocks: &[AxisymBlock]) -> Result<NpSpectrum> {
    let mut pairs = Vec::new();
    let mut factors = Vec::with_capacity(blocks.len());
    let mut defect: f64 = 0.0;
    for (b, block) in blocks.iter().enumerate() {
        let energy = EnergyFactor::new(&block.single_layer)?;
        let (sym, d) = conjugate(&energy, &block.np);
        defect = defect.max(d);
        for (lambda, c, c_norm, residual, plain) in pull_back(&energy, &sym, &block.np)? {
            pairs.push(Eigenpair {
                index: 0,
                lambda_tilde: lambda,
                phi: block.to_nodal(&c),
                coefficients: c,
                c: c_norm,
                m: Some(block.m),
                residual,
                plain_residual: plain,
                block: Some(b),
            });
        }
        factors.push(BlockFactor {
            block: block.clone(),
            energy,
        });
    }
    Ok(NpSpectrum {
        pairs: finalize(pairs),
        symmetry_defect: defect,
        source: Source::Blocks(factors),
    })
}

/// Eigenvalues of mode blocks without eigenfunctions, tagged with their orders.
pub fn block_eigenvalues(blocks: &[AxisymBlock]) -> Result<Vec<SpectralValue>> {
    let mut out = Vec::new();
    for block in blocks {
        let energy = EnergyFactor::new(&block.single_layer)?;
        let (sym, _) = conjugate(&energy, &block.np);
        out.extend(crate::linalg::sym_eigenvalues(&sym)?.into_iter().map(|lambda| SpectralValue {
            lambda,
            m: Some(block.m),
        }));
    }
    out.sort_by(|a, b| b.lambda.abs().total_cmp(&a.lambda.abs()).then(a.m.cmp(&b.m)));
    Ok(out)
}

impl NpSpectrum {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn values(&self) -> Vec<SpectralValue> {
        self.pairs.iter().map(SpectralValue::from).collect()
    }

    /// Energy factor of the full basis; `None` for block spectra.
    pub fn energy(&self) -> Option<&EnergyFactor> {
        match &self.source {
            Source::Full { energy, .. } => Some(energy),
            Source::Blocks(_) => None,
        }
    }

    pub fn basis(&self) -> Option<&Arc<SurfaceBasis>> {
        match &self.source {
            Source::Full { basis, .. } => Some(basis),
            Source::Blocks(_) => None,
        }
    }

    /// Nodal values of `|D|^alpha phi` for a pair of this spectrum.
    pub fn modulated(&self, pair: &Eigenpair, alpha: f64) -> Result<Vec<f64>> {
        match (&self.source, pair.block) {
            (Source::Full { basis, energy }, None) => {
                Ok(basis.to_nodal(&fractional_modulation(alpha, energy, &pair.coefficients)?))
            }
            (Source::Blocks(blocks), Some(b)) => {
                let f = &blocks[b];
                Ok(f.block.to_nodal(&fractional_modulation(alpha, &f.energy, &pair.coefficients)?))
            }
            _ => Err(Error::invalid("pair", "eigenpair does not belong to this spectrum")),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(ALPHA_RANGE[0]..=ALPHA_RANGE[1]).contains(&alpha) {
        return Err(Error::invalid("alpha", format!("{alpha} is outside [-2, 2]")));
    }
    Ok(())
}

/// `|D|^alpha c = (2E)^-alpha c` on coefficients.
pub fn fractional_modulation(alpha: f64, energy: &EnergyFactor, c: &[f64]) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if alpha == 0.0 {
        return Ok(c.to_vec());
    }
    let scale = 2f64.powf(-alpha);
    Ok(energy.apply_power(-alpha, c).into_iter().map(|v| v * scale).collect())
}

/// `|D|^alpha` as an operator matrix in the basis of `s`.
pub fn fractional_operator(alpha: f64, s: &OperatorMatrix) -> Result<OperatorMatrix> {
    check_alpha(alpha)?;
    let energy = EnergyFactor::new(&s.entries)?;
    let scale = 2f64.powf(-alpha);
    let m = energy.power(-alpha);
    Ok(OperatorMatrix {
        entries: Mat::from_fn(m.nrows(), m.ncols(), |i, j| scale * m[(i, j)]),
        kind: crate::layer_potentials::OperatorKind::FractionalD { alpha },
        basis: s.basis.clone(),
        info: crate::layer_potentials::AssemblyInfo::derived(format!(
            "(2E)^{} from the single-layer energy matrix",
            -alpha
        )),
    })
}

/// `c = 1 / <E phi, phi>` for coefficients `phi`.
pub fn sobolev_normalizer(energy: &EnergyFactor, phi: &[f64]) -> Result<f64> {
    let e = energy.energy(phi);
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::ZeroNorm);
    }
    Ok(1.0 / e)
}

/// Closed interval in `rho(lambda^2 / h^2)` with an optional closed interval for `m h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub h: f64,
    pub r: f64,
    pub s: f64,
    pub m_range: Option<[f64; 2]>,
}

impl SpectralWindow {
    pub fn new(h: f64, r: f64, s: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::invalid("window.h", "must be positive"));
        }
        if !(r <= s) {
            return Err(Error::invalid("window", format!("r = {r} exceeds s = {s}")));
        }
        Ok(SpectralWindow {
            h,
            r,
            s,
            m_range: None,
        })
    }

    pub fn with_m_range(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::invalid("window.m_range", "lower end exceeds upper end"));
        }
        self.m_range = Some([lo, hi]);
        Ok(self)
    }

    /// Same interval at another `h`.
    pub fn at(&self, h: f64) -> Result<Self> {
        let mut w = Self::new(h, self.r, self.s)?;
        w.m_range = self.m_range;
        Ok(w)
    }

    /// The window in terms of `lambda^2 / h^2`: `[rho^-1(r), rho^-1(s)]`.
    pub fn energy_interval(&self) -> [f64; 2] {
        [rho_inverse(self.r.max(0.0)), rho_inverse(self.s.min(1.0))]
    }

    pub fn contains(&self, v: SpectralValue) -> bool {
        let x = rho(v.lambda * v.lambda / (self.h * self.h));
        if !(self.r <= x && x <= self.s) {
            return false;
        }
        match (self.m_range, v.m) {
            (Some([lo, hi]), Some(m)) => {
                let mh = m as f64 * self.h;
                lo <= mh && mh <= hi
            }
            (Some(_), None) => false,
            (None, _) => true,
        }
    }
}

/// Result of [`select_window`]; `empty` flags a window without pairs.
#[derive(Clone, Debug)]
pub struct WindowSelection<'a> {
    pub pairs: Vec<&'a Eigenpair>,
    pub empty: bool,
}

/// Pairs inside the window, in spectrum order.
pub fn select_window<'a>(pairs: &'a [Eigenpair], window: &SpectralWindow) -> WindowSelection<'a> {
    let sel: Vec<&Eigenpair> = pairs
        .iter()
        .filter(|p| window.contains(SpectralValue::from(*p)))
        .collect();
    WindowSelection {
        empty: sel.is_empty(),
        pairs: sel,
    }
}

/// Eigentable CSV with header `index,m,lambda,c`.
pub fn eigentable_csv(pairs: &[Eigenpair]) -> String {
    let mut out = String::from("index,m,lambda,c\n");
    for p in pairs {
        let m = p.m.map(|m| m.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{:.17e},{:.17e}\n", p.index, m, p.lambda_tilde, p.c));
    }
    out
}

/// Eigenvalues closer than this count as one cluster in [`spectrum_csv`].
pub const MULTIPLICITY_TOL: f64 = 1e-6;

/// Spectrum dump with header `index,lambda,multiplicity_hint`.
///
/// The hint is the size of the cluster of values within [`MULTIPLICITY_TOL`] of their
/// neighbors in the list, so a degenerate eigenspace reports its dimension on every row.
pub fn spectrum_csv(values: &[SpectralValue]) -> String {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].lambda.total_cmp(&values[b].lambda));
    let mut hint = vec![1usize; values.len()];
    let mut start = 0;
    for k in 1..=order.len() {
        let split = k == order.len()
            || values[order[k]].lambda - values[order[k - 1]].lambda > MULTIPLICITY_TOL;
        if split {
            for &i in &order[start..k] {
                hint[i] = k - start;
            }
            start = k;
        }
    }
    let mut out = String::from("index,lambda,multiplicity_hint\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{},{:.17e},{}\n", i, v.lambda, hint[i]));
    }
    out
}
