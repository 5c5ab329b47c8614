//! Azimuthal mode blocks for surfaces of revolution.
//!
//! On a surface of revolution the operators commute with rotations about the axis, so
//! the Galerkin matrices split into blocks spanned by harmonics of one azimuthal order.
//! The cosine family of order `m` and the sine family of order `-m` give identical
//! blocks by mirror symmetry in `phi`. Each block only needs the operator values at the
//! mesh nodes of azimuth zero.

use std::ops::Range;

use faer::Mat;

use super::basis::max_degree;
use super::harmonics::Harmonics;
use super::quadrature::{harmonic_rows, Columns, LaplaceKernel, QuadratureSettings};
use crate::error::{Error, Result};
use crate::geometry::QuadratureMesh;
use crate::linalg::{asymmetry, sym_eigen, symmetric_part};

#[derive(Clone, Debug)]
pub struct AxisymBlock {
    /// Azimuthal order; negative orders are the sine families.
    pub m: i64,
    /// Harmonic degrees spanning the block.
    pub degrees: Range<usize>,
    /// Single-layer block, symmetrized.
    pub single_layer: Mat<f64>,
    /// `K*` block.
    pub np: Mat<f64>,
    /// Orthonormal block functions on the rings at azimuth zero (`n_rings x len`).
    /// The value at azimuth `phi` is this profile times `cos(m phi)`, or `sin(|m| phi)`
    /// for negative `m`.
    pub profile: Mat<f64>,
    pub n_azimuth: usize,
    /// Relative asymmetry of the single-layer block before symmetrization.
    pub raw_asymmetry: f64,
}

impl AxisymBlock {
    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    /// Nodal values of the block expansion with coefficients `c` (ring-major order).
    pub fn to_nodal(&self, c: &[f64]) -> Vec<f64> {
        let prof = crate::linalg::mat_vec(&self.profile, c);
        let na = self.n_azimuth;
        let ma = self.m.unsigned_abs() as f64;
        let ang: Vec<f64> = (0..na)
            .map(|l| {
                let ph = 2.0 * std::f64::consts::PI * l as f64 / na as f64;
                if self.m >= 0 {
                    (ma * ph).cos()
                } else {
                    (ma * ph).sin()
                }
            })
            .collect();
        prof.iter().flat_map(|p| ang.iter().map(move |a| p * a)).collect()
    }
}

/// Mode blocks for `|m| <= m_max` with default degree and quadrature settings.
pub fn assemble_axisym_blocks(mesh: &QuadratureMesh, m_max: usize) -> Result<Vec<AxisymBlock>> {
    assemble_axisym_blocks_with(mesh, m_max, max_degree(mesh), &QuadratureSettings::for_mesh(mesh))
}

/// Mode blocks for `|m| <= m_max` in harmonics up to degree `l_max`, ordered
/// `-m_max, ..., m_max`.
pub fn assemble_axisym_blocks_with(
    mesh: &QuadratureMesh,
    m_max: usize,
    l_max: usize,
    settings: &QuadratureSettings,
) -> Result<Vec<AxisymBlock>> {
    let layout = mesh
        .axisym()
        .ok_or(Error::NotAxisymmetric(mesh.chart().kind_name()))?;
    if l_max > max_degree(mesh) {
        return Err(Error::invalid(
            "degree",
            format!("the mesh resolves harmonics up to degree {}", max_degree(mesh)),
        ));
    }
    if m_max > l_max {
        return Err(Error::invalid(
            "m_max",
            format!("azimuthal orders above the degree {l_max} are empty"),
        ));
    }
    let (nr, na) = (layout.n_rings, layout.n_azimuth);
    let h = Harmonics::new(l_max);
    let targets: Vec<usize> = (0..nr).map(|k| k * na).collect();
    let (s_rows, k_rows) = harmonic_rows(
        mesh,
        settings,
        &LaplaceKernel,
        &h,
        Columns::CosineFamilies(m_max),
        &targets,
    )?;
    let ring_w: Vec<f64> = targets.iter().map(|&i| mesh.weights()[i]).collect();
    let u1 = mesh.u1_grid();

    let mut positive = Vec::with_capacity(m_max + 1);
    let mut col0 = 0;
    for m in 0..=m_max {
        let len = l_max + 1 - m;
        let cos2: f64 = (0..na)
            .map(|l| (2.0 * std::f64::consts::PI * (m * l) as f64 / na as f64).cos().powi(2))
            .sum();
        let mut prof_raw = Mat::<f64>::zeros(nr, len);
        let mut y = vec![0.0; len];
        for (k, th) in u1.iter().enumerate() {
            h.eval_family(m as i64, th.cos(), 0.0, &mut y);
            for (j, v) in y.iter().enumerate() {
                prof_raw[(k, j)] = *v;
            }
        }
        let gram = symmetric_part(&Mat::from_fn(len, len, |a, b| {
            cos2 * (0..nr).map(|k| ring_w[k] * prof_raw[(k, a)] * prof_raw[(k, b)]).sum::<f64>()
        }));
        let eig = sym_eigen(&gram)?;
        if !(eig.values[0] > 0.0) {
            return Err(Error::NotPositiveDefinite(eig.values[0]));
        }
        let orth = eig.function(|v| v.powf(-0.5));
        let profile = &prof_raw * &orth;
        let project = |rows: &Mat<f64>| {
            let g0 = Mat::from_fn(len, len, |a, b| {
                cos2 * (0..nr)
                    .map(|k| ring_w[k] * profile[(k, a)] * rows[(k, col0 + b)])
                    .sum::<f64>()
            });
            &g0 * &orth
        };
        let s_raw = project(&s_rows[0]);
        let np = project(&k_rows[0]);
        positive.push(AxisymBlock {
            m: m as i64,
            degrees: m..l_max + 1,
            raw_asymmetry: asymmetry(&s_raw),
            single_layer: symmetric_part(&s_raw),
            np,
            profile,
            n_azimuth: na,
        });
        col0 += len;
    }
    let mut blocks: Vec<AxisymBlock> = positive
        .iter()
        .rev()
        .filter(|b| b.m > 0)
        .map(|b| AxisymBlock { m: -b.m, ..b.clone() })
        .collect();
    blocks.extend(positive);
    Ok(blocks)
}
