//! Numerical check of the single-layer jump relation
//! `d/dnu S[phi]^(+/-) = (+/- 1/2 + K*)[phi]`.

use std::f64::consts::PI;

use faer::Mat;

use super::basis::SurfaceBasis;
use super::quadrature::{harmonic_rows, Columns, LaplaceKernel, QuadratureSettings, RotatedRule};
use crate::error::{Error, Result};
use crate::geometry::{unit_sphere, QuadratureMesh, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct JumpSettings {
    /// Offset step of the one-sided difference stencil.
    pub offset: f64,
    /// Nodes at which the relation is checked; `None` picks an even spread.
    pub nodes: Option<Vec<usize>>,
    /// Number of checked nodes when `nodes` is `None`.
    pub n_check: usize,
}

impl JumpSettings {
    /// Offset of a twentieth of the node spacing at 16 spread nodes.
    pub fn for_mesh(mesh: &QuadratureMesh) -> Self {
        JumpSettings {
            offset: 0.05 * mesh.spacing(),
            nodes: None,
            n_check: 16,
        }
    }
}

/// Max-norm residuals of the jump relation over the checked nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpResidual {
    /// `|d_nu u^+ - (1/2 + K*) phi|`.
    pub exterior: f64,
    /// `|d_nu u^- - (-1/2 + K*) phi|`.
    pub interior: f64,
    /// `|(d_nu u^+ - d_nu u^-) - phi|`.
    pub jump: f64,
    pub nodes: Vec<usize>,
}

impl JumpResidual {
    pub fn max(&self) -> f64 {
        self.exterior.max(self.interior)
    }
}

/// Smallest admissible offset relative to the node spacing.
pub const OFFSET_GUARD: f64 = 1e-3;

/// Compares one-sided normal derivatives of the off-surface single layer with
/// `(+/- 1/2 + K*)[phi]` at a set of nodes.
pub fn verify_jump_relation(
    mesh: &QuadratureMesh,
    density: &[f64],
    settings: &JumpSettings,
) -> Result<JumpResidual> {
    mesh.chart().require_sphere_topology()?;
    if density.len() != mesh.len() {
        return Err(Error::invalid("density", "length differs from the mesh size"));
    }
    let guard = OFFSET_GUARD * mesh.spacing();
    if !(settings.offset >= guard) {
        return Err(Error::OffsetTooSmall {
            offset: settings.offset,
            guard,
        });
    }
    let nodes = match &settings.nodes {
        Some(v) => v.clone(),
        None => {
            let stride = (mesh.len() / settings.n_check.max(1)).max(1);
            (0..mesh.len()).step_by(stride).collect()
        }
    };
    let basis = SurfaceBasis::new(mesh)?;
    let quad = QuadratureSettings::for_mesh(mesh);
    let (s_rows, k_rows) = harmonic_rows(
        mesh,
        &quad,
        &LaplaceKernel,
        basis.harmonics(),
        Columns::All,
        &nodes,
    )?;
    let coef = basis.harmonic_coefficients(&basis.from_nodal(density));
    let chart = mesh.chart();
    let h = settings.offset;
    let n_phi = (2 * mesh.resolution()[1]).max(64);

    let mut res = JumpResidual {
        exterior: 0.0,
        interior: 0.0,
        jump: 0.0,
        nodes: nodes.clone(),
    };
    for (r, &i) in nodes.iter().enumerate() {
        let node = &mesh.nodes()[i];
        let (x, nu) = (node.geom.x, node.geom.normal);
        let center = unit_sphere(node.u[0], node.u[1]);
        let dot = |rows: &Mat<f64>| -> f64 { (0..coef.len()).map(|c| rows[(r, c)] * coef[c]).sum() };
        let u0 = dot(&s_rows[0]);
        let kphi = dot(&k_rows[0]);
        // angular width on the parameter sphere corresponding to the offset
        let scale = h / chart.area_factor(&center).sqrt();
        let rule = RotatedRule::graded(0.5 * scale, 16, n_phi);
        let mut samples = Vec::with_capacity(rule.len());
        rule.for_each(&center, |p, w| {
            let y = chart.embed(p);
            let val = basis.eval_harmonic(&coef, p);
            samples.push((y, val * w * chart.area_factor(p)));
        });
        let potential = |z: &Vec3| -> f64 {
            let acc: f64 = samples.iter().map(|(y, v)| v / (z - y).norm()).sum();
            -acc / (4.0 * PI)
        };
        let side = |s: f64| -> f64 {
            let f: Vec<f64> = (1..=4).map(|k| potential(&(x + nu * (s * k as f64 * h)))).collect();
            s * (-25.0 * u0 + 48.0 * f[0] - 36.0 * f[1] + 16.0 * f[2] - 3.0 * f[3]) / (12.0 * h)
        };
        let d_ext = side(1.0);
        let d_int = side(-1.0);
        let phi = density[i];
        res.exterior = res.exterior.max((d_ext - (0.5 * phi + kphi)).abs());
        res.interior = res.interior.max((d_int - (-0.5 * phi + kphi)).abs());
        res.jump = res.jump.max((d_ext - d_int - phi).abs());
    }
    Ok(res)
}
