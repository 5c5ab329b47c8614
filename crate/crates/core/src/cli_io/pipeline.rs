//! Pipeline orchestration for the `run` commands.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use super::artifacts::{sha256_hex, write_atomic, ArtifactSet, Manifest, Versions};
use super::cache::{axisym_blocks_cached, laplace_pair_cached, MatrixCache};
use super::config::{Command, RunConfig};
use crate::error::{Error, Result};
use crate::geometry::{
    build_quadrature_mesh, check_assumption_a, local_geometry, Expression, Frame, QuadratureMesh,
    SurfaceChart, Topology, Vec3,
};
use crate::helmholtz::{
    quasistatic_deviation, resonance_csv, resonance_search, HelmholtzContext, QuasiStaticParams,
    ResonanceTarget,
};
use crate::layer_potentials::{kelley_residual, max_degree};
use crate::spectral::{
    eigentable_csv, np_block_eigendecomposition, np_eigendecomposition, select_window, spectrum_csv,
    NpSpectrum, SpectralWindow,
};
use crate::symbol_dynamics::{
    classify_leaf, e2_max, hamiltonian, integrate_flow, solve_leaf_equation, state_at_direction,
    CotangentState, FlowSettings, ProbeBudget,
};
use crate::weyl_concentration::{
    bump_radius, concentration_csv, concentration_ratio, quantum_variance, variance_trend,
    weyl_count, weyl_csv,
};

/// Name of the provenance file written last by every run.
pub const MANIFEST_FILE: &str = "manifest.json";

/// Result of a successful run.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

/// Process exit status for an error: 2 for configuration errors, 3 for numerical failures.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_config_error() {
        2
    } else {
        3
    }
}

/// Machine-readable error document.
pub fn error_json(err: &Error) -> serde_json::Value {
    json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": exit_code(err),
    })
}

/// Executes the configured pipeline, writes its artifacts and the manifest into
/// `config.out`, and returns the manifest.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    config.validate()?;
    let chart = config.surface.chart()?;
    let resolution = config.resolution();
    let cache = match &config.cache {
        Some(dir) => Some(MatrixCache::new(dir, &config.surface, resolution)?),
        None => None,
    };
    let ctx = Ctx {
        config,
        chart: &chart,
        resolution,
        cache: cache.as_ref(),
        out: &config.out,
    };
    let mut arts = ArtifactSet::default();
    match config.command {
        Command::Geometry => ctx.geometry(&mut arts)?,
        Command::Spectrum => ctx.spectrum(&mut arts)?,
        Command::Flow => ctx.flow(&mut arts)?,
        Command::Leaf => ctx.leaf(&mut arts)?,
        Command::Weyl => ctx.weyl(&mut arts)?,
        Command::Concentration => ctx.concentration(&mut arts)?,
        Command::Variance => ctx.variance(&mut arts)?,
        Command::Helmholtz => ctx.helmholtz(&mut arts)?,
    }
    let config_json = config.to_json();
    let manifest = Manifest {
        command: config.command.name().to_string(),
        config_hash: sha256_hex(config_json.to_string().as_bytes()),
        surface_hash: sha256_hex(config.surface.to_json().to_string().as_bytes()),
        config: config_json,
        seed: config.seed,
        versions: Versions::current(),
        artifacts: arts.records,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    write_atomic(&config.out.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(RunOutcome {
        dir: config.out.clone(),
        manifest,
    })
}

struct Ctx<'a> {
    config: &'a RunConfig,
    chart: &'a SurfaceChart,
    resolution: [usize; 2],
    cache: Option<&'a MatrixCache>,
    out: &'a Path,
}

/// Spectrum with a description of how it was assembled.
struct Computed {
    spectrum: NpSpectrum,
    assembly: String,
    kelley_residual: Option<f64>,
}

#[derive(Serialize)]
struct WindowCount {
    h: f64,
    r: f64,
    s: f64,
    n_pairs: usize,
}

#[derive(Serialize)]
struct Skipped {
    h: f64,
    error: String,
    message: String,
}

impl Ctx<'_> {
    fn mesh(&self) -> Result<QuadratureMesh> {
        build_quadrature_mesh(self.chart, self.resolution)
    }

    fn window(&self, h: f64) -> Result<SpectralWindow> {
        let [r, s] = self.config.window;
        let w = SpectralWindow::new(h, r, s)?;
        match self.config.m_window {
            Some([lo, hi]) => w.with_m_range(lo, hi),
            None => Ok(w),
        }
    }

    /// Mode blocks on surfaces of revolution unless full assembly is requested.
    fn compute_spectrum(&self, mesh: &QuadratureMesh) -> Result<Computed> {
        let use_blocks = mesh.axisym().is_some() && !self.config.full_assembly;
        if use_blocks {
            let m_max = self.config.m_max.unwrap_or_else(|| max_degree(mesh));
            let blocks = axisym_blocks_cached(mesh, m_max, self.cache)?;
            Ok(Computed {
                spectrum: np_block_eigendecomposition(&blocks)?,
                assembly: format!("axisymmetric blocks, |m| <= {m_max}"),
                kelley_residual: None,
            })
        } else {
            let (s, k) = laplace_pair_cached(mesh, self.cache)?;
            Ok(Computed {
                spectrum: np_eigendecomposition(&s, &k)?,
                assembly: "full".into(),
                kelley_residual: Some(kelley_residual(&s, &k)?),
            })
        }
    }

    fn geometry(&self, arts: &mut ArtifactSet) -> Result<()> {
        let mesh = self.mesh()?;
        arts.write(self.out, "geometry.csv", mesh.to_csv().as_bytes())?;
        let a = check_assumption_a(&mesh, 16)?;
        let summary = json!({
            "kind": self.chart.kind_name(),
            "resolution": self.resolution,
            "n_nodes": mesh.len(),
            "total_area": mesh.total_area(),
            "signed_volume": mesh.signed_volume(),
            "diameter": mesh.diameter(),
            "assumption_a": {
                "holds": a.holds,
                "worst_margin": a.worst_margin,
                "n_violating": a.violating_nodes.len(),
                "sampling_consistent": a.sampling_consistent,
            },
        });
        arts.write_json(self.out, "geometry.json", &summary)
    }

    fn spectrum(&self, arts: &mut ArtifactSet) -> Result<()> {
        let mesh = self.mesh()?;
        let c = self.compute_spectrum(&mesh)?;
        let pairs = &c.spectrum.pairs;
        arts.write(self.out, "eigentable.csv", eigentable_csv(pairs).as_bytes())?;
        arts.write(self.out, "spectrum.csv", spectrum_csv(&c.spectrum.values()).as_bytes())?;
        let lambdas: Vec<f64> = pairs.iter().map(|p| p.lambda_tilde).collect();
        let max = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
        let windows = self
            .config
            .h_schedule
            .iter()
            .map(|&h| {
                let w = self.window(h)?;
                Ok(WindowCount {
                    h,
                    r: w.r,
                    s: w.s,
                    n_pairs: select_window(pairs, &w).pairs.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let summary = json!({
            "assembly": c.assembly,
            "n_pairs": pairs.len(),
            "lambda_max": max,
            "lambda_min": min,
            "inclusion": lambdas.iter().all(|l| *l > -0.505 && *l <= 0.505),
            "symmetry_defect": c.spectrum.symmetry_defect,
            "kelley_residual": c.kelley_residual,
            "max_residual": pairs.iter().map(|p| p.residual).fold(0.0, f64::max),
            "windows": windows,
        });
        arts.write_json(self.out, "spectrum.json", &summary)
    }

    fn flow(&self, arts: &mut ArtifactSet) -> Result<()> {
        let chart = self.chart;
        let p = self.config.p;
        let geom = local_geometry(chart, p)?;
        let [d1, d2] = geom.principal_dirs.map(|d| d.normalize());
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let settings = FlowSettings::default();
        let mut summary = Vec::with_capacity(self.config.n_states);
        for i in 0..self.config.n_states {
            let angle: f64 = rng.random_range(0.0..2.0 * PI);
            let v: Vec3 = d1 * angle.cos() + d2 * angle.sin();
            let state = match chart.topology() {
                Topology::Sphere => state_at_direction(chart, &Frame::standard().direction(p), &v)?,
                Topology::Torus => CotangentState::from_ambient(chart, Frame::standard(), p, &v)?,
            };
            // H is homogeneous of degree -2, so this scaling puts the state on H = 1
            let h0 = hamiltonian(&state.geometry(chart)?, &state.xi_vector(), false)?;
            let state = CotangentState {
                xi: state.xi.map(|x| x * h0.sqrt()),
                ..state
            };
            let traj = integrate_flow(chart, &state, self.config.t_final, &settings)?;
            let file = format!("flow_{i:03}.csv");
            arts.write(self.out, &file, traj.to_csv(chart)?.as_bytes())?;
            summary.push(json!({
                "file": file,
                "angle": angle,
                "h_drift": traj.h_drift(),
                "f2_drift": traj.f2_drift(chart).ok(),
                "stats": traj.stats,
            }));
        }
        arts.write_json(
            self.out,
            "flow.json",
            &json!({ "t_final": self.config.t_final, "p": p, "trajectories": summary }),
        )
    }

    fn leaf(&self, arts: &mut ArtifactSet) -> Result<()> {
        let chart = self.chart;
        let (emax, theta_star) = e2_max(chart)?;
        let levels: Vec<f64> = if self.config.e2.is_empty() {
            (-5..=5).map(|j| 0.25 * j as f64 * emax).collect()
        } else {
            self.config.e2.clone()
        };
        let p_z = chart.point(self.config.p).z;
        let budget = ProbeBudget::default();
        let mut leaves = Vec::with_capacity(levels.len());
        for &e2 in &levels {
            let class = classify_leaf(chart, e2, &budget)?;
            let roots = solve_leaf_equation(chart, p_z, e2)?;
            leaves.push(json!({ "e2": e2, "class": class, "roots_at_p": roots }));
        }
        arts.write_json(
            self.out,
            "leaf.json",
            &json!({ "e2_max": emax, "theta_star": theta_star, "p_z": p_z, "leaves": leaves }),
        )
    }

    fn weyl(&self, arts: &mut ArtifactSet) -> Result<()> {
        let mesh = self.mesh()?;
        let c = self.compute_spectrum(&mesh)?;
        let window = self.window(self.config.h_schedule[0])?;
        let sweep = weyl_count(&c.spectrum.values(), &mesh, &window, &self.config.h_schedule)?;
        arts.write(self.out, "weyl.csv", weyl_csv(&sweep.reports).as_bytes())?;
        arts.write_json(
            self.out,
            "weyl.json",
            &json!({ "assembly": c.assembly, "sweep": sweep }),
        )
    }

    fn concentration(&self, arts: &mut ArtifactSet) -> Result<()> {
        let mesh = self.mesh()?;
        let c = self.compute_spectrum(&mesh)?;
        let mut reports = Vec::new();
        let mut skipped = Vec::new();
        let mut first_error = None;
        for &h in &self.config.h_schedule {
            let delta = self.config.delta.unwrap_or_else(|| bump_radius(h, &mesh));
            let res = concentration_ratio(
                &c.spectrum,
                &mesh,
                self.config.p,
                self.config.q,
                delta,
                self.config.alpha,
                &self.window(h)?,
            );
            match res {
                Ok(r) => reports.push(r),
                Err(e @ (Error::EmptyWindow | Error::BumpUnresolved { .. })) => {
                    skipped.push(Skipped {
                        h,
                        error: e.kind().into(),
                        message: e.to_string(),
                    });
                    first_error.get_or_insert(e);
                }
                Err(e) => return Err(e),
            }
        }
        if reports.is_empty() {
            return Err(first_error.unwrap_or(Error::EmptyWindow));
        }
        arts.write(self.out, "concentration.csv", concentration_csv(&reports).as_bytes())?;
        arts.write_json(
            self.out,
            "concentration.json",
            &json!({ "assembly": c.assembly, "reports": reports, "skipped": skipped }),
        )
    }

    fn variance(&self, arts: &mut ArtifactSet) -> Result<()> {
        const XYZ: &[&str] = &["x", "y", "z"];
        let a0 = Expression::parse(&self.config.observable, XYZ, "observable")?;
        let f = |x: &Vec3| a0.eval(&[x.x, x.y, x.z]);
        let mesh = self.mesh()?;
        let c = self.compute_spectrum(&mesh)?;
        let mut reports = Vec::new();
        let mut skipped = Vec::new();
        for &h in &self.config.h_schedule {
            match quantum_variance(&c.spectrum, &mesh, &f, &self.window(h)?) {
                Ok(r) => reports.push(r),
                Err(Error::EmptyWindow) => skipped.push(Skipped {
                    h,
                    error: Error::EmptyWindow.kind().into(),
                    message: Error::EmptyWindow.to_string(),
                }),
                Err(e) => return Err(e),
            }
        }
        if reports.is_empty() {
            return Err(Error::EmptyWindow);
        }
        let mut csv = String::from("h,n_pairs,prediction,mean_diagonal,variance\n");
        for r in &reports {
            csv.push_str(&format!(
                "{:.17e},{},{:.17e},{:.17e},{:.17e}\n",
                r.h, r.n_pairs, r.prediction, r.mean_diagonal, r.variance
            ));
        }
        arts.write(self.out, "variance.csv", csv.as_bytes())?;
        arts.write_json(
            self.out,
            "variance.json",
            &json!({
                "assembly": c.assembly,
                "observable": self.config.observable,
                "reports": reports,
                "skipped": skipped,
                "trend_slope": variance_trend(&reports),
            }),
        )
    }

    fn helmholtz(&self, arts: &mut ArtifactSet) -> Result<()> {
        let lambda = self
            .config
            .lambda
            .ok_or_else(|| Error::MissingField("lambda".into()))?;
        let mesh = self.mesh()?;
        let ctx = HelmholtzContext::new(&mesh)?;
        let base = QuasiStaticParams::new(1.0, 1.0, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), 0.0)?;
        let target = ResonanceTarget {
            lambda,
            np_index: None,
        };
        let reference = resonance_search(&ctx, &base, target, None)?;
        let sweep = quasistatic_deviation(&ctx, &base, target, &self.config.omegas)?;
        arts.write(self.out, "resonance.csv", resonance_csv(&sweep.solutions).as_bytes())?;
        arts.write_json(
            self.out,
            "resonance.json",
            &json!({ "static": reference, "sweep": sweep }),
        )
    }
}
