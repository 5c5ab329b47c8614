//! Surface parametrizations.
//!
//! Sphere-topology charts are stored as maps `X(p)` from the unit sphere, so a
//! chart can be read in any rotated spherical coordinate system (a [`Frame`]).
//! The standard frame gives the usual `(theta, phi)` with `theta` in `[0, pi]`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use evalexpr::{
    build_operator_tree, Context, DefaultNumericTypes, EvalexprError, EvalexprResult,
    Node, Value,
};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Rotated spherical coordinates: `u = (theta, phi)` names the point `R s(theta, phi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    rot: Matrix3<f64>,
}

impl Default for Frame {
    fn default() -> Self {
        Self::standard()
    }
}

impl Frame {
    pub fn standard() -> Self {
        Frame {
            rot: Matrix3::identity(),
        }
    }

    /// Frame whose north pole (`theta = 0`) is the unit vector `p`.
    pub fn pole_at(p: &Vec3) -> Self {
        let [th, ph] = spherical_coordinates(p);
        Frame {
            rot: rot_z(ph) * rot_y(th),
        }
    }

    /// Frame in which `p` sits on the equator at `(pi/2, 0)`.
    pub fn equator_at(p: &Vec3) -> Self {
        let [th, ph] = spherical_coordinates(p);
        Frame {
            rot: rot_z(ph) * rot_y(th - 0.5 * PI),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rot
    }

    pub fn is_standard(&self) -> bool {
        self.rot == Matrix3::identity()
    }

    /// Unit vector with frame coordinates `u`.
    pub fn direction(&self, u: [f64; 2]) -> Vec3 {
        self.rot * unit_sphere(u[0], u[1])
    }

    /// Frame coordinates of the unit vector `p`.
    pub fn coordinates(&self, p: &Vec3) -> [f64; 2] {
        spherical_coordinates(&(self.rot.transpose() * p))
    }
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub(crate) fn unit_sphere(th: f64, ph: f64) -> Vec3 {
    let (st, ct) = th.sin_cos();
    let (sp, cp) = ph.sin_cos();
    Vec3::new(st * cp, st * sp, ct)
}

/// `(theta, phi)` of a nonzero vector, `phi` in `[0, 2 pi)`.
pub(crate) fn spherical_coordinates(p: &Vec3) -> [f64; 2] {
    let rho = p.x.hypot(p.y);
    let th = rho.atan2(p.z);
    let mut ph = p.y.atan2(p.x);
    if ph < 0.0 {
        ph += 2.0 * PI;
    }
    if ph >= 2.0 * PI {
        ph -= 2.0 * PI;
    }
    [th, ph]
}

/// Position with first and second coordinate derivatives.
#[derive(Clone, Copy, Debug)]
pub struct ChartJet {
    pub x: Vec3,
    pub du: [Vec3; 2],
    pub duu: [[Vec3; 2]; 2],
}

/// Radial profile `r(theta) = sum_n a_n T_n(cos theta)` of a star-shaped surface of revolution.
///
/// Being a polynomial in `cos theta = p_z`, the profile is automatically smooth at
/// both axis points.
#[derive(Clone, Debug, PartialEq)]
pub struct RevolutionProfile {
    coeffs: Vec<f64>,
    fit_residual: f64,
    meridian: Vec<[f64; 2]>,
}

const MAX_PROFILE_TERMS: usize = 48;
const PROFILE_FIT_TOL: f64 = 1e-6;

impl RevolutionProfile {
    /// Builds a profile from Chebyshev coefficients in `cos theta`.
    pub fn from_coefficients(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidSurface("profile coefficients must be finite".into()));
        }
        let p = RevolutionProfile {
            coeffs,
            fit_residual: 0.0,
            meridian: Vec::new(),
        };
        p.check_positive()?;
        Ok(p)
    }

    /// Fits a profile through meridian points `(rho, z)`, `rho >= 0`, ordered from the
    /// north axis point to the south axis point. The polar angle of the points about
    /// the origin must increase strictly.
    pub fn from_meridian(points: &[[f64; 2]]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::invalid("profile", "need at least three meridian points"));
        }
        let mut thetas = Vec::with_capacity(points.len());
        let mut radii = Vec::with_capacity(points.len());
        for (i, &[rho, z]) in points.iter().enumerate() {
            if !(rho.is_finite() && z.is_finite()) || rho < 0.0 {
                return Err(Error::invalid(format!("profile[{i}]"), "rho must be finite and >= 0"));
            }
            let r = rho.hypot(z);
            if r <= 0.0 {
                return Err(Error::invalid(format!("profile[{i}]"), "point at the origin"));
            }
            thetas.push(rho.atan2(z));
            radii.push(r);
        }
        if thetas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "profile",
                "polar angle must increase strictly along the meridian",
            ));
        }
        let scale = radii.iter().cloned().fold(0.0, f64::max);
        let ts: Vec<f64> = thetas.iter().map(|t| t.cos()).collect();
        let max_terms = MAX_PROFILE_TERMS.min(points.len());
        let mut best: Option<(Vec<f64>, f64)> = None;
        for n in 1..=max_terms {
            let a = DMatrix::from_fn(ts.len(), n, |i, j| chebyshev(j, ts[i]));
            let b = DVector::from_column_slice(&radii);
            let sol = a
                .clone()
                .svd(true, true)
                .solve(&b, 1e-14)
                .map_err(|e| Error::Linalg(e.to_string()))?;
            let res = (a * &sol - b).amax() / scale;
            let done = res < PROFILE_FIT_TOL * 1e-3;
            if best.as_ref().is_none_or(|(_, r)| res < *r) {
                best = Some((sol.iter().copied().collect(), res));
            }
            if done {
                break;
            }
        }
        let (coeffs, fit_residual) = best.expect("at least one fit");
        if fit_residual > PROFILE_FIT_TOL {
            return Err(Error::InvalidSurface(format!(
                "profile is not smooth at the resolution of its samples (relative fit residual {fit_residual:.2e})"
            )));
        }
        let p = RevolutionProfile {
            coeffs,
            fit_residual,
            meridian: points.to_vec(),
        };
        p.check_positive()?;
        Ok(p)
    }

    fn check_positive(&self) -> Result<()> {
        for i in 0..=512 {
            let t = -1.0 + 2.0 * i as f64 / 512.0;
            if self.eval(t)[0] <= 0.0 {
                return Err(Error::InvalidSurface("profile radius must stay positive".into()));
            }
        }
        Ok(())
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn fit_residual(&self) -> f64 {
        self.fit_residual
    }

    /// Meridian points the profile was fitted to (empty when built from coefficients).
    pub fn meridian(&self) -> &[[f64; 2]] {
        &self.meridian
    }

    /// `[r, dr/dt, d2r/dt2]` at `t = cos theta`.
    pub fn eval(&self, t: f64) -> [f64; 3] {
        let (mut t0, mut t1) = (1.0, t);
        let (mut d0, mut d1) = (0.0, 1.0);
        let (mut s0, mut s1) = (0.0, 0.0);
        let mut out = [0.0; 3];
        for (n, &c) in self.coeffs.iter().enumerate() {
            let (tn, dn, sn) = match n {
                0 => (t0, d0, s0),
                1 => (t1, d1, s1),
                _ => {
                    let tn = 2.0 * t * t1 - t0;
                    let dn = 2.0 * t1 + 2.0 * t * d1 - d0;
                    let sn = 4.0 * d1 + 2.0 * t * s1 - s0;
                    t0 = t1;
                    t1 = tn;
                    d0 = d1;
                    d1 = dn;
                    s0 = s1;
                    s1 = sn;
                    (tn, dn, sn)
                }
            };
            out[0] += c * tn;
            out[1] += c * dn;
            out[2] += c * sn;
        }
        out
    }

    /// Radius as a function of the polar angle.
    pub fn radius(&self, theta: f64) -> f64 {
        self.eval(theta.cos())[0]
    }
}

fn chebyshev(n: usize, t: f64) -> f64 {
    let (mut a, mut b) = (1.0, t);
    match n {
        0 => a,
        1 => b,
        _ => {
            for _ in 2..=n {
                let c = 2.0 * t * b - a;
                a = b;
                b = c;
            }
            b
        }
    }
}

/// Surface given by three expressions in `u` (polar angle) and `v` (azimuth).
#[derive(Clone, Debug, PartialEq)]
pub struct GenericSurface {
    exprs: [String; 3],
    trees: [Expression; 3],
}

impl GenericSurface {
    pub fn new(x: &str, y: &str, z: &str) -> Result<Self> {
        const UV: &[&str] = &["u", "v"];
        Ok(GenericSurface {
            exprs: [x.to_string(), y.to_string(), z.to_string()],
            trees: [
                Expression::parse(x, UV, "x")?,
                Expression::parse(y, UV, "y")?,
                Expression::parse(z, UV, "z")?,
            ],
        })
    }

    pub fn expressions(&self) -> &[String; 3] {
        &self.exprs
    }

    /// Position at chart parameters; NaN components when an expression fails.
    pub fn eval(&self, u: f64, v: f64) -> Vec3 {
        let c = |i: usize| self.trees[i].eval(&[u, v]);
        Vec3::new(c(0), c(1), c(2))
    }
}

/// Evaluation context binding named float variables and `pi`.
struct VarContext<'a> {
    names: &'a [&'a str],
    values: Vec<Value<DefaultNumericTypes>>,
    pi: Value<DefaultNumericTypes>,
}

impl<'a> VarContext<'a> {
    fn new(names: &'a [&'a str], values: &[f64]) -> Self {
        VarContext {
            names,
            values: values.iter().map(|v| Value::Float(*v)).collect(),
            pi: Value::Float(PI),
        }
    }
}

/// A parsed real-valued expression in a fixed list of variables.
///
/// Supports arithmetic, `^`, `pi` and the usual elementary functions.
#[derive(Clone)]
pub struct Expression {
    text: String,
    vars: &'static [&'static str],
    tree: Arc<Node<DefaultNumericTypes>>,
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Expression").field(&self.text).finish()
    }
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text && self.vars == other.vars
    }
}

impl Expression {
    /// Parses `text`; `path` names the source in errors. The expression is test-evaluated
    /// at a generic point so unknown identifiers fail here.
    pub fn parse(text: &str, vars: &'static [&'static str], path: &str) -> Result<Self> {
        let tree = build_operator_tree::<DefaultNumericTypes>(text)
            .map_err(|err| Error::invalid(path, err.to_string()))?;
        let e = Expression {
            text: text.to_string(),
            vars,
            tree: Arc::new(tree),
        };
        let probe: Vec<f64> = (0..vars.len()).map(|i| 0.7 + 0.6 * i as f64).collect();
        e.try_eval(&probe).map_err(|err| Error::invalid(path, err))?;
        Ok(e)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    fn try_eval(&self, values: &[f64]) -> std::result::Result<f64, String> {
        let ctx = VarContext::new(self.vars, values);
        self.tree.eval_number_with_context(&ctx).map_err(|e| e.to_string())
    }

    /// Value at `values` (in the order of the variable list); NaN when evaluation fails.
    pub fn eval(&self, values: &[f64]) -> f64 {
        self.try_eval(values).unwrap_or(f64::NAN)
    }
}

impl Context for VarContext<'_> {
    type NumericTypes = DefaultNumericTypes;

    fn get_value(&self, identifier: &str) -> Option<&Value<DefaultNumericTypes>> {
        if identifier == "pi" {
            return Some(&self.pi);
        }
        self.names
            .iter()
            .position(|n| *n == identifier)
            .map(|i| &self.values[i])
    }

    fn call_function(
        &self,
        identifier: &str,
        argument: &Value<DefaultNumericTypes>,
    ) -> EvalexprResult<Value<DefaultNumericTypes>, DefaultNumericTypes> {
        let f: fn(f64) -> f64 = match identifier {
            "sin" => f64::sin,
            "cos" => f64::cos,
            "tan" => f64::tan,
            "asin" => f64::asin,
            "acos" => f64::acos,
            "atan" => f64::atan,
            "sinh" => f64::sinh,
            "cosh" => f64::cosh,
            "tanh" => f64::tanh,
            "exp" => f64::exp,
            "ln" => f64::ln,
            "sqrt" => f64::sqrt,
            "abs" => f64::abs,
            _ => {
                return Err(EvalexprError::FunctionIdentifierNotFound(
                    identifier.to_string(),
                ))
            }
        };
        Ok(Value::Float(f(argument.as_number()?)))
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(
        &mut self,
        _disabled: bool,
    ) -> EvalexprResult<(), DefaultNumericTypes> {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ChartKind {
    Sphere { radius: f64 },
    Spheroid { a: f64, c: f64 },
    Revolution(RevolutionProfile),
    Torus { major: f64, minor: f64 },
    Generic(GenericSurface),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    Sphere,
    Torus,
}

/// A regular parametrization of a closed surface.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceChart {
    kind: ChartKind,
    orientation: f64,
}

const FD_STEP: f64 = 1e-3;

impl SurfaceChart {
    pub fn sphere(radius: f64) -> Result<Self> {
        positive("R", radius)?;
        Ok(Self::from_kind(ChartKind::Sphere { radius }))
    }

    pub fn spheroid(a: f64, c: f64) -> Result<Self> {
        positive("a", a)?;
        positive("c", c)?;
        Ok(Self::from_kind(ChartKind::Spheroid { a, c }))
    }

    pub fn revolution(profile: RevolutionProfile) -> Self {
        Self::from_kind(ChartKind::Revolution(profile))
    }

    pub fn torus(major: f64, minor: f64) -> Result<Self> {
        positive("R_major", major)?;
        positive("r_minor", minor)?;
        if minor >= major {
            return Err(Error::invalid("r_minor", "must be smaller than R_major"));
        }
        Ok(SurfaceChart {
            kind: ChartKind::Torus { major, minor },
            orientation: -1.0,
        })
    }

    /// Sphere-topology surface from expressions in `u` (polar angle in `[0, pi]`) and
    /// `v` (azimuth). Orientation is fixed so the enclosed volume is positive.
    pub fn generic(x: &str, y: &str, z: &str) -> Result<Self> {
        let g = GenericSurface::new(x, y, z)?;
        let mut chart = Self::from_kind(ChartKind::Generic(g));
        let (n1, n2) = (24, 48);
        let (th, wt) = super::quadrature::gauss_legendre_on(n1, 0.0, PI);
        let mut vol = 0.0;
        for (k, &t) in th.iter().enumerate() {
            for l in 0..n2 {
                let ph = 2.0 * PI * l as f64 / n2 as f64;
                let jet = chart.jet(&Frame::standard(), [t, ph])?;
                let c = jet.du[0].cross(&jet.du[1]);
                vol += wt[k] * (2.0 * PI / n2 as f64) * jet.x.dot(&c) / 3.0;
            }
        }
        if !vol.is_finite() {
            return Err(Error::InvalidSurface("expressions produce non-finite points".into()));
        }
        if vol.abs() < 1e-12 {
            return Err(Error::InvalidSurface("surface encloses no volume".into()));
        }
        chart.orientation = vol.signum();
        Ok(chart)
    }

    fn from_kind(kind: ChartKind) -> Self {
        SurfaceChart {
            kind,
            orientation: 1.0,
        }
    }

    pub fn kind(&self) -> &ChartKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            ChartKind::Sphere { .. } => "sphere",
            ChartKind::Spheroid { .. } => "spheroid",
            ChartKind::Revolution(_) => "surface_of_revolution",
            ChartKind::Torus { .. } => "torus",
            ChartKind::Generic(_) => "generic",
        }
    }

    pub fn topology(&self) -> Topology {
        match self.kind {
            ChartKind::Torus { .. } => Topology::Torus,
            _ => Topology::Sphere,
        }
    }

    /// Rotationally symmetric about the z-axis, with `u2` the azimuth.
    pub fn is_axisymmetric(&self) -> bool {
        matches!(
            self.kind,
            ChartKind::Sphere { .. } | ChartKind::Spheroid { .. } | ChartKind::Revolution(_)
        )
    }

    /// `+1` when `X_1 x X_2` points outward, `-1` otherwise.
    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    /// Parameter rectangle and periodicity flags per axis.
    pub fn domain(&self) -> ([[f64; 2]; 2], [bool; 2]) {
        match self.topology() {
            Topology::Sphere => ([[0.0, PI], [0.0, 2.0 * PI]], [false, true]),
            Topology::Torus => ([[0.0, 2.0 * PI], [0.0, 2.0 * PI]], [true, true]),
        }
    }

    pub(crate) fn require_sphere_topology(&self) -> Result<()> {
        match self.topology() {
            Topology::Sphere => Ok(()),
            Topology::Torus => Err(Error::UnsupportedTopology("torus")),
        }
    }

    /// Position at standard chart parameters.
    pub fn point(&self, u: [f64; 2]) -> Vec3 {
        match &self.kind {
            ChartKind::Torus { major, minor } => {
                let rr = major + minor * u[0].cos();
                Vec3::new(rr * u[1].cos(), rr * u[1].sin(), minor * u[0].sin())
            }
            ChartKind::Generic(g) => g.eval(u[0], u[1]),
            _ => self.embed(&unit_sphere(u[0], u[1])),
        }
    }

    /// Position of the sphere-topology surface at the unit vector `p`.
    pub fn embed(&self, p: &Vec3) -> Vec3 {
        match &self.kind {
            ChartKind::Sphere { radius } => p * *radius,
            ChartKind::Spheroid { a, c } => Vec3::new(a * p.x, a * p.y, c * p.z),
            ChartKind::Revolution(prof) => p * prof.eval(p.z)[0],
            ChartKind::Generic(g) => {
                let [u, v] = spherical_coordinates(p);
                g.eval(u, v)
            }
            ChartKind::Torus { .. } => Vec3::repeat(f64::NAN),
        }
    }

    /// Differential of `p -> X(p)` applied to a tangent vector `t` at `p`.
    pub fn tangent_map(&self, p: &Vec3, t: &Vec3) -> Vec3 {
        match &self.kind {
            ChartKind::Sphere { radius } => t * *radius,
            ChartKind::Spheroid { a, c } => Vec3::new(a * t.x, a * t.y, c * t.z),
            ChartKind::Revolution(prof) => {
                let [r, r1, _] = prof.eval(p.z);
                p * (r1 * t.z) + t * r
            }
            ChartKind::Generic(_) => {
                let h = FD_STEP;
                let f = |s: f64| self.embed(&(p + t * s).normalize());
                (f(-2.0 * h) - f(-h) * 8.0 + f(h) * 8.0 - f(2.0 * h)) / (12.0 * h)
            }
            ChartKind::Torus { .. } => Vec3::repeat(f64::NAN),
        }
    }

    /// Surface area element relative to the unit sphere at `p`.
    pub fn area_factor(&self, p: &Vec3) -> f64 {
        match &self.kind {
            ChartKind::Sphere { radius } => radius * radius,
            ChartKind::Revolution(prof) => {
                let [r, r1, _] = prof.eval(p.z);
                let s2 = (1.0 - p.z * p.z).max(0.0);
                // |dr/dtheta| = |r'(t)| sin(theta)
                r * (r * r + r1 * r1 * s2).sqrt()
            }
            _ => {
                let (t1, t2) = tangent_basis(p);
                self.tangent_map(p, &t1)
                    .cross(&self.tangent_map(p, &t2))
                    .norm()
            }
        }
    }

    /// Position and coordinate derivatives up to order two in the given frame.
    pub fn jet(&self, frame: &Frame, u: [f64; 2]) -> Result<ChartJet> {
        match &self.kind {
            ChartKind::Torus { major, minor } => {
                if !frame.is_standard() {
                    return Err(Error::UnsupportedTopology("torus"));
                }
                Ok(torus_jet(*major, *minor, u))
            }
            ChartKind::Generic(_) => Ok(self.fd_jet(frame, u)),
            _ => Ok(self.analytic_jet(frame, u)),
        }
    }

    fn analytic_jet(&self, frame: &Frame, u: [f64; 2]) -> ChartJet {
        let r = frame.rotation();
        let (st, ct) = u[0].sin_cos();
        let (sp, cp) = u[1].sin_cos();
        let p = r * Vec3::new(st * cp, st * sp, ct);
        let pa = [
            r * Vec3::new(ct * cp, ct * sp, -st),
            r * Vec3::new(-st * sp, st * cp, 0.0),
        ];
        let pab = [
            [-p, r * Vec3::new(-ct * sp, ct * cp, 0.0)],
            [
                r * Vec3::new(-ct * sp, ct * cp, 0.0),
                r * Vec3::new(-st * cp, -st * sp, 0.0),
            ],
        ];
        match &self.kind {
            ChartKind::Sphere { radius } => ChartJet {
                x: p * *radius,
                du: pa.map(|v| v * *radius),
                duu: pab.map(|row| row.map(|v| v * *radius)),
            },
            ChartKind::Spheroid { a, c } => {
                let d = |v: Vec3| Vec3::new(a * v.x, a * v.y, c * v.z);
                ChartJet {
                    x: d(p),
                    du: pa.map(d),
                    duu: pab.map(|row| row.map(d)),
                }
            }
            ChartKind::Revolution(prof) => {
                let [rr, r1, r2] = prof.eval(p.z);
                let du = pa.map(|v| p * (r1 * v.z) + v * rr);
                let mut duu = [[Vec3::zeros(); 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        duu[a][b] = p * (r2 * pa[a].z * pa[b].z)
                            + (p * pab[a][b].z + pa[b] * pa[a].z + pa[a] * pa[b].z) * r1
                            + pab[a][b] * rr;
                    }
                }
                ChartJet {
                    x: p * rr,
                    du,
                    duu,
                }
            }
            _ => unreachable!("analytic jet only for closed-form sphere-topology charts"),
        }
    }

    fn fd_jet(&self, frame: &Frame, u: [f64; 2]) -> ChartJet {
        let h = FD_STEP;
        let f = |a: f64, b: f64| self.embed(&frame.direction([u[0] + a, u[1] + b]));
        let d1 = |g: &dyn Fn(f64) -> Vec3| {
            (g(-2.0 * h) - g(-h) * 8.0 + g(h) * 8.0 - g(2.0 * h)) / (12.0 * h)
        };
        let d2 = |g: &dyn Fn(f64) -> Vec3| {
            (-g(-2.0 * h) + g(-h) * 16.0 - g(0.0) * 30.0 + g(h) * 16.0 - g(2.0 * h))
                / (12.0 * h * h)
        };
        let x = f(0.0, 0.0);
        let xu = d1(&|s| f(s, 0.0));
        let xv = d1(&|s| f(0.0, s));
        let xuu = d2(&|s| f(s, 0.0));
        let xvv = d2(&|s| f(0.0, s));
        let xuv = d1(&|s| d1(&|t| f(s, t)));
        ChartJet {
            x,
            du: [xu, xv],
            duu: [[xuu, xuv], [xuv, xvv]],
        }
    }
}

fn torus_jet(big: f64, small: f64, u: [f64; 2]) -> ChartJet {
    let (st, ct) = u[0].sin_cos();
    let (sp, cp) = u[1].sin_cos();
    let rr = big + small * ct;
    ChartJet {
        x: Vec3::new(rr * cp, rr * sp, small * st),
        du: [
            Vec3::new(-small * st * cp, -small * st * sp, small * ct),
            Vec3::new(-rr * sp, rr * cp, 0.0),
        ],
        duu: [
            [
                Vec3::new(-small * ct * cp, -small * ct * sp, -small * st),
                Vec3::new(small * st * sp, -small * st * cp, 0.0),
            ],
            [
                Vec3::new(small * st * sp, -small * st * cp, 0.0),
                Vec3::new(-rr * cp, -rr * sp, 0.0),
            ],
        ],
    }
}

/// Orthonormal basis of the tangent plane of the unit sphere at `p`.
pub(crate) fn tangent_basis(p: &Vec3) -> (Vec3, Vec3) {
    let helper = if p.x.abs() < 0.6 {
        Vec3::x()
    } else if p.y.abs() < 0.6 {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let t1 = (helper - p * helper.dot(p)).normalize();
    let t2 = p.cross(&t1);
    (t1, t2)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and positive, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_roundtrip() {
        let p = Vec3::new(0.3, -0.5, 0.8).normalize();
        for frame in [Frame::pole_at(&p), Frame::equator_at(&p), Frame::standard()] {
            let q = Vec3::new(-0.2, 0.9, 0.1).normalize();
            let u = frame.coordinates(&q);
            assert!((frame.direction(u) - q).norm() < 1e-14);
        }
        assert!((Frame::pole_at(&p).direction([0.0, 1.0]) - p).norm() < 1e-14);
        assert!((Frame::equator_at(&p).direction([0.5 * PI, 0.0]) - p).norm() < 1e-14);
    }

    #[test]
    fn profile_fit_reproduces_spheroid_meridian() {
        let (a, c) = (1.0, 2.0);
        let pts: Vec<[f64; 2]> = (0..=200)
            .map(|i| {
                let s = PI * i as f64 / 200.0;
                [a * s.sin(), c * s.cos()]
            })
            .collect();
        let prof = RevolutionProfile::from_meridian(&pts).unwrap();
        for i in 0..50 {
            let th = PI * (i as f64 + 0.5) / 50.0;
            let exact = 1.0 / ((th.sin() / a).powi(2) + (th.cos() / c).powi(2)).sqrt();
            assert!((prof.radius(th) - exact).abs() < 1e-7);
        }
    }

    #[test]
    fn profile_derivatives_match_finite_differences() {
        let prof = RevolutionProfile::from_coefficients(vec![1.0, 0.1, -0.2, 0.05]).unwrap();
        let t = 0.37;
        let h = 1e-5;
        let [_, d1, d2] = prof.eval(t);
        let f = |s: f64| prof.eval(s)[0];
        assert!((d1 - (f(t + h) - f(t - h)) / (2.0 * h)).abs() < 1e-8);
        assert!((d2 - (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h)).abs() < 1e-4);
    }

    #[test]
    fn non_monotone_profile_rejected() {
        let pts = [[0.0, 1.0], [1.0, 0.0], [0.5, 0.5], [0.0, -1.0]];
        assert!(matches!(
            RevolutionProfile::from_meridian(&pts),
            Err(Error::InvalidValue { .. })
        ));
    }

    #[test]
    fn generic_matches_analytic_spheroid() {
        let g = SurfaceChart::generic("sin(u)*cos(v)", "sin(u)*sin(v)", "2*cos(u)").unwrap();
        let s = SurfaceChart::spheroid(1.0, 2.0).unwrap();
        let frame = Frame::equator_at(&Vec3::new(0.2, 0.4, 0.9).normalize());
        let a = g.jet(&frame, [1.1, 0.4]).unwrap();
        let b = s.jet(&frame, [1.1, 0.4]).unwrap();
        assert!((a.x - b.x).norm() < 1e-12);
        for i in 0..2 {
            assert!((a.du[i] - b.du[i]).norm() < 1e-9);
            for j in 0..2 {
                assert!((a.duu[i][j] - b.duu[i][j]).norm() < 1e-6);
            }
        }
        assert_eq!(g.orientation(), 1.0);
        let flipped = SurfaceChart::generic("sin(u)*sin(v)", "sin(u)*cos(v)", "cos(u)").unwrap();
        assert_eq!(flipped.orientation(), -1.0);
    }

    #[test]
    fn generic_rejects_bad_expressions() {
        assert!(SurfaceChart::generic("sin(u", "0", "0").is_err());
        assert!(SurfaceChart::generic("foo(u)", "v", "u").is_err());
    }

    #[test]
    fn area_factor_matches_jet() {
        let prof = RevolutionProfile::from_coefficients(vec![1.0, 0.15, 0.1]).unwrap();
        for chart in [SurfaceChart::spheroid(0.7, 1.9).unwrap(), SurfaceChart::revolution(prof)] {
            let u = [0.9, 2.1];
            let jet = chart.jet(&Frame::standard(), u).unwrap();
            let j = jet.du[0].cross(&jet.du[1]).norm() / u[0].sin();
            assert!((chart.area_factor(&unit_sphere(u[0], u[1])) - j).abs() < 1e-12);
        }
    }
}
