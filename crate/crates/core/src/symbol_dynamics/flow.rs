//! Adaptive Dormand-Prince 5(4) integration of Hamiltonian flows with frame switching,
//! event location and running time averages.

use serde::{Deserialize, Serialize};

use super::{gradient, hamiltonian, CotangentState, FlowField};
use crate::error::{Error, Result};
use crate::geometry::{SurfaceChart, Vec3};

/// Admissible range of `|xi|_g` along a flow.
pub const XI_RANGE: [f64; 2] = [1e-8, 1e8];

/// Values of `H` below this are treated as a violation of the nonvanishing assumption.
const H_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSettings {
    pub field: FlowField,
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for FlowSettings {
    fn default() -> Self {
        FlowSettings {
            field: FlowField::Regularized,
            rtol: 1e-12,
            atol: 1e-14,
            initial_step: 1e-2,
            max_steps: 5_000_000,
        }
    }
}

impl FlowSettings {
    pub fn with_field(field: FlowField) -> Self {
        FlowSettings {
            field,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub accepted: usize,
    pub rejected: usize,
    pub frame_switches: usize,
    pub rhs_evaluations: usize,
}

/// One logged state with the conserved quantities `H` (unregularized) and `f2`.
#[derive(Clone, Copy, Debug)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: CotangentState,
    pub h: f64,
    pub f2: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub field: FlowField,
    pub points: Vec<TrajectoryPoint>,
    pub stats: FlowStats,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectories hold at least the initial state")
    }

    /// Largest `|H(t) - H(0)| / |H(0)|`.
    pub fn h_drift(&self) -> f64 {
        let h0 = self.points[0].h;
        self.points.iter().map(|p| (p.h - h0).abs()).fold(0.0, f64::max) / h0.abs()
    }

    /// Largest `|f2(t) - f2(0)|` relative to `max(|f2(0)|, |x| |xi|)` at the start.
    pub fn f2_drift(&self, chart: &SurfaceChart) -> Result<f64> {
        let (x, v) = self.points[0].state.embed(chart)?;
        let scale = self.points[0].f2.abs().max(x.norm() * v.norm());
        let f0 = self.points[0].f2;
        Ok(self.points.iter().map(|p| (p.f2 - f0).abs()).fold(0.0, f64::max) / scale)
    }

    /// CSV with header `t,u1,u2,xi1,xi2,H,f2` in standard chart coordinates.
    pub fn to_csv(&self, chart: &SurfaceChart) -> Result<String> {
        let mut out = String::from("t,u1,u2,xi1,xi2,H,f2\n");
        for p in &self.points {
            let (u, xi) = p.state.standard_coordinates(chart)?;
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                p.t, u[0], u[1], xi[0], xi[1], p.h, p.f2
            ));
        }
        Ok(out)
    }
}

pub(crate) fn log_point(chart: &SurfaceChart, t: f64, state: &CotangentState) -> Result<TrajectoryPoint> {
    let geom = state.geometry(chart)?;
    let xi = state.xi_vector();
    let h = hamiltonian(&geom, &xi, false)?;
    let f2 = super::angular_moment(&geom.x, &geom.covector_to_ambient(&xi));
    Ok(TrajectoryPoint {
        t,
        state: *state,
        h,
        f2,
    })
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Observable integrated along a flow, a function of the position and the ambient covector.
pub(crate) type Observable<'a> = &'a dyn Fn(&Vec3, &Vec3) -> f64;

/// Integrator state: the cotangent state plus running integrals of observables.
pub(crate) struct Stepper<'a> {
    chart: &'a SurfaceChart,
    settings: FlowSettings,
    observables: Vec<Observable<'a>>,
    pub t: f64,
    pub state: CotangentState,
    pub integrals: Vec<f64>,
    h: f64,
    pub stats: FlowStats,
}

impl<'a> Stepper<'a> {
    pub fn new(
        chart: &'a SurfaceChart,
        state: &CotangentState,
        settings: FlowSettings,
        observables: Vec<Observable<'a>>,
    ) -> Result<Self> {
        let state = state.away_from_pole(chart)?;
        let n = observables.len();
        let s = Stepper {
            chart,
            settings,
            observables,
            t: 0.0,
            state,
            integrals: vec![0.0; n],
            h: settings.initial_step,
            stats: FlowStats::default(),
        };
        s.check(&s.state)?;
        Ok(s)
    }

    fn check(&self, state: &CotangentState) -> Result<()> {
        let geom = state.geometry(self.chart)?;
        let xi = state.xi_vector();
        let norm = super::covector_norm(&geom, &xi);
        if !(XI_RANGE[0]..=XI_RANGE[1]).contains(&norm) {
            return Err(Error::FlowBlowup {
                t: self.t,
                xi_norm: norm,
            });
        }
        if self.settings.field != FlowField::AngularMomentum
            && hamiltonian(&geom, &xi, false)? < H_FLOOR
        {
            return Err(Error::AssumptionAViolated(self.t));
        }
        Ok(())
    }

    fn unpack(&self, y: &[f64]) -> CotangentState {
        CotangentState {
            u: [y[0], y[1]],
            xi: [y[2], y[3]],
            frame: self.state.frame,
        }
    }

    fn rhs(&mut self, y: &[f64]) -> Result<Vec<f64>> {
        self.stats.rhs_evaluations += 1;
        let s = self.unpack(y);
        let g = gradient(self.chart, &s, self.settings.field)?;
        let mut out = vec![g.dxi[0], g.dxi[1], -g.du[0], -g.du[1]];
        if !self.observables.is_empty() {
            let (x, v) = s.embed(self.chart)?;
            out.extend(self.observables.iter().map(|f| f(&x, &v)));
        }
        Ok(out)
    }

    fn packed(&self) -> Vec<f64> {
        let mut y = vec![self.state.u[0], self.state.u[1], self.state.xi[0], self.state.xi[1]];
        y.extend(&self.integrals);
        y
    }

    /// One Dormand-Prince step of size `h` from the current state: `(y_new, error)`.
    fn trial(&mut self, h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let y0 = self.packed();
        let n = y0.len();
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        for stage in 0..7 {
            let mut y = y0.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    for (yi, ki) in y.iter_mut().zip(kj) {
                        *yi += h * a * ki;
                    }
                }
            }
            k.push(self.rhs(&y)?);
        }
        let mut y1 = y0.clone();
        let mut err = vec![0.0; n];
        for (j, kj) in k.iter().enumerate() {
            for i in 0..n {
                if j < 6 {
                    y1[i] += h * A[6][j] * kj[i];
                }
                err[i] += h * E[j] * kj[i];
            }
        }
        Ok((y1, err))
    }

    fn commit(&mut self, y: &[f64], dt: f64) -> Result<()> {
        self.t += dt;
        self.state = self.unpack(y);
        self.integrals.copy_from_slice(&y[4..]);
        self.check(&self.state)?;
        let moved = self.state.away_from_pole(self.chart)?;
        if moved.frame != self.state.frame {
            self.stats.frame_switches += 1;
            self.state = moved;
        }
        Ok(())
    }

    /// Advances by one accepted step of at most `max_dt`; returns the step taken.
    pub fn advance(&mut self, max_dt: f64) -> Result<f64> {
        loop {
            if self.stats.accepted + self.stats.rejected >= self.settings.max_steps {
                return Err(Error::Linalg(format!(
                    "flow integration exceeded {} steps",
                    self.settings.max_steps
                )));
            }
            let h = self.h.min(max_dt);
            let (y1, err) = self.trial(h)?;
            let y0 = self.packed();
            let norm = (err
                .iter()
                .zip(y0.iter().zip(&y1))
                .map(|(e, (a, b))| {
                    let sc = self.settings.atol + self.settings.rtol * a.abs().max(b.abs());
                    (e / sc).powi(2)
                })
                .sum::<f64>()
                / err.len() as f64)
                .sqrt();
            let factor = if norm == 0.0 {
                5.0
            } else {
                (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            if norm <= 1.0 && y1.iter().all(|v| v.is_finite()) {
                self.stats.accepted += 1;
                self.commit(&y1, h)?;
                if h >= self.h || factor < 1.0 {
                    self.h *= factor;
                }
                return Ok(h);
            }
            self.stats.rejected += 1;
            self.h *= factor.min(0.9);
            if self.h < 1e-14 {
                return Err(Error::FlowBlowup {
                    t: self.t,
                    xi_norm: f64::NAN,
                });
            }
        }
    }

    /// State after a single unadapted step of size `dt` from the current state.
    pub fn peek(&mut self, dt: f64) -> Result<(CotangentState, Vec<f64>)> {
        if dt == 0.0 {
            return Ok((self.state, self.integrals.clone()));
        }
        let (y, _) = self.trial(dt)?;
        Ok((self.unpack(&y), y[4..].to_vec()))
    }

    /// Advances to the first zero crossing of `event` within `t_max`, or to `t_max`.
    /// Returns whether an event was found.
    pub fn advance_to_event(
        &mut self,
        t_max: f64,
        event: &dyn Fn(&SurfaceChart, &CotangentState) -> Result<f64>,
    ) -> Result<bool> {
        let mut g0 = event(self.chart, &self.state)?;
        while self.t < t_max {
            let start = self.clone_core();
            let dt = self.advance(t_max - self.t)?;
            let g1 = event(self.chart, &self.state)?;
            if g0 != 0.0 && g1 != 0.0 && g0.signum() != g1.signum() {
                // secant/bisection on the step size from the start of the step
                let h_keep = self.h;
                self.restore(&start);
                let (mut a, mut b) = (0.0, dt);
                let (mut ga, mut gb) = (g0, g1);
                let mut tau = dt * ga / (ga - gb);
                for _ in 0..60 {
                    let (s, _) = self.peek(tau)?;
                    let gt = event(self.chart, &s)?;
                    if gt == 0.0 || (b - a) < 1e-14 * dt.max(1.0) {
                        break;
                    }
                    if gt.signum() == ga.signum() {
                        a = tau;
                        ga = gt;
                    } else {
                        b = tau;
                        gb = gt;
                    }
                    let sec = a - ga * (b - a) / (gb - ga);
                    tau = if sec > a && sec < b { sec } else { 0.5 * (a + b) };
                    if (b - a).abs() < 1e-13 {
                        break;
                    }
                }
                let (s, ints) = self.peek(tau)?;
                self.t += tau;
                self.state = s;
                self.integrals = ints;
                self.h = h_keep;
                let moved = self.state.away_from_pole(self.chart)?;
                if moved.frame != self.state.frame {
                    self.stats.frame_switches += 1;
                    self.state = moved;
                }
                return Ok(true);
            }
            g0 = g1;
        }
        Ok(false)
    }

    fn clone_core(&self) -> (f64, CotangentState, Vec<f64>, f64) {
        (self.t, self.state, self.integrals.clone(), self.h)
    }

    fn restore(&mut self, core: &(f64, CotangentState, Vec<f64>, f64)) {
        self.t = core.0;
        self.state = core.1;
        self.integrals = core.2.clone();
        self.h = core.3;
    }
}

/// Integrates the flow of `settings.field` from `state` over `[0, t_final]`, logging every
/// accepted step.
pub fn integrate_flow(
    chart: &SurfaceChart,
    state: &CotangentState,
    t_final: f64,
    settings: &FlowSettings,
) -> Result<Trajectory> {
    if !(t_final >= 0.0) {
        return Err(Error::invalid("t_final", "must be non-negative"));
    }
    let mut stepper = Stepper::new(chart, state, *settings, Vec::new())?;
    let mut points = vec![log_point(chart, 0.0, state)?];
    while stepper.t < t_final {
        stepper.advance(t_final - stepper.t)?;
        points.push(log_point(chart, stepper.t, &stepper.state)?);
    }
    Ok(Trajectory {
        field: settings.field,
        points,
        stats: stepper.stats,
    })
}

/// Joint flow at multi-time `(t1, t2)`: the regularized Hamiltonian flow for `t1`
/// followed by the angular-momentum flow for `t2`. The two flows commute on surfaces
/// of revolution.
pub fn integrate_joint_flow(
    chart: &SurfaceChart,
    state: &CotangentState,
    times: [f64; 2],
    settings: &FlowSettings,
) -> Result<(Trajectory, Trajectory)> {
    let first = integrate_flow(
        chart,
        state,
        times[0],
        &FlowSettings {
            field: FlowField::Regularized,
            ..*settings
        },
    )?;
    let mid = first.last().state;
    let second = integrate_flow(
        chart,
        &mid,
        times[1],
        &FlowSettings {
            field: FlowField::AngularMomentum,
            ..*settings
        },
    )?;
    Ok((first, second))
}

/// Running time averages at dyadic checkpoints `T / 2^j`.
#[derive(Clone, Debug)]
pub struct BirkhoffTrace {
    pub times: Vec<f64>,
    pub averages: Vec<f64>,
    pub stats: FlowStats,
}

impl BirkhoffTrace {
    pub fn final_average(&self) -> f64 {
        *self.averages.last().expect("at least one checkpoint")
    }
}

/// Time average of `a0(x, xi)` along the regularized Hamiltonian flow up to `t_final`,
/// reported at `n_checkpoints` dyadic times ending at `t_final`.
///
/// With `rotation_time = Some(t2)` the average is also taken over the angular-momentum
/// flow for times in `[0, t2]`. That flow is the rotation by `-t2` about the z-axis, and
/// the inner average is computed with Gauss-Legendre quadrature in the rotation angle.
pub fn birkhoff_average(
    chart: &SurfaceChart,
    a0: &dyn Fn(&Vec3, &Vec3) -> f64,
    state: &CotangentState,
    t_final: f64,
    n_checkpoints: usize,
    rotation_time: Option<f64>,
) -> Result<BirkhoffTrace> {
    if !(t_final > 0.0) || n_checkpoints == 0 {
        return Err(Error::invalid("t_final", "need a positive time and at least one checkpoint"));
    }
    let rotated = rotation_time.map(|t2| {
        let n = (8.0 + 4.0 * t2.abs()).ceil() as usize;
        crate::geometry::quadrature::gauss_legendre_on(n.min(400), 0.0, t2)
    });
    let f = |x: &Vec3, v: &Vec3| -> f64 {
        match &rotated {
            None => a0(x, v),
            Some((s, w)) => {
                let total: f64 = w.iter().sum();
                s.iter()
                    .zip(w)
                    .map(|(si, wi)| {
                        let (sn, cs) = (-si).sin_cos();
                        let rot = |p: &Vec3| Vec3::new(cs * p.x - sn * p.y, sn * p.x + cs * p.y, p.z);
                        wi * a0(&rot(x), &rot(v))
                    })
                    .sum::<f64>()
                    / total
            }
        }
    };
    let mut stepper = Stepper::new(chart, state, FlowSettings::default(), vec![&f])?;
    let times: Vec<f64> = (0..n_checkpoints)
        .rev()
        .map(|j| t_final / 2f64.powi(j as i32))
        .collect();
    let mut averages = Vec::with_capacity(times.len());
    for &tc in &times {
        while stepper.t < tc {
            stepper.advance(tc - stepper.t)?;
        }
        averages.push(stepper.integrals[0] / tc);
    }
    Ok(BirkhoffTrace {
        times,
        averages,
        stats: stepper.stats,
    })
}
