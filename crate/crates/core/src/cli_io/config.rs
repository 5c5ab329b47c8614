//! Run configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde_json::{json, Value};

use super::surface::SurfaceSpec;
use crate::error::{Error, Result};
use crate::spectral::rho;

/// Pipelines a run can execute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Geometry,
    Spectrum,
    Flow,
    Leaf,
    Weyl,
    Concentration,
    Variance,
    Helmholtz,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Geometry,
        Command::Spectrum,
        Command::Flow,
        Command::Leaf,
        Command::Weyl,
        Command::Concentration,
        Command::Variance,
        Command::Helmholtz,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Geometry => "geometry",
            Command::Spectrum => "spectrum",
            Command::Flow => "flow",
            Command::Leaf => "leaf",
            Command::Weyl => "weyl",
            Command::Concentration => "concentration",
            Command::Variance => "variance",
            Command::Helmholtz => "helmholtz",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid("command", format!("unknown command `{s}`")))
    }
}

/// Mesh resolution used when neither the run nor the surface specifies one.
pub const DEFAULT_RESOLUTION: [usize; 2] = [16, 32];

/// Everything a run depends on. Output and cache locations do not affect results and
/// are excluded from the configuration hash.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub surface: SurfaceSpec,
    /// Overrides the surface's default resolution.
    pub resolution: Option<[usize; 2]>,
    /// Semiclassical parameters, largest first.
    pub h_schedule: Vec<f64>,
    /// Window `[r, s]` in `rho(lambda^2 / h^2)`.
    pub window: [f64; 2],
    /// Optional window on `m h`.
    pub m_window: Option<[f64; 2]>,
    pub alpha: f64,
    /// Chart coordinates of the concentration point and of the flow start.
    pub p: [f64; 2],
    /// Chart coordinates of the reference point.
    pub q: [f64; 2],
    /// Frequencies of the quasi-static sweep, decreasing.
    pub omegas: Vec<f64>,
    /// Static NP eigenvalue tracked by the quasi-static sweep.
    pub lambda: Option<f64>,
    /// Leaf levels; empty means a default grid across `[-e2_max, e2_max]`.
    pub e2: Vec<f64>,
    pub t_final: f64,
    /// Number of sampled flow start directions.
    pub n_states: usize,
    /// Highest azimuthal order of the mode blocks; defaults to the resolved degree.
    pub m_max: Option<usize>,
    /// Assemble the full operators even on surfaces of revolution.
    pub full_assembly: bool,
    /// Observable of the variance diagnostic, an expression in `x`, `y`, `z`.
    pub observable: String,
    /// Bump radius for concentration; `None` uses the default schedule in `h`.
    pub delta: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
}

impl RunConfig {
    /// Configuration with defaults for everything but the command and surface.
    pub fn new(command: Command, surface: SurfaceSpec) -> Self {
        RunConfig {
            command,
            surface,
            resolution: None,
            h_schedule: vec![0.25, 0.125, 0.0625, 0.03125],
            window: [rho(0.25), rho(1.0)],
            m_window: None,
            alpha: -0.5,
            p: [0.0, 0.0],
            q: [std::f64::consts::FRAC_PI_2, 0.0],
            omegas: vec![0.2, 0.1, 0.05, 0.025],
            lambda: None,
            e2: Vec::new(),
            t_final: 100.0,
            n_states: 4,
            m_max: None,
            full_assembly: false,
            observable: "z".into(),
            delta: None,
            seed: 0,
            out: PathBuf::from("out"),
            cache: None,
        }
    }

    /// Effective mesh resolution.
    pub fn resolution(&self) -> [usize; 2] {
        self.resolution
            .or(self.surface.resolution)
            .unwrap_or(DEFAULT_RESOLUTION)
    }

    /// Checks the schedules and scalar ranges.
    pub fn validate(&self) -> Result<()> {
        if self.h_schedule.is_empty() {
            return Err(Error::invalid("h_schedule", "must not be empty"));
        }
        if let Some(h) = self.h_schedule.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::invalid("h_schedule", format!("entries must be positive, got {h}")));
        }
        let [r, s] = self.window;
        if !(0.0 <= r && r <= s && s <= 1.0) {
            return Err(Error::invalid("window", "need 0 <= r <= s <= 1"));
        }
        if let Some([lo, hi]) = self.m_window {
            if !(lo <= hi) {
                return Err(Error::invalid("m_window", "lower end exceeds upper end"));
            }
        }
        if !(-2.0..=2.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha", "must lie in [-2, 2]"));
        }
        if self.omegas.is_empty() {
            return Err(Error::invalid("omegas", "must not be empty"));
        }
        if self.omegas.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("omegas", "entries must be non-negative"));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::invalid("t_final", "must be non-negative"));
        }
        if self.n_states == 0 {
            return Err(Error::invalid("n_states", "must be positive"));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(Error::invalid("delta", "must be positive"));
            }
        }
        if self.observable.trim().is_empty() {
            return Err(Error::invalid("observable", "must not be empty"));
        }
        Ok(())
    }

    /// Result-determining fields as JSON, with sorted keys.
    pub fn to_json(&self) -> Value {
        json!({
            "command": self.command.name(),
            "surface": self.surface.to_json(),
            "resolution": self.resolution(),
            "h_schedule": self.h_schedule,
            "window": self.window,
            "m_window": self.m_window,
            "alpha": self.alpha,
            "p": self.p,
            "q": self.q,
            "omegas": self.omegas,
            "lambda": self.lambda,
            "e2": self.e2,
            "t_final": self.t_final,
            "n_states": self.n_states,
            "m_max": self.m_max,
            "full_assembly": self.full_assembly,
            "observable": self.observable,
            "delta": self.delta,
            "seed": self.seed,
        })
    }
}

/// Parses `a,b,c` into numbers; `path` names the option in errors.
pub fn parse_list(text: &str, path: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            parse_number(t).ok_or_else(|| Error::invalid(path, format!("`{t}` is not a number")))
        })
        .collect()
}

/// Numbers may be written as fractions such as `1/8`.
fn parse_number(t: &str) -> Option<f64> {
    match t.split_once('/') {
        Some((a, b)) => Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?),
        None => t.parse().ok(),
    }
}

/// Parses a list of exactly two numbers.
pub fn parse_pair(text: &str, path: &str) -> Result<[f64; 2]> {
    match parse_list(text, path)?.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(Error::invalid(path, "expected two comma-separated numbers")),
    }
}

/// Parses `NxM`.
pub fn parse_resolution(text: &str) -> Result<[usize; 2]> {
    let bad = || Error::invalid("resolution", format!("`{text}` is not of the form NxM"));
    let (a, b) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b == 0 {
        return Err(bad());
    }
    Ok([a, b])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_parsing() {
        assert_eq!(parse_list("1/8, 0.5,2", "h").unwrap(), vec![0.125, 0.5, 2.0]);
        assert!(parse_list("1,a", "h").is_err());
        assert_eq!(parse_resolution("32x64").unwrap(), [32, 64]);
        assert!(parse_resolution("32*64").is_err());
        assert_eq!("weyl".parse::<Command>().unwrap(), Command::Weyl);
    }
}
