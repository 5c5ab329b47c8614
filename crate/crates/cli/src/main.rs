use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use npspec::cli_io::{
    emit_surface_spec, error_json, exit_code, parse_list, parse_pair, parse_resolution,
    parse_surface_spec, run, write_atomic, Command, RunConfig,
};
use npspec::Error;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Action {
    Geometry,
    Spectrum,
    Flow,
    Leaf,
    Weyl,
    Concentration,
    Variance,
    Helmholtz,
    /// Validate the surface document and print it in canonical form.
    Check,
}

/// Neumann-Poincare spectra, symbol flows and concentration diagnostics.
///
/// Every option can also be given through an environment variable named
/// NPSPEC_<OPTION>, for example NPSPEC_RESOLUTION=32x64. Command-line flags take
/// precedence over the environment.
#[derive(Debug, Parser)]
#[command(name = "npspec", version)]
struct Cli {
    #[arg(value_enum)]
    action: Action,

    /// Surface document: a file path, or inline JSON starting with `{`.
    #[arg(long, env = "NPSPEC_SURFACE")]
    surface: String,

    /// Mesh resolution NxM; overrides the surface default.
    #[arg(long, env = "NPSPEC_RESOLUTION")]
    resolution: Option<String>,

    /// Semiclassical parameters, e.g. 1/8,1/16,1/32.
    #[arg(long, env = "NPSPEC_H_SCHEDULE", allow_hyphen_values = true)]
    h_schedule: Option<String>,

    /// Spectral window r,s in rho(lambda^2 / h^2).
    #[arg(long, env = "NPSPEC_WINDOW", allow_hyphen_values = true)]
    window: Option<String>,

    /// Window lo,hi on m h.
    #[arg(long, env = "NPSPEC_M_WINDOW", allow_hyphen_values = true)]
    m_window: Option<String>,

    /// Modulation exponent.
    #[arg(long, env = "NPSPEC_ALPHA", allow_hyphen_values = true)]
    alpha: Option<f64>,

    /// Chart coordinates u1,u2 of the concentration point and flow start.
    #[arg(long, env = "NPSPEC_P", allow_hyphen_values = true)]
    p: Option<String>,

    /// Chart coordinates u1,u2 of the reference point.
    #[arg(long, env = "NPSPEC_Q", allow_hyphen_values = true)]
    q: Option<String>,

    /// Decreasing frequencies of the quasi-static sweep.
    #[arg(long, env = "NPSPEC_OMEGAS")]
    omegas: Option<String>,

    /// Static NP eigenvalue tracked by the quasi-static sweep, e.g. 1/6.
    #[arg(long, env = "NPSPEC_LAMBDA", allow_hyphen_values = true)]
    lambda: Option<String>,

    /// Leaf levels e2.
    #[arg(long, env = "NPSPEC_E2", allow_hyphen_values = true)]
    e2: Option<String>,

    /// Flow integration time.
    #[arg(long, env = "NPSPEC_T_FINAL")]
    t_final: Option<f64>,

    /// Number of sampled flow start directions.
    #[arg(long, env = "NPSPEC_N_STATES")]
    n_states: Option<usize>,

    /// Highest azimuthal order of the mode blocks.
    #[arg(long, env = "NPSPEC_M_MAX")]
    m_max: Option<usize>,

    /// Assemble the full operators even on surfaces of revolution.
    #[arg(long, env = "NPSPEC_FULL_ASSEMBLY")]
    full_assembly: bool,

    /// Variance observable, an expression in x, y, z.
    #[arg(long, env = "NPSPEC_OBSERVABLE")]
    observable: Option<String>,

    /// Concentration bump radius.
    #[arg(long, env = "NPSPEC_DELTA")]
    delta: Option<f64>,

    /// Output directory.
    #[arg(long, env = "NPSPEC_OUT", default_value = "out")]
    out: PathBuf,

    /// Seed of the random generator.
    #[arg(long, env = "NPSPEC_SEED", default_value_t = 0)]
    seed: u64,

    /// Directory for cached operator matrices.
    #[arg(long, env = "NPSPEC_CACHE")]
    cache: Option<PathBuf>,
}

fn command_of(action: Action) -> Option<Command> {
    Some(match action {
        Action::Geometry => Command::Geometry,
        Action::Spectrum => Command::Spectrum,
        Action::Flow => Command::Flow,
        Action::Leaf => Command::Leaf,
        Action::Weyl => Command::Weyl,
        Action::Concentration => Command::Concentration,
        Action::Variance => Command::Variance,
        Action::Helmholtz => Command::Helmholtz,
        Action::Check => return None,
    })
}

fn read_surface(arg: &str) -> Result<String, Error> {
    if arg.trim_start().starts_with('{') {
        return Ok(arg.to_string());
    }
    fs::read_to_string(arg).map_err(|e| Error::Io(format!("{arg}: {e}")))
}

fn build_config(cli: &Cli, command: Command) -> Result<RunConfig, Error> {
    let surface = parse_surface_spec(&read_surface(&cli.surface)?)?;
    let mut c = RunConfig::new(command, surface);
    if let Some(r) = &cli.resolution {
        c.resolution = Some(parse_resolution(r)?);
    }
    if let Some(h) = &cli.h_schedule {
        c.h_schedule = parse_list(h, "h_schedule")?;
    }
    if let Some(w) = &cli.window {
        c.window = parse_pair(w, "window")?;
    }
    if let Some(w) = &cli.m_window {
        c.m_window = Some(parse_pair(w, "m_window")?);
    }
    if let Some(a) = cli.alpha {
        c.alpha = a;
    }
    if let Some(p) = &cli.p {
        c.p = parse_pair(p, "p")?;
    }
    if let Some(q) = &cli.q {
        c.q = parse_pair(q, "q")?;
    }
    if let Some(w) = &cli.omegas {
        c.omegas = parse_list(w, "omegas")?;
    }
    if let Some(l) = &cli.lambda {
        match parse_list(l, "lambda")?.as_slice() {
            [v] => c.lambda = Some(*v),
            _ => {
                return Err(Error::InvalidValue {
                    path: "lambda".into(),
                    reason: "expected a single number".into(),
                })
            }
        }
    }
    if let Some(e) = &cli.e2 {
        c.e2 = parse_list(e, "e2")?;
    }
    if let Some(t) = cli.t_final {
        c.t_final = t;
    }
    if let Some(n) = cli.n_states {
        c.n_states = n;
    }
    c.m_max = cli.m_max;
    c.full_assembly = cli.full_assembly;
    if let Some(o) = &cli.observable {
        c.observable = o.clone();
    }
    c.delta = cli.delta;
    c.seed = cli.seed;
    c.out = cli.out.clone();
    c.cache = cli.cache.clone();
    Ok(c)
}

fn fail(err: &Error, out: Option<&PathBuf>) -> ExitCode {
    let doc = error_json(err);
    eprintln!("{doc}");
    if let Some(dir) = out {
        // best effort; the error is already on stderr
        let _ = write_atomic(&dir.join("error.json"), format!("{doc:#}\n").as_bytes());
    }
    ExitCode::from(exit_code(err) as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let err = Error::InvalidValue {
                path: "arguments".into(),
                reason: e.kind().to_string(),
            };
            return fail(&err, None);
        }
    };
    let Some(command) = command_of(cli.action) else {
        return match read_surface(&cli.surface).and_then(|t| parse_surface_spec(&t)) {
            Ok(spec) => {
                println!("{}", emit_surface_spec(&spec));
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e, None),
        };
    };
    let config = match build_config(&cli, command) {
        Ok(c) => c,
        Err(e) => return fail(&e, None),
    };
    match run(&config) {
        Ok(outcome) => {
            for a in &outcome.manifest.artifacts {
                println!("{}", outcome.dir.join(&a.file).display());
            }
            println!("{}", outcome.dir.join(npspec::cli_io::MANIFEST_FILE).display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, Some(&config.out)),
    }
}
