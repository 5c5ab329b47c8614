//! Surface documents, run configuration and deterministic pipeline orchestration.
//!
//! A run reads a [`RunConfig`], executes one pipeline and writes CSV and JSON artifacts
//! plus a `manifest.json` with content hashes into the output directory. Every file is
//! written through a temporary file and renamed into place.

mod artifacts;
mod cache;
mod config;
mod pipeline;
mod surface;

pub use artifacts::{sha256_hex, write_atomic, ArtifactRecord, Manifest, Versions};
pub use cache::{axisym_blocks_cached, laplace_pair_cached, MatrixCache};
pub use config::{
    parse_list, parse_pair, parse_resolution, Command, RunConfig, DEFAULT_RESOLUTION,
};
pub use pipeline::{error_json, exit_code, run, RunOutcome, MANIFEST_FILE};
pub use surface::{
    emit_surface_spec, parse_surface_spec, surface_from_value, Profile, SurfaceShape, SurfaceSpec,
    SURFACE_KINDS,
};

/// Prefix of the environment variables that supply option defaults.
pub const ENV_PREFIX: &str = "NPSPEC_";
