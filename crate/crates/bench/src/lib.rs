//! Fixtures shared by the benchmarks.

use npspec::geometry::{build_quadrature_mesh, Frame, QuadratureMesh, SurfaceChart, Vec3};
use npspec::symbol_dynamics::{hamiltonian, state_at_direction, CotangentState};

/// Prolate spheroid with semi-axes 1, 1, 2.
pub fn spheroid() -> SurfaceChart {
    SurfaceChart::spheroid(1.0, 2.0).expect("valid spheroid")
}

pub fn spheroid_mesh(n1: usize) -> QuadratureMesh {
    build_quadrature_mesh(&spheroid(), [n1, 2 * n1]).expect("resolution is supported")
}

/// A state on `H = 1` over the point at polar angle 1, heading obliquely north-east.
pub fn oblique_state(chart: &SurfaceChart) -> CotangentState {
    let p = [1.0, 0.3];
    let frame = Frame::standard();
    let x = chart.point(p);
    let up = Vec3::new(0.0, 0.0, 1.0);
    let east = up.cross(&x).normalize();
    let v = east + up * 0.5;
    let state = state_at_direction(chart, &frame.direction(p), &v).expect("tangent direction");
    let h0 = hamiltonian(&state.geometry(chart).expect("geometry"), &state.xi_vector(), false)
        .expect("symbol");
    CotangentState {
        xi: state.xi.map(|x| x * h0.sqrt()),
        ..state
    }
}
