//! Shared fixtures for the pipeline benchmarks.

use cnls_core::*;
use std::f64::consts::PI;

pub fn interval_fixture(m: usize) -> (Mesh, GroundState) {
    let mesh = build_mesh(DomainSpec::Interval { length: 2.0 * PI }, m).expect("mesh");
    let gs = solve_omega(&mesh, 1e-10).expect("ground state");
    (mesh, gs)
}

pub fn focusing_config() -> CouplingConfig {
    CouplingConfig::new(vec![1.0, 2.0, 3.0]).expect("config")
}
