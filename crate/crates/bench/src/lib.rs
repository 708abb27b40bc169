//! Fixtures shared by the benchmarks.

use lgs_core::{Boundaries, Dims, SimParams, Simulation};

/// Half-filled closed basin under gravity.
pub fn basin(n: usize) -> Simulation {
    let params = SimParams { tau: 1.0, gravity: [0.0, 0.0, -1e-4], ..Default::default() };
    let mut sim = Simulation::new(Dims::new(n, n, n), Boundaries::walls(), params).unwrap();
    sim.init_basin(n as f64 / 2.0, 0.0).unwrap();
    sim
}
