//! Fixtures shared by the kernel benchmarks.

use hch_core::banded::Pentadiagonal;
use hch_core::{
    build_layer_profile, noise_velocity, project_zero_mean, BoundaryMode, Formulation, Grid,
    GridFunction, ScalarPotential, SolverConfig, StandingWave, StepProfile,
};

/// The two-layer datum on `[0, 1]` with jumps at 1/3 and 2/3.
pub fn two_layer_datum(n: usize, eps: f64) -> GridFunction {
    let p = ScalarPotential::quartic();
    let v = StepProfile::new((0.0, 1.0), vec![1.0 / 3.0, 2.0 / 3.0], 1.0 / 6.0, -1.0)
        .expect("valid profile");
    let grid = Grid::new(0.0, 1.0, n).expect("valid grid");
    build_layer_profile(&v, &StandingWave::new(&p).expect("quartic"), eps, grid)
        .expect("resolved profile")
}

/// Zero-mean seeded velocity on the grid of `u`.
pub fn velocity(u: &GridFunction) -> GridFunction {
    project_zero_mean(&noise_velocity(u.grid, 0.05, 1))
}

pub fn config(formulation: Formulation, eps: f64, dt: f64) -> SolverConfig {
    SolverConfig {
        eps,
        tau: if formulation == Formulation::ClassicCh {
            0.0
        } else {
            1.0
        },
        dt,
        t_max: f64::INFINITY,
        formulation,
        boundary: BoundaryMode::Neumann,
        safety: 0.2,
    }
}

/// `c I + D₄`-like symmetric positive definite band of size `n`.
pub fn biharmonic_band(n: usize, shift: f64) -> Pentadiagonal {
    let mut m = Pentadiagonal::zeros(n);
    for i in 0..n {
        *m.row_mut(i) = [1.0, -4.0, 6.0 + shift, -4.0, 1.0];
    }
    m
}
