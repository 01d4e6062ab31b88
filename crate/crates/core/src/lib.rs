//! Metastable dynamics of the one-dimensional hyperbolic Cahn-Hilliard
//! equation `τ u_tt + u_t = (−ε² u_xx + W'(u))_xx`.
//!
//! The crate builds N-transition-layer initial data, integrates the
//! equation under Neumann or Dirichlet conditions, and measures energies,
//! mass, lower-bound certificates and slow interface motion. Vector-valued
//! systems with multi-well potentials live in [`vector`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod banded;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod interfaces;
pub mod io;
pub mod potential;
pub mod profiles;
pub mod quadrature;
pub mod solver;
pub mod vector;

pub use diagnostics::{
    default_delta, dissipation_identity_residual, e_eps, excess_decay_fit, log_linear_fit,
    lower_bound_certificate, mass, mass_closed_form, p_eps, state_energy, velocity_primitive,
    DecayFit, EnergyReport, LowerBoundCertificate, Verdict,
};
pub use error::{Error, Result};
pub use grid::{FaceField, Grid, GridFunction};
pub use interfaces::{
    exit_time, hausdorff, interface_of_function, layer_velocity, locate_layers, max_layer_speed,
    InterfaceMonitor, InterfaceSet, KBand, LayerTrack,
};
pub use io::{read_grid_file, Snapshot, SnapshotHeader};
pub use potential::{ScalarPotential, StiffnessConstants, ValidationReport, VectorPotential};
pub use profiles::{
    build_layer_profile, noise_velocity, primitive_bar, primitive_tilde, project_zero_mean,
    reflected_layer_profile, standing_wave, FProfile, LayerParameters, StandingWave, StepProfile,
};
pub use solver::{
    apply_boundary_ghosts, run, select_dt, BoundaryMode, Formulation, Integrator, Observer, Rate,
    RunOptions, RunOutcome, Solver, SolverConfig, State,
};
pub use vector::{
    build_vector_layer_profile, default_vector_delta, geodesic_phi, locate_vector_layers, p0,
    vector_energy, vector_lower_bound_certificate, vector_step, Geodesic, GeodesicOptions,
    PathCurve, PhiCache, VectorField, VectorSolver, VectorState, VectorStepProfile,
};
