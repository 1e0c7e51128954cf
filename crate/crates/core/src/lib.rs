//! Front propagation for kinetic reaction-transport equations.

pub mod dispersion;
pub mod error;
pub mod kinetic;
pub mod propagation;
pub mod quadrature;
pub mod roots;
pub mod velocity;

pub use dispersion::{
    hamiltonian, in_singular_set, minimal_speed, minimum_at_tilde, speed, speed_derivative_left,
    wave_profile, Branch, CaseLabel, DispersionResult, SpeedCurve, WaveProfile,
};
pub use error::{Error, Result};
pub use kinetic::{
    run_front_experiment, BehindFront, FrontExperiment, FrontTrace, KineticState, SimConfig,
};
pub use propagation::{
    freidlin_gartner_speed, hopf_lax_phi, lagrangian, nullset_radius, planar_lagrangian,
    HJSolution, InitialData,
};
pub use quadrature::QuadOptions;
pub use velocity::{
    DensityShape, Direction, ModelSpec, Projection, Support, Symmetry, VelocityModel,
};
