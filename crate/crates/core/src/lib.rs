//! Simulation and fluctuation analysis for stochastic hybrid systems in the
//! fluid limit: exact jump/ODE simulation of ion-channel neuron models, their
//! deterministic limits, Langevin approximations, and CLT covariance tools.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod langevin;
pub mod model;
pub mod models;
pub mod moments;
pub mod ode;
pub mod pdmp;
pub mod rng;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{
    coordinate_names, diffusion_matrices, drift_full, largest_remainder, total_intensity, DeterministicState,
    HybridModel, HybridState, Intensity, Layout,
};
pub use ode::{integrate, integrate_until_event, uniform_grid, DensePath, EventOutcome, Grid, IntegratorSpec, Method};
pub use pdmp::{deviation_sup, jump_law, simulate, simulate_with, Observer, Outcome, SimulationRun};
pub use trajectory::{JumpEvent, Trajectory, TrajectoryMeta};
