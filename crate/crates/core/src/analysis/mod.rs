//! Experiments built on the simulators and moment equations.

pub mod convergence;
pub mod fluctuation;
pub mod latency;
pub mod passage;
pub mod psp;
pub mod rate;
pub mod stats;

pub use convergence::{
    bound_curve, convergence_probability, deviation_sups, exceedance_table, fluid_path, ConvergenceRow,
    ConvergenceSetup,
};
pub use latency::{Latency, LatencyProblem};
pub use passage::{first_passage_stats, passage_moments, PassageProblem, PassageStats};
pub use psp::{psp_functional, psp_variance, Kernel, PspVariance};
pub use rate::{rate_variance, spiking_rate, RateVariance, ThresholdFn};

use crate::ode::DensePath;

/// `max V − min V` over the part of the path at or after `t_from`.
pub fn voltage_swing(path: &DensePath, t_from: f64) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..path.len() {
        if path.times[i] >= t_from {
            let v = path.state(i)[0];
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    hi - lo
}
