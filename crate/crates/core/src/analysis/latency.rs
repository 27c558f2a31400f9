//! Spike latency after an instantaneous voltage kick.

use crate::error::{Error, Result};
use crate::model::drift_full;
use crate::models::MorrisLecar;
use crate::moments::ml_moment_system;
use crate::ode::{integrate, integrate_until_event, DensePath, EventOutcome, Grid, IntegratorSpec};

/// Crossing speeds below this are treated as tangential.
pub const TANGENTIAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Latency {
    pub amplitude: f64,
    /// `T(A)`: first upcrossing of `V_th`.
    pub t_cross: f64,
    /// `S_v(T) / F_v(X(T))²`.
    pub p: f64,
    pub s_v: f64,
    pub f_v: f64,
    pub x0: Vec<f64>,
    pub path: DensePath,
}

/// Latency problem around a resting state.
#[derive(Debug, Clone)]
pub struct LatencyProblem<'a> {
    pub model: &'a MorrisLecar,
    pub rest: Vec<f64>,
    pub v_th: f64,
    pub t_max: f64,
    pub spec: IntegratorSpec,
}

impl LatencyProblem<'_> {
    pub fn kicked(&self, amplitude: f64) -> Vec<f64> {
        let mut x = self.rest.clone();
        x[0] += amplitude;
        x
    }

    fn crossing(&self, x0: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
        let model = self.model;
        let out = integrate_until_event(
            |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy.copy_from_slice(&drift_full(model, y)?);
                Ok(())
            },
            x0,
            0.0,
            self.t_max,
            |y: &[f64]| self.v_th - y[0],
            &self.spec,
        )?;
        Ok(match out {
            EventOutcome::Crossed { t, y } => Some((t, y)),
            EventOutcome::NoEvent { .. } => None,
        })
    }

    /// True when the kick of size `amplitude` produces a crossing before `t_max`.
    pub fn spikes(&self, amplitude: f64) -> Result<bool> {
        Ok(self.crossing(&self.kicked(amplitude))?.is_some())
    }

    /// `T(A)` and `P(A)` with the moment system integrated from `Γ(0) = 0`.
    pub fn latency(&self, amplitude: f64) -> Result<Latency> {
        let x0 = self.kicked(amplitude);
        if !(x0[0] < self.v_th) {
            return Err(Error::invalid(format!(
                "kick A = {amplitude} starts at or above the threshold"
            )));
        }
        let Some((t_cross, y)) = self.crossing(&x0)? else {
            return Err(Error::SubthresholdAmplitude {
                amplitude,
                t_max: self.t_max,
            });
        };
        let f_v = drift_full(self.model, &y)?[0];
        if !(f_v > TANGENTIAL_TOL) {
            return Err(Error::TangentialCrossing { speed: f_v });
        }
        let model = self.model;
        let path = integrate(
            |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy.copy_from_slice(&drift_full(model, y)?);
                Ok(())
            },
            &x0,
            0.0,
            t_cross,
            &self.spec,
            &Grid::Steps,
        )?;
        let moments = ml_moment_system(self.model, &path, [0.0; 6])?;
        let s_v = moments.last().expect("non-empty path")[2];
        Ok(Latency {
            amplitude,
            t_cross,
            p: s_v / (f_v * f_v),
            s_v,
            f_v,
            x0,
            path,
        })
    }

    /// Smallest kick that spikes, by bisection on `[lo, hi]` to `tol`.
    pub fn amplitude_threshold(&self, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
        if self.spikes(lo)? || !self.spikes(hi)? {
            return Err(Error::invalid(format!(
                "[{lo}, {hi}] does not bracket the spike threshold"
            )));
        }
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.spikes(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}
