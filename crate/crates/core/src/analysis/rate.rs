//! Smoothed spiking rate and its fluctuation variance.

use serde::{Deserialize, Serialize};

use super::fluctuation::{nested_literal, trapezoid, truncate_path, two_time_integral};
use crate::error::{Error, Result};
use crate::model::HybridModel;
use crate::moments::CovarianceSeries;
use crate::ode::DensePath;

/// Logistic threshold `φ(V) = e^{c(V − V_th)} / (1 + e^{c(V − V_th)})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdFn {
    /// Steepness in 1/mV.
    pub c: f64,
    pub v_th: f64,
}

impl ThresholdFn {
    pub fn new(c: f64, v_th: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0 && v_th.is_finite()) {
            return Err(Error::invalid("threshold needs finite c >= 0 and V_th"));
        }
        Ok(Self { c, v_th })
    }

    pub fn value(&self, v: f64) -> f64 {
        let z = self.c * (v - self.v_th);
        if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        }
    }

    pub fn derivative(&self, v: f64) -> f64 {
        let p = self.value(v);
        self.c * p * (1.0 - p)
    }
}

/// `r(T) = (1/T) ∫ φ(V(s)) ds` over `[t0, t0 + T]`, `t0` the path start.
pub fn spiking_rate(path: &DensePath, phi: &ThresholdFn, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid("rate window must be positive"));
    }
    let w = truncate_path(path, path.times[0] + t)?;
    let ys: Vec<f64> = (0..w.len()).map(|i| phi.value(w.state(i)[0])).collect();
    Ok(trapezoid(&w.times, &ys) / t)
}

/// Rate, variance `σ_R²` and `ξ = σ_R²/r²` in both quadrature modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateVariance {
    pub rate: f64,
    /// Earlier-time variance in place of the two-time covariance.
    pub sigma2_literal: f64,
    /// Two-time covariance propagated by the linearised flow.
    pub sigma2_exact: f64,
}

impl RateVariance {
    pub fn xi_literal(&self) -> f64 {
        self.sigma2_literal / (self.rate * self.rate)
    }

    pub fn xi_exact(&self) -> f64 {
        self.sigma2_exact / (self.rate * self.rate)
    }
}

/// `σ_R²(T) = (1/T²) Var ∫ φ'(V) Z_v ds` over `[t0, t0 + T]`; `cov` holds
/// `Γ` along `path` started from the window's origin.
pub fn rate_variance(
    model: &dyn HybridModel,
    path: &DensePath,
    cov: &CovarianceSeries,
    phi: &ThresholdFn,
    t: f64,
) -> Result<RateVariance> {
    if cov.times.first() != path.times.first() || cov.dim != path.dim {
        return Err(Error::GridMismatch("covariance series must start with the path".into()));
    }
    let rate = spiking_rate(path, phi, t)?;
    let w = truncate_path(path, path.times[0] + t)?;
    let g: Vec<f64> = (0..w.len()).map(|i| phi.derivative(w.state(i)[0])).collect();
    let s: Vec<f64> = w.times.iter().map(|&s| cov.interpolate(s)[(0, 0)]).collect();
    let literal = nested_literal(&w.times, &g, &s) / (t * t);
    let exact = two_time_integral(model, &w, cov, 0, &|_, x: &[f64]| phi.derivative(x[0]))? / (t * t);
    Ok(RateVariance {
        rate,
        sigma2_literal: literal,
        sigma2_exact: exact,
    })
}
