//! Synaptic convolution `Ψ(t) = ∫₀ᵗ K(t − s) V(s) ds` and its fluctuation.

use serde::{Deserialize, Serialize};

use super::fluctuation::{nested_literal, trapezoid, truncate_path, two_time_integral};
use crate::error::{Error, Result};
use crate::model::HybridModel;
use crate::moments::CovarianceSeries;
use crate::ode::DensePath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Kernel {
    Zero,
    /// `e^{−u/τ} / τ`.
    Exponential {
        tau: f64,
    },
    /// `u e^{−u/τ} / τ²`.
    Alpha {
        tau: f64,
    },
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Zero => Ok(()),
            Kernel::Exponential { tau } | Kernel::Alpha { tau } if tau.is_finite() && tau > 0.0 => Ok(()),
            _ => Err(Error::invalid("kernel time constant must be positive")),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Kernel::Zero => 0.0,
            Kernel::Exponential { tau } => (-u / tau).exp() / tau,
            Kernel::Alpha { tau } => u * (-u / tau).exp() / (tau * tau),
        }
    }
}

/// `Ψ(t)` at each requested time by trapezoidal quadrature on the path grid.
pub fn psp_functional(path: &DensePath, kernel: &Kernel, times: &[f64]) -> Result<Vec<f64>> {
    kernel.validate()?;
    times
        .iter()
        .map(|&t| {
            let w = truncate_path(path, t)?;
            let ys: Vec<f64> = (0..w.len())
                .map(|i| kernel.eval(t - w.times[i]) * w.state(i)[0])
                .collect();
            Ok(trapezoid(&w.times, &ys))
        })
        .collect()
}

/// Limit variance of `√N (Ψ_N(t) − Ψ(t))` at each requested time.
#[derive(Debug, Clone, PartialEq)]
pub struct PspVariance {
    pub times: Vec<f64>,
    /// Two-time covariance propagated by the linearised flow.
    pub exact: Vec<f64>,
    /// Martingale reading: `Cov(Z_v(s), Z_v(s')) = S_v(min(s, s'))`.
    pub literal: Vec<f64>,
}

/// Both variance modes of the convolution; `cov` holds `Γ` along `path`.
pub fn psp_variance(
    model: &dyn HybridModel,
    path: &DensePath,
    cov: &CovarianceSeries,
    kernel: &Kernel,
    times: &[f64],
) -> Result<PspVariance> {
    kernel.validate()?;
    let mut exact = Vec::with_capacity(times.len());
    let mut literal = Vec::with_capacity(times.len());
    for &t in times {
        if let Kernel::Zero = kernel {
            exact.push(0.0);
            literal.push(0.0);
            continue;
        }
        let w = truncate_path(path, t)?;
        let g: Vec<f64> = w.times.iter().map(|&s| kernel.eval(t - s)).collect();
        let s: Vec<f64> = w.times.iter().map(|&s| cov.interpolate(s)[(0, 0)]).collect();
        literal.push(nested_literal(&w.times, &g, &s));
        exact.push(two_time_integral(model, &w, cov, 0, &|s, _| kernel.eval(t - s))?);
    }
    Ok(PspVariance {
        times: times.to_vec(),
        exact,
        literal,
    })
}
