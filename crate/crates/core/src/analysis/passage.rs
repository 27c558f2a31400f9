//! Fluctuations of first-passage times through a level set.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{drift_full, HybridModel};
use crate::moments::CovarianceSeries;
use crate::ode::{integrate_until_event, EventOutcome, IntegratorSpec};

/// Level set `φ = 0`; `φ > 0` is before passage.
pub struct PassageProblem<'a> {
    pub phi: &'a dyn Fn(&[f64]) -> f64,
    pub grad: &'a dyn Fn(&[f64]) -> Vec<f64>,
}

impl PassageProblem<'_> {
    /// `φ(x) = V_th − V` and its constant gradient.
    #[allow(clippy::type_complexity)]
    pub fn voltage_threshold(v_th: f64, dim: usize) -> (impl Fn(&[f64]) -> f64, impl Fn(&[f64]) -> Vec<f64>) {
        (
            move |x: &[f64]| v_th - x[0],
            move |_: &[f64]| {
                let mut g = vec![0.0; dim];
                g[0] = -1.0;
                g
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassageStats {
    pub tau: f64,
    pub x_tau: Vec<f64>,
    /// `∇φ · F` at the crossing (negative for a transversal passage).
    pub grad_dot_f: f64,
    /// Limit variance of `√N (τ_N − τ)`.
    pub var_tau: f64,
    /// Limit covariance of `√N (X_N(τ_N) − X(τ))`.
    pub location_cov: DMatrix<f64>,
}

/// `(var_tau, location_cov)` from `∇φ`, `F` and `Γ` at the crossing.
///
/// `π = −∇φ·Z / (∇φ·F)` and the location fluctuation is `Z + π F = P Z`
/// with `P = I − F ∇φᵀ / (∇φ·F)`.
pub fn passage_moments(grad: &[f64], f: &[f64], gamma: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    let n = grad.len();
    if f.len() != n || gamma.nrows() != n || gamma.ncols() != n {
        return Err(Error::invalid("gradient, field and covariance dimensions differ"));
    }
    let g = DVector::from_column_slice(grad);
    let fv = DVector::from_column_slice(f);
    let gf = g.dot(&fv);
    if !(gf < 0.0) {
        return Err(Error::Transversality { value: gf });
    }
    let var_tau = (g.transpose() * gamma * &g)[(0, 0)] / (gf * gf);
    let p = DMatrix::identity(n, n) - &fv * g.transpose() / gf;
    let loc = &p * gamma * p.transpose();
    Ok((var_tau, 0.5 * (&loc + loc.transpose())))
}

/// First passage of the fluid limit from `x0` and the limit law of its
/// fluctuation; `cov` must hold `Γ` along the same path from `t = 0`.
pub fn first_passage_stats(
    model: &dyn HybridModel,
    problem: &PassageProblem<'_>,
    x0: &[f64],
    t_max: f64,
    spec: &IntegratorSpec,
    cov: &CovarianceSeries,
) -> Result<PassageStats> {
    let phi0 = (problem.phi)(x0);
    if !(phi0 > 0.0) {
        return Err(Error::invalid(format!(
            "passage function must be positive at the start (got {phi0})"
        )));
    }
    let out = integrate_until_event(
        |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy.copy_from_slice(&drift_full(model, y)?);
            Ok(())
        },
        x0,
        0.0,
        t_max,
        |y: &[f64]| (problem.phi)(y),
        spec,
    )?;
    let EventOutcome::Crossed { t: tau, y } = out else {
        return Err(Error::NoPassage { t_max });
    };
    if tau > cov.times.last().copied().unwrap_or(f64::NEG_INFINITY) + spec.dt {
        return Err(Error::GridMismatch(format!("covariance series ends before τ = {tau}")));
    }
    let f = drift_full(model, &y)?;
    let grad = (problem.grad)(&y);
    let grad_dot_f: f64 = grad.iter().zip(&f).map(|(a, b)| a * b).sum();
    let (var_tau, location_cov) = passage_moments(&grad, &f, &cov.interpolate(tau))?;
    Ok(PassageStats {
        tau,
        x_tau: y,
        grad_dot_f,
        var_tau,
        location_cov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_covariance_gives_zero_fluctuation() {
        let (v, l) = passage_moments(&[-1.0, 0.0], &[2.0, 1.0], &DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(v, 0.0);
        assert!(l.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn unit_speed_line_returns_gamma() {
        // V' = 1 crossing V = c: τ fluctuation equals the V fluctuation
        let gamma = DMatrix::from_element(1, 1, 0.37);
        let (v, l) = passage_moments(&[-1.0], &[1.0], &gamma).unwrap();
        assert!((v - 0.37).abs() < 1e-15);
        assert!(l[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn voltage_level_set_reduces_to_sv_over_fv2() {
        let gamma = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.1, 0.3, 1.0, 0.2, -0.1, 0.2, 0.5]);
        let f = [4.0, -1.0, 0.5];
        let (v, l) = passage_moments(&[-1.0, 0.0, 0.0], &f, &gamma).unwrap();
        assert!((v - 2.0 / 16.0).abs() < 1e-15);
        // the location fluctuation is tangent to the level set
        assert!(l.row(0).iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn tangential_flow_is_rejected() {
        let err = passage_moments(&[-1.0, 0.0], &[0.0, 1.0], &DMatrix::identity(2, 2)).unwrap_err();
        assert!(matches!(err, Error::Transversality { value } if value == 0.0));
    }
}
