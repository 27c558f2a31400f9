//! Time integrals of the voltage fluctuation `Z_v` along a path.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::HybridModel;
use crate::models::jacobian;
use crate::moments::{rk4_along, CovarianceSeries, PathSystem};
use crate::ode::DensePath;

/// The path restricted to `[t0, t_end]`, ending exactly at `t_end`.
pub fn truncate_path(path: &DensePath, t_end: f64) -> Result<DensePath> {
    if path.is_empty() || !(t_end >= path.times[0]) || t_end > path.t_end() * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::GridMismatch(format!(
            "path does not cover [{}, {t_end}]",
            path.times.first().copied().unwrap_or(f64::NAN)
        )));
    }
    let mut out = DensePath::new(path.dim);
    for i in 0..path.len() {
        let t = path.times[i];
        if t < t_end - 1e-12 * t_end.abs().max(1.0) {
            out.push(t, path.state(i));
        } else {
            break;
        }
    }
    out.push(t_end, &path.interpolate(t_end.min(path.t_end())));
    Ok(out)
}

/// Trapezoid rule on a sampled function.
pub fn trapezoid(times: &[f64], ys: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(ys.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

/// `2 ∫ g(s) ∫₀ˢ g(s') S(s') ds' ds` by nested trapezoids: the two-time
/// covariance is replaced by the variance at the earlier time.
pub fn nested_literal(times: &[f64], g: &[f64], s: &[f64]) -> f64 {
    let mut inner = 0.0;
    let mut outer = 0.0;
    for i in 1..times.len() {
        let h = times[i] - times[i - 1];
        let prev = g[i - 1] * inner;
        inner += 0.5 * h * (g[i - 1] * s[i - 1] + g[i] * s[i]);
        outer += 0.5 * h * (prev + g[i] * inner);
    }
    2.0 * outer
}

struct TwoTime<'a> {
    model: &'a dyn HybridModel,
    cov: &'a CovarianceSeries,
    weight: &'a dyn Fn(f64, &[f64]) -> f64,
    v: usize,
    dim: usize,
}

impl PathSystem for TwoTime<'_> {
    type Coef = (DMatrix<f64>, Vec<f64>, f64);

    fn prepare(&mut self, t: f64, x: &[f64]) -> Result<Self::Coef> {
        let j = jacobian(self.model, x)?;
        let gamma = self.cov.interpolate(t);
        let col = gamma.column(self.v).iter().copied().collect();
        Ok((j, col, (self.weight)(t, x)))
    }

    fn apply(&self, (j, col, g): &Self::Coef, y: &[f64], dy: &mut [f64]) {
        let n = self.dim;
        for a in 0..n {
            let mut acc = g * col[a];
            for b in 0..n {
                acc += j[(a, b)] * y[b];
            }
            dy[a] = acc;
        }
        dy[n] = g * y[self.v];
    }
}

/// `2 ∫ g(s) ∫₀ˢ g(s') Cov(Z_v(s), Z_v(s')) ds' ds` over the whole path.
///
/// For `s' ≤ s` the covariance is `[Φ(s, s') Γ(s')]_vv` with `Φ` the
/// propagator of the linearised flow, so `w(s) = ∫₀ˢ g Φ Γ e_v ds'` solves
/// `w' = J w + g Γ e_v`.
pub fn two_time_integral(
    model: &dyn HybridModel,
    path: &DensePath,
    cov: &CovarianceSeries,
    v: usize,
    weight: &dyn Fn(f64, &[f64]) -> f64,
) -> Result<f64> {
    let dim = path.dim;
    if cov.dim != dim || v >= dim {
        return Err(Error::GridMismatch("covariance and path dimensions differ".into()));
    }
    let mut sys = TwoTime {
        model,
        cov,
        weight,
        v,
        dim,
    };
    let out = rk4_along(&mut sys, path, &vec![0.0; dim + 1])?;
    Ok(2.0 * out[out.len() - 1])
}
