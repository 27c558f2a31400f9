//! Concrete models: Hodgkin–Huxley (two interpretations), Morris–Lecar and
//! the one-gate example, plus helpers shared by all of them.

mod binomial;
mod example;
mod hh;
mod ml;

pub use binomial::{binomial_manifold_residual, binomial_point, chain_rates, manifold_residual_from, GateChain};
pub use example::{ExampleParams, TwoStateExample};
pub use hh::{hh_rate_derivatives, hh_rates, ChannelDensities, HhGating, HhMultistate, HhParams, HhRates};
pub use ml::{MlParams, MorrisLecar};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{drift_full, HybridModel};

/// Stationary distribution of population `j`'s generator with the global
/// variable frozen at the value in `x`.
pub fn stationary_distribution(model: &dyn HybridModel, population: usize, x: &[f64]) -> Result<Vec<f64>> {
    let r = model.layout().population_sizes()[population];
    let mut rates = vec![0.0; r * r];
    model.rates(population, x, &mut rates);
    crate::model::check_rates(population, r, &rates)?;
    if r == 1 {
        return Ok(vec![1.0]);
    }
    // πQ = 0 with the last balance equation replaced by Σπ = 1
    let mut a = DMatrix::zeros(r, r);
    for k in 0..r {
        for l in 0..r {
            if k != l {
                a[(l, k)] += rates[k * r + l];
                a[(k, k)] -= rates[k * r + l];
            }
        }
    }
    for k in 0..r {
        a[(r - 1, k)] = 1.0;
    }
    let mut rhs = DVector::zeros(r);
    rhs[r - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::invalid(format!("generator of population {population} is reducible")))?;
    Ok(pi.iter().map(|p| p.max(0.0)).collect())
}

/// Full state with channels at their stationary distributions for a given
/// global value (models with `p = 1`).
pub fn quasi_steady_state(model: &dyn HybridModel, v: f64) -> Result<Vec<f64>> {
    let layout = model.layout();
    if layout.global() != 1 {
        return Err(Error::invalid("quasi-steady states need a scalar global variable"));
    }
    let mut x = vec![0.0; layout.dim()];
    x[0] = v;
    for j in 0..layout.n_populations() {
        let pi = stationary_distribution(model, j, &x)?;
        x[layout.range(j)].copy_from_slice(&pi);
    }
    Ok(x)
}

fn reduced_drift(model: &dyn HybridModel, v: f64) -> Result<f64> {
    let x = quasi_steady_state(model, v)?;
    let mut f = [0.0];
    model.drift(&x, &mut f);
    Ok(f[0])
}

/// Every equilibrium of `(D)` with `V ∈ [v_lo, v_hi]`, found as roots of
/// the voltage drift along the quasi-steady manifold. Roots are bracketed
/// on a scan of `n_scan` cells and refined to `1e-10` mV.
pub fn equilibria(model: &dyn HybridModel, v_lo: f64, v_hi: f64, n_scan: usize) -> Result<Vec<Vec<f64>>> {
    if !(v_hi > v_lo) || n_scan == 0 {
        return Err(Error::invalid(
            "equilibrium search needs v_lo < v_hi and a positive scan",
        ));
    }
    let step = (v_hi - v_lo) / n_scan as f64;
    let mut out = Vec::new();
    let mut a = v_lo;
    let mut fa = reduced_drift(model, a)?;
    for i in 1..=n_scan {
        let b = v_lo + i as f64 * step;
        let fb = reduced_drift(model, b)?;
        if fa == 0.0 {
            out.push(quasi_steady_state(model, a)?);
        } else if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                let fm = reduced_drift(model, mid)?;
                if fm * flo > 0.0 {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            out.push(quasi_steady_state(model, 0.5 * (lo + hi))?);
        }
        a = b;
        fa = fb;
    }
    Ok(out)
}

/// The unique equilibrium in `[v_lo, v_hi]`; an error if there is none or
/// more than one.
pub fn steady_state(model: &dyn HybridModel, v_lo: f64, v_hi: f64) -> Result<Vec<f64>> {
    let mut eq = equilibria(model, v_lo, v_hi, 2000)?;
    match eq.len() {
        1 => Ok(eq.pop().unwrap_or_default()),
        n => Err(Error::invalid(format!(
            "expected one equilibrium in [{v_lo}, {v_hi}], found {n}"
        ))),
    }
}

/// Central-difference Jacobian of the full vector field of `(D)`, with step
/// `h · max(1, |x_l|)` in coordinate `l`.
pub fn jacobian_fd(model: &dyn HybridModel, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for l in 0..n {
        let step = h * x[l].abs().max(1.0);
        xp[l] = x[l] + step;
        let fp = drift_full(model, &xp)?;
        xp[l] = x[l] - step;
        let fm = drift_full(model, &xp)?;
        xp[l] = x[l];
        for m in 0..n {
            let d = (fp[m] - fm[m]) / (2.0 * step);
            if !d.is_finite() {
                return Err(Error::NonFinite {
                    what: "finite-difference Jacobian",
                    time: f64::NAN,
                });
            }
            jac[(m, l)] = d;
        }
    }
    Ok(jac)
}

/// Analytic Jacobian when the model supplies one, central differences
/// otherwise.
pub fn jacobian(model: &dyn HybridModel, x: &[f64]) -> Result<DMatrix<f64>> {
    match model.jacobian(x) {
        Some(j) => Ok(j),
        None => jacobian_fd(model, x, 1e-6),
    }
}

/// Jacobian in the coordinates `(V, e^(j)_1.., …)` that drop the first state
/// of every population (`e_0 = 1 − Σ_{k≥1} e_k`), removing the zero
/// eigenvalues of the conservation laws.
pub fn reduced_jacobian(model: &dyn HybridModel, x: &[f64]) -> Result<DMatrix<f64>> {
    let layout = model.layout();
    let full = jacobian(model, x)?;
    let mut keep: Vec<(usize, Option<usize>)> = (0..layout.global()).map(|i| (i, None)).collect();
    for j in 0..layout.n_populations() {
        let first = layout.offset(j);
        keep.extend(layout.range(j).skip(1).map(|k| (k, Some(first))));
    }
    let n = keep.len();
    let mut out = DMatrix::zeros(n, n);
    for (a, &(ia, _)) in keep.iter().enumerate() {
        for (b, &(ib, dropped)) in keep.iter().enumerate() {
            out[(a, b)] = full[(ia, ib)] - dropped.map_or(0.0, |d| full[(ia, d)]);
        }
    }
    Ok(out)
}

/// Linear stability of an equilibrium: every eigenvalue of the reduced
/// Jacobian has negative real part.
pub fn is_stable(model: &dyn HybridModel, x: &[f64]) -> Result<bool> {
    let j = reduced_jacobian(model, x)?;
    Ok(j.complex_eigenvalues().iter().all(|e| e.re < 0.0))
}

/// Writes the channel rows of the Jacobian for a population of independent
/// gates whose rates depend on the global variable only: `∂b_k/∂e_i` from the
/// rate table, `∂b_k/∂V_0` from the rate derivatives `d_rates`.
pub(crate) fn fill_channel_block(
    jac: &mut DMatrix<f64>,
    offset: usize,
    r: usize,
    x: &[f64],
    rates: &[f64],
    d_rates: &[f64],
) {
    for i in 0..r {
        for k in 0..r {
            if i == k {
                continue;
            }
            // flux i -> k
            jac[(offset + k, offset + i)] += rates[i * r + k];
            jac[(offset + i, offset + i)] -= rates[i * r + k];
            let dflux = d_rates[i * r + k] * x[offset + i];
            jac[(offset + k, 0)] += dflux;
            jac[(offset + i, 0)] -= dflux;
        }
    }
}

/// Parameters of any built-in model, as accepted by [`build_model`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrides {
    /// Input current, applied on top of the parameter set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hh: Option<HhParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ml: Option<MlParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<ExampleParams>,
    /// Potassium term of the gating model driven by `V_Na`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub k_uses_na_reversal: bool,
}

pub const MODEL_NAMES: [&str; 5] = [
    "hh-gating",
    "hh-multistate",
    "ml-class1",
    "ml-class2",
    "two-state-example",
];

/// Builds a model by name.
pub fn build_model(name: &str, overrides: &ModelOverrides) -> Result<Box<dyn HybridModel>> {
    let hh = || {
        let mut p = overrides.hh.clone().unwrap_or_default();
        if let Some(i) = overrides.current {
            p.current = i;
        }
        p.validate().map(|()| p)
    };
    let ml = |class2: bool| {
        let mut p = overrides
            .ml
            .clone()
            .unwrap_or_else(|| if class2 { MlParams::class2() } else { MlParams::class1() });
        if let Some(i) = overrides.current {
            p.current = i;
        }
        p.validate().map(|()| p)
    };
    Ok(match name {
        "hh-gating" => {
            let mut m = HhGating::new(hh()?);
            m.k_uses_na_reversal = overrides.k_uses_na_reversal;
            Box::new(m)
        }
        "hh-multistate" => Box::new(HhMultistate::new(hh()?)),
        "ml-class1" => Box::new(MorrisLecar::new(ml(false)?)),
        "ml-class2" => Box::new(MorrisLecar::new(ml(true)?)),
        "two-state-example" => {
            let p = overrides.example.clone().unwrap_or_default();
            p.validate()?;
            Box::new(TwoStateExample::new(p))
        }
        other => {
            return Err(Error::config(
                "model",
                format!("unknown model `{other}`; expected one of {}", MODEL_NAMES.join(", ")),
            ))
        }
    })
}

/// Channel counts `N_j` for a named model: HH models take a membrane area
/// and scale each population by its channel density; the others use one `N`
/// for every population.
pub fn population_scales(model_name: &str, n: Option<u64>, area: Option<f64>) -> Result<Vec<u64>> {
    let densities = |s: f64| ChannelDensities::new(s);
    Ok(match (model_name, n, area) {
        (_, Some(_), Some(_)) => return Err(Error::config("S", "give either N or S, not both")),
        ("hh-gating", None, Some(s)) => {
            let d = densities(s)?;
            vec![d.n_na(), d.n_na(), d.n_k()]
        }
        ("hh-multistate", None, Some(s)) => {
            let d = densities(s)?;
            vec![d.n_k(), d.n_na()]
        }
        (_, None, Some(_)) => {
            return Err(Error::config(
                "S",
                format!("model `{model_name}` takes N, not a membrane area"),
            ))
        }
        (_, Some(0), None) => return Err(Error::config("N", "must be at least 1")),
        (name, Some(n), None) => {
            let q = match name {
                "hh-gating" => 3,
                "hh-multistate" | "ml-class1" | "ml-class2" => 2,
                _ => 1,
            };
            vec![n; q]
        }
        (_, None, None) => return Err(Error::config("N", "a population scale (N or S) is required")),
    })
}
