//! Reduction of a chain of `k` identical independent gates to one gate: on
//! the binomial manifold the chain occupancy is `C(k, j) u^j (1 − u)^(k−j)`.

use crate::error::{Error, Result};
use crate::ode::{integrate, DensePath, Grid, IntegratorSpec};

/// Rates of the `(k + 1)`-state chain indexed by the number of open gates:
/// `j → j+1` at `(k − j) α`, `j → j−1` at `j β`. Writes a row-major table.
pub fn chain_rates(k: usize, alpha: f64, beta: f64, out: &mut [f64]) {
    let r = k + 1;
    out.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..k {
        out[j * r + j + 1] = (k - j) as f64 * alpha;
        out[(j + 1) * r + j] = (j + 1) as f64 * beta;
    }
}

/// Binomial occupancy `C(k, j) u^j (1 − u)^(k−j)` for `j = 0..=k`.
pub fn binomial_point(u: f64, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k + 1);
    let mut c = 1.0;
    for j in 0..=k {
        out.push(c * u.powi(j as i32) * (1.0 - u).powi((k - j) as i32));
        c = c * (k - j) as f64 / (j + 1) as f64;
    }
    out
}

/// A gate chain driven by a voltage trace.
pub struct GateChain<'a> {
    pub k: usize,
    /// `(α, β)` of one gate at voltage `v`.
    pub rates: &'a dyn Fn(f64) -> (f64, f64),
    /// Voltage at time `t`.
    pub voltage: &'a dyn Fn(f64) -> f64,
}

/// Integrates the single gate `u` from `u0` jointly with the chain from
/// `chain0` over `[0, t_end]` and returns `max_{t, j} |x_j(t) − C(k,j) u^j (1−u)^(k−j)|`
/// over the integration grid. No consistency check on `chain0`.
pub fn manifold_residual_from(
    chain: &GateChain<'_>,
    u0: f64,
    chain0: &[f64],
    t_end: f64,
    spec: &IntegratorSpec,
) -> Result<f64> {
    let k = chain.k;
    if chain0.len() != k + 1 {
        return Err(Error::invalid(format!("chain of {k} gates has {} states", k + 1)));
    }
    let r = k + 1;
    let mut table = vec![0.0; r * r];
    let mut y0 = vec![u0];
    y0.extend_from_slice(chain0);
    let path = integrate(
        |t: f64, y: &[f64], dy: &mut [f64]| {
            let (a, b) = (chain.rates)((chain.voltage)(t));
            dy[0] = (1.0 - y[0]) * a - y[0] * b;
            chain_rates(k, a, b, &mut table);
            dy[1..].iter_mut().for_each(|v| *v = 0.0);
            for i in 0..r {
                for l in 0..r {
                    let flux = table[i * r + l] * y[1 + i];
                    dy[1 + l] += flux;
                    dy[1 + i] -= flux;
                }
            }
            Ok(())
        },
        &y0,
        0.0,
        t_end,
        spec,
        &Grid::Steps,
    )?;
    Ok(max_residual(&path, k))
}

fn max_residual(path: &DensePath, k: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..path.len() {
        let y = path.state(i);
        let target = binomial_point(y[0], k);
        for (x, b) in y[1..].iter().zip(&target) {
            worst = worst.max((x - b).abs());
        }
    }
    worst
}

/// Manifold residual for chain data that must start on the manifold; `u0`
/// is recovered as the mean open fraction `Σ j x_j / k`.
pub fn binomial_manifold_residual(
    chain: &GateChain<'_>,
    chain0: &[f64],
    t_end: f64,
    spec: &IntegratorSpec,
) -> Result<f64> {
    let k = chain.k;
    if k == 0 || chain0.len() != k + 1 {
        return Err(Error::invalid("chain needs k >= 1 and k + 1 occupancies"));
    }
    let u0 = chain0.iter().enumerate().map(|(j, x)| j as f64 * x).sum::<f64>() / k as f64;
    let off = binomial_point(u0, k)
        .iter()
        .zip(chain0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if off > 1e-9 {
        return Err(Error::invalid(format!(
            "initial chain occupancy is {off:e} away from the binomial manifold"
        )));
    }
    manifold_residual_from(chain, u0, chain0, t_end, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::hh_rates;

    fn k_gate(v: f64) -> (f64, f64) {
        let r = hh_rates(v);
        (r.alpha_n, r.beta_n)
    }

    #[test]
    fn binomial_point_sums_to_one() {
        let p = binomial_point(0.3, 4);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p[4] - 0.3f64.powi(4)).abs() < 1e-16);
        assert!((p[1] - 4.0 * 0.3 * 0.7f64.powi(3)).abs() < 1e-16);
    }

    #[test]
    fn single_gate_chain_coincides() {
        let volt = |_t: f64| 5.0;
        let chain = GateChain {
            k: 1,
            rates: &k_gate,
            voltage: &volt,
        };
        let res = binomial_manifold_residual(&chain, &[0.8, 0.2], 50.0, &IntegratorSpec::rk4(0.01)).unwrap();
        assert!(res < 1e-14, "{res}");
    }

    #[test]
    fn constant_voltage_chain_stays_binomial() {
        let volt = |_t: f64| 0.0;
        let chain = GateChain {
            k: 4,
            rates: &k_gate,
            voltage: &volt,
        };
        let x0 = binomial_point(0.6, 4);
        let res = binomial_manifold_residual(&chain, &x0, 100.0, &IntegratorSpec::rk4(0.01)).unwrap();
        assert!(res < 1e-8, "{res}");
    }

    #[test]
    fn gate_follows_closed_form_at_constant_voltage() {
        let (a, b) = k_gate(0.0);
        let volt = |_t: f64| 0.0;
        let u_inf = a / (a + b);
        let t_end = 30.0;
        let u_exact = u_inf + (0.6 - u_inf) * (-(a + b) * t_end).exp();
        // Evaluate the chain against the closed-form gate directly.
        let chain = GateChain {
            k: 4,
            rates: &k_gate,
            voltage: &volt,
        };
        let x0 = binomial_point(0.6, 4);
        let path = integrate(
            |_t: f64, y: &[f64], dy: &mut [f64]| {
                let mut table = vec![0.0; 25];
                chain_rates(4, a, b, &mut table);
                dy.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..5 {
                    for l in 0..5 {
                        dy[l] += table[i * 5 + l] * y[i];
                        dy[i] -= table[i * 5 + l] * y[i];
                    }
                }
                Ok(())
            },
            &x0,
            0.0,
            t_end,
            &IntegratorSpec::rk4(0.01),
            &Grid::Steps,
        )
        .unwrap();
        let want = binomial_point(u_exact, 4);
        for (x, w) in path.last_state().iter().zip(&want) {
            assert!((x - w).abs() < 1e-10);
        }
        assert!(binomial_manifold_residual(&chain, &x0, t_end, &IntegratorSpec::rk4(0.01)).unwrap() < 1e-8);
    }

    #[test]
    fn off_manifold_data() {
        let volt = |_t: f64| 0.0;
        let chain = GateChain {
            k: 4,
            rates: &k_gate,
            voltage: &volt,
        };
        let mut x0 = binomial_point(0.6, 4);
        x0[0] += 0.05;
        x0[2] -= 0.05;
        assert!(matches!(
            binomial_manifold_residual(&chain, &x0, 10.0, &IntegratorSpec::rk4(0.01)),
            Err(Error::InvalidInput(_))
        ));
        let u0 = (0..5).map(|j| j as f64 * x0[j]).sum::<f64>() / 4.0;
        let spec = IntegratorSpec::rk4(0.01);
        let early = manifold_residual_from(&chain, u0, &x0, 1.0, &spec).unwrap();
        let late = manifold_residual_from(&chain, u0, &x0, 3.0, &spec).unwrap();
        assert!(early > 1e-3 && late >= early);
    }
}
