//! Probability that a jump trajectory leaves a tube around the fluid limit.

use rayon::prelude::*;

use super::stats::{wilson_interval, Z95};
use crate::error::{Error, Result};
use crate::model::{drift_full, HybridModel, HybridState};
use crate::ode::{integrate, DensePath, Grid, IntegratorSpec};
use crate::pdmp::{simulate_with, RunningDeviation, SimulationRun};

/// One Monte Carlo convergence experiment.
pub struct ConvergenceSetup<'a> {
    pub model: &'a dyn HybridModel,
    pub initial: HybridState,
    /// Normalising scale in `C_S = log(P) / S` (membrane area or `N`).
    pub scale: f64,
    pub t_grid: Vec<f64>,
    pub delta: f64,
    pub trials: u64,
    pub seed: u64,
    pub spec: IntegratorSpec,
    /// Spacing of the between-jump deviation probes.
    pub sample_dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub t: f64,
    pub exceed: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub p_lo: f64,
    pub p_hi: f64,
    /// `log(p_hat) / S`; `-inf` when nothing exceeded.
    pub c_s: f64,
    pub c_lo: f64,
    pub c_hi: f64,
}

/// Deterministic reference started from the same proportions.
pub fn fluid_path(model: &dyn HybridModel, x0: &[f64], t_end: f64, spec: &IntegratorSpec) -> Result<DensePath> {
    integrate(
        |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy.copy_from_slice(&drift_full(model, y)?);
            Ok(())
        },
        x0,
        0.0,
        t_end,
        spec,
        &Grid::Steps,
    )
}

/// Running `sup_{t ≤ T} ‖X_N(t) − x(t)‖²` for every `T` in the grid, per trial.
pub fn deviation_sups(setup: &ConvergenceSetup<'_>) -> Result<Vec<Vec<f64>>> {
    if setup.trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    if setup.t_grid.is_empty() || setup.t_grid.windows(2).any(|w| w[1] < w[0]) || setup.t_grid[0] <= 0.0 {
        return Err(Error::invalid("T grid must be positive and non-decreasing"));
    }
    let horizon = *setup.t_grid.last().expect("non-empty");
    let det = fluid_path(setup.model, &setup.initial.to_full(), horizon, &setup.spec)?;
    let n_samples = (horizon / setup.sample_dt).ceil().max(1.0) as usize;
    let sample_grid: Vec<f64> = (0..=n_samples)
        .map(|i| (i as f64 * setup.sample_dt).min(horizon))
        .collect();
    let results: Vec<Result<Vec<f64>>> = (0..setup.trials)
        .into_par_iter()
        .map(|trial| {
            let run = SimulationRun {
                model: setup.model,
                initial: setup.initial.clone(),
                horizon,
                seed: setup.seed,
                trial,
                spec: setup.spec,
                sample_grid: sample_grid.clone(),
            };
            let mut obs = RunningDeviation::new(&det, &setup.t_grid);
            simulate_with(&run, &mut obs, None).map_err(|e| Error::Trial {
                trial,
                source: Box::new(e),
            })?;
            Ok(obs.finish())
        })
        .collect();
    results.into_iter().collect()
}

/// Exceedance fractions of `delta` with Wilson intervals and `C_S`.
pub fn exceedance_table(sups: &[Vec<f64>], t_grid: &[f64], delta: f64, scale: f64) -> Result<Vec<ConvergenceRow>> {
    if !(delta > 0.0) || !(scale > 0.0) {
        return Err(Error::invalid("delta and scale must be positive"));
    }
    let n = sups.len() as u64;
    t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let exceed = sups.iter().filter(|s| s[k] > delta).count() as u64;
            let (p_lo, p_hi) = wilson_interval(exceed, n, Z95)?;
            let p_hat = exceed as f64 / n as f64;
            Ok(ConvergenceRow {
                t,
                exceed,
                trials: n,
                p_hat,
                p_lo,
                p_hi,
                c_s: p_hat.ln() / scale,
                c_lo: p_lo.ln() / scale,
                c_hi: p_hi.ln() / scale,
            })
        })
        .collect()
}

/// [`deviation_sups`] followed by [`exceedance_table`].
pub fn convergence_probability(setup: &ConvergenceSetup<'_>) -> Result<Vec<ConvergenceRow>> {
    let sups = deviation_sups(setup)?;
    exceedance_table(&sups, &setup.t_grid, setup.delta, setup.scale)
}

/// `−Δ e^{−B T²} / (C T)` on the grid.
pub fn bound_curve(delta: f64, t_grid: &[f64], b: f64, c: f64) -> Result<Vec<(f64, f64)>> {
    if !(b > 0.0 && c > 0.0) {
        return Err(Error::invalid("bound constants B and C must be positive"));
    }
    t_grid
        .iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(Error::invalid("bound curve is defined for T > 0 only"));
            }
            Ok((t, -delta * (-b * t * t).exp() / (c * t)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TwoStateExample;
    use proptest::prelude::*;

    fn setup(model: &TwoStateExample, delta: f64) -> ConvergenceSetup<'_> {
        ConvergenceSetup {
            model,
            initial: HybridState::new(vec![0.0], vec![vec![50, 0]]).unwrap(),
            scale: 50.0,
            t_grid: vec![0.5, 1.0, 2.0, 4.0],
            delta,
            trials: 40,
            seed: 3,
            spec: IntegratorSpec::rk4(0.01).with_event_tol(1e-9),
            sample_dt: 0.05,
        }
    }

    #[test]
    fn unreachable_deviation_never_exceeds() {
        let model = TwoStateExample::constant(1.0, 2.0, 1.0);
        let rows = convergence_probability(&setup(&model, 1e6)).unwrap();
        for r in rows {
            assert_eq!(r.exceed, 0);
            assert_eq!(r.c_s, f64::NEG_INFINITY);
            assert!(r.c_hi.is_finite());
        }
    }

    #[test]
    fn exceedance_grows_with_horizon() {
        let model = TwoStateExample::constant(1.0, 2.0, 1.0);
        let rows = convergence_probability(&setup(&model, 0.005)).unwrap();
        assert!(rows.windows(2).all(|w| w[0].exceed <= w[1].exceed));
        assert!(rows.last().unwrap().exceed > 0);
    }

    #[test]
    fn bound_hand_value() {
        let b = bound_curve(0.01, &[1.0], 1.0, 1.0).unwrap();
        assert!((b[0].1 + 0.01 * (-1.0f64).exp()).abs() < 1e-16);
        assert!(bound_curve(0.01, &[0.0], 1.0, 1.0).is_err());
        assert!(bound_curve(0.0, &[1.0, 2.0], 1.0, 1.0)
            .unwrap()
            .iter()
            .all(|p| p.1 == 0.0));
    }

    #[test]
    fn bound_rises_monotonically_to_zero() {
        // d/dT [e^{-BT²}/T] = −e^{-BT²}(2B + 1/T²) < 0
        let ts: Vec<f64> = (1..400).map(|i| i as f64 * 0.01).collect();
        let b = bound_curve(0.3, &ts, 1.0, 2.0).unwrap();
        assert!(b.windows(2).all(|w| w[1].1 > w[0].1));
        assert!(b.iter().all(|p| p.1 < 0.0));
    }

    proptest! {
        #[test]
        fn exceedance_monotone_in_t_and_delta(
            rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 1..6), 1..20),
            d1 in 0.01f64..1.0,
            d2 in 0.01f64..1.0,
        ) {
            // running sups are non-decreasing along the grid
            let k = rows.iter().map(Vec::len).min().unwrap();
            let sups: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r[..k].iter().scan(0.0f64, |m, &x| { *m = m.max(x); Some(*m) }).collect())
                .collect();
            let grid: Vec<f64> = (1..=k).map(|i| i as f64).collect();
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let a = exceedance_table(&sups, &grid, lo, 1.0).unwrap();
            let b = exceedance_table(&sups, &grid, hi, 1.0).unwrap();
            for i in 0..k {
                prop_assert!(a[i].exceed >= b[i].exceed);
                if i > 0 {
                    prop_assert!(a[i].exceed >= a[i - 1].exceed);
                }
            }
        }
    }
}
