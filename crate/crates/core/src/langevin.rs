//! Euler–Maruyama integration of the degenerate Langevin approximation: the
//! global variable has no noise, each channel population gets independent
//! Gaussian noise with covariance `G^(j)/N_j`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{diffusion_block_into, drift_full_into, HybridModel, RateScratch};
use crate::ode::DensePath;
use crate::rng::stream;
use crate::trajectory::{Trajectory, TrajectoryMeta};

pub const DEFAULT_TOL_EIG: f64 = 1e-10;

/// Symmetric PSD square root. Eigenvalues in `[−tol_eig, 0)` are treated as
/// zero; anything more negative is an error.
pub fn sqrt_psd(m: &DMatrix<f64>, tol_eig: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::invalid("square root needs a square matrix"));
    }
    let mut out = DMatrix::zeros(n, n);
    sqrt_psd_into(m, tol_eig, &mut out)?;
    Ok(out)
}

pub(crate) fn sqrt_psd_into(m: &DMatrix<f64>, tol_eig: f64, out: &mut DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "matrix entry",
            time: f64::NAN,
        });
    }
    if n == 1 {
        let v = m[(0, 0)];
        if v < -tol_eig {
            return Err(Error::NotPsd { min_eigenvalue: v });
        }
        out[(0, 0)] = v.max(0.0).sqrt();
        return Ok(());
    }
    if n == 2 {
        let (a, b, d) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let (l1, l2) = (mean + rad, mean - rad);
        if l2 < -tol_eig {
            return Err(Error::NotPsd { min_eigenvalue: l2 });
        }
        let (r1, r2) = (l1.max(0.0).sqrt(), l2.max(0.0).sqrt());
        let t = r1 + r2;
        if t == 0.0 {
            out.fill(0.0);
            return Ok(());
        }
        // √M = (M + √(λ₁λ₂) I) / (√λ₁ + √λ₂)
        let s = r1 * r2;
        out[(0, 0)] = (a + s) / t;
        out[(1, 1)] = (d + s) / t;
        out[(0, 1)] = b / t;
        out[(1, 0)] = b / t;
        return Ok(());
    }
    let sym = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.min();
    if min < -tol_eig {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let roots = DVector::from_iterator(n, eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()));
    let scaled = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
    out.copy_from(&(scaled * eig.eigenvectors.transpose()));
    Ok(())
}

/// One Langevin path request.
#[derive(Clone)]
pub struct LangevinRun<'a> {
    pub model: &'a dyn HybridModel,
    /// Real-valued initial full state.
    pub x0: Vec<f64>,
    /// `N_j` per population; `f64::INFINITY` switches that population's noise off.
    pub scales: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub trial: u64,
    /// Increasing output times in `[0, horizon]`.
    pub sample_grid: Vec<f64>,
    pub tol_eig: f64,
}

impl LangevinRun<'_> {
    pub fn validate(&self) -> Result<()> {
        let layout = self.model.layout();
        if self.x0.len() != layout.dim() || self.scales.len() != layout.n_populations() {
            return Err(Error::invalid("initial state or scales do not match the model layout"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("horizon must be positive"));
        }
        if self.scales.iter().any(|&n| !(n >= 1.0)) {
            return Err(Error::invalid("every N_j must be at least 1"));
        }
        if self.sample_grid.windows(2).any(|w| w[1] <= w[0])
            || self.sample_grid.first().is_some_and(|&t| t < 0.0)
            || self.sample_grid.last().is_some_and(|&t| t > self.horizon)
        {
            return Err(Error::invalid("sample grid must be increasing inside [0, horizon]"));
        }
        Ok(())
    }
}

fn project_block(x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    let s: f64 = x.iter().sum();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    } else {
        let r = x.len() as f64;
        x.iter_mut().for_each(|v| *v = 1.0 / r);
    }
}

/// Euler–Maruyama path sampled on the run's grid.
pub fn simulate_langevin(run: &LangevinRun<'_>) -> Result<Trajectory> {
    run.validate()?;
    let model = run.model;
    let layout = model.layout().clone();
    let dim = layout.dim();
    let mut rng = stream(run.seed, run.trial);
    let mut scratch = RateScratch::new(&layout);
    let mut g: Vec<DMatrix<f64>> = layout
        .population_sizes()
        .iter()
        .map(|&r| DMatrix::zeros(r, r))
        .collect();
    let mut sigma = g.clone();
    let mut xi: Vec<f64> = vec![0.0; layout.population_sizes().iter().copied().max().unwrap_or(0)];

    let mut x = run.x0.clone();
    for j in 0..layout.n_populations() {
        project_block(&mut x[layout.range(j)]);
    }
    let mut f = vec![0.0; dim];
    let mut dx = vec![0.0; dim];
    let mut samples = DensePath::new(dim);
    let grid = &run.sample_grid;
    let mut gi = 0;
    let mut t = 0.0;
    while gi < grid.len() && grid[gi] <= t {
        samples.push(grid[gi], &x);
        gi += 1;
    }
    while t < run.horizon {
        let t_next = grid.get(gi).copied().unwrap_or(run.horizon).min(run.horizon);
        let h = (t_next - t).min(run.dt);
        drift_full_into(model, &x, &mut f, &mut scratch)?;
        for (k, fk) in f.iter().enumerate() {
            dx[k] = h * fk;
        }
        for j in 0..layout.n_populations() {
            let r = layout.population_sizes()[j];
            let off = layout.offset(j);
            let n = run.scales[j];
            if n.is_infinite() {
                continue;
            }
            diffusion_block_into(model, j, &x, &mut scratch.bufs[j], &mut g[j])?;
            sqrt_psd_into(&g[j], run.tol_eig, &mut sigma[j])?;
            for z in xi.iter_mut().take(r) {
                *z = rng.sample(StandardNormal);
            }
            let scale = (h / n).sqrt();
            for k in 0..r {
                let acc: f64 = (0..r).map(|l| sigma[j][(k, l)] * xi[l]).sum();
                dx[off + k] += scale * acc;
            }
        }
        for (xk, d) in x.iter_mut().zip(&dx) {
            *xk += d;
        }
        for j in 0..layout.n_populations() {
            project_block(&mut x[layout.range(j)]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "Langevin state",
                time: t,
            });
        }
        t = if t_next - t <= run.dt { t_next } else { t + h };
        while gi < grid.len() && grid[gi] <= t {
            samples.push(grid[gi], &x);
            gi += 1;
        }
    }
    Ok(Trajectory {
        layout,
        samples,
        events: Vec::new(),
        event_states: Vec::new(),
        meta: TrajectoryMeta {
            model: model.name().to_string(),
            sizes: run
                .scales
                .iter()
                .map(|&n| if n.is_finite() { n as u64 } else { 0 })
                .collect(),
            seed: Some(run.seed),
            trial: Some(run.trial),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{diffusion_matrices, drift_full};
    use crate::models::{HhGating, HhParams, TwoStateExample};
    use crate::ode::{integrate, uniform_grid, Grid, IntegratorSpec};
    use proptest::prelude::*;

    fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn identity_and_zero() {
        for n in [1, 2, 3, 5] {
            let i = DMatrix::<f64>::identity(n, n);
            assert!(rel_frob(&sqrt_psd(&i, DEFAULT_TOL_EIG).unwrap(), &i) < 1e-15);
            let z = DMatrix::<f64>::zeros(n, n);
            assert_eq!(sqrt_psd(&z, DEFAULT_TOL_EIG).unwrap(), z);
        }
    }

    #[test]
    fn two_state_block_root() {
        let lam = 0.37;
        let g = DMatrix::from_row_slice(2, 2, &[lam, -lam, -lam, lam]);
        let s = sqrt_psd(&g, DEFAULT_TOL_EIG).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]) * (lam / 2.0).sqrt();
        assert!((&s - &want).abs().max() < 1e-15);
    }

    #[test]
    fn wrong_sign_convention_is_not_psd() {
        let lam = 0.5;
        let g = DMatrix::from_row_slice(2, 2, &[lam, lam, lam, -lam]);
        assert!(matches!(sqrt_psd(&g, DEFAULT_TOL_EIG), Err(Error::NotPsd { .. })));
        let g3 = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(sqrt_psd(&g3, DEFAULT_TOL_EIG), Err(Error::NotPsd { .. })));
    }

    proptest! {
        #[test]
        fn root_squares_back(entries in prop::collection::vec(-2.0f64..2.0, 16), n in 1usize..=4) {
            let a = DMatrix::from_iterator(n, n, entries.into_iter().take(n * n));
            let m = &a * a.transpose();
            let s = sqrt_psd(&m, DEFAULT_TOL_EIG).unwrap();
            prop_assert!((&s - s.transpose()).abs().max() < 1e-12);
            prop_assert!(rel_frob(&(&s * &s), &m) < 1e-9);
        }

        #[test]
        fn noise_is_zero_sum(v in -20.0f64..100.0, m in 0.0f64..1.0, h in 0.0f64..1.0, n in 0.0f64..1.0) {
            let model = HhGating::new(HhParams::default());
            let x = vec![v, 1.0 - m, m, 1.0 - h, h, 1.0 - n, n];
            for g in diffusion_matrices(&model, &x).unwrap() {
                let s = sqrt_psd(&g, DEFAULT_TOL_EIG).unwrap();
                let ones = DVector::from_element(2, 1.0);
                prop_assert!((s.transpose() * ones).abs().max() < 1e-12);
            }
        }
    }

    fn run(model: &dyn HybridModel, x0: Vec<f64>, n: f64, horizon: f64, dt: f64, trial: u64) -> LangevinRun<'_> {
        LangevinRun {
            model,
            x0,
            scales: vec![n; model.layout().n_populations()],
            horizon,
            dt,
            seed: 3,
            trial,
            sample_grid: uniform_grid(0.0, horizon, 0.5),
            tol_eig: DEFAULT_TOL_EIG,
        }
    }

    #[test]
    fn infinite_scale_reproduces_deterministic_path() {
        let model = HhGating::new(HhParams::default().with_current(10.0));
        let x0 = model.clamped_state(0.0);
        let dt = 1e-3;
        let lang = simulate_langevin(&run(&model, x0.clone(), f64::INFINITY, 20.0, dt, 0)).unwrap();
        let det = integrate(
            |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy.copy_from_slice(&drift_full(&model, y)?);
                Ok(())
            },
            &x0,
            0.0,
            20.0,
            &IntegratorSpec::rk4(0.01),
            &Grid::Every(0.5),
        )
        .unwrap();
        for i in 0..det.len() {
            // Euler global error O(dt) on a spike
            assert!(
                (lang.samples.state(i)[0] - det.state(i)[0]).abs() < 0.5,
                "t = {}",
                det.times[i]
            );
        }
    }

    #[test]
    fn stationary_variance_of_two_state_ou() {
        let (a, b, n) = (1.0, 2.0, 100.0);
        let model = TwoStateExample::constant(a, b, 0.0);
        let mut r = run(&model, TwoStateExample::state(0.0, 1.0 / 3.0), n, 4000.0, 0.01, 0);
        r.sample_grid = uniform_grid(0.0, 4000.0, 1.0);
        let path = simulate_langevin(&r).unwrap();
        let u: Vec<f64> = (10..path.samples.len()).map(|i| path.samples.state(i)[2]).collect();
        let mean = u.iter().sum::<f64>() / u.len() as f64;
        let var = u.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (u.len() - 1) as f64;
        let lam_star = 2.0 * a * b / (a + b);
        let want = lam_star / (2.0 * n * (a + b));
        assert!((var - want).abs() < 0.1 * want, "{var} vs {want}");
    }

    #[test]
    fn blocks_stay_on_simplex() {
        let model = HhGating::new(HhParams::default().with_current(20.0));
        let path = simulate_langevin(&run(&model, model.clamped_state(0.0), 10.0, 30.0, 0.01, 1)).unwrap();
        for i in 0..path.samples.len() {
            let x = path.samples.state(i);
            for j in 0..3 {
                let blk = &x[1 + 2 * j..3 + 2 * j];
                assert!(blk.iter().all(|v| (0.0..=1.0).contains(v)));
                assert!((blk.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
