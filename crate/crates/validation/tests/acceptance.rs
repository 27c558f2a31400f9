//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per criterion
//! and exits non-zero if any fails. Pass criterion numbers as arguments to
//! run a subset.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use hybridsim::analysis::stats::{anderson_darling_normal, ks_distance, loglog_slope, mean_var, median};
use hybridsim::analysis::{
    deviation_sups, exceedance_table, first_passage_stats, fluid_path, voltage_swing, ConvergenceSetup, LatencyProblem,
    PassageProblem,
};
use hybridsim::experiment::{rest_state, run, Command, ExperimentConfig};
use hybridsim::langevin::{simulate_langevin, sqrt_psd, LangevinRun, DEFAULT_TOL_EIG};
use hybridsim::models::{
    binomial_manifold_residual, binomial_point, build_model, hh_rates, is_stable, population_scales, GateChain,
    HhGating, HhMultistate, HhParams, MlParams, ModelOverrides, MorrisLecar, TwoStateExample, MODEL_NAMES,
};
use hybridsim::moments::{covariance_ode, linearized_langevin_moments, ml_moment_system, system_m, CovarianceOptions};
use hybridsim::{
    diffusion_matrices, integrate, simulate, simulate_with, uniform_grid, DensePath, Error, Grid, HybridModel,
    HybridState, IntegratorSpec, Result, SimulationRun,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

type Check = fn() -> Result<(bool, String)>;

fn spec() -> IntegratorSpec {
    IntegratorSpec::rk4(0.01).with_event_tol(1e-10)
}

fn det_path(model: &dyn HybridModel, x0: &[f64], t_end: f64) -> Result<DensePath> {
    fluid_path(model, x0, t_end, &spec())
}

fn trial_error(trial: u64) -> impl Fn(Error) -> Error {
    move |e| Error::Trial {
        trial,
        source: Box::new(e),
    }
}

/// Samples of every coordinate at `grid`, one row per trial.
fn ensemble(
    model: &dyn HybridModel,
    initial: &HybridState,
    grid: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let horizon = *grid.last().expect("non-empty grid");
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let traj = simulate(&SimulationRun {
                model,
                initial: initial.clone(),
                horizon,
                seed,
                trial,
                spec: spec(),
                sample_grid: grid.to_vec(),
            })
            .map_err(trial_error(trial))?;
            Ok((0..grid.len()).map(|i| traj.samples.state(i).to_vec()).collect())
        })
        .collect()
}

// constant-rate two-state example: α = 1, β = 2, f = −(v − u), all channels closed
fn example() -> TwoStateExample {
    TwoStateExample::constant(1.0, 2.0, 1.0)
}

fn example_start(n: u64) -> Result<HybridState> {
    let m = example();
    HybridState::from_proportions(m.layout(), &TwoStateExample::state(0.0, 0.0), &[n])
}

const FLUID_GRID_STEP: f64 = 1.0;

struct FluidEnsemble {
    grid: Vec<f64>,
    samples: Vec<Vec<Vec<f64>>>,
    seconds: f64,
}

fn fluid_ensemble() -> &'static FluidEnsemble {
    static CELL: OnceLock<FluidEnsemble> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid = uniform_grid(0.0, 20.0, FLUID_GRID_STEP);
        let clock = Instant::now();
        let samples = ensemble(&example(), &example_start(1000).unwrap(), &grid, 500, 11).unwrap();
        FluidEnsemble {
            grid,
            samples,
            seconds: clock.elapsed().as_secs_f64(),
        }
    })
}

/// `√N (u_N − u)` at t = 1, 5, 10 for N = 10⁴.
struct CltEnsemble {
    times: [f64; 3],
    scaled: [Vec<f64>; 3],
    raw_at_5: Vec<f64>,
}

fn clt_ensemble() -> &'static CltEnsemble {
    static CELL: OnceLock<CltEnsemble> = OnceLock::new();
    CELL.get_or_init(|| {
        let n = 10_000u64;
        let times = [1.0, 5.0, 10.0];
        let model = example();
        let start = example_start(n).unwrap();
        let det = det_path(&model, &start.to_full(), 10.0).unwrap();
        let samples = ensemble(&model, &start, &times, 1000, 13).unwrap();
        let scaled = std::array::from_fn(|k| {
            let u = det.interpolate(times[k])[2];
            samples.iter().map(|s| (n as f64).sqrt() * (s[k][2] - u)).collect()
        });
        CltEnsemble {
            times,
            scaled,
            raw_at_5: samples.iter().map(|s| s[1][2]).collect(),
        }
    })
}

fn fluid_limit() -> Result<(bool, String)> {
    let e = fluid_ensemble();
    let model = example();
    let det = det_path(&model, &example_start(1000)?.to_full(), 20.0)?;
    let mut worst: f64 = 0.0;
    for (i, &t) in e.grid.iter().enumerate().skip(1) {
        let want = det.interpolate(t);
        for k in [0, 2] {
            let xs: Vec<f64> = e.samples.iter().map(|s| s[i][k]).collect();
            let (m, v) = mean_var(&xs);
            let se = (v / xs.len() as f64).sqrt();
            worst = worst.max((m - want[k]).abs() / se);
        }
    }
    Ok((
        worst <= 3.0 && e.seconds < 60.0,
        format!(
            "max |mean − fluid| = {worst:.2} SE over (V, u) at t = 1..20; ensemble took {:.1} s",
            e.seconds
        ),
    ))
}

fn variance_scaling() -> Result<(bool, String)> {
    let var_at_5 = |xs: Vec<f64>| mean_var(&xs).1;
    let k5 = (5.0 / FLUID_GRID_STEP) as usize;
    let small = ensemble(&example(), &example_start(100)?, &[5.0], 500, 17)?;
    let vars = [
        var_at_5(small.iter().map(|s| s[0][2]).collect()),
        var_at_5(fluid_ensemble().samples.iter().map(|s| s[k5][2]).collect()),
        var_at_5(clt_ensemble().raw_at_5[..500].to_vec()),
    ];
    let slope = loglog_slope(&[1e2, 1e3, 1e4], &vars)?;
    Ok((
        (slope + 1.0).abs() <= 0.15,
        format!(
            "slope {slope:.3}; Var u_N(5) = {:.3e}, {:.3e}, {:.3e}",
            vars[0], vars[1], vars[2]
        ),
    ))
}

fn clt_covariance() -> Result<(bool, String)> {
    let e = clt_ensemble();
    let model = example();
    let det = det_path(&model, &example_start(10_000)?.to_full(), 10.0)?;
    let cov = covariance_ode(&model, &det, &CovarianceOptions::default())?;
    let s5 = cov.interpolate(5.0)[(2, 2)];
    let emp = mean_var(&e.scaled[1]).1;
    let rel = (emp / s5 - 1.0).abs();
    let mut ok = rel <= 0.10;
    let mut detail = format!("Var = {emp:.4} vs S(5) = {s5:.4} ({:.1}%)", 100.0 * rel);
    for (t, xs) in e.times.iter().zip(&e.scaled) {
        let ad = anderson_darling_normal(xs)?;
        ok &= ad.passes();
        detail.push_str(&format!("; AD(t={t}) = {:.3}/{:.3}", ad.statistic, ad.critical_1pct));
    }
    Ok((ok, detail))
}

fn cross_system() -> Result<(bool, String)> {
    let model = TwoStateExample::new(hybridsim::models::ExampleParams {
        alpha: 1.0,
        alpha_slope: 0.8,
        beta: 2.0,
        beta_slope: -0.5,
        coupling: 1.5,
    });
    let path = det_path(&model, &TwoStateExample::state(0.5, 0.1), 10.0)?;
    let cov = covariance_ode(&model, &path, &CovarianceOptions::default())?;
    let abc = system_m(&model, &path)?;
    let inf = linearized_langevin_moments(&model, &path, None, [0.0; 5])?;
    let (mut m_res, mut b_res): (f64, f64) = (0.0, 0.0);
    for i in 0..path.len() {
        let (suu, svv, svu) = (cov.entry(i, 2, 2), cov.entry(i, 0, 0), cov.entry(i, 0, 2));
        m_res = m_res
            .max((abc[i][0] + 0.5 * suu).abs())
            .max((abc[i][1] + 0.5 * svv).abs())
            .max((abc[i][2] + svu).abs());
        b_res = b_res
            .max((inf[i][2] - svv).abs())
            .max((inf[i][3] - suu).abs())
            .max((inf[i][4] - svu).abs());
    }
    let mut ml_res: f64 = 0.0;
    for params in [
        MlParams::class1().with_current(32.0),
        MlParams::class2().with_current(100.0),
    ] {
        let ml = MorrisLecar::new(params);
        let path = fluid_path(
            &ml,
            &MorrisLecar::state(-20.0, 0.1, 0.2),
            200.0,
            &IntegratorSpec::rk4(0.02),
        )?;
        let cov = covariance_ode(&ml, &path, &CovarianceOptions::default())?;
        let six = ml_moment_system(&ml, &path, [0.0; 6])?;
        let pairs = [(2, 2), (4, 4), (0, 0), (0, 2), (0, 4), (2, 4)];
        for (i, y) in six.iter().enumerate() {
            for (k, &(a, b)) in pairs.iter().enumerate() {
                ml_res = ml_res.max((y[k] - cov.entry(i, a, b)).abs());
            }
        }
    }
    Ok((
        m_res < 1e-8 && ml_res < 1e-6 && b_res < 1e-8,
        format!("system M {m_res:.1e}, Morris–Lecar {ml_res:.1e}, linearized Langevin {b_res:.1e}"),
    ))
}

fn random_state(model: &dyn HybridModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let layout = model.layout();
    let mut x = vec![0.0; layout.dim()];
    x[0] = rng.random_range(-100.0..150.0);
    for j in 0..layout.n_populations() {
        let r = layout.range(j);
        let w: Vec<f64> = r.clone().map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = w.iter().sum();
        for (k, wk) in r.zip(w) {
            x[k] = wk / total;
        }
    }
    x
}

fn diffusion_structure() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut asym, mut min_eig, mut row, mut sqrt_err): (f64, f64, f64, f64) = (0.0, f64::INFINITY, 0.0, 0.0);
    let mut count = 0;
    for name in MODEL_NAMES {
        let model = build_model(name, &ModelOverrides::default())?;
        for _ in 0..1000 {
            let x = random_state(model.as_ref(), &mut rng);
            for g in diffusion_matrices(model.as_ref(), &x)? {
                count += 1;
                asym = asym.max((&g - g.transpose()).amax());
                min_eig = min_eig.min(g.clone().symmetric_eigenvalues().min());
                for r in g.row_iter() {
                    row = row.max(r.sum().abs());
                }
                let s = sqrt_psd(&g, DEFAULT_TOL_EIG)?;
                let norm = g.norm();
                if norm > 0.0 {
                    sqrt_err = sqrt_err.max((&s * &s - &g).norm() / norm);
                }
            }
        }
    }
    Ok((
        asym == 0.0 && min_eig >= -1e-12 && row < 1e-12 && sqrt_err <= 1e-9,
        format!(
            "{count} blocks: asymmetry {asym:.1e}, min eigenvalue {min_eig:.1e}, row sum {row:.1e}, sqrt error {sqrt_err:.1e}"
        ),
    ))
}

fn langevin_fidelity() -> Result<(bool, String)> {
    let model = build_model(
        "hh-gating",
        &ModelOverrides {
            current: Some(0.0),
            ..Default::default()
        },
    )?;
    let model = model.as_ref();
    let sizes = population_scales("hh-gating", Some(1000), None)?;
    let rest = rest_state(model)?;
    let start = HybridState::from_proportions(model.layout(), &rest, &sizes)?;
    let trials = 1000;
    let jump: Vec<f64> = ensemble(model, &start, &[50.0], trials, 19)?
        .into_iter()
        .map(|s| s[0][0])
        .collect();
    let scales: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let diffusion: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let traj = simulate_langevin(&LangevinRun {
                model,
                x0: start.to_full(),
                scales: scales.clone(),
                horizon: 50.0,
                dt: 0.01,
                seed: 23,
                trial,
                sample_grid: vec![50.0],
                tol_eig: DEFAULT_TOL_EIG,
            })
            .map_err(trial_error(trial))?;
            Ok(traj.samples.state(0)[0])
        })
        .collect::<Result<_>>()?;
    let ks = ks_distance(&jump, &diffusion)?;
    let (mj, vj) = mean_var(&jump);
    let (md, vd) = mean_var(&diffusion);
    Ok((
        ks < 0.1,
        format!(
            "KS {ks:.4}; jump V(50) {mj:.3} ± {:.3}, Langevin {md:.3} ± {:.3}",
            vj.sqrt(),
            vd.sqrt()
        ),
    ))
}

fn binomial_equivalence() -> Result<(bool, String)> {
    let n_rates = |v: f64| {
        let r = hh_rates(v);
        (r.alpha_n, r.beta_n)
    };
    let m_rates = |v: f64| {
        let r = hh_rates(v);
        (r.alpha_m, r.beta_m)
    };
    let clamp = |_t: f64| 10.0;
    let constant = binomial_manifold_residual(
        &GateChain {
            k: 4,
            rates: &n_rates,
            voltage: &clamp,
        },
        &binomial_point(0.3, 4),
        20.0,
        &spec(),
    )?;
    let params = HhParams::default().with_current(20.0);
    let gating = HhGating::new(params.clone());
    let multi = HhMultistate::new(params);
    let g0 = rest_state(&HhGating::new(HhParams::default()))?;
    let (m0, h0, n0) = (g0[2], g0[4], g0[6]);
    let t_end = 20.0;
    let fine = IntegratorSpec::rk4(0.002);
    let spike = integrate(
        |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy.copy_from_slice(&hybridsim::drift_full(&gating, y)?);
            Ok(())
        },
        &g0,
        0.0,
        t_end,
        &fine,
        &Grid::Steps,
    )?;
    let peak = spike.component(0).into_iter().fold(f64::MIN, f64::max);
    let voltage = |t: f64| spike.interpolate(t)[0];
    let along_n = binomial_manifold_residual(
        &GateChain {
            k: 4,
            rates: &n_rates,
            voltage: &voltage,
        },
        &binomial_point(n0, 4),
        t_end,
        &fine,
    )?;
    let along_m = binomial_manifold_residual(
        &GateChain {
            k: 3,
            rates: &m_rates,
            voltage: &voltage,
        },
        &binomial_point(m0, 3),
        t_end,
        &fine,
    )?;
    let ms_path = integrate(
        |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy.copy_from_slice(&hybridsim::drift_full(&multi, y)?);
            Ok(())
        },
        &HhMultistate::state_from_gates(g0[0], m0, h0, n0),
        0.0,
        t_end,
        &fine,
        &Grid::Steps,
    )?;
    let dv = (0..spike.len())
        .map(|i| (spike.state(i)[0] - ms_path.state(i)[0]).abs())
        .fold(0.0, f64::max);
    let along = along_n.max(along_m);
    Ok((
        constant < 1e-8 && along < 1e-5 && dv < 1e-5 && peak > 50.0,
        format!("constant V {constant:.1e}; along spike (peak {peak:.0} mV) {along:.1e}; |ΔV| {dv:.1e}"),
    ))
}

fn late_amplitude(current: f64) -> Result<f64> {
    let model = HhGating::new(HhParams::default().with_current(current));
    let start = rest_state(&HhGating::new(HhParams::default()))?;
    let path = det_path(&model, &start, 300.0)?;
    Ok(voltage_swing(&path, 200.0))
}

fn hh_landmarks() -> Result<(bool, String)> {
    let rest_model = HhGating::new(HhParams::default());
    let rest = rest_state(&rest_model)?;
    let stable = is_stable(&rest_model, &rest)?;
    let (a20, a200) = (late_amplitude(20.0)?, late_amplitude(200.0)?);
    Ok((
        stable && a20 > 40.0 && a200 < 40.0,
        format!(
            "rest at {:.2} mV stable = {stable}; late swing {a20:.1} mV at I = 20, {a200:.2} mV at I = 200",
            rest[0]
        ),
    ))
}

fn convergence_ordering() -> Result<(bool, String)> {
    let model = HhGating::new(HhParams::default());
    let rest = rest_state(&model)?;
    let areas = [250.0, 500.0, 750.0];
    let t_grid: Vec<f64> = (1..=10).map(f64::from).collect();
    let (delta, trials) = (0.01, 200);
    let mut tables = Vec::new();
    for &area in &areas {
        let sizes = population_scales("hh-gating", None, Some(area))?;
        let setup = ConvergenceSetup {
            model: &model,
            initial: HybridState::from_proportions(model.layout(), &rest, &sizes)?,
            scale: area,
            t_grid: t_grid.clone(),
            delta,
            trials,
            seed: 7,
            spec: spec(),
            sample_dt: 0.05,
        };
        tables.push(exceedance_table(&deviation_sups(&setup)?, &t_grid, delta, area)?);
    }
    let finite = tables.iter().flatten().all(|r| r.c_s.is_finite());
    let (mut ordered, mut compared) = (0, 0);
    let bulk = |k: u64| (5..=trials - 5).contains(&k);
    for pair in tables.windows(2) {
        for (small, large) in pair[0].iter().zip(&pair[1]) {
            if bulk(small.exceed) && bulk(large.exceed) {
                compared += 1;
                ordered += usize::from(large.c_s < small.c_s);
            }
        }
    }
    let share = ordered as f64 / compared.max(1) as f64;
    Ok((
        finite && compared > 0 && share >= 0.8,
        format!(
            "finite = {finite}; larger S more negative at {ordered}/{compared} unsaturated points ({:.0}%)",
            100.0 * share
        ),
    ))
}

fn sweep_xi(model: &str, currents: &str) -> Result<Vec<f64>> {
    let mut config = ExperimentConfig::from_toml(&format!(
        "command = \"rate-variance\"\n[model]\nname = \"{model}\"\n[sweep]\ncurrents = [{currents}]\n"
    ))?;
    config.command = Command::RateVariance;
    let out = run(&config)?;
    let rows: Vec<Vec<f64>> = out[0]
        .contents
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    let spiking: Vec<f64> = rows.iter().filter(|r| r[2] == 1.0).map(|r| r[5]).collect();
    if spiking.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "{model}: only {} spiking sweep points",
            spiking.len()
        )));
    }
    Ok(spiking[1..spiking.len() - 1].to_vec())
}

fn grid_list(lo: i32, hi: i32) -> String {
    (lo..=hi).map(|i| format!("{i}.0")).collect::<Vec<_>>().join(", ")
}

fn rate_variance_classes() -> Result<(bool, String)> {
    let clock = Instant::now();
    let class1 = sweep_xi("ml-class1", &grid_list(30, 50))?;
    let class2 = sweep_xi("ml-class2", &grid_list(40, 100))?;
    let (m1, m2) = (median(&class1)?, median(&class2)?);
    let secs = clock.elapsed().as_secs_f64();
    Ok((
        m1 / m2 >= 10.0 && secs < 300.0,
        format!(
            "median ξ Class I {m1:.3e} ({} pts), Class II {m2:.3e} ({} pts), ratio {:.1}; {secs:.0} s",
            class1.len(),
            class2.len(),
            m1 / m2
        ),
    ))
}

struct LatencySetup {
    ml: MorrisLecar,
    rest: Vec<f64>,
}

fn latency_setup() -> &'static LatencySetup {
    static CELL: OnceLock<LatencySetup> = OnceLock::new();
    CELL.get_or_init(|| {
        let ml = MorrisLecar::new(MlParams::class1().with_current(32.0));
        let rest = rest_state(&ml).unwrap();
        LatencySetup { ml, rest }
    })
}

fn latency_problem(s: &LatencySetup) -> LatencyProblem<'_> {
    LatencyProblem {
        model: &s.ml,
        rest: s.rest.clone(),
        v_th: 0.0,
        t_max: 500.0,
        spec: spec(),
    }
}

/// Kick whose latency is `target`, by bisection on the decreasing `T(A)`.
fn amplitude_for(problem: &LatencyProblem<'_>, a_th: f64, target: f64) -> Result<f64> {
    let (mut lo, mut hi) = (a_th, -problem.rest[0] - 1e-6);
    if problem.latency(hi)?.t_cross > target {
        return Err(Error::InvalidInput(format!(
            "no kick below threshold reaches T = {target}"
        )));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if problem.latency(mid)?.t_cross > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Latency ensemble at the `T ≈ 10` kick, N = 10⁴.
struct PassageEnsemble {
    amplitude: f64,
    t_cross: f64,
    p: f64,
    var_tau: f64,
    grad_dot_f: f64,
    mc_var: f64,
    trials: usize,
}

fn passage_ensemble() -> Result<&'static PassageEnsemble> {
    static CELL: OnceLock<PassageEnsemble> = OnceLock::new();
    if let Some(e) = CELL.get() {
        return Ok(e);
    }
    let s = latency_setup();
    let problem = latency_problem(s);
    let a_th = problem.amplitude_threshold(0.0, -s.rest[0] - 1e-6, 1e-9)?;
    let amplitude = amplitude_for(&problem, a_th, 10.0)?;
    let lat = problem.latency(amplitude)?;
    let x0 = lat.x0.clone();
    let horizon = 2.0 * lat.t_cross;
    let path = det_path(&s.ml, &x0, horizon)?;
    let cov = covariance_ode(&s.ml, &path, &CovarianceOptions::default())?;
    let (phi, grad) = PassageProblem::voltage_threshold(0.0, s.ml.layout().dim());
    let stats = first_passage_stats(
        &s.ml,
        &PassageProblem { phi: &phi, grad: &grad },
        &x0,
        horizon,
        &spec(),
        &cov,
    )?;
    let n = 10_000u64;
    let sizes = population_scales("ml-class1", Some(n), None)?;
    let start = HybridState::from_proportions(s.ml.layout(), &x0, &sizes)?;
    let stop = |x: &[f64]| -x[0];
    let trials = 500;
    let taus: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let run = SimulationRun {
                model: &s.ml,
                initial: start.clone(),
                horizon: 500.0,
                seed: 29,
                trial,
                spec: spec(),
                sample_grid: Vec::new(),
            };
            let out = simulate_with(&run, &mut (), Some(&stop)).map_err(trial_error(trial))?;
            if !out.stopped {
                return Err(trial_error(trial)(Error::NoPassage { t_max: 500.0 }));
            }
            Ok((n as f64).sqrt() * (out.t_end - stats.tau))
        })
        .collect::<Result<_>>()?;
    Ok(CELL.get_or_init(|| PassageEnsemble {
        amplitude,
        t_cross: lat.t_cross,
        p: lat.p,
        var_tau: stats.var_tau,
        grad_dot_f: stats.grad_dot_f,
        mc_var: mean_var(&taus).1,
        trials: taus.len(),
    }))
}

fn latency_variance() -> Result<(bool, String)> {
    let s = latency_setup();
    let problem = latency_problem(s);
    let a_th = problem.amplitude_threshold(0.0, -s.rest[0] - 1e-6, 1e-9)?;
    let within = |p: f64, target: f64| p >= target / 3.0 && p <= target * 3.0;
    let mut ok = true;
    let mut detail = format!("A_th = {a_th:.6}");
    for (t, target) in [(10.0, 1e2), (60.0, 1e5)] {
        let lat = problem.latency(amplitude_for(&problem, a_th, t)?)?;
        ok &= within(lat.p, target);
        detail.push_str(&format!(
            "; P(T = {:.2}) = {:.3e} (want {target:.0e} ×/÷ 3)",
            lat.t_cross, lat.p
        ));
    }
    let e = passage_ensemble()?;
    let rel = (e.mc_var / e.p - 1.0).abs();
    ok &= rel <= 0.2;
    detail.push_str(&format!(
        "; MC at A = {:.4}: Var √N(τ_N − T) = {:.1} vs P = {:.1} ({:.1}%)",
        e.amplitude,
        e.mc_var,
        e.p,
        100.0 * rel
    ));
    Ok((ok, detail))
}

fn passage_clt() -> Result<(bool, String)> {
    let e = passage_ensemble()?;
    let rel = (e.mc_var / e.var_tau - 1.0).abs();
    Ok((
        rel <= 0.2 && e.grad_dot_f < 0.0,
        format!(
            "τ = {:.3}: empirical {:.2} vs var_tau {:.2} over {} trials ({:.1}%); ∇φ·F = {:.3e}",
            e.t_cross,
            e.mc_var,
            e.var_tau,
            e.trials,
            100.0 * rel,
            e.grad_dot_f
        ),
    ))
}

fn digest(config: &ExperimentConfig) -> Result<String> {
    let mut h = Sha256::new();
    for a in run(config)? {
        h.update(a.name.as_bytes());
        h.update(a.contents.as_bytes());
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn reproducibility() -> Result<(bool, String)> {
    let mut hashes = Vec::new();
    for text in [
        "command = \"simulate\"\nN = 500\nhorizon = 5.0\ntrials = 16\nseed = 3\n[model]\nname = \"two-state-example\"\n",
        "command = \"convergence\"\nS = 50.0\ntrials = 16\nseed = 3\n[model]\nname = \"hh-gating\"\n[convergence]\nt_grid = [1.0, 2.0]\n",
    ] {
        let base = ExperimentConfig::from_toml(text)?;
        let mut row = Vec::new();
        for threads in [Some(1), Some(4), None, Some(1)] {
            let mut c = base.clone();
            c.threads = threads;
            row.push(digest(&c)?);
        }
        hashes.push(row);
    }
    let ok = hashes.iter().all(|row| row.iter().all(|h| *h == row[0]));
    Ok((
        ok,
        format!(
            "{} configs × 4 runs (1, 4, default, 1 threads) share one SHA-256 each",
            hashes.len()
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, Check); 13] = [
        (1, "fluid limit", fluid_limit),
        (2, "1/N variance scaling", variance_scaling),
        (3, "CLT covariance and normality", clt_covariance),
        (4, "moment-system cross-checks", cross_system),
        (5, "diffusion-matrix structure", diffusion_structure),
        (6, "Langevin fidelity", langevin_fidelity),
        (7, "binomial manifold equivalence", binomial_equivalence),
        (8, "Hodgkin–Huxley landmarks", hh_landmarks),
        (9, "convergence ordering in S", convergence_ordering),
        (10, "rate variance Class I vs II", rate_variance_classes),
        (11, "latency variance P(A)", latency_variance),
        (12, "first-passage fluctuations", passage_clt),
        (13, "reproducibility", reproducibility),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let clock = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        let verdict = if pass { "PASS" } else { "FAIL" };
        failed += usize::from(!pass);
        println!(
            "criterion {id:>2} {verdict}: {name}: {detail} [{:.1} s]",
            clock.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion check(s) failed");
        ExitCode::FAILURE
    }
}
