//! Config-driven experiments: every command produces a CSV table and a
//! long-format plot-data file, both prefixed with `#` provenance lines.
//!
//! Trials run in parallel but results are assembled by trial index, so the
//! output bytes do not depend on the number of threads.

mod config;
mod output;

pub use config::{
    parse_grid, Command, ConvergenceConfig, ExperimentConfig, LangevinConfig, LatencyConfig, ModelConfig,
    PassageConfig, PspConfig, SweepConfig,
};
pub use output::{emit_plotdata, provenance, Artifact, PlotPoint, Table};

use rayon::prelude::*;

use crate::analysis::stats::{mean_var, Z95};
use crate::analysis::{
    bound_curve, exceedance_table, first_passage_stats, psp_functional, psp_variance, rate_variance, voltage_swing,
    ConvergenceSetup, LatencyProblem, PassageProblem,
};
use crate::error::{Error, Result};
use crate::langevin::{simulate_langevin, LangevinRun};
use crate::model::{HybridModel, HybridState};
use crate::models::{build_model, equilibria, is_stable, population_scales, quasi_steady_state, MlParams, MorrisLecar};
use crate::moments::{covariance_ode, CovarianceOptions};
use crate::ode::{integrate, uniform_grid, DensePath, Grid, IntegratorSpec};
use crate::pdmp::{simulate, simulate_with, SimulationRun};
use crate::trajectory::{output_columns, Trajectory};

const PACKAGE: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Runs `config` on a pool of `config.threads` workers (rayon's default
/// when unset).
pub fn run(config: &ExperimentConfig) -> Result<Vec<Artifact>> {
    config.validate()?;
    match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?
            .install(|| dispatch(config)),
        None => dispatch(config),
    }
}

fn dispatch(config: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let (table, plot, extra) = match config.command {
        Command::Deterministic => deterministic(config)?,
        Command::Simulate => ensemble(config, false)?,
        Command::Langevin => ensemble(config, true)?,
        Command::Moments => moments(config)?,
        Command::Convergence => convergence(config)?,
        Command::RateVariance => rate_sweep(config)?,
        Command::Latency => latency(config)?,
        Command::Passage => passage(config)?,
        Command::Psp => psp(config)?,
    };
    let header = header(config, &extra)?;
    let name = config.command.name();
    Ok(vec![
        Artifact {
            name: format!("{name}.csv"),
            contents: table.to_csv(&header),
        },
        Artifact {
            name: format!("{name}.plot.csv"),
            contents: emit_plotdata(&plot, &header),
        },
    ])
}

type Outputs = (Table, Vec<PlotPoint>, Vec<(&'static str, String)>);

fn header(config: &ExperimentConfig, extra: &[(&'static str, String)]) -> Result<String> {
    let mut canon = config.clone();
    canon.threads = None;
    canon.out = None;
    let mut entries = vec![
        ("generator", PACKAGE.to_string()),
        ("command", config.command.name().to_string()),
        ("model", config.model.name.clone()),
        ("seed", config.seed.to_string()),
        ("config-hash", config.hash()?),
    ];
    entries.extend(extra.iter().cloned());
    entries.push(("config", canon.to_toml()?));
    Ok(provenance(&entries))
}

fn model_of(config: &ExperimentConfig) -> Result<Box<dyn HybridModel>> {
    build_model(&config.model.name, &config.model.overrides())
}

fn spec_of(config: &ExperimentConfig) -> IntegratorSpec {
    IntegratorSpec::rk4(config.dt).with_event_tol(config.event_tol)
}

fn sizes_of(config: &ExperimentConfig) -> Result<Vec<u64>> {
    if config.n.is_none() && config.area.is_none() {
        return Err(Error::config(
            "N",
            "this command needs N (or S for Hodgkin–Huxley models)",
        ));
    }
    population_scales(&config.model.name, config.n, config.area)
}

/// `N` or `S`, whichever normalises the channel counts.
fn scale_of(config: &ExperimentConfig) -> Option<f64> {
    config.n.map(|n| n as f64).or(config.area)
}

/// The lowest stable equilibrium.
pub fn rest_state(model: &dyn HybridModel) -> Result<Vec<f64>> {
    for x in equilibria(model, -100.0, 150.0, 5000)? {
        if is_stable(model, &x)? {
            return Ok(x);
        }
    }
    Err(Error::invalid(format!(
        "model `{}` has no stable equilibrium in [-100, 150] mV",
        model.name()
    )))
}

/// Rest state with the input current switched off, for regimes without one.
fn unforced_rest(config: &ExperimentConfig) -> Result<Vec<f64>> {
    let mut overrides = config.model.overrides();
    overrides.current = Some(0.0);
    rest_state(build_model(&config.model.name, &overrides)?.as_ref())
}

fn initial_of(config: &ExperimentConfig, model: &dyn HybridModel, kick: f64) -> Result<Vec<f64>> {
    let x = match &config.initial {
        Some(x) => {
            if x.len() != model.layout().dim() {
                return Err(Error::config(
                    "initial",
                    format!("expected {} coordinates, got {}", model.layout().dim(), x.len()),
                ));
            }
            return Ok(x.clone());
        }
        None => rest_state(model).or_else(|_| unforced_rest(config))?,
    };
    let mut x = x;
    x[0] += kick;
    Ok(x)
}

fn path_of(model: &dyn HybridModel, x0: &[f64], t_end: f64, spec: &IntegratorSpec, grid: &Grid) -> Result<DensePath> {
    integrate(
        |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy.copy_from_slice(&crate::model::drift_full(model, y)?);
            Ok(())
        },
        x0,
        0.0,
        t_end,
        spec,
        grid,
    )
}

fn path_plot(model: &dyn HybridModel, path: &DensePath, plot: &mut Vec<PlotPoint>) {
    for (name, k) in output_columns(model) {
        for i in 0..path.len() {
            plot.push(PlotPoint::new(name.clone(), path.times[i], path.state(i)[k]));
        }
    }
}

fn deterministic(config: &ExperimentConfig) -> Result<Outputs> {
    let model = model_of(config)?;
    let x0 = initial_of(config, model.as_ref(), 0.0)?;
    let path = path_of(
        model.as_ref(),
        &x0,
        config.horizon,
        &spec_of(config),
        &Grid::Every(config.sample_dt),
    )?;
    let cols = output_columns(model.as_ref());
    let mut names = vec!["t"];
    names.extend(cols.iter().map(|(n, _)| n.as_str()));
    let mut table = Table::new(&names);
    for i in 0..path.len() {
        let x = path.state(i);
        table.push(
            std::iter::once(path.times[i])
                .chain(cols.iter().map(|&(_, k)| x[k]))
                .collect(),
        );
    }
    let mut plot = Vec::new();
    path_plot(model.as_ref(), &path, &mut plot);
    Ok((table, plot, vec![]))
}

fn ensemble(config: &ExperimentConfig, langevin: bool) -> Result<Outputs> {
    let model = model_of(config)?;
    let model = model.as_ref();
    let sizes = sizes_of(config)?;
    let x0 = initial_of(config, model, 0.0)?;
    let initial = HybridState::from_proportions(model.layout(), &x0, &sizes)?;
    let grid = uniform_grid(0.0, config.horizon, config.sample_dt);
    let spec = spec_of(config);
    let runs: Vec<Result<Trajectory>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let out = if langevin {
                simulate_langevin(&LangevinRun {
                    model,
                    x0: initial.to_full(),
                    scales: sizes.iter().map(|&n| n as f64).collect(),
                    horizon: config.horizon,
                    dt: config.dt,
                    seed: config.seed,
                    trial,
                    sample_grid: grid.clone(),
                    tol_eig: config.langevin.tol_eig,
                })
            } else {
                simulate(&SimulationRun {
                    model,
                    initial: initial.clone(),
                    horizon: config.horizon,
                    seed: config.seed,
                    trial,
                    spec,
                    sample_grid: grid.clone(),
                })
            };
            out.map_err(|e| Error::Trial {
                trial,
                source: Box::new(e),
            })
        })
        .collect();
    let runs: Vec<Trajectory> = runs.into_iter().collect::<Result<_>>()?;
    let cols = output_columns(model);
    let mut names = vec!["trial", "t"];
    names.extend(cols.iter().map(|(n, _)| n.as_str()));
    let mut table = Table::new(&names);
    for (trial, run) in runs.iter().enumerate() {
        for i in 0..run.samples.len() {
            let x = run.samples.state(i);
            let mut row = vec![trial as f64, run.samples.times[i]];
            row.extend(cols.iter().map(|&(_, k)| x[k]));
            table.push(row);
        }
    }
    let mut plot = Vec::new();
    for (name, k) in &cols {
        for (i, &t) in grid.iter().enumerate() {
            let vals: Vec<f64> = runs.iter().map(|r| r.samples.state(i)[*k]).collect();
            let (m, v) = if vals.len() > 1 {
                mean_var(&vals)
            } else {
                (vals[0], 0.0)
            };
            let half = Z95 * (v / vals.len() as f64).sqrt();
            plot.push(PlotPoint::new(name.clone(), t, m).band(m - half, m + half));
        }
    }
    Ok((table, plot, vec![("sizes", format!("{sizes:?}"))]))
}

fn weights_of(config: &ExperimentConfig, model: &dyn HybridModel) -> Result<Vec<f64>> {
    match scale_of(config) {
        None => Ok(vec![1.0; model.layout().n_populations()]),
        Some(s) => Ok(sizes_of(config)?.iter().map(|&n| n as f64 / s).collect()),
    }
}

fn moments(config: &ExperimentConfig) -> Result<Outputs> {
    let model = model_of(config)?;
    let model = model.as_ref();
    let x0 = initial_of(config, model, 0.0)?;
    let path = path_of(model, &x0, config.horizon, &spec_of(config), &Grid::Steps)?;
    let opts = CovarianceOptions {
        weights: weights_of(config, model)?,
        ..Default::default()
    };
    let cov = covariance_ode(model, &path, &opts)?;
    let names = crate::model::coordinate_names(model);
    let d = cov.dim;
    let mut cols = vec!["t".to_string()];
    for a in 0..d {
        for b in a..d {
            cols.push(format!("cov({},{})", names[a], names[b]));
        }
    }
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::new(&col_refs);
    let mut plot = Vec::new();
    for t in uniform_grid(0.0, config.horizon, config.sample_dt) {
        let g = cov.interpolate(t);
        let mut row = vec![t];
        for a in 0..d {
            for b in a..d {
                row.push(g[(a, b)]);
            }
            plot.push(PlotPoint::new(format!("var({})", names[a]), t, g[(a, a)]));
        }
        table.push(row);
    }
    Ok((table, plot, vec![("weights", format!("{:?}", opts.weights))]))
}

fn convergence(config: &ExperimentConfig) -> Result<Outputs> {
    let model = model_of(config)?;
    let model = model.as_ref();
    let c = &config.convergence;
    let scales: Vec<(Option<u64>, Option<f64>)> = if !c.areas.is_empty() {
        c.areas.iter().map(|&s| (None, Some(s))).collect()
    } else {
        sizes_of(config)?;
        vec![(config.n, config.area)]
    };
    let x0 = initial_of(config, model, 0.0)?;
    let mut table = Table::new(&[
        "scale", "T", "exceed", "trials", "p_hat", "p_lo", "p_hi", "C_S", "C_lo", "C_hi", "bound",
    ]);
    let mut plot = Vec::new();
    let bound = bound_curve(c.delta, &c.t_grid, c.bound_b, c.bound_c)?;
    for (n, s) in scales {
        let sizes = population_scales(&config.model.name, n, s)?;
        let scale = n.map(|n| n as f64).or(s).expect("one of N or S");
        let setup = ConvergenceSetup {
            model,
            initial: HybridState::from_proportions(model.layout(), &x0, &sizes)?,
            scale,
            t_grid: c.t_grid.clone(),
            delta: c.delta,
            trials: config.trials,
            seed: config.seed,
            spec: spec_of(config),
            sample_dt: config.sample_dt,
        };
        let sups = crate::analysis::deviation_sups(&setup)?;
        let rows = exceedance_table(&sups, &c.t_grid, c.delta, scale)?;
        let series = if s.is_some() {
            format!("S={scale}")
        } else {
            format!("N={scale}")
        };
        for (r, b) in rows.iter().zip(&bound) {
            table.push(vec![
                scale,
                r.t,
                r.exceed as f64,
                r.trials as f64,
                r.p_hat,
                r.p_lo,
                r.p_hi,
                r.c_s,
                r.c_lo,
                r.c_hi,
                b.1,
            ]);
            plot.push(PlotPoint::new(series.clone(), r.t, r.c_s).band(r.c_lo, r.c_hi));
        }
    }
    for (t, b) in bound {
        plot.push(PlotPoint::new("bound", t, b));
    }
    Ok((table, plot, vec![]))
}

fn rate_sweep(config: &ExperimentConfig) -> Result<Outputs> {
    let s = &config.sweep;
    if s.currents.is_empty() {
        return Err(Error::config("sweep.currents", "must not be empty for rate-variance"));
    }
    let spec = IntegratorSpec::rk4(config.dt);
    let rows: Vec<Result<Vec<f64>>> = s
        .currents
        .par_iter()
        .map(|&current| {
            let mut overrides = config.model.overrides();
            overrides.current = Some(current);
            let model = build_model(&config.model.name, &overrides)?;
            let model = model.as_ref();
            let x0 = match &config.initial {
                Some(x) => x.clone(),
                None => quasi_steady_state(model, s.v_start)?,
            };
            let start = if s.warmup > 0.0 {
                path_of(model, &x0, s.warmup, &spec, &Grid::Steps)?
                    .last_state()
                    .to_vec()
            } else {
                x0
            };
            let path = path_of(model, &start, s.window, &spec, &Grid::Steps)?;
            let swing = voltage_swing(&path, 0.0);
            let cov = covariance_ode(model, &path, &CovarianceOptions::default())?;
            let rv = rate_variance(model, &path, &cov, &s.threshold, s.window)?;
            Ok(vec![
                current,
                swing,
                f64::from(u8::from(swing > s.min_swing)),
                rv.rate,
                rv.sigma2_literal,
                rv.xi_literal(),
                rv.sigma2_exact,
                rv.xi_exact(),
            ])
        })
        .collect();
    let mut table = Table::new(&["I", "swing", "spiking", "r", "sigma2", "xi", "sigma2_exact", "xi_exact"]);
    let mut plot = Vec::new();
    for row in rows {
        let row = row?;
        for (k, name) in [(3, "r"), (4, "sigma2"), (5, "xi"), (6, "sigma2-exact"), (7, "xi-exact")] {
            plot.push(PlotPoint::new(name, row[0], row[k]));
        }
        table.push(row);
    }
    Ok((table, plot, vec![]))
}

fn ml_of(config: &ExperimentConfig) -> Result<MorrisLecar> {
    let class2 = match config.model.name.as_str() {
        "ml-class1" => false,
        "ml-class2" => true,
        other => {
            return Err(Error::config(
                "model.name",
                format!("this command needs a Morris–Lecar model, not `{other}`"),
            ))
        }
    };
    let mut p = config
        .model
        .ml
        .clone()
        .unwrap_or_else(|| if class2 { MlParams::class2() } else { MlParams::class1() });
    if let Some(i) = config.model.current {
        p.current = i;
    }
    p.validate()?;
    Ok(MorrisLecar::new(p))
}

fn latency(config: &ExperimentConfig) -> Result<Outputs> {
    let ml = ml_of(config)?;
    let l = &config.latency;
    let rest = initial_of(config, &ml, 0.0)?;
    let gap = l.v_th - rest[0];
    if !(gap > 0.0) {
        return Err(Error::invalid("the resting voltage must lie below the threshold"));
    }
    let problem = LatencyProblem {
        model: &ml,
        rest,
        v_th: l.v_th,
        t_max: l.t_max,
        spec: spec_of(config),
    };
    let a_th = problem.amplitude_threshold(0.0, gap, l.threshold_tol)?;
    let amplitudes = if l.amplitudes.is_empty() {
        // geometric spacing of A − A_th
        let (lo, hi) = ((1e-2f64).ln(), (gap - a_th).max(0.1).ln());
        (0..20)
            .map(|i| a_th + (lo + (hi - lo) * i as f64 / 19.0).exp())
            .collect()
    } else {
        l.amplitudes.clone()
    };
    let rows: Vec<Result<Vec<f64>>> = amplitudes
        .par_iter()
        .map(|&a| {
            let lat = problem.latency(a)?;
            Ok(vec![
                a,
                lat.t_cross,
                lat.p,
                lat.p / (lat.t_cross * lat.t_cross),
                lat.s_v,
                lat.f_v,
            ])
        })
        .collect();
    let mut table = Table::new(&["A", "T", "P", "P_over_T2", "S_v", "F_v"]);
    let mut plot = Vec::new();
    for row in rows {
        let row = row?;
        plot.push(PlotPoint::new("T", row[0], row[1]));
        plot.push(PlotPoint::new("P", row[0], row[2]));
        plot.push(PlotPoint::new("P/T^2", row[0], row[3]));
        plot.push(PlotPoint::new("S_v", row[0], row[4]));
        plot.push(PlotPoint::new("F_v", row[0], row[5]));
        plot.push(PlotPoint::new("P-vs-T", row[1], row[2]));
        table.push(row);
    }
    Ok((table, plot, vec![("A_th", a_th.to_string())]))
}

/// Starting state rounded to the channel counts when `N`/`S` is given.
fn rounded_start(
    config: &ExperimentConfig,
    model: &dyn HybridModel,
    kick: f64,
) -> Result<(Vec<f64>, Option<HybridState>)> {
    let x0 = initial_of(config, model, kick)?;
    if scale_of(config).is_none() {
        return Ok((x0, None));
    }
    let state = HybridState::from_proportions(model.layout(), &x0, &sizes_of(config)?)?;
    Ok((state.to_full(), Some(state)))
}

fn passage(config: &ExperimentConfig) -> Result<Outputs> {
    let model = model_of(config)?;
    let model = model.as_ref();
    let p = &config.passage;
    let (x0, state) = rounded_start(config, model, p.amplitude)?;
    let spec = spec_of(config);
    let path = path_of(model, &x0, config.horizon, &spec, &Grid::Steps)?;
    let cov = covariance_ode(
        model,
        &path,
        &CovarianceOptions {
            weights: weights_of(config, model)?,
            ..Default::default()
        },
    )?;
    let dim = model.layout().dim();
    let (phi, grad) = PassageProblem::voltage_threshold(p.v_th, dim);
    let problem = PassageProblem { phi: &phi, grad: &grad };
    let stats = first_passage_stats(model, &problem, &x0, config.horizon, &spec, &cov)?;
    let (mut mc_mean, mut mc_var, mut mc_n) = (f64::NAN, f64::NAN, 0.0);
    if let (Some(state), Some(scale)) = (state, scale_of(config)) {
        let stop = |x: &[f64]| p.v_th - x[0];
        let taus: Vec<Result<f64>> = (0..config.trials)
            .into_par_iter()
            .map(|trial| {
                let run = SimulationRun {
                    model,
                    initial: state.clone(),
                    horizon: config.horizon,
                    seed: config.seed,
                    trial,
                    spec,
                    sample_grid: Vec::new(),
                };
                let out = simulate_with(&run, &mut (), Some(&stop)).map_err(|e| Error::Trial {
                    trial,
                    source: Box::new(e),
                })?;
                if !out.stopped {
                    return Err(Error::Trial {
                        trial,
                        source: Box::new(Error::NoPassage { t_max: config.horizon }),
                    });
                }
                Ok(scale.sqrt() * (out.t_end - stats.tau))
            })
            .collect();
        let taus: Vec<f64> = taus.into_iter().collect::<Result<_>>()?;
        if taus.len() > 1 {
            (mc_mean, mc_var) = mean_var(&taus);
            mc_n = taus.len() as f64;
        }
    }
    let mut table = Table::new(&["tau", "grad_dot_f", "var_tau", "mc_trials", "mc_mean", "mc_var"]);
    table.push(vec![stats.tau, stats.grad_dot_f, stats.var_tau, mc_n, mc_mean, mc_var]);
    let names = crate::model::coordinate_names(model);
    let mut plot = Vec::new();
    for a in 0..dim {
        plot.push(PlotPoint::new(
            "location-variance",
            a as f64,
            stats.location_cov[(a, a)],
        ));
    }
    let extra = vec![
        ("coordinates", names.join(",")),
        ("x_tau", format!("{:?}", stats.x_tau)),
    ];
    Ok((table, plot, extra))
}

fn psp(config: &ExperimentConfig) -> Result<Outputs> {
    let model = model_of(config)?;
    let model = model.as_ref();
    let p = &config.psp;
    let (x0, state) = rounded_start(config, model, p.amplitude)?;
    let spec = spec_of(config);
    let path = path_of(model, &x0, config.horizon, &spec, &Grid::Steps)?;
    let times = if p.times.is_empty() {
        (1..=20).map(|i| config.horizon * i as f64 / 20.0).collect()
    } else {
        p.times.clone()
    };
    let cov = covariance_ode(
        model,
        &path,
        &CovarianceOptions {
            weights: weights_of(config, model)?,
            ..Default::default()
        },
    )?;
    let psi = psp_functional(&path, &p.kernel, &times)?;
    let var = psp_variance(model, &path, &cov, &p.kernel, &times)?;
    let mut mc = vec![f64::NAN; times.len()];
    if let (Some(state), Some(scale)) = (state, scale_of(config)) {
        let grid = uniform_grid(0.0, config.horizon, config.sample_dt);
        let runs: Vec<Result<Vec<f64>>> = (0..config.trials)
            .into_par_iter()
            .map(|trial| {
                let traj = simulate(&SimulationRun {
                    model,
                    initial: state.clone(),
                    horizon: config.horizon,
                    seed: config.seed,
                    trial,
                    spec,
                    sample_grid: grid.clone(),
                })
                .map_err(|e| Error::Trial {
                    trial,
                    source: Box::new(e),
                })?;
                psp_functional(&traj.samples, &p.kernel, &times)
            })
            .collect();
        let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;
        if runs.len() > 1 {
            for k in 0..times.len() {
                let z: Vec<f64> = runs.iter().map(|r| scale.sqrt() * (r[k] - psi[k])).collect();
                mc[k] = mean_var(&z).1;
            }
        }
    }
    let mut table = Table::new(&["t", "psi", "var_exact", "var_literal", "mc_var"]);
    let mut plot = Vec::new();
    for k in 0..times.len() {
        table.push(vec![times[k], psi[k], var.exact[k], var.literal[k], mc[k]]);
        let half = Z95 * var.exact[k].sqrt();
        plot.push(PlotPoint::new("psi", times[k], psi[k]));
        plot.push(PlotPoint::new("var-exact", times[k], var.exact[k]));
        plot.push(PlotPoint::new("var-literal", times[k], var.literal[k]));
        if let Some(scale) = scale_of(config) {
            let h = half / scale.sqrt();
            plot.push(PlotPoint::new("psi-band", times[k], psi[k]).band(psi[k] - h, psi[k] + h));
        }
    }
    Ok((table, plot, vec![]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(command: Command) -> ExperimentConfig {
        let mut c = ExperimentConfig {
            command,
            horizon: 5.0,
            trials: 3,
            seed: 11,
            ..Default::default()
        };
        c.model.name = "two-state-example".into();
        c.n = Some(50);
        c.initial = Some(vec![0.0, 1.0, 0.0]);
        c.convergence.t_grid = vec![1.0, 2.0];
        c.convergence.delta = 0.01;
        c.psp.times = vec![2.0, 4.0];
        c.passage.v_th = 0.2;
        c
    }

    #[test]
    fn every_generic_command_runs() {
        for cmd in [
            Command::Deterministic,
            Command::Simulate,
            Command::Langevin,
            Command::Moments,
            Command::Convergence,
            Command::Psp,
        ] {
            let out = run(&small(cmd)).unwrap_or_else(|e| panic!("{cmd:?}: {e}"));
            assert_eq!(out.len(), 2);
            assert!(out[0].contents.starts_with("# generator: "));
            assert!(out[1].contents.contains("series,x,y,ylo,yhi\n"));
        }
    }

    #[test]
    fn passage_on_the_example() {
        // v' = u − v from v = 0 with u relaxing to 1/3 crosses 0.2
        let mut c = small(Command::Passage);
        c.model.example = Some(crate::models::ExampleParams {
            alpha: 1.0,
            alpha_slope: 0.0,
            beta: 2.0,
            beta_slope: 0.0,
            coupling: 1.0,
        });
        c.initial = Some(vec![0.0, 0.0, 1.0]);
        c.trials = 4;
        let out = run(&c).unwrap();
        let line = out[0].contents.lines().last().unwrap().to_string();
        let tau: f64 = line.split(',').next().unwrap().parse().unwrap();
        assert!(tau > 0.0 && tau < 5.0);
    }

    #[test]
    fn thread_count_does_not_change_bytes() {
        let mut a = small(Command::Simulate);
        a.threads = Some(1);
        let mut b = a.clone();
        b.threads = Some(3);
        assert_eq!(run(&a).unwrap(), run(&b).unwrap());
    }

    #[test]
    fn latency_requires_morris_lecar() {
        let err = run(&small(Command::Latency)).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "model.name"));
    }

    #[test]
    fn missing_scale_is_a_config_error() {
        let mut c = small(Command::Simulate);
        c.n = None;
        assert!(!run(&c).unwrap_err().is_numerical());
    }
}
