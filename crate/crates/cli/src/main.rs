use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybridsim::experiment::{parse_grid, run, Artifact, Command, ExperimentConfig};
use hybridsim::Error;

/// Stochastic ion-channel neuron simulations and fluctuation analysis.
#[derive(Parser, Debug)]
#[command(name = "hybridsim", version)]
struct Cli {
    /// TOML configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; tables go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Fluid-limit ODE path.
    Deterministic(Overrides),
    /// Jump-process trajectories.
    Simulate(Overrides),
    /// Langevin (diffusion) trajectories.
    Langevin(Overrides),
    /// Covariance of the fluctuations along the fluid limit.
    Moments(Overrides),
    /// Probability of leaving a tube around the fluid limit.
    Convergence(Overrides),
    /// Spiking-rate variance over a current sweep.
    RateVariance(Overrides),
    /// Spike latency and its variance after a voltage kick.
    Latency(Overrides),
    /// First passage through a voltage threshold.
    Passage(Overrides),
    /// Synaptic convolution of the voltage and its variance.
    Psp(Overrides),
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    model: Option<String>,
    /// Input current.
    #[arg(long = "I", allow_hyphen_values = true)]
    current: Option<f64>,
    /// Channels per population.
    #[arg(long = "N")]
    n: Option<u64>,
    /// Membrane area (µm²) for Hodgkin–Huxley models.
    #[arg(long = "S")]
    area: Option<f64>,
    #[arg(long = "tmax", allow_hyphen_values = true)]
    horizon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    event_tol: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    sample_dt: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Squared-deviation threshold for `convergence`.
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// `a:b`, `a:step:b` or a comma list.
    #[arg(long)]
    tgrid: Option<String>,
    /// Membrane areas for `convergence`, as a grid.
    #[arg(long)]
    areas: Option<String>,
    /// Input currents for `rate-variance`, as a grid.
    #[arg(long)]
    currents: Option<String>,
    /// Kick amplitudes for `latency`, as a grid.
    #[arg(long)]
    amplitudes: Option<String>,
    /// Kick amplitude for `passage` and `psp`.
    #[arg(long, allow_hyphen_values = true)]
    amplitude: Option<f64>,
    /// Voltage threshold.
    #[arg(long, allow_hyphen_values = true)]
    vth: Option<f64>,
    /// Sigmoid steepness for `rate-variance`.
    #[arg(long)]
    steepness: Option<f64>,
    /// Averaging window for `rate-variance`.
    #[arg(long)]
    window: Option<f64>,
    /// Exponential kernel time constant for `psp`.
    #[arg(long)]
    tau: Option<f64>,
}

fn command_of(cmd: &Cmd) -> (Command, &Overrides) {
    match cmd {
        Cmd::Deterministic(o) => (Command::Deterministic, o),
        Cmd::Simulate(o) => (Command::Simulate, o),
        Cmd::Langevin(o) => (Command::Langevin, o),
        Cmd::Moments(o) => (Command::Moments, o),
        Cmd::Convergence(o) => (Command::Convergence, o),
        Cmd::RateVariance(o) => (Command::RateVariance, o),
        Cmd::Latency(o) => (Command::Latency, o),
        Cmd::Passage(o) => (Command::Passage, o),
        Cmd::Psp(o) => (Command::Psp, o),
    }
}

fn configure(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut c = match &cli.config {
        Some(path) => ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    let (command, o) = command_of(&cli.command);
    c.command = command;
    if let Some(m) = &o.model {
        c.model.name = m.clone();
    }
    if o.current.is_some() {
        c.model.current = o.current;
    }
    if o.n.is_some() {
        c.n = o.n;
        c.area = None;
    }
    if o.area.is_some() {
        c.area = o.area;
        c.n = None;
    }
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut c.horizon, o.horizon);
    set(&mut c.dt, o.dt);
    set(&mut c.event_tol, o.event_tol);
    set(&mut c.sample_dt, o.sample_dt);
    set(&mut c.convergence.delta, o.delta);
    set(&mut c.passage.amplitude, o.amplitude);
    set(&mut c.psp.amplitude, o.amplitude);
    set(&mut c.latency.v_th, o.vth);
    set(&mut c.passage.v_th, o.vth);
    set(&mut c.sweep.threshold.v_th, o.vth);
    set(&mut c.sweep.threshold.c, o.steepness);
    set(&mut c.sweep.window, o.window);
    if let Some(tau) = o.tau {
        c.psp.kernel = hybridsim::analysis::Kernel::Exponential { tau };
    }
    if let Some(t) = o.trials {
        c.trials = t;
    }
    if let Some(g) = &o.tgrid {
        c.convergence.t_grid = parse_grid(g)?;
    }
    if let Some(g) = &o.areas {
        c.convergence.areas = parse_grid(g)?;
    }
    if let Some(g) = &o.currents {
        c.sweep.currents = parse_grid(g)?;
    }
    if let Some(g) = &o.amplitudes {
        c.latency.amplitudes = parse_grid(g)?;
    }
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if cli.threads.is_some() {
        c.threads = cli.threads;
    }
    if cli.out.is_some() {
        c.out = cli.out.clone();
    }
    c.validate()?;
    Ok(c)
}

fn write(artifacts: &[Artifact], out: Option<&PathBuf>) -> Result<(), Error> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            for a in artifacts {
                std::fs::write(dir.join(&a.name), &a.contents)?;
            }
        }
        None => print!("{}", artifacts[0].contents),
    }
    Ok(())
}

fn fail(context: &str, e: &Error) -> ExitCode {
    eprintln!("error: {context}: {e}");
    ExitCode::from(if e.is_numerical() { 2 } else { 1 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let config = match configure(&cli) {
        Ok(c) => c,
        Err(e) => return fail("configuration", &e),
    };
    let artifacts = match run(&config) {
        Ok(a) => a,
        Err(e) => return fail(config.command.name(), &e),
    };
    match write(&artifacts, config.out.as_ref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail("writing output", &e),
    }
}
