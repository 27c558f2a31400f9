//! Exact simulation of the stochastic hybrid model `(S_N)`.
//!
//! Between jumps the global variable follows `dV/dt = f(V, e)` with the
//! proportions frozen. Jump times come from the integrated intensity: draw
//! `E ~ Exp(1)` and integrate the augmented system `(V̇ = f, ȧ = Λ)` until
//! `a = E`. The crossing is localized by a safeguarded secant search on the
//! step length, so no global bound on `Λ` is needed even through spike
//! upstrokes where the rates change quickly.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::{check_rates, HybridModel, HybridState};
use crate::ode::{DensePath, IntegratorSpec};
use crate::rng::{stream, TrialRng};
use crate::trajectory::{JumpEvent, Trajectory, TrajectoryMeta};

/// One trajectory request.
#[derive(Clone)]
pub struct SimulationRun<'a> {
    pub model: &'a dyn HybridModel,
    pub initial: HybridState,
    pub horizon: f64,
    /// Root seed; the stream is `(seed, trial)`.
    pub seed: u64,
    pub trial: u64,
    pub spec: IntegratorSpec,
    /// Increasing output times in `[0, horizon]`.
    pub sample_grid: Vec<f64>,
}

impl SimulationRun<'_> {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("horizon must be positive"));
        }
        self.spec.validate()?;
        self.initial.check(self.model.layout())?;
        if self.sample_grid.windows(2).any(|w| w[1] <= w[0])
            || self.sample_grid.first().is_some_and(|&t| t < 0.0)
            || self.sample_grid.last().is_some_and(|&t| t > self.horizon)
        {
            return Err(Error::invalid("sample grid must be increasing inside [0, horizon]"));
        }
        Ok(())
    }
}

/// Receives the path as it is generated.
pub trait Observer {
    /// State at a requested grid time.
    fn sample(&mut self, _t: f64, _x: &[f64]) {}
    /// A jump at `t`; `before`/`after` are the left and right limits.
    fn jump(&mut self, _t: f64, _before: &[f64], _after: &[f64], _event: &JumpEvent) {}
}

impl Observer for () {}

/// Event function for early termination: the run stops at the first time
/// `φ(x) ≤ 0`.
pub type StopFn<'a> = &'a dyn Fn(&[f64]) -> f64;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Horizon, or the stopping time when a stop function fired.
    pub t_end: f64,
    pub stopped: bool,
    pub state: HybridState,
    /// Full state at `t_end`.
    pub x_end: Vec<f64>,
    pub n_events: u64,
}

struct Flow<'m> {
    model: &'m dyn HybridModel,
    p: usize,
    x: Vec<f64>,
    counts: Vec<Vec<u64>>,
    sizes: Vec<u64>,
    offsets: Vec<usize>,
    rates: Vec<Vec<f64>>,
    k: [Vec<f64>; 3],
    tmp: Vec<f64>,
}

impl<'m> Flow<'m> {
    fn new(model: &'m dyn HybridModel, initial: &HybridState) -> Self {
        let layout = model.layout();
        let p = layout.global();
        Self {
            model,
            p,
            x: initial.to_full(),
            counts: initial.counts.clone(),
            sizes: initial.sizes.clone(),
            offsets: (0..layout.n_populations()).map(|j| layout.offset(j)).collect(),
            rates: layout.population_sizes().iter().map(|&r| vec![0.0; r * r]).collect(),
            k: std::array::from_fn(|_| vec![0.0; p]),
            tmp: vec![0.0; p],
        }
    }

    /// Drift at global value `v` into `dv`; returns `Λ`.
    fn eval(&mut self, t: f64, v: &[f64], dv: &mut [f64]) -> Result<f64> {
        self.x[..self.p].copy_from_slice(v);
        self.model.drift(&self.x, dv);
        if dv.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite { what: "drift", time: t });
        }
        let lam = self.intensity()?;
        if !lam.is_finite() {
            return Err(Error::NonFinite {
                what: "jump intensity",
                time: t,
            });
        }
        Ok(lam)
    }

    fn intensity(&mut self) -> Result<f64> {
        let mut lam = 0.0;
        for (j, counts) in self.counts.iter().enumerate() {
            let r = counts.len();
            let buf = &mut self.rates[j];
            self.model.rates(j, &self.x, buf);
            check_rates(j, r, buf)?;
            for (a, &n) in counts.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                let out: f64 = (0..r).filter(|&b| b != a).map(|b| buf[a * r + b]).sum();
                lam += n as f64 * out;
            }
        }
        Ok(lam)
    }

    /// RK4 step of the augmented system from `(t, v)` with first stage
    /// `(k1, lam1)`; returns the intensity integral over the step.
    fn step(&mut self, t: f64, v: &[f64], k1: &[f64], lam1: f64, h: f64, out: &mut [f64]) -> Result<f64> {
        let p = self.p;
        let mut ks = std::mem::take(&mut self.k);
        let mut tmp = std::mem::take(&mut self.tmp);
        let res = (|| {
            for i in 0..p {
                tmp[i] = v[i] + 0.5 * h * k1[i];
            }
            let lam2 = self.eval(t, &tmp, &mut ks[0])?;
            for i in 0..p {
                tmp[i] = v[i] + 0.5 * h * ks[0][i];
            }
            let lam3 = self.eval(t, &tmp, &mut ks[1])?;
            for i in 0..p {
                tmp[i] = v[i] + h * ks[1][i];
            }
            let lam4 = self.eval(t, &tmp, &mut ks[2])?;
            for i in 0..p {
                out[i] = v[i] + h / 6.0 * (k1[i] + 2.0 * ks[0][i] + 2.0 * ks[1][i] + ks[2][i]);
            }
            Ok(h / 6.0 * (lam1 + 2.0 * lam2 + 2.0 * lam3 + lam4))
        })();
        self.k = ks;
        self.tmp = tmp;
        res
    }

    fn set_global(&mut self, v: &[f64]) {
        self.x[..self.p].copy_from_slice(v);
    }

    /// Picks `(j, a, b)` with probability `n_a α_ab / Λ` using one uniform.
    fn select(&mut self, u: f64) -> Result<Option<(usize, usize, usize)>> {
        let total = self.intensity()?;
        if total <= 0.0 {
            return Ok(None);
        }
        let target = u * total;
        let mut acc = 0.0;
        let mut last = None;
        for (j, counts) in self.counts.iter().enumerate() {
            let r = counts.len();
            let buf = &self.rates[j];
            for (a, &n) in counts.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                for b in 0..r {
                    if b == a || buf[a * r + b] <= 0.0 {
                        continue;
                    }
                    acc += n as f64 * buf[a * r + b];
                    last = Some((j, a, b));
                    if acc > target {
                        return Ok(last);
                    }
                }
            }
        }
        // rounding left `target` just above the cumulative sum
        Ok(last)
    }

    fn apply(&mut self, j: usize, a: usize, b: usize) {
        let n = self.sizes[j] as f64;
        let off = self.offsets[j];
        self.counts[j][a] -= 1;
        self.counts[j][b] += 1;
        self.x[off + a] = self.counts[j][a] as f64 / n;
        self.x[off + b] = self.counts[j][b] as f64 / n;
    }

    fn state(&self) -> HybridState {
        HybridState {
            v: self.x[..self.p].to_vec(),
            counts: self.counts.clone(),
            sizes: self.sizes.clone(),
        }
    }
}

/// Jump-law probabilities `(event, probability)` at state `s`: population `j`
/// with probability `N_j λ̃^(j)/Λ`, then `a → b` with probability
/// `e_a α_ab / λ̃^(j)`. Zero-probability transitions are omitted.
pub fn jump_law(model: &dyn HybridModel, s: &HybridState) -> Result<Vec<(JumpEvent, f64)>> {
    let layout = model.layout();
    s.check(layout)?;
    let x = s.to_full();
    let mut out = Vec::new();
    let mut per_pop = Vec::new();
    for j in 0..layout.n_populations() {
        let r = layout.population_sizes()[j];
        let mut buf = vec![0.0; r * r];
        model.rates(j, &x, &mut buf);
        check_rates(j, r, &buf)?;
        let off = layout.offset(j);
        let lam: f64 = (0..r)
            .map(|a| x[off + a] * (0..r).filter(|&b| b != a).map(|b| buf[a * r + b]).sum::<f64>())
            .sum();
        per_pop.push((buf, lam));
    }
    let total: f64 = per_pop.iter().zip(&s.sizes).map(|((_, l), &n)| n as f64 * l).sum();
    if total <= 0.0 {
        return Ok(out);
    }
    for (j, (buf, lam)) in per_pop.iter().enumerate() {
        if *lam <= 0.0 {
            continue;
        }
        let r = layout.population_sizes()[j];
        let off = layout.offset(j);
        let p_pop = s.sizes[j] as f64 * lam / total;
        for a in 0..r {
            for b in 0..r {
                let w = x[off + a] * buf[a * r + b];
                if a != b && w > 0.0 {
                    let ev = JumpEvent {
                        time: 0.0,
                        population: j,
                        from: a,
                        to: b,
                    };
                    out.push((ev, p_pop * w / lam));
                }
            }
        }
    }
    Ok(out)
}

/// Runs one trajectory, streaming it into `observer`.
pub fn simulate_with<O: Observer + ?Sized>(
    run: &SimulationRun<'_>,
    observer: &mut O,
    stop: Option<StopFn<'_>>,
) -> Result<Outcome> {
    run.validate()?;
    let mut rng = stream(run.seed, run.trial);
    simulate_inner(run, &mut rng, observer, stop)
}

fn simulate_inner<O: Observer + ?Sized>(
    run: &SimulationRun<'_>,
    rng: &mut TrialRng,
    observer: &mut O,
    stop: Option<StopFn<'_>>,
) -> Result<Outcome> {
    let p = run.model.layout().global();
    let mut flow = Flow::new(run.model, &run.initial);
    let grid = &run.sample_grid;
    let horizon = run.horizon;
    let dt = run.spec.dt;
    let event_tol = run.spec.event_tol;

    let mut t = 0.0;
    let mut v = run.initial.v.clone();
    let mut v_new = vec![0.0; p];
    let mut v_try = vec![0.0; p];
    let mut k1 = vec![0.0; p];
    let mut before = flow.x.clone();
    let mut lam = flow.eval(t, &v, &mut k1)?;
    let mut target: f64 = rng.sample(Exp1);
    let mut acc = 0.0;
    let mut n_events = 0u64;
    let mut gi = 0usize;

    let finish = |flow: &mut Flow, t: f64, v: &[f64], stopped: bool, n_events: u64| {
        flow.set_global(v);
        Outcome {
            t_end: t,
            stopped,
            state: flow.state(),
            x_end: flow.x.clone(),
            n_events,
        }
    };

    if let Some(phi) = stop {
        if phi(&flow.x) <= 0.0 {
            return Err(Error::invalid("stop function must be positive at the initial state"));
        }
    }
    while gi < grid.len() && grid[gi] <= t {
        observer.sample(t, &flow.x);
        gi += 1;
    }

    while t < horizon {
        let t_next = grid.get(gi).copied().unwrap_or(horizon).min(horizon);
        let h_max = (t_next - t).min(dt);
        let lands = t_next - t <= dt;
        let tol_a = event_tol * lam.max(f64::MIN_POSITIVE);
        let guess = if lam > 0.0 { (target - acc) / lam } else { f64::INFINITY };
        let aimed = guess < h_max;
        let h = if aimed { guess } else { h_max };

        let inc = flow.step(t, &v, &k1, lam, h, &mut v_new)?;
        let resid = acc + inc - target;

        // (step length actually taken, whether it ends on a jump)
        let (s, jumps) = if resid < -tol_a || (!aimed && resid < 0.0) {
            (h, false)
        } else if resid <= tol_a {
            (h, true)
        } else {
            // overshoot: Illinois regula falsi on the step length
            let (mut lo, mut f_lo) = (0.0, acc - target);
            let (mut hi, mut f_hi) = (h, resid);
            let mut side = 0i8;
            let mut s = h;
            v_try.copy_from_slice(&v_new);
            for _ in 0..200 {
                let mut cand = lo - f_lo * (hi - lo) / (f_hi - f_lo);
                if !(cand > lo && cand < hi) {
                    cand = 0.5 * (lo + hi);
                }
                let inc_c = flow.step(t, &v, &k1, lam, cand, &mut v_try)?;
                let f_c = acc + inc_c - target;
                s = cand;
                if f_c.abs() <= tol_a || hi - lo <= event_tol {
                    break;
                }
                if f_c > 0.0 {
                    hi = cand;
                    f_hi = f_c;
                    if side == 1 {
                        f_lo *= 0.5;
                    }
                    side = 1;
                } else {
                    lo = cand;
                    f_lo = f_c;
                    if side == -1 {
                        f_hi *= 0.5;
                    }
                    side = -1;
                }
            }
            v_new.copy_from_slice(&v_try);
            (s, true)
        };

        if let Some(phi) = stop {
            flow.set_global(&v_new);
            if phi(&flow.x) <= 0.0 {
                let (mut lo, mut hi) = (0.0, s);
                v_try.copy_from_slice(&v_new);
                let mut v_hi = v_new.clone();
                while hi - lo > event_tol {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    flow.step(t, &v, &k1, lam, mid, &mut v_try)?;
                    flow.set_global(&v_try);
                    if phi(&flow.x) <= 0.0 {
                        hi = mid;
                        v_hi.copy_from_slice(&v_try);
                    } else {
                        lo = mid;
                    }
                }
                return Ok(finish(&mut flow, t + hi, &v_hi, true, n_events));
            }
        }

        t = if !jumps && !aimed && lands { t_next } else { t + s };
        std::mem::swap(&mut v, &mut v_new);

        if jumps {
            flow.set_global(&v);
            before.copy_from_slice(&flow.x);
            let u: f64 = rng.random();
            if let Some((j, a, b)) = flow.select(u)? {
                flow.apply(j, a, b);
                n_events += 1;
                let ev = JumpEvent {
                    time: t,
                    population: j,
                    from: a,
                    to: b,
                };
                observer.jump(t, &before, &flow.x, &ev);
                if let Some(phi) = stop {
                    if phi(&flow.x) <= 0.0 {
                        return Ok(finish(&mut flow, t, &v, true, n_events));
                    }
                }
            }
            target = rng.sample(Exp1);
            acc = 0.0;
        } else {
            acc += inc;
        }
        lam = flow.eval(t, &v, &mut k1)?;
        flow.set_global(&v);
        while gi < grid.len() && grid[gi] <= t {
            observer.sample(grid[gi], &flow.x);
            gi += 1;
        }
    }
    Ok(finish(&mut flow, t, &v, false, n_events))
}

/// Records the full path.
#[derive(Debug, Clone)]
pub struct Recorder {
    pub samples: DensePath,
    pub events: Vec<JumpEvent>,
    pub event_states: Vec<f64>,
}

impl Recorder {
    pub fn new(dim: usize) -> Self {
        Self {
            samples: DensePath::new(dim),
            events: Vec::new(),
            event_states: Vec::new(),
        }
    }
}

impl Observer for Recorder {
    fn sample(&mut self, t: f64, x: &[f64]) {
        self.samples.push(t, x);
    }

    fn jump(&mut self, _t: f64, _before: &[f64], after: &[f64], event: &JumpEvent) {
        self.events.push(*event);
        self.event_states.extend_from_slice(after);
    }
}

/// Simulates one trajectory and records every grid sample and jump.
pub fn simulate(run: &SimulationRun<'_>) -> Result<Trajectory> {
    let layout = run.model.layout().clone();
    let mut rec = Recorder::new(layout.dim());
    simulate_with(run, &mut rec, None)?;
    Ok(Trajectory {
        layout,
        samples: rec.samples,
        events: rec.events,
        event_states: rec.event_states,
        meta: TrajectoryMeta {
            model: run.model.name().to_string(),
            sizes: run.initial.sizes.clone(),
            seed: Some(run.seed),
            trial: Some(run.trial),
        },
    })
}

fn squared_deviation(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `sup_t ‖V_N − v‖² + Σ_j ‖e^(j)_N − g^(j)‖²` over the grid samples and
/// both one-sided limits at every jump, against a linearly interpolated
/// deterministic path.
pub fn deviation_sup(traj: &Trajectory, det: &DensePath) -> Result<f64> {
    if det.dim != traj.layout.dim() || traj.samples.dim != det.dim {
        return Err(Error::GridMismatch(format!(
            "dimensions differ: trajectory {} vs deterministic {}",
            traj.samples.dim, det.dim
        )));
    }
    let mut y = vec![0.0; det.dim];
    let mut sup: f64 = 0.0;
    for (i, &t) in traj.samples.times.iter().enumerate() {
        if !det.covers(t) {
            return Err(Error::GridMismatch(format!(
                "deterministic path does not cover t = {t}"
            )));
        }
        det.interpolate_into(t, &mut y);
        sup = sup.max(squared_deviation(traj.samples.state(i), &y));
    }
    for (i, ev) in traj.events.iter().enumerate() {
        if !det.covers(ev.time) {
            return Err(Error::GridMismatch(format!(
                "deterministic path does not cover t = {}",
                ev.time
            )));
        }
        det.interpolate_into(ev.time, &mut y);
        sup = sup.max(squared_deviation(traj.event_state(i), &y));
        sup = sup.max(squared_deviation(&traj.pre_event_state(i), &y));
    }
    Ok(sup)
}

/// Streaming version of [`deviation_sup`] reporting the running supremum at
/// a set of checkpoint horizons.
pub struct RunningDeviation<'a> {
    det: &'a DensePath,
    checkpoints: Vec<f64>,
    sups: Vec<f64>,
    current: f64,
    next: usize,
    y: Vec<f64>,
}

impl<'a> RunningDeviation<'a> {
    pub fn new(det: &'a DensePath, checkpoints: &[f64]) -> Self {
        Self {
            det,
            checkpoints: checkpoints.to_vec(),
            sups: vec![f64::NAN; checkpoints.len()],
            current: 0.0,
            next: 0,
            y: vec![0.0; det.dim],
        }
    }

    fn advance(&mut self, t: f64) {
        while self.next < self.checkpoints.len() && self.checkpoints[self.next] < t {
            self.sups[self.next] = self.current;
            self.next += 1;
        }
    }

    fn observe(&mut self, t: f64, x: &[f64]) {
        self.det.interpolate_into(t, &mut self.y);
        self.current = self.current.max(squared_deviation(x, &self.y));
    }

    /// Supremum over `[0, T]` for every checkpoint `T`.
    pub fn finish(mut self) -> Vec<f64> {
        self.advance(f64::INFINITY);
        self.sups
    }
}

impl Observer for RunningDeviation<'_> {
    fn sample(&mut self, t: f64, x: &[f64]) {
        self.advance(t);
        self.observe(t, x);
    }

    fn jump(&mut self, t: f64, before: &[f64], after: &[f64], _event: &JumpEvent) {
        self.advance(t);
        self.observe(t, before);
        self.observe(t, after);
    }
}
