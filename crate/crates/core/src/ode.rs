//! Explicit ODE integration with dense grid output and event localization.
//!
//! Fixed-step classical RK4 is the default. An adaptive Dormand–Prince 5(4)
//! pair is available for stiff-ish stretches such as spike upstrokes near a
//! bifurcation. Between grid points the contract is linear interpolation.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Rk4,
    DormandPrince,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntegratorSpec {
    pub method: Method,
    /// Base step (fixed step for RK4, initial/maximum step for adaptive).
    pub dt: f64,
    /// Local error tolerance of the adaptive pair.
    pub tol: f64,
    /// Time tolerance for event localization.
    pub event_tol: f64,
}

impl IntegratorSpec {
    pub fn rk4(dt: f64) -> Self {
        Self {
            method: Method::Rk4,
            dt,
            tol: 1e-8,
            event_tol: 1e-10,
        }
    }

    pub fn adaptive(dt: f64, tol: f64) -> Self {
        Self {
            method: Method::DormandPrince,
            dt,
            tol,
            event_tol: 1e-10,
        }
    }

    pub fn with_event_tol(mut self, event_tol: f64) -> Self {
        self.event_tol = event_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("dt", self.dt), ("tol", self.tol), ("event_tol", self.event_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Which times to report.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// Every internal step.
    Steps,
    /// `t0, t0 + Δ, t0 + 2Δ, …` and the end point.
    Every(f64),
    /// Explicit increasing times inside `[t0, t1]`.
    Times(Vec<f64>),
}

impl Grid {
    fn times(&self, t0: f64, t1: f64) -> Result<Option<Vec<f64>>> {
        match self {
            Grid::Steps => Ok(None),
            Grid::Every(step) => {
                if !(step.is_finite() && *step > 0.0) {
                    return Err(Error::invalid("grid spacing must be positive"));
                }
                Ok(Some(uniform_grid(t0, t1, *step)))
            }
            Grid::Times(ts) => {
                if ts.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("grid times must be strictly increasing"));
                }
                if ts.first().is_some_and(|&t| t < t0) || ts.last().is_some_and(|&t| t > t1) {
                    return Err(Error::invalid("grid times must lie inside the integration interval"));
                }
                Ok(Some(ts.clone()))
            }
        }
    }
}

/// `t0, t0 + Δ, …` up to and including `t1` (with `t1` appended if the
/// spacing does not hit it within rounding).
pub fn uniform_grid(t0: f64, t1: f64, step: f64) -> Vec<f64> {
    let n = ((t1 - t0) / step + 1e-9).floor() as usize;
    let mut ts: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * step).collect();
    if let Some(last) = ts.last_mut() {
        if (t1 - *last).abs() <= 1e-9 * step.max(t1.abs()) {
            *last = t1;
        } else if *last < t1 {
            ts.push(t1);
        }
    }
    ts
}

/// Samples of a path on an increasing time grid, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensePath {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
}

impl DensePath {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            times: Vec::new(),
            states: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, y: &[f64]) {
        debug_assert_eq!(y.len(), self.dim);
        self.times.push(t);
        self.states.extend_from_slice(y);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("empty path")
    }

    /// Component `k` along the whole grid.
    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.states[i * self.dim + k]).collect()
    }

    pub fn covers(&self, t: f64) -> bool {
        !self.is_empty() && t >= self.times[0] - 1e-12 && t <= self.t_end() + 1e-12
    }

    /// Linear interpolation at `t` (clamped to the grid ends).
    pub fn interpolate_into(&self, t: f64, out: &mut [f64]) {
        let n = self.len();
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            out.copy_from_slice(self.state(0));
            return;
        }
        if i >= n {
            out.copy_from_slice(self.state(n - 1));
            return;
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (self.state(i - 1), self.state(i));
        for k in 0..self.dim {
            out[k] = a[k] + w * (b[k] - a[k]);
        }
    }

    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.interpolate_into(t, &mut out);
        out
    }
}

/// Right-hand side `dy/dt = F(t, y)`.
pub trait Derivative {
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

impl<F> Derivative for F
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self(t, y, dy)
    }
}

struct Work {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }
}

fn eval_checked<D: Derivative>(deriv: &mut D, t: f64, y: &[f64], dy: &mut [f64], last_good: f64) -> Result<()> {
    deriv.eval(t, y, dy)?;
    if dy.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration {
            last_good,
            reason: format!("non-finite derivative at t = {t}"),
        });
    }
    Ok(())
}

/// One classical RK4 step.
fn rk4_step<D: Derivative>(deriv: &mut D, t: f64, y: &[f64], h: f64, out: &mut [f64], w: &mut Work) -> Result<()> {
    let n = y.len();
    let [k1, k2, k3, k4, ..] = &mut w.k;
    let tmp = &mut w.tmp;
    eval_checked(deriv, t, y, k1, t)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    eval_checked(deriv, t + 0.5 * h, tmp, k2, t)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    eval_checked(deriv, t + 0.5 * h, tmp, k3, t)?;
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    eval_checked(deriv, t + h, tmp, k4, t)?;
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand–Prince step; returns the scaled error norm.
#[allow(clippy::needless_range_loop)]
fn dp_step<D: Derivative>(
    deriv: &mut D,
    t: f64,
    y: &[f64],
    h: f64,
    tol: f64,
    out: &mut [f64],
    w: &mut Work,
) -> Result<f64> {
    let n = y.len();
    for s in 0..7 {
        for i in 0..n {
            let mut acc = y[i];
            for (r, a) in DP_A[s].iter().enumerate().take(s) {
                acc += h * a * w.k[r][i];
            }
            w.tmp[i] = acc;
        }
        eval_checked(deriv, t + DP_C[s] * h, &w.tmp, &mut w.k[s], t)?;
    }
    let mut err: f64 = 0.0;
    for i in 0..n {
        let mut acc = y[i];
        let mut e = 0.0;
        for s in 0..7 {
            acc += h * DP_B[s] * w.k[s][i];
            e += h * DP_E[s] * w.k[s][i];
        }
        out[i] = acc;
        let scale = tol * (1.0 + y[i].abs().max(acc.abs()));
        err = err.max((e / scale).abs());
    }
    Ok(err)
}

/// Advances `y` from `t` to `t_end` (no output in between).
#[allow(clippy::too_many_arguments)]
fn advance<D: Derivative>(
    deriv: &mut D,
    t: f64,
    y: &mut [f64],
    t_end: f64,
    spec: &IntegratorSpec,
    h_adapt: &mut f64,
    w: &mut Work,
    next: &mut [f64],
    mut on_step: impl FnMut(f64, &[f64]),
) -> Result<()> {
    let span = t_end - t;
    if span <= 0.0 {
        return Ok(());
    }
    match spec.method {
        Method::Rk4 => {
            let n = (span / spec.dt - 1e-9).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for i in 0..n {
                let ti = t + i as f64 * h;
                rk4_step(deriv, ti, y, h, next, w)?;
                y.copy_from_slice(next);
                let tn = if i + 1 == n { t_end } else { t + (i + 1) as f64 * h };
                on_step(tn, y);
            }
        }
        Method::DormandPrince => {
            let mut tc = t;
            let mut rejects = 0usize;
            while tc < t_end {
                let mut h = h_adapt.min(spec.dt).min(t_end - tc);
                let last = h >= t_end - tc;
                if last {
                    h = t_end - tc;
                }
                let err = dp_step(deriv, tc, y, h, spec.tol, next, w)?;
                if err <= 1.0 {
                    tc = if last { t_end } else { tc + h };
                    y.copy_from_slice(next);
                    on_step(tc, y);
                    rejects = 0;
                    let fac = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    if !last {
                        *h_adapt = h * fac;
                    }
                } else {
                    rejects += 1;
                    if rejects > 60 || h < 1e-14 * tc.abs().max(1.0) {
                        return Err(Error::Integration {
                            last_good: tc,
                            reason: "adaptive step size underflow".into(),
                        });
                    }
                    *h_adapt = h * (0.9 * err.powf(-0.2)).clamp(0.1, 0.5);
                }
            }
        }
    }
    Ok(())
}

/// Integrates `deriv` from `(t0, y0)` to `t1`, reporting the requested grid.
pub fn integrate<D: Derivative>(
    mut deriv: D,
    y0: &[f64],
    t0: f64,
    t1: f64,
    spec: &IntegratorSpec,
    grid: &Grid,
) -> Result<DensePath> {
    spec.validate()?;
    if !(t1 >= t0) {
        return Err(Error::invalid(format!("t1 = {t1} precedes t0 = {t0}")));
    }
    let n = y0.len();
    let mut w = Work::new(n);
    let mut y = y0.to_vec();
    let mut next = vec![0.0; n];
    let mut path = DensePath::new(n);
    let mut h_adapt = spec.dt;
    match grid.times(t0, t1)? {
        None => {
            path.push(t0, &y);
            advance(
                &mut deriv,
                t0,
                &mut y,
                t1,
                spec,
                &mut h_adapt,
                &mut w,
                &mut next,
                |t, s| path.push(t, s),
            )?;
        }
        Some(times) => {
            let mut t = t0;
            for &tg in &times {
                advance(
                    &mut deriv,
                    t,
                    &mut y,
                    tg,
                    spec,
                    &mut h_adapt,
                    &mut w,
                    &mut next,
                    |_, _| {},
                )?;
                t = t.max(tg);
                path.push(tg, &y);
            }
        }
    }
    Ok(path)
}

/// Outcome of [`integrate_until_event`].
#[derive(Debug, Clone, PartialEq)]
pub enum EventOutcome {
    /// The event function changed sign; `t` is within `event_tol` past the
    /// crossing.
    Crossed { t: f64, y: Vec<f64> },
    /// No sign change before `t_max`; `y` is the state at `t_max`.
    NoEvent { y: Vec<f64> },
}

/// Integrates until `event(y)` changes sign relative to `event(y0)`,
/// localizing the crossing by bisection of the bracketing step.
pub fn integrate_until_event<D, E>(
    mut deriv: D,
    y0: &[f64],
    t0: f64,
    t_max: f64,
    mut event: E,
    spec: &IntegratorSpec,
) -> Result<EventOutcome>
where
    D: Derivative,
    E: FnMut(&[f64]) -> f64,
{
    spec.validate()?;
    let e0 = event(y0);
    if !e0.is_finite() {
        return Err(Error::NonFinite {
            what: "event function",
            time: t0,
        });
    }
    if e0 == 0.0 {
        return Err(Error::invalid("event function must have a definite sign at the start"));
    }
    let sign = e0.signum();
    let n = y0.len();
    let mut w = Work::new(n);
    let mut y = y0.to_vec();
    let mut next = vec![0.0; n];
    let mut t = t0;
    let mut h = spec.dt;
    while t < t_max {
        let step = h.min(spec.dt).min(t_max - t);
        match spec.method {
            Method::Rk4 => rk4_step(&mut deriv, t, &y, step, &mut next, &mut w)?,
            Method::DormandPrince => {
                let err = dp_step(&mut deriv, t, &y, step, spec.tol, &mut next, &mut w)?;
                if err > 1.0 {
                    h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.5);
                    if h < 1e-14 * t.abs().max(1.0) {
                        return Err(Error::Integration {
                            last_good: t,
                            reason: "adaptive step size underflow".into(),
                        });
                    }
                    continue;
                }
                h = step
                    * if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    };
            }
        }
        let e1 = event(&next);
        if !e1.is_finite() {
            return Err(Error::NonFinite {
                what: "event function",
                time: t + step,
            });
        }
        if e1 * sign <= 0.0 {
            let (mut lo, mut hi) = (0.0, step);
            let mut y_hi = next.clone();
            let mut trial = vec![0.0; n];
            while hi - lo > spec.event_tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                match spec.method {
                    Method::Rk4 => rk4_step(&mut deriv, t, &y, mid, &mut trial, &mut w)?,
                    Method::DormandPrince => {
                        dp_step(&mut deriv, t, &y, mid, spec.tol, &mut trial, &mut w)?;
                    }
                }
                let em = event(&trial);
                if !em.is_finite() {
                    return Err(Error::NonFinite {
                        what: "event function",
                        time: t + mid,
                    });
                }
                if em * sign <= 0.0 {
                    hi = mid;
                    y_hi.copy_from_slice(&trial);
                } else {
                    lo = mid;
                }
            }
            return Ok(EventOutcome::Crossed { t: t + hi, y: y_hi });
        }
        y.copy_from_slice(&next);
        t = if step == t_max - t { t_max } else { t + step };
    }
    Ok(EventOutcome::NoEvent { y })
}
