//! Hodgkin–Huxley: the two-state gating and multistate channel models, with
//! the voltage shifted so that rest sits near 0 mV.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::fill_channel_block;
use crate::error::{Error, Result};
use crate::model::{HybridModel, Layout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HhParams {
    /// µF/cm²
    pub c_m: f64,
    /// mS/cm²
    pub g_l: f64,
    pub g_na: f64,
    pub g_k: f64,
    /// mV
    pub v_l: f64,
    pub v_na: f64,
    pub v_k: f64,
    /// µA/cm²
    pub current: f64,
}

impl Default for HhParams {
    fn default() -> Self {
        Self {
            c_m: 1.0,
            g_l: 0.3,
            g_na: 120.0,
            g_k: 36.0,
            v_l: 10.6,
            v_na: 115.0,
            v_k: -12.0,
            current: 0.0,
        }
    }
}

impl HhParams {
    pub fn with_current(mut self, current: f64) -> Self {
        self.current = current;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("c_m", self.c_m),
            ("g_l", self.g_l),
            ("g_na", self.g_na),
            ("g_k", self.g_k),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("hh.{key}"), "must be positive"));
            }
        }
        for (key, v) in [
            ("v_l", self.v_l),
            ("v_na", self.v_na),
            ("v_k", self.v_k),
            ("current", self.current),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("hh.{key}"), "must be finite"));
            }
        }
        Ok(())
    }
}

/// Opening and closing rates of the three gates (1/ms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HhRates {
    pub alpha_m: f64,
    pub beta_m: f64,
    pub alpha_h: f64,
    pub beta_h: f64,
    pub alpha_n: f64,
    pub beta_n: f64,
}

// x / (e^x − 1), finite through x = 0
fn vtrap(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x / 2.0 + x * x / 12.0
    } else {
        x / x.exp_m1()
    }
}

fn vtrap_deriv(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        -0.5 + x / 6.0 - x * x * x / 180.0
    } else {
        let em1 = x.exp_m1();
        (em1 - x * x.exp()) / (em1 * em1)
    }
}

pub fn hh_rates(v: f64) -> HhRates {
    HhRates {
        alpha_m: vtrap((25.0 - v) / 10.0),
        beta_m: 4.0 * (-v / 18.0).exp(),
        alpha_h: 0.07 * (-v / 20.0).exp(),
        beta_h: 1.0 / (((30.0 - v) / 10.0).exp() + 1.0),
        alpha_n: 0.1 * vtrap((10.0 - v) / 10.0),
        beta_n: 0.125 * (-v / 80.0).exp(),
    }
}

/// `d/dV` of every rate in [`hh_rates`].
pub fn hh_rate_derivatives(v: f64) -> HhRates {
    let e = ((30.0 - v) / 10.0).exp();
    HhRates {
        alpha_m: -vtrap_deriv((25.0 - v) / 10.0) / 10.0,
        beta_m: -4.0 / 18.0 * (-v / 18.0).exp(),
        alpha_h: -0.07 / 20.0 * (-v / 20.0).exp(),
        beta_h: e / 10.0 / ((e + 1.0) * (e + 1.0)),
        alpha_n: -0.1 * vtrap_deriv((10.0 - v) / 10.0) / 10.0,
        beta_n: -0.125 / 80.0 * (-v / 80.0).exp(),
    }
}

/// Channel counts from membrane area and channel densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDensities {
    /// per µm²
    pub rho_na: f64,
    pub rho_k: f64,
    /// µm²
    pub area: f64,
}

impl ChannelDensities {
    pub fn new(area: f64) -> Result<Self> {
        if !(area.is_finite() && area > 0.0) {
            return Err(Error::config("S", "membrane area must be positive"));
        }
        Ok(Self {
            rho_na: 60.0,
            rho_k: 18.0,
            area,
        })
    }

    pub fn n_na(&self) -> u64 {
        (self.rho_na * self.area).round().max(1.0) as u64
    }

    pub fn n_k(&self) -> u64 {
        (self.rho_k * self.area).round().max(1.0) as u64
    }
}

fn gate_table(alpha: f64, beta: f64, out: &mut [f64]) {
    out[0] = 0.0;
    out[1] = alpha;
    out[2] = beta;
    out[3] = 0.0;
}

/// Two-state gating model: populations `m`, `h`, `n`, each with states
/// `0` (closed) and `1` (open). Full state `(V, m0, m1, h0, h1, n0, n1)`.
#[derive(Debug, Clone)]
pub struct HhGating {
    pub params: HhParams,
    /// Drive the potassium current with `V_Na` instead of `V_K`.
    pub k_uses_na_reversal: bool,
    layout: Layout,
}

impl HhGating {
    pub fn new(params: HhParams) -> Self {
        Self {
            params,
            k_uses_na_reversal: false,
            layout: Layout::new(1, &[2, 2, 2]).expect("static layout"),
        }
    }

    fn k_reversal(&self) -> f64 {
        if self.k_uses_na_reversal {
            self.params.v_na
        } else {
            self.params.v_k
        }
    }

    /// Gates at their voltage-clamped steady values.
    pub fn clamped_state(&self, v: f64) -> Vec<f64> {
        let r = hh_rates(v);
        let m = r.alpha_m / (r.alpha_m + r.beta_m);
        let h = r.alpha_h / (r.alpha_h + r.beta_h);
        let n = r.alpha_n / (r.alpha_n + r.beta_n);
        vec![v, 1.0 - m, m, 1.0 - h, h, 1.0 - n, n]
    }
}

impl HybridModel for HhGating {
    fn name(&self) -> &str {
        "hh-gating"
    }

    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let (v, m, h, n) = (x[0], x[2], x[4], x[6]);
        out[0] = (-p.g_na * m * m * m * h * (v - p.v_na)
            - p.g_k * n.powi(4) * (v - self.k_reversal())
            - p.g_l * (v - p.v_l)
            + p.current)
            / p.c_m;
    }

    fn rates(&self, population: usize, x: &[f64], out: &mut [f64]) {
        let r = hh_rates(x[0]);
        match population {
            0 => gate_table(r.alpha_m, r.beta_m, out),
            1 => gate_table(r.alpha_h, r.beta_h, out),
            _ => gate_table(r.alpha_n, r.beta_n, out),
        }
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let p = &self.params;
        let (v, m, h, n) = (x[0], x[2], x[4], x[6]);
        let vk = self.k_reversal();
        let mut j = DMatrix::zeros(7, 7);
        j[(0, 0)] = (-p.g_na * m.powi(3) * h - p.g_k * n.powi(4) - p.g_l) / p.c_m;
        j[(0, 2)] = -3.0 * p.g_na * m * m * h * (v - p.v_na) / p.c_m;
        j[(0, 4)] = -p.g_na * m.powi(3) * (v - p.v_na) / p.c_m;
        j[(0, 6)] = -4.0 * p.g_k * n.powi(3) * (v - vk) / p.c_m;
        let r = hh_rates(v);
        let d = hh_rate_derivatives(v);
        let mut t = [0.0; 4];
        let mut dt = [0.0; 4];
        for (off, (a, b), (da, db)) in [
            (1, (r.alpha_m, r.beta_m), (d.alpha_m, d.beta_m)),
            (3, (r.alpha_h, r.beta_h), (d.alpha_h, d.beta_h)),
            (5, (r.alpha_n, r.beta_n), (d.alpha_n, d.beta_n)),
        ] {
            gate_table(a, b, &mut t);
            gate_table(da, db, &mut dt);
            fill_channel_block(&mut j, off, 2, x, &t, &dt);
        }
        Some(j)
    }

    fn population_name(&self, population: usize) -> String {
        ["m", "h", "n"][population].to_string()
    }

    fn state_names(&self, _population: usize) -> Vec<String> {
        vec!["closed".into(), "open".into()]
    }
}

/// Index of `m_i h_j` in the sodium population.
pub(crate) fn na_index(m_open: usize, h_open: bool) -> usize {
    if h_open {
        m_open
    } else {
        4 + m_open
    }
}

/// Multistate model: potassium chain `n0 … n4` (open `n4`) and the sodium
/// product scheme `m0h1, m1h1, m2h1, m3h1, m0h0, m1h0, m2h0, m3h0` (open
/// `m3h1`). Full state `(V, n0…n4, m0h1…m3h0)`.
#[derive(Debug, Clone)]
pub struct HhMultistate {
    pub params: HhParams,
    layout: Layout,
}

impl HhMultistate {
    pub const K_OPEN: usize = 4;
    pub const NA_OPEN: usize = 3;

    pub fn new(params: HhParams) -> Self {
        Self {
            params,
            layout: Layout::new(1, &[5, 8]).expect("static layout"),
        }
    }

    /// Binomially distributed channels built from gate open fractions.
    pub fn state_from_gates(v: f64, m: f64, h: f64, n: f64) -> Vec<f64> {
        let mut x = vec![v];
        x.extend(super::binomial_point(n, 4));
        let mut na = [0.0; 8];
        let pm = super::binomial_point(m, 3);
        for (i, &pmi) in pm.iter().enumerate() {
            na[na_index(i, true)] = pmi * h;
            na[na_index(i, false)] = pmi * (1.0 - h);
        }
        x.extend(na);
        x
    }
}

impl HybridModel for HhMultistate {
    fn name(&self) -> &str {
        "hh-multistate"
    }

    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let v = x[0];
        let k_open = x[1 + Self::K_OPEN];
        let na_open = x[6 + Self::NA_OPEN];
        out[0] =
            (-p.g_na * na_open * (v - p.v_na) - p.g_k * k_open * (v - p.v_k) - p.g_l * (v - p.v_l) + p.current) / p.c_m;
    }

    fn rates(&self, population: usize, x: &[f64], out: &mut [f64]) {
        let r = hh_rates(x[0]);
        out.iter_mut().for_each(|v| *v = 0.0);
        if population == 0 {
            super::chain_rates(4, r.alpha_n, r.beta_n, out);
            return;
        }
        for h_open in [false, true] {
            for i in 0..3 {
                let a = na_index(i, h_open);
                let b = na_index(i + 1, h_open);
                out[a * 8 + b] = (3 - i) as f64 * r.alpha_m;
                out[b * 8 + a] = (i + 1) as f64 * r.beta_m;
            }
        }
        for i in 0..4 {
            let closed = na_index(i, false);
            let open = na_index(i, true);
            out[closed * 8 + open] = r.alpha_h;
            out[open * 8 + closed] = r.beta_h;
        }
    }

    fn population_name(&self, population: usize) -> String {
        ["K", "Na"][population].to_string()
    }

    fn state_names(&self, population: usize) -> Vec<String> {
        if population == 0 {
            (0..5).map(|k| format!("n{k}")).collect()
        } else {
            (0..8)
                .map(|k| {
                    if k < 4 {
                        format!("m{k}h1")
                    } else {
                        format!("m{}h0", k - 4)
                    }
                })
                .collect()
        }
    }
}
