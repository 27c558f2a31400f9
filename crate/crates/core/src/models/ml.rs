//! Morris–Lecar with stochastic calcium (`m`) and potassium (`n`) gates.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::fill_channel_block;
use crate::error::{Error, Result};
use crate::model::{HybridModel, Layout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlParams {
    pub c_m: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
    pub g_ca: f64,
    pub g_k: f64,
    pub g_l: f64,
    pub v_k: f64,
    pub v_l: f64,
    pub v_ca: f64,
    pub phi_n: f64,
    pub current: f64,
}

impl Default for MlParams {
    fn default() -> Self {
        Self::class1()
    }
}

impl MlParams {
    pub fn class1() -> Self {
        Self {
            c_m: 20.0,
            v1: 0.0,
            v2: 15.0,
            v3: 10.0,
            v4: 10.0,
            g_ca: 4.0,
            g_k: 8.0,
            g_l: 2.0,
            v_k: -70.0,
            v_l: -50.0,
            v_ca: 100.0,
            phi_n: 0.1,
            current: 0.0,
        }
    }

    pub fn class2() -> Self {
        Self {
            v4: 20.0,
            ..Self::class1()
        }
    }

    pub fn with_current(mut self, current: f64) -> Self {
        self.current = current;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("c_m", self.c_m),
            ("v2", self.v2),
            ("v4", self.v4),
            ("g_ca", self.g_ca),
            ("g_k", self.g_k),
            ("g_l", self.g_l),
            ("phi_n", self.phi_n),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("ml.{key}"), "must be positive"));
            }
        }
        for (key, v) in [
            ("v1", self.v1),
            ("v3", self.v3),
            ("v_k", self.v_k),
            ("v_l", self.v_l),
            ("v_ca", self.v_ca),
            ("current", self.current),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("ml.{key}"), "must be finite"));
            }
        }
        Ok(())
    }
}

/// Gate kinetics `(λ, x_∞)` and their voltage derivatives.
#[derive(Debug, Clone, Copy)]
struct Gate {
    lambda: f64,
    inf: f64,
    d_lambda: f64,
    d_inf: f64,
}

impl Gate {
    fn new(v: f64, half: f64, slope: f64, scale: f64) -> Self {
        let z = (v - half) / (2.0 * slope);
        let w = (v - half) / slope;
        let th = w.tanh();
        Self {
            lambda: scale * z.cosh(),
            inf: 0.5 * (1.0 + th),
            d_lambda: scale * z.sinh() / (2.0 * slope),
            d_inf: 0.5 * (1.0 - th * th) / slope,
        }
    }

    fn alpha(&self) -> f64 {
        self.lambda * self.inf
    }

    fn beta(&self) -> f64 {
        self.lambda * (1.0 - self.inf)
    }

    fn d_alpha(&self) -> f64 {
        self.d_lambda * self.inf + self.lambda * self.d_inf
    }

    fn d_beta(&self) -> f64 {
        self.d_lambda * (1.0 - self.inf) - self.lambda * self.d_inf
    }
}

/// Full state `(V, m0, m1, n0, n1)`; state `1` is open.
#[derive(Debug, Clone)]
pub struct MorrisLecar {
    pub params: MlParams,
    layout: Layout,
    name: &'static str,
}

impl MorrisLecar {
    pub fn new(params: MlParams) -> Self {
        let name = if params.v4 == 20.0 { "ml-class2" } else { "ml-class1" };
        Self {
            params,
            layout: Layout::new(1, &[2, 2]).expect("static layout"),
            name,
        }
    }

    fn m_gate(&self, v: f64) -> Gate {
        Gate::new(v, self.params.v1, self.params.v2, 1.0)
    }

    fn n_gate(&self, v: f64) -> Gate {
        Gate::new(v, self.params.v3, self.params.v4, self.params.phi_n)
    }

    /// `(λ_m, M_∞, λ_n, N_∞)` at `v`.
    pub fn gate_functions(&self, v: f64) -> (f64, f64, f64, f64) {
        let (m, n) = (self.m_gate(v), self.n_gate(v));
        (m.lambda, m.inf, n.lambda, n.inf)
    }

    /// Opening and closing rates `(α_m, β_m, α_n, β_n)` at `v`.
    pub fn gate_rates(&self, v: f64) -> (f64, f64, f64, f64) {
        let (m, n) = (self.m_gate(v), self.n_gate(v));
        (m.alpha(), m.beta(), n.alpha(), n.beta())
    }

    /// Full state from `(V, m, n)` open fractions.
    pub fn state(v: f64, m: f64, n: f64) -> Vec<f64> {
        vec![v, 1.0 - m, m, 1.0 - n, n]
    }
}

impl HybridModel for MorrisLecar {
    fn name(&self) -> &str {
        self.name
    }

    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        let p = &self.params;
        let (v, m, n) = (x[0], x[2], x[4]);
        out[0] = (p.current - p.g_l * (v - p.v_l) - p.g_ca * m * (v - p.v_ca) - p.g_k * n * (v - p.v_k)) / p.c_m;
    }

    fn rates(&self, population: usize, x: &[f64], out: &mut [f64]) {
        let g = if population == 0 {
            self.m_gate(x[0])
        } else {
            self.n_gate(x[0])
        };
        out[0] = 0.0;
        out[1] = g.alpha();
        out[2] = g.beta();
        out[3] = 0.0;
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let p = &self.params;
        let (v, m, n) = (x[0], x[2], x[4]);
        let mut j = DMatrix::zeros(5, 5);
        j[(0, 0)] = (-p.g_l - p.g_ca * m - p.g_k * n) / p.c_m;
        j[(0, 2)] = -p.g_ca * (v - p.v_ca) / p.c_m;
        j[(0, 4)] = -p.g_k * (v - p.v_k) / p.c_m;
        for (off, g) in [(1, self.m_gate(v)), (3, self.n_gate(v))] {
            let t = [0.0, g.alpha(), g.beta(), 0.0];
            let dt = [0.0, g.d_alpha(), g.d_beta(), 0.0];
            fill_channel_block(&mut j, off, 2, x, &t, &dt);
        }
        Some(j)
    }

    fn population_name(&self, population: usize) -> String {
        ["m", "n"][population].to_string()
    }

    fn state_names(&self, _population: usize) -> Vec<String> {
        vec!["closed".into(), "open".into()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::drift_full;
    use crate::models::{equilibria, is_stable, jacobian_fd};

    #[test]
    fn half_activation_points() {
        let ml = MorrisLecar::new(MlParams::class1());
        let (_, m_inf, _, _) = ml.gate_functions(0.0);
        let (_, _, _, n_inf) = ml.gate_functions(10.0);
        assert_eq!(m_inf, 0.5);
        assert_eq!(n_inf, 0.5);
    }

    #[test]
    fn opening_plus_closing_is_lambda() {
        let ml = MorrisLecar::new(MlParams::class2());
        for i in 0..=60 {
            let v = -80.0 + 3.0 * i as f64;
            let (lm, _, ln, _) = ml.gate_functions(v);
            let (am, bm, an, bn) = ml.gate_rates(v);
            assert!((am + bm - lm).abs() <= 1e-14 * lm);
            assert!((an + bn - ln).abs() <= 1e-14 * ln);
        }
    }

    #[test]
    fn gate_field_is_relaxation() {
        let ml = MorrisLecar::new(MlParams::class1());
        let x = MorrisLecar::state(-20.0, 0.3, 0.6);
        let b = drift_full(&ml, &x).unwrap();
        let (lm, minf, ln, ninf) = ml.gate_functions(-20.0);
        assert!((b[2] - lm * (minf - 0.3)).abs() < 1e-14);
        assert!((b[4] - ln * (ninf - 0.6)).abs() < 1e-14);
    }

    #[test]
    fn voltage_partial_in_calcium_gate() {
        let p = MlParams::class1();
        let ml = MorrisLecar::new(p.clone());
        let x = MorrisLecar::state(-12.0, 0.2, 0.4);
        let j = ml.jacobian(&x).unwrap();
        assert!((j[(0, 2)] - (-p.g_ca * (-12.0 - p.v_ca) / p.c_m)).abs() < 1e-15);
        let fd = jacobian_fd(&ml, &x, 1e-6).unwrap();
        assert!((&j - &fd).abs().max() < 1e-6 * j.abs().max());
    }

    #[test]
    fn class1_at_32_is_excitable() {
        let ml = MorrisLecar::new(MlParams::class1().with_current(32.0));
        let eq = equilibria(&ml, -90.0, 120.0, 4000).unwrap();
        let stable: Vec<bool> = eq.iter().map(|x| is_stable(&ml, x).unwrap()).collect();
        // stable node below a saddle and an unstable upper branch
        assert_eq!(stable, vec![true, false, false]);
        assert!((eq[0][0] + 28.35).abs() < 0.01, "{}", eq[0][0]);
    }
}
