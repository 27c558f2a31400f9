//! One global variable coupled to a single population of two-state
//! channels, with exponential voltage dependence of both rates.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HybridModel, Layout};

/// `α(v) = α₀ e^{κ_α v}`, `β(v) = β₀ e^{κ_β v}`, `dv/dt = −k (v − u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExampleParams {
    pub alpha: f64,
    pub alpha_slope: f64,
    pub beta: f64,
    pub beta_slope: f64,
    pub coupling: f64,
}

impl Default for ExampleParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            alpha_slope: 0.0,
            beta: 2.0,
            beta_slope: 0.0,
            coupling: 1.0,
        }
    }
}

impl ExampleParams {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("example.{key}"), "must be nonnegative"));
            }
        }
        for (key, v) in [
            ("alpha_slope", self.alpha_slope),
            ("beta_slope", self.beta_slope),
            ("coupling", self.coupling),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("example.{key}"), "must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TwoStateExample {
    pub params: ExampleParams,
    layout: Layout,
}

impl TwoStateExample {
    pub fn new(params: ExampleParams) -> Self {
        Self {
            params,
            layout: Layout::new(1, &[2]).expect("static layout"),
        }
    }

    /// Voltage-independent rates.
    pub fn constant(alpha: f64, beta: f64, coupling: f64) -> Self {
        Self::new(ExampleParams {
            alpha,
            beta,
            coupling,
            ..ExampleParams::default()
        })
    }

    pub fn alpha(&self, v: f64) -> f64 {
        self.params.alpha * (self.params.alpha_slope * v).exp()
    }

    pub fn beta(&self, v: f64) -> f64 {
        self.params.beta * (self.params.beta_slope * v).exp()
    }

    /// `(1 − u) α(v) + u β(v)`, the jump variance rate of the open fraction.
    pub fn noise_rate(&self, v: f64, u: f64) -> f64 {
        (1.0 - u) * self.alpha(v) + u * self.beta(v)
    }

    /// Full state from `(v, u)`.
    pub fn state(v: f64, u: f64) -> Vec<f64> {
        vec![v, 1.0 - u, u]
    }
}

impl HybridModel for TwoStateExample {
    fn name(&self) -> &str {
        "two-state-example"
    }

    fn layout(&self) -> &Layout {
        &self.layout
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -self.params.coupling * (x[0] - x[2]);
    }

    fn rates(&self, _population: usize, x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = self.alpha(x[0]);
        out[2] = self.beta(x[0]);
        out[3] = 0.0;
    }

    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let k = self.params.coupling;
        let v = x[0];
        let (a, b) = (self.alpha(v), self.beta(v));
        let (da, db) = (self.params.alpha_slope * a, self.params.beta_slope * b);
        let mut j = DMatrix::zeros(3, 3);
        j[(0, 0)] = -k;
        j[(0, 2)] = k;
        super::fill_channel_block(&mut j, 1, 2, x, &[0.0, a, b, 0.0], &[0.0, da, db, 0.0]);
        Some(j)
    }

    fn population_name(&self, _population: usize) -> String {
        "u".to_string()
    }

    fn state_names(&self, _population: usize) -> Vec<String> {
        vec!["closed".into(), "open".into()]
    }
}
