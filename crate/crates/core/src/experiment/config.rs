//! Experiment configuration: a TOML document with per-command sections.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{Kernel, ThresholdFn};
use crate::error::{Error, Result};
use crate::models::{ExampleParams, HhParams, MlParams, ModelOverrides, MODEL_NAMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    #[default]
    Deterministic,
    Simulate,
    Langevin,
    Moments,
    Convergence,
    RateVariance,
    Latency,
    Passage,
    Psp,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Deterministic => "deterministic",
            Command::Simulate => "simulate",
            Command::Langevin => "langevin",
            Command::Moments => "moments",
            Command::Convergence => "convergence",
            Command::RateVariance => "rate-variance",
            Command::Latency => "latency",
            Command::Passage => "passage",
            Command::Psp => "psp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub current: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hh: Option<HhParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ml: Option<MlParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub example: Option<ExampleParams>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub k_uses_na_reversal: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            name: "hh-gating".into(),
            current: None,
            hh: None,
            ml: None,
            example: None,
            k_uses_na_reversal: false,
        }
    }
}

impl ModelConfig {
    pub fn overrides(&self) -> ModelOverrides {
        ModelOverrides {
            current: self.current,
            hh: self.hh.clone(),
            ml: self.ml.clone(),
            example: self.example.clone(),
            k_uses_na_reversal: self.k_uses_na_reversal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub delta: f64,
    pub t_grid: Vec<f64>,
    /// Several membrane areas in one run (overrides the top-level `S`).
    pub areas: Vec<f64>,
    pub bound_b: f64,
    pub bound_c: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            delta: 0.01,
            t_grid: (1..=10).map(f64::from).collect(),
            areas: Vec::new(),
            bound_b: 1.0,
            bound_c: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub currents: Vec<f64>,
    pub window: f64,
    pub warmup: f64,
    /// Voltage of the quasi-steady starting state.
    pub v_start: f64,
    /// Minimum late-window voltage swing counted as spiking.
    pub min_swing: f64,
    pub threshold: ThresholdFn,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            currents: Vec::new(),
            window: 2000.0,
            warmup: 1000.0,
            v_start: -20.0,
            min_swing: 5.0,
            threshold: ThresholdFn { c: 10.0, v_th: 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatencyConfig {
    /// Kick sizes; empty means a default grid above the threshold.
    pub amplitudes: Vec<f64>,
    pub v_th: f64,
    pub t_max: f64,
    pub threshold_tol: f64,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self {
            amplitudes: Vec::new(),
            v_th: 0.0,
            t_max: 500.0,
            threshold_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PassageConfig {
    /// Voltage kick applied to the starting state.
    pub amplitude: f64,
    pub v_th: f64,
}

impl Default for PassageConfig {
    fn default() -> Self {
        Self {
            amplitude: 10.0,
            v_th: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PspConfig {
    pub kernel: Kernel,
    /// Output times; empty means twenty evenly spaced points.
    pub times: Vec<f64>,
    pub amplitude: f64,
}

impl Default for PspConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Exponential { tau: 5.0 },
            times: Vec::new(),
            amplitude: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LangevinConfig {
    pub tol_eig: f64,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self {
            tol_eig: crate::langevin::DEFAULT_TOL_EIG,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub command: Command,
    pub model: ModelConfig,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Membrane area in µm².
    #[serde(rename = "S", skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub event_tol: f64,
    pub sample_dt: f64,
    pub seed: u64,
    pub trials: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Full starting state; defaults depend on the command.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    pub convergence: ConvergenceConfig,
    pub sweep: SweepConfig,
    pub latency: LatencyConfig,
    pub passage: PassageConfig,
    pub psp: PspConfig,
    pub langevin: LangevinConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: Command::default(),
            model: ModelConfig::default(),
            n: None,
            area: None,
            horizon: 100.0,
            dt: 0.01,
            event_tol: 1e-9,
            sample_dt: 0.1,
            seed: 0,
            trials: 1,
            threads: None,
            out: None,
            initial: None,
            convergence: ConvergenceConfig::default(),
            sweep: SweepConfig::default(),
            latency: LatencyConfig::default(),
            passage: PassageConfig::default(),
            psp: PspConfig::default(),
            langevin: LangevinConfig::default(),
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive and finite (got {v})")))
    }
}

fn finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be finite (got {v})")))
    }
}

impl ExperimentConfig {
    /// Parses a TOML document; unknown keys are rejected.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .map(|s| text[s].to_string())
                .unwrap_or_else(|| "<document>".into());
            Error::config(key, e.message().to_string())
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<document>", e.to_string()))
    }

    /// Field-level checks that do not need a built model.
    pub fn validate(&self) -> Result<()> {
        if !MODEL_NAMES.contains(&self.model.name.as_str()) {
            return Err(Error::config(
                "model.name",
                format!(
                    "unknown model `{}`; expected one of {}",
                    self.model.name,
                    MODEL_NAMES.join(", ")
                ),
            ));
        }
        if let Some(i) = self.model.current {
            finite("model.current", i)?;
        }
        if self.n == Some(0) {
            return Err(Error::config("N", "must be at least 1"));
        }
        if let Some(s) = self.area {
            positive("S", s)?;
        }
        if self.n.is_some() && self.area.is_some() {
            return Err(Error::config("S", "give either N or S, not both"));
        }
        positive("horizon", self.horizon)?;
        positive("dt", self.dt)?;
        positive("event_tol", self.event_tol)?;
        positive("sample_dt", self.sample_dt)?;
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be at least 1"));
        }
        if let Some(x) = &self.initial {
            for &v in x {
                finite("initial", v)?;
            }
        }
        let c = &self.convergence;
        positive("convergence.delta", c.delta)?;
        positive("convergence.bound_b", c.bound_b)?;
        positive("convergence.bound_c", c.bound_c)?;
        if c.t_grid.is_empty() {
            return Err(Error::config("convergence.t_grid", "must not be empty"));
        }
        for &t in &c.t_grid {
            positive("convergence.t_grid", t)?;
        }
        if c.t_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::config("convergence.t_grid", "must be non-decreasing"));
        }
        for &s in &c.areas {
            positive("convergence.areas", s)?;
        }
        let s = &self.sweep;
        positive("sweep.window", s.window)?;
        if !(s.warmup.is_finite() && s.warmup >= 0.0) {
            return Err(Error::config("sweep.warmup", "must be non-negative"));
        }
        finite("sweep.v_start", s.v_start)?;
        finite("sweep.min_swing", s.min_swing)?;
        for &i in &s.currents {
            finite("sweep.currents", i)?;
        }
        ThresholdFn::new(s.threshold.c, s.threshold.v_th)
            .map_err(|e| Error::config("sweep.threshold", e.to_string()))?;
        let l = &self.latency;
        finite("latency.v_th", l.v_th)?;
        positive("latency.t_max", l.t_max)?;
        positive("latency.threshold_tol", l.threshold_tol)?;
        for &a in &l.amplitudes {
            positive("latency.amplitudes", a)?;
        }
        finite("passage.amplitude", self.passage.amplitude)?;
        finite("passage.v_th", self.passage.v_th)?;
        self.psp
            .kernel
            .validate()
            .map_err(|e| Error::config("psp.kernel", e.to_string()))?;
        finite("psp.amplitude", self.psp.amplitude)?;
        for &t in &self.psp.times {
            positive("psp.times", t)?;
        }
        positive("langevin.tol_eig", self.langevin.tol_eig)?;
        Ok(())
    }

    /// SHA-256 of the canonical TOML form, ignoring `threads` and `out`.
    pub fn hash(&self) -> Result<String> {
        let mut canon = self.clone();
        canon.threads = None;
        canon.out = None;
        let digest = Sha256::digest(canon.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Parses `a:b` (unit step), `a:step:b` or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::config("grid", format!("`{s}` is not a number")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let (a, step, b) = match parts.as_slice() {
        [list] => return list.split(',').map(num).collect(),
        [a, b] => (num(a)?, 1.0, num(b)?),
        [a, s, b] => (num(a)?, num(s)?, num(b)?),
        _ => return Err(Error::config("grid", format!("cannot parse `{spec}`"))),
    };
    if !(step > 0.0) || b < a {
        return Err(Error::config("grid", format!("`{spec}` is not an increasing range")));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + i as f64 * step).collect())
}
