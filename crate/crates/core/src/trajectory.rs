//! Recorded paths and their CSV form.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{HybridModel, Layout};
use crate::ode::DensePath;

/// One channel transition `from → to` in population `population`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub population: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryMeta {
    pub model: String,
    /// `N_j` per population; empty for deterministic paths.
    pub sizes: Vec<u64>,
    pub seed: Option<u64>,
    pub trial: Option<u64>,
}

/// A simulated path: grid samples of the full state, every jump, and the
/// full state right after each jump.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub layout: Layout,
    pub samples: DensePath,
    pub events: Vec<JumpEvent>,
    /// Post-jump full states, one row of `layout.dim()` per event.
    pub event_states: Vec<f64>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn event_state(&self, i: usize) -> &[f64] {
        let d = self.layout.dim();
        &self.event_states[i * d..(i + 1) * d]
    }

    /// Full state just before jump `i` (the left limit of the càdlàg path).
    pub fn pre_event_state(&self, i: usize) -> Vec<f64> {
        let mut x = self.event_state(i).to_vec();
        let ev = self.events[i];
        let n = self.meta.sizes[ev.population] as f64;
        let off = self.layout.offset(ev.population);
        x[off + ev.from] += 1.0 / n;
        x[off + ev.to] -= 1.0 / n;
        x
    }

    pub fn write_csv<W: Write>(&self, model: &dyn HybridModel, out: W) -> Result<()> {
        write_path_csv(model, &self.samples, out)
    }

    /// Sidecar event log `(time, population, from, to)`.
    pub fn write_events_csv<W: Write>(&self, model: &dyn HybridModel, mut out: W) -> Result<()> {
        writeln!(out, "time,population,from,to")?;
        for ev in &self.events {
            let states = model.state_names(ev.population);
            writeln!(
                out,
                "{},{},{},{}",
                ev.time,
                model.population_name(ev.population),
                states[ev.from],
                states[ev.to]
            )?;
        }
        Ok(())
    }
}

/// Column selection for path output: two-state populations are written as
/// their open (second-state) proportion under the population name, larger
/// populations as one column per state.
pub fn output_columns(model: &dyn HybridModel) -> Vec<(String, usize)> {
    let layout = model.layout();
    let mut cols: Vec<(String, usize)> = model.global_names().into_iter().zip(0..).collect();
    for j in 0..layout.n_populations() {
        let off = layout.offset(j);
        let pop = model.population_name(j);
        let states = model.state_names(j);
        if states.len() == 2 {
            cols.push((pop, off + 1));
        } else {
            cols.extend(
                states
                    .into_iter()
                    .enumerate()
                    .map(|(k, s)| (format!("{pop}.{s}"), off + k)),
            );
        }
    }
    cols
}

/// Writes `(t, V…, proportions…)` rows with a header.
pub fn write_path_csv<W: Write>(model: &dyn HybridModel, path: &DensePath, mut out: W) -> Result<()> {
    if path.dim != model.layout().dim() {
        return Err(Error::GridMismatch("path dimension does not match the model".into()));
    }
    let cols = output_columns(model);
    let header: Vec<&str> = std::iter::once("t")
        .chain(cols.iter().map(|(n, _)| n.as_str()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for i in 0..path.len() {
        use std::fmt::Write as _;
        line.clear();
        let _ = write!(line, "{}", path.times[i]);
        let x = path.state(i);
        for &(_, k) in &cols {
            let _ = write!(line, ",{}", x[k]);
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
