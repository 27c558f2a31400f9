//! Stochastic hybrid models: a global variable `V ∈ R^p` driven by an ODE,
//! coupled to `q` populations of independent Markov channels.
//!
//! Every full state is a flat vector `x = (V, e^(1), …, e^(q))` of length
//! `p + d` with `d = Σ r_j`; `e^(j)` holds the proportions of population `j`
//! in each of its `r_j` states. [`Layout`] maps between the flat vector and
//! its blocks.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Block structure `(p, r_1, …, r_q)` of a full state vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    global: usize,
    populations: Vec<usize>,
    offsets: Vec<usize>,
}

impl Layout {
    pub fn new(global: usize, populations: &[usize]) -> Result<Self> {
        if populations.contains(&0) {
            return Err(Error::invalid("every population needs at least one state"));
        }
        let mut offsets = Vec::with_capacity(populations.len());
        let mut at = global;
        for &r in populations {
            offsets.push(at);
            at += r;
        }
        Ok(Self {
            global,
            populations: populations.to_vec(),
            offsets,
        })
    }

    /// `p`, the dimension of the global variable.
    pub fn global(&self) -> usize {
        self.global
    }

    /// `q`, the number of channel populations.
    pub fn n_populations(&self) -> usize {
        self.populations.len()
    }

    /// `r_j` for every population.
    pub fn population_sizes(&self) -> &[usize] {
        &self.populations
    }

    /// `d = Σ r_j`.
    pub fn channel_dim(&self) -> usize {
        self.populations.iter().sum()
    }

    /// `p + d`.
    pub fn dim(&self) -> usize {
        self.global + self.channel_dim()
    }

    pub fn offset(&self, population: usize) -> usize {
        self.offsets[population]
    }

    pub fn range(&self, population: usize) -> std::ops::Range<usize> {
        let start = self.offsets[population];
        start..start + self.populations[population]
    }
}

/// A stochastic hybrid model `(S_N)` together with its fluid limit `(D)`.
///
/// Implementations must be immutable; all evaluators take the full state
/// vector `x` (global variables followed by proportions).
pub trait HybridModel: Send + Sync {
    /// Short identifier used in outputs (e.g. `"hh-gating"`).
    fn name(&self) -> &str;

    fn layout(&self) -> &Layout;

    /// Writes `f(x)` (length `p`) into `out`.
    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// Writes the per-capita transition rates `α^(j)_{k,l}(x)` of population
    /// `j` into `out` as a row-major `r_j × r_j` matrix. Diagonal entries are
    /// ignored by every caller.
    fn rates(&self, population: usize, x: &[f64], out: &mut [f64]);

    /// Analytic Jacobian of the full vector field `(f, b)`, when available.
    fn jacobian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// Names of the global variables.
    fn global_names(&self) -> Vec<String> {
        (0..self.layout().global())
            .map(|i| if i == 0 { "V".to_string() } else { format!("V{i}") })
            .collect()
    }

    /// Name of population `j`.
    fn population_name(&self, population: usize) -> String {
        format!("pop{population}")
    }

    /// Names of the states of population `j`.
    fn state_names(&self, population: usize) -> Vec<String> {
        (0..self.layout().population_sizes()[population])
            .map(|k| k.to_string())
            .collect()
    }

    /// Single rate query `α^(j)_{k,l}(x)`; `k == l` is not a transition.
    fn rate(&self, population: usize, from: usize, to: usize, x: &[f64]) -> f64 {
        debug_assert_ne!(from, to, "self-transitions are undefined");
        let r = self.layout().population_sizes()[population];
        let mut buf = vec![0.0; r * r];
        self.rates(population, x, &mut buf);
        buf[from * r + to]
    }
}

/// Names of every coordinate of the full state, `V` first, then
/// `population.state`.
pub fn coordinate_names(model: &dyn HybridModel) -> Vec<String> {
    let mut names = model.global_names();
    for j in 0..model.layout().n_populations() {
        let pop = model.population_name(j);
        for s in model.state_names(j) {
            names.push(format!("{pop}.{s}"));
        }
    }
    names
}

pub(crate) fn check_rates(population: usize, r: usize, rates: &[f64]) -> Result<()> {
    for k in 0..r {
        for l in 0..r {
            if k == l {
                continue;
            }
            let value = rates[k * r + l];
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::RateDomain {
                    population,
                    from: k,
                    to: l,
                    value,
                });
            }
        }
    }
    Ok(())
}

/// State of `(S_N)`: global variables plus integer channel counts.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub v: Vec<f64>,
    /// One count vector per population; `counts[j]` sums to `sizes[j]`.
    pub counts: Vec<Vec<u64>>,
    /// Population scale `N_j` for each population.
    pub sizes: Vec<u64>,
}

impl HybridState {
    pub fn new(v: Vec<f64>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let sizes = counts.iter().map(|c| c.iter().sum()).collect::<Vec<u64>>();
        if sizes.contains(&0) {
            return Err(Error::invalid("every population needs N >= 1"));
        }
        Ok(Self { v, counts, sizes })
    }

    /// Integer counts closest to `N_j · g^(j)` under largest-remainder
    /// rounding, so that every population sums to `N_j` exactly.
    pub fn from_proportions(layout: &Layout, x: &[f64], sizes: &[u64]) -> Result<Self> {
        if x.len() != layout.dim() || sizes.len() != layout.n_populations() {
            return Err(Error::invalid("state or sizes do not match the model layout"));
        }
        let counts = (0..layout.n_populations())
            .map(|j| largest_remainder(&x[layout.range(j)], sizes[j]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(x[..layout.global()].to_vec(), counts)
    }

    pub fn check(&self, layout: &Layout) -> Result<()> {
        if self.v.len() != layout.global() || self.counts.len() != layout.n_populations() {
            return Err(Error::invalid("state does not match the model layout"));
        }
        for (j, c) in self.counts.iter().enumerate() {
            if c.len() != layout.population_sizes()[j] {
                return Err(Error::invalid(format!("population {j} has the wrong number of states")));
            }
            if c.iter().sum::<u64>() != self.sizes[j] {
                return Err(Error::invalid(format!("counts of population {j} do not sum to N")));
            }
        }
        Ok(())
    }

    /// Full state vector with proportions `n^(j)/N_j`.
    pub fn to_full(&self) -> Vec<f64> {
        let mut x = self.v.clone();
        for (c, &n) in self.counts.iter().zip(&self.sizes) {
            x.extend(c.iter().map(|&k| k as f64 / n as f64));
        }
        x
    }
}

/// Largest-remainder rounding of `n · g` to integers summing to `n`.
pub fn largest_remainder(g: &[f64], n: u64) -> Result<Vec<u64>> {
    if g.iter().any(|&p| !(p.is_finite() && p >= -1e-12)) {
        return Err(Error::invalid("proportions must be finite and nonnegative"));
    }
    let total: f64 = g.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!("proportions sum to {total}, expected 1")));
    }
    let scaled: Vec<f64> = g.iter().map(|&p| p.max(0.0) / total * n as f64).collect();
    let mut counts: Vec<u64> = scaled.iter().map(|s| s.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..g.len()).collect();
    // stable sort keeps ties in index order
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &k in order.iter().take(n.saturating_sub(assigned) as usize) {
        counts[k] += 1;
    }
    Ok(counts)
}

/// State of the deterministic model `(D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicState {
    pub v: Vec<f64>,
    pub g: Vec<Vec<f64>>,
}

impl DeterministicState {
    pub fn from_full(layout: &Layout, x: &[f64]) -> Self {
        Self {
            v: x[..layout.global()].to_vec(),
            g: (0..layout.n_populations())
                .map(|j| x[layout.range(j)].to_vec())
                .collect(),
        }
    }

    pub fn to_full(&self) -> Vec<f64> {
        let mut x = self.v.clone();
        for g in &self.g {
            x.extend_from_slice(g);
        }
        x
    }
}

/// Scratch buffers for repeated rate evaluation.
pub(crate) struct RateScratch {
    pub(crate) bufs: Vec<Vec<f64>>,
}

impl RateScratch {
    pub(crate) fn new(layout: &Layout) -> Self {
        Self {
            bufs: layout.population_sizes().iter().map(|&r| vec![0.0; r * r]).collect(),
        }
    }
}

/// Vector field of `(D)`: `(f(x), b_1(x), …, b_q(x))`.
pub fn drift_full(model: &dyn HybridModel, x: &[f64]) -> Result<Vec<f64>> {
    let layout = model.layout();
    if x.len() != layout.dim() {
        return Err(Error::invalid("state length does not match the model layout"));
    }
    let mut out = vec![0.0; layout.dim()];
    let mut scratch = RateScratch::new(layout);
    drift_full_into(model, x, &mut out, &mut scratch)?;
    Ok(out)
}

pub(crate) fn drift_full_into(
    model: &dyn HybridModel,
    x: &[f64],
    out: &mut [f64],
    scratch: &mut RateScratch,
) -> Result<()> {
    let layout = model.layout();
    let p = layout.global();
    model.drift(x, &mut out[..p]);
    for j in 0..layout.n_populations() {
        let r = layout.population_sizes()[j];
        let off = layout.offset(j);
        let buf = &mut scratch.bufs[j];
        model.rates(j, x, buf);
        check_rates(j, r, buf)?;
        let b = &mut out[off..off + r];
        b.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..r {
            let gi = x[off + i];
            for k in 0..r {
                if i == k {
                    continue;
                }
                // flux i -> k: gain for k, matching loss for i
                let flux = buf[i * r + k] * gi;
                b[k] += flux;
                b[i] -= flux;
            }
        }
    }
    Ok(())
}

/// Total jump intensity of `(S_N)` at `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Intensity {
    /// `Λ = Σ_j N_j λ̃^(j)`.
    pub total: f64,
    /// `λ̃^(j) = Σ_k e_k Σ_{l≠k} α_{k,l}` per population.
    pub per_population: Vec<f64>,
}

pub fn total_intensity(model: &dyn HybridModel, s: &HybridState) -> Result<Intensity> {
    let layout = model.layout();
    s.check(layout)?;
    let x = s.to_full();
    let mut per_population = Vec::with_capacity(layout.n_populations());
    let mut total = 0.0;
    for j in 0..layout.n_populations() {
        let r = layout.population_sizes()[j];
        let mut buf = vec![0.0; r * r];
        model.rates(j, &x, &mut buf);
        check_rates(j, r, &buf)?;
        let off = layout.offset(j);
        let lam: f64 = (0..r)
            .map(|k| {
                let out: f64 = (0..r).filter(|&l| l != k).map(|l| buf[k * r + l]).sum();
                x[off + k] * out
            })
            .sum();
        total += s.sizes[j] as f64 * lam;
        per_population.push(lam);
    }
    Ok(Intensity { total, per_population })
}

/// Per-population diffusion matrices `G^(j)(x)` of the Langevin limit.
///
/// `G_{kk} = Σ_{i≠k} H_{ik}` and `G_{kl} = −H_{kl}` for `k ≠ l`, with
/// `H_{ik} = α_{ik} e_i + α_{ki} e_k`. This is the covariance rate of the
/// jump increments `Σ rate · ΔΔᵀ`, so each block is symmetric, PSD, and has
/// zero row sums.
pub fn diffusion_matrices(model: &dyn HybridModel, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    let layout = model.layout();
    if x.len() != layout.dim() {
        return Err(Error::invalid("state length does not match the model layout"));
    }
    let mut scratch = RateScratch::new(layout);
    (0..layout.n_populations())
        .map(|j| {
            let r = layout.population_sizes()[j];
            let mut g = DMatrix::zeros(r, r);
            diffusion_block_into(model, j, x, &mut scratch.bufs[j], &mut g)?;
            Ok(g)
        })
        .collect()
}

pub(crate) fn diffusion_block_into(
    model: &dyn HybridModel,
    population: usize,
    x: &[f64],
    buf: &mut [f64],
    g: &mut DMatrix<f64>,
) -> Result<()> {
    let layout = model.layout();
    let r = layout.population_sizes()[population];
    let off = layout.offset(population);
    model.rates(population, x, buf);
    check_rates(population, r, buf)?;
    g.fill(0.0);
    for k in 0..r {
        for l in (k + 1)..r {
            let h = buf[k * r + l] * x[off + k] + buf[l * r + k] * x[off + l];
            g[(k, l)] = -h;
            g[(l, k)] = -h;
            g[(k, k)] += h;
            g[(l, l)] += h;
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Model with arbitrary constant rate tables and zero drift.
    #[derive(Debug, Clone)]
    pub struct TableModel {
        pub layout: Layout,
        pub tables: Vec<Vec<f64>>,
    }

    impl HybridModel for TableModel {
        fn name(&self) -> &str {
            "table"
        }
        fn layout(&self) -> &Layout {
            &self.layout
        }
        fn drift(&self, _x: &[f64], out: &mut [f64]) {
            out.iter_mut().for_each(|v| *v = 0.0);
        }
        fn rates(&self, population: usize, _x: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&self.tables[population]);
        }
    }
}
