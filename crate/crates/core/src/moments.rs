//! Second-order fluctuation moments along a deterministic path.
//!
//! The canonical form is the matrix ODE `dΓ/dt = JΓ + ΓJᵀ + D` for the
//! covariance of `Z = √N (X_N − x)`, with `D` block-diagonal in the channel
//! populations (`G^(j) / w_j`, `w_j = N_j / N`). The two-variable system,
//! the linearized-Langevin system and the Morris–Lecar system are separate
//! hand-written codepaths used to cross-check it.

use std::io::Write;

use nalgebra::{DMatrix, Matrix3};

use crate::error::{Error, Result};
use crate::model::{diffusion_block_into, HybridModel, RateScratch};
use crate::models::{jacobian, MorrisLecar, TwoStateExample};
use crate::ode::DensePath;

/// Coefficients of a linear ODE that depend only on the path state.
pub(crate) trait PathSystem {
    type Coef;
    fn prepare(&mut self, t: f64, x: &[f64]) -> Result<Self::Coef>;
    fn apply(&self, c: &Self::Coef, y: &[f64], dy: &mut [f64]);
    fn finish_step(&self, _y: &mut [f64]) {}
}

/// One RK4 step per path interval; the path is linearly interpolated, so the
/// two middle stages share the midpoint state.
pub(crate) fn rk4_along<S: PathSystem>(sys: &mut S, path: &DensePath, y0: &[f64]) -> Result<Vec<f64>> {
    let n = y0.len();
    if path.is_empty() {
        return Err(Error::invalid("deterministic path is empty"));
    }
    let mut out = Vec::with_capacity(n * path.len());
    let mut y = y0.to_vec();
    out.extend_from_slice(&y);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut mid = vec![0.0; path.dim];
    let mut c0 = sys.prepare(path.times[0], path.state(0))?;
    for i in 0..path.len() - 1 {
        let (t0, t1) = (path.times[i], path.times[i + 1]);
        let h = t1 - t0;
        let (a, b) = (path.state(i), path.state(i + 1));
        for k in 0..path.dim {
            mid[k] = 0.5 * (a[k] + b[k]);
        }
        let cm = sys.prepare(t0 + 0.5 * h, &mid)?;
        let c1 = sys.prepare(t1, b)?;
        sys.apply(&c0, &y, &mut k1);
        for k in 0..n {
            tmp[k] = y[k] + 0.5 * h * k1[k];
        }
        sys.apply(&cm, &tmp, &mut k2);
        for k in 0..n {
            tmp[k] = y[k] + 0.5 * h * k2[k];
        }
        sys.apply(&cm, &tmp, &mut k3);
        for k in 0..n {
            tmp[k] = y[k] + h * k3[k];
        }
        sys.apply(&c1, &tmp, &mut k4);
        for k in 0..n {
            y[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
        sys.finish_step(&mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "moment equations",
                time: t1,
            });
        }
        out.extend_from_slice(&y);
        c0 = c1;
    }
    Ok(out)
}

/// `Γ(t)` on the grid of the deterministic path.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSeries {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Row-major `dim × dim` matrices, one per time.
    pub values: Vec<f64>,
}

impl CovarianceSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn entry(&self, i: usize, a: usize, b: usize) -> f64 {
        self.values[i * self.dim * self.dim + a * self.dim + b]
    }

    pub fn matrix(&self, i: usize) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_row_slice(d, d, &self.values[i * d * d..(i + 1) * d * d])
    }

    /// `Γ_ab` along the grid.
    pub fn series(&self, a: usize, b: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.entry(i, a, b)).collect()
    }

    /// Linear interpolation in time.
    pub fn interpolate(&self, t: f64) -> DMatrix<f64> {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            return self.matrix(0);
        }
        if i >= self.len() {
            return self.matrix(self.len() - 1);
        }
        let w = (t - self.times[i - 1]) / (self.times[i] - self.times[i - 1]);
        self.matrix(i - 1) * (1.0 - w) + self.matrix(i) * w
    }

    /// `t` followed by the upper triangle of `Γ` (row-major), with a header
    /// `cov(a,b)` built from `names`.
    pub fn write_csv<W: Write>(&self, names: &[String], mut out: W) -> Result<()> {
        if names.len() != self.dim {
            return Err(Error::invalid("one name per coordinate is required"));
        }
        let mut header = vec!["t".to_string()];
        for a in 0..self.dim {
            for b in a..self.dim {
                header.push(format!("cov({},{})", names[a], names[b]));
            }
        }
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row = vec![self.times[i].to_string()];
            for a in 0..self.dim {
                for b in a..self.dim {
                    row.push(self.entry(i, a, b).to_string());
                }
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Jacobian of the full vector field at a state.
pub type JacobianEvaluator<'a> = &'a dyn Fn(&[f64]) -> Result<DMatrix<f64>>;

/// Options for [`covariance_ode`].
#[derive(Clone, Default)]
pub struct CovarianceOptions<'a> {
    /// `w_j = N_j / N` per population (all 1 when empty).
    pub weights: Vec<f64>,
    /// `Γ(0)`; zero when absent.
    pub initial: Option<DMatrix<f64>>,
    /// Overrides the model's Jacobian (analytic, else finite differences).
    pub jacobian: Option<JacobianEvaluator<'a>>,
}

struct Lyapunov<'a> {
    model: &'a dyn HybridModel,
    weights: Vec<f64>,
    jac: Option<JacobianEvaluator<'a>>,
    scratch: RateScratch,
    g: Vec<DMatrix<f64>>,
    dim: usize,
}

impl PathSystem for Lyapunov<'_> {
    type Coef = (DMatrix<f64>, DMatrix<f64>);

    fn prepare(&mut self, t: f64, x: &[f64]) -> Result<Self::Coef> {
        let j = match self.jac {
            Some(f) => f(x)?,
            None => jacobian(self.model, x)?,
        };
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "Jacobian",
                time: t,
            });
        }
        let layout = self.model.layout();
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for p in 0..layout.n_populations() {
            diffusion_block_into(self.model, p, x, &mut self.scratch.bufs[p], &mut self.g[p])?;
            let off = layout.offset(p);
            let r = layout.population_sizes()[p];
            let w = self.weights[p];
            d.view_mut((off, off), (r, r)).copy_from(&(&self.g[p] / w));
        }
        Ok((j, d))
    }

    fn apply(&self, (j, d): &Self::Coef, y: &[f64], dy: &mut [f64]) {
        let n = self.dim;
        // y holds Γ row-major; Γ is symmetric so JΓ + ΓJᵀ = JΓ + (JΓ)ᵀ
        for a in 0..n {
            for b in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += j[(a, l)] * y[l * n + b];
                }
                dy[a * n + b] = acc;
            }
        }
        for a in 0..n {
            for b in a..n {
                let s = dy[a * n + b] + dy[b * n + a] + d[(a, b)];
                dy[a * n + b] = s;
                dy[b * n + a] = s;
            }
        }
    }

    fn finish_step(&self, y: &mut [f64]) {
        let n = self.dim;
        for a in 0..n {
            for b in (a + 1)..n {
                let s = 0.5 * (y[a * n + b] + y[b * n + a]);
                y[a * n + b] = s;
                y[b * n + a] = s;
            }
        }
    }
}

/// Integrates `dΓ/dt = J Γ + Γ Jᵀ + D` along `path`.
pub fn covariance_ode(
    model: &dyn HybridModel,
    path: &DensePath,
    opts: &CovarianceOptions<'_>,
) -> Result<CovarianceSeries> {
    let layout = model.layout();
    let dim = layout.dim();
    if path.dim != dim {
        return Err(Error::GridMismatch("path dimension does not match the model".into()));
    }
    let weights = if opts.weights.is_empty() {
        vec![1.0; layout.n_populations()]
    } else {
        opts.weights.clone()
    };
    if weights.len() != layout.n_populations() || weights.iter().any(|&w| !(w.is_finite() && w > 0.0)) {
        return Err(Error::invalid("one positive weight per population is required"));
    }
    let y0 = match &opts.initial {
        Some(g) if g.nrows() == dim && g.ncols() == dim => g.transpose().iter().copied().collect(),
        Some(_) => return Err(Error::invalid("initial covariance has the wrong shape")),
        None => vec![0.0; dim * dim],
    };
    let mut sys = Lyapunov {
        model,
        weights,
        jac: opts.jacobian,
        scratch: RateScratch::new(layout),
        g: layout
            .population_sizes()
            .iter()
            .map(|&r| DMatrix::zeros(r, r))
            .collect(),
        dim,
    };
    let values = rk4_along(&mut sys, path, &y0)?;
    Ok(CovarianceSeries {
        dim,
        times: path.times.clone(),
        values,
    })
}

/// Partial derivatives of the two-variable example at `(v, u)`:
/// `(f'_v, f'_u, b'_v, b'_u, λ)` with `λ = (1 − u)α + uβ`.
pub fn example_partials(model: &TwoStateExample, v: f64, u: f64) -> [f64; 5] {
    let p = &model.params;
    let (a, b) = (model.alpha(v), model.beta(v));
    let (da, db) = (p.alpha_slope * a, p.beta_slope * b);
    [
        -p.coupling,
        p.coupling,
        (1.0 - u) * da - u * db,
        -(a + b),
        model.noise_rate(v, u),
    ]
}

/// Coefficient matrix of the `(A, B, C)` system at `(v, u)`.
pub fn system_m_matrix(model: &TwoStateExample, v: f64, u: f64) -> Matrix3<f64> {
    let [fv, fu, bv, bu, _] = example_partials(model, v, u);
    Matrix3::new(2.0 * bu, 0.0, bv, 0.0, 2.0 * fv, fu, 2.0 * fu, 2.0 * bv, bu + fv)
}

struct SystemM<'a>(&'a TwoStateExample);

impl PathSystem for SystemM<'_> {
    type Coef = (Matrix3<f64>, f64);

    fn prepare(&mut self, _t: f64, x: &[f64]) -> Result<Self::Coef> {
        let (v, u) = (x[0], x[2]);
        Ok((system_m_matrix(self.0, v, u), -0.5 * self.0.noise_rate(v, u)))
    }

    fn apply(&self, (m, src): &Self::Coef, y: &[f64], dy: &mut [f64]) {
        for a in 0..3 {
            dy[a] = (0..3).map(|b| m[(a, b)] * y[b]).sum();
        }
        dy[0] += src;
    }
}

/// `(A, B, C)` of the characteristic-function exponent
/// `θ₁²A + θ₂²B + θ₁θ₂C` for `(channel, voltage)` fluctuations, from zero.
pub fn system_m(model: &TwoStateExample, path: &DensePath) -> Result<Vec<[f64; 3]>> {
    if path.dim != 3 {
        return Err(Error::GridMismatch("expected a (v, u0, u1) path".into()));
    }
    let flat = rk4_along(&mut SystemM(model), path, &[0.0; 3])?;
    Ok(flat.chunks(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// Right-hand side of the `(A, B, C)` system; the footnote's `Γ_s` is built
/// from these derivatives.
pub fn system_m_rates(model: &TwoStateExample, x: &[f64], abc: &[f64; 3]) -> [f64; 3] {
    let m = system_m_matrix(model, x[0], x[2]);
    let mut out = [0.0; 3];
    for a in 0..3 {
        out[a] = (0..3).map(|b| m[(a, b)] * abc[b]).sum();
    }
    out[0] -= 0.5 * model.noise_rate(x[0], x[2]);
    out
}

/// `(A'B' − C'²/4, ‖(A', B', C')‖²)` along the `(A, B, C)` solution.
pub fn system_m_determinant(model: &TwoStateExample, path: &DensePath, abc: &[[f64; 3]]) -> Result<Vec<(f64, f64)>> {
    if abc.len() != path.len() {
        return Err(Error::GridMismatch("one (A, B, C) per path time is required".into()));
    }
    Ok(abc
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let [a, b, c] = system_m_rates(model, path.state(i), y);
            (a * b - 0.25 * c * c, a * a + b * b + c * c)
        })
        .collect())
}

struct LinearizedLangevin<'a> {
    model: &'a TwoStateExample,
    inv_n: f64,
}

impl PathSystem for LinearizedLangevin<'_> {
    // partials, λ, λ'_V, λ'_e
    type Coef = ([f64; 5], f64, f64);

    fn prepare(&mut self, t: f64, x: &[f64]) -> Result<Self::Coef> {
        let (v, e) = (x[0], x[2]);
        let partials = example_partials(self.model, v, e);
        if !(partials[4] > 0.0) {
            return Err(Error::Integration {
                last_good: t,
                reason: format!("noise rate λ = {} must be positive", partials[4]),
            });
        }
        let p = &self.model.params;
        let (a, b) = (self.model.alpha(v), self.model.beta(v));
        let lam_v = (1.0 - e) * p.alpha_slope * a + e * p.beta_slope * b;
        let lam_e = b - a;
        Ok((partials, lam_v, lam_e))
    }

    fn apply(&self, (pt, lam_v, lam_e): &Self::Coef, y: &[f64], dy: &mut [f64]) {
        let [fv, fe, bv, be, lam] = *pt;
        let (m1, m2, s1, s2, c12) = (y[0], y[1], y[2], y[3], y[4]);
        let k = if self.inv_n == 0.0 {
            0.0
        } else {
            0.5 * (self.inv_n / lam).sqrt()
        };
        dy[0] = fv * m1 + fe * m2;
        dy[1] = bv * m1 + be * m2;
        dy[2] = 2.0 * fv * s1 + 2.0 * fe * c12;
        let amp = lam.sqrt() + k * (lam_v * m1 + lam_e * m2);
        dy[3] = 2.0 * be * s2
            + 2.0 * bv * c12
            + amp * amp
            + (k * lam_v).powi(2) * s1
            + (k * lam_e).powi(2) * s2
            + 2.0 * k * k * lam_v * lam_e * c12;
        dy[4] = bv * s1 + fe * s2 + (fv + be) * c12;
    }
}

/// Finite-`N` moments `(m₁, m₂, S₁, S₂, C₁₂)` of the linearized Langevin
/// fluctuations (index 1 = voltage, 2 = open fraction). `n = None` drops
/// the `1/N` corrections.
pub fn linearized_langevin_moments(
    model: &TwoStateExample,
    path: &DensePath,
    n: Option<f64>,
    initial: [f64; 5],
) -> Result<Vec<[f64; 5]>> {
    if path.dim != 3 {
        return Err(Error::GridMismatch("expected a (v, u0, u1) path".into()));
    }
    let inv_n = match n {
        Some(n) if n.is_finite() && n > 0.0 => 1.0 / n,
        Some(_) => return Err(Error::invalid("N must be positive")),
        None => 0.0,
    };
    let flat = rk4_along(&mut LinearizedLangevin { model, inv_n }, path, &initial)?;
    Ok(flat.chunks(5).map(|c| [c[0], c[1], c[2], c[3], c[4]]).collect())
}

/// Partials of the reduced Morris–Lecar field in `(V, m, n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlPartials {
    pub fv_v: f64,
    pub fv_m: f64,
    pub fv_n: f64,
    pub fm_v: f64,
    pub fm_m: f64,
    pub fn_v: f64,
    pub fn_n: f64,
}

/// Partials of `dV/dt`, `dm/dt = λ_m(M_∞ − m)`, `dn/dt = λ_n(N_∞ − n)`
/// by direct differentiation.
pub fn ml_partials(model: &MorrisLecar, v: f64, m: f64, n: f64) -> MlPartials {
    let p = &model.params;
    let zm = (v - p.v1) / (2.0 * p.v2);
    let zn = (v - p.v3) / (2.0 * p.v4);
    let tm = ((v - p.v1) / p.v2).tanh();
    let tn = ((v - p.v3) / p.v4).tanh();
    let (lm, ln) = (zm.cosh(), p.phi_n * zn.cosh());
    let (dlm, dln) = (zm.sinh() / (2.0 * p.v2), p.phi_n * zn.sinh() / (2.0 * p.v4));
    let (minf, ninf) = (0.5 * (1.0 + tm), 0.5 * (1.0 + tn));
    let (dminf, dninf) = (0.5 * (1.0 - tm * tm) / p.v2, 0.5 * (1.0 - tn * tn) / p.v4);
    MlPartials {
        fv_v: -(p.g_l + p.g_ca * m + p.g_k * n) / p.c_m,
        fv_m: -p.g_ca * (v - p.v_ca) / p.c_m,
        fv_n: -p.g_k * (v - p.v_k) / p.c_m,
        fm_v: dlm * (minf - m) + lm * dminf,
        fm_m: -lm,
        fn_v: dln * (ninf - n) + ln * dninf,
        fn_n: -ln,
    }
}

/// Right-hand side of the six-variable Morris–Lecar system
/// `(S_m, S_n, S_v, C_mv, C_nv, C_mn)`.
pub fn ml_moment_rhs(d: &MlPartials, b1: f64, b2: f64, y: &[f64; 6]) -> [f64; 6] {
    let [sm, sn, sv, cmv, cnv, cmn] = *y;
    [
        2.0 * d.fm_m * sm + 2.0 * d.fm_v * cmv + b1,
        2.0 * d.fn_n * sn + 2.0 * d.fn_v * cnv + b2,
        2.0 * d.fv_v * sv + 2.0 * d.fv_m * cmv + 2.0 * d.fv_n * cnv,
        d.fv_m * sm + d.fm_v * sv + (d.fv_v + d.fm_m) * cmv + d.fv_n * cmn,
        d.fv_n * sn + d.fn_v * sv + (d.fv_v + d.fn_n) * cnv + d.fv_m * cmn,
        d.fn_v * cmv + d.fm_v * cnv + (d.fm_m + d.fn_n) * cmn,
    ]
}

struct MlSystem<'a>(&'a MorrisLecar);

impl PathSystem for MlSystem<'_> {
    type Coef = (MlPartials, f64, f64);

    fn prepare(&mut self, _t: f64, x: &[f64]) -> Result<Self::Coef> {
        let (v, m, n) = (x[0], x[2], x[4]);
        let (am, bm, an, bn) = self.0.gate_rates(v);
        Ok((
            ml_partials(self.0, v, m, n),
            (1.0 - m) * am + m * bm,
            (1.0 - n) * an + n * bn,
        ))
    }

    fn apply(&self, (d, b1, b2): &Self::Coef, y: &[f64], dy: &mut [f64]) {
        let y6 = [y[0], y[1], y[2], y[3], y[4], y[5]];
        dy.copy_from_slice(&ml_moment_rhs(d, *b1, *b2, &y6));
    }
}

/// `(S_m, S_n, S_v, C_mv, C_nv, C_mn)` along a Morris–Lecar path.
pub fn ml_moment_system(model: &MorrisLecar, path: &DensePath, initial: [f64; 6]) -> Result<Vec<[f64; 6]>> {
    if path.dim != 5 {
        return Err(Error::GridMismatch(
            "expected a Morris–Lecar (V, m0, m1, n0, n1) path".into(),
        ));
    }
    let flat = rk4_along(&mut MlSystem(model), path, &initial)?;
    Ok(flat.chunks(6).map(|c| [c[0], c[1], c[2], c[3], c[4], c[5]]).collect())
}
