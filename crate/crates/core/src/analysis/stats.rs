//! Small statistics toolkit for the Monte Carlo checks.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::invalid(format!(
            "wilson interval needs 0 <= k <= n, n > 0 (k = {k}, n = {n})"
        )));
    }
    let (nf, p) = (n as f64, k as f64 / n as f64);
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    Ok(((centre - half).max(0.0), (centre + half).min(1.0)))
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("sample contains non-finite values"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov–Smirnov distance `sup |F_a − F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("KS distance needs two non-empty samples"));
    }
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Anderson–Darling normality test with estimated mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AndersonDarling {
    pub statistic: f64,
    /// Critical value at the 1% level.
    pub critical_1pct: f64,
}

impl AndersonDarling {
    pub fn passes(&self) -> bool {
        self.statistic < self.critical_1pct
    }
}

/// `A²` against a normal with sample mean and (ddof = 1) standard deviation;
/// the 1% critical value is `1.092 / (1 + 4/n − 25/n²)`.
pub fn anderson_darling_normal(xs: &[f64]) -> Result<AndersonDarling> {
    if xs.len() < 8 {
        return Err(Error::invalid("Anderson–Darling needs at least 8 observations"));
    }
    let v = sorted(xs)?;
    let (mean, var) = mean_var(&v);
    if !(var > 0.0) {
        return Err(Error::invalid("Anderson–Darling needs a non-degenerate sample"));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let sd = var.sqrt();
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        let zi = (v[i] - mean) / sd;
        let zr = (v[n - 1 - i] - mean) / sd;
        let lo = normal.cdf(zi).ln();
        let hi = normal.sf(zr).ln();
        s += (2 * i + 1) as f64 * (lo + hi);
    }
    let nf = n as f64;
    Ok(AndersonDarling {
        statistic: -nf - s / nf,
        critical_1pct: 1.092 / (1.0 + 4.0 / nf - 25.0 / (nf * nf)),
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("log-log slope needs two or more paired points"));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("log-log slope needs positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Median of a sample (mean of the middle pair for even sizes).
pub fn median(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::invalid("median of an empty sample"));
    }
    let v = sorted(xs)?;
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
