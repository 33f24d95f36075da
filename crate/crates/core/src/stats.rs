//! Estimators and goodness-of-fit statistics for the Monte Carlo harness.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Variance of the Kolmogorov distribution, `pi^2/12 - (pi/2) ln^2 2`.
pub const KOLMOGOROV_VARIANCE: f64 = 0.067_773_203_963_865_6;

/// Standard normal distribution function via `erfc` (absolute error below 1e-10).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsReport {
    pub statistic: f64,
    pub samples: usize,
}

impl KsReport {
    /// Null standard deviation of the statistic, `sqrt(Var K / m)`.
    pub fn null_sd(&self) -> f64 {
        (KOLMOGOROV_VARIANCE / self.samples as f64).sqrt()
    }
}

/// `sup_t |F_m(t) - F(t)|` for a continuous `F`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsReport> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples { need: 2, got: samples.len() });
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max(f - i as f64 / m).max((i + 1) as f64 / m - f);
    }
    Ok(KsReport { statistic: d, samples: s.len() })
}

/// One-sample KS distance to the standard normal.
pub fn ks_to_normal(samples: &[f64]) -> Result<KsReport> {
    ks_statistic(samples, normal_cdf)
}

/// Samples centred by their mean and scaled by their standard deviation.
pub fn standardize(samples: &[f64]) -> Result<Vec<f64>> {
    let v = estimate_variance(samples)?;
    if v.variance.is_nan() || v.variance <= 0.0 || v.variance.sqrt() <= 1e-12 * mean(samples).abs().max(1.0) {
        return Err(Error::DegenerateVariance);
    }
    let (mu, sd) = (mean(samples), v.variance.sqrt());
    Ok(samples.iter().map(|x| (x - mu) / sd).collect())
}

/// Two-sample KS statistic `sup_t |F_a(t) - F_b(t)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientSamples { need: 1, got: 0 });
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Asymptotic critical value `sqrt(-ln(alpha/2)/2) sqrt((n+m)/(n m))`.
pub fn ks_two_sample_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit. Adjacent cells are pooled until every expected
/// count is at least 5; the last cell absorbs the remaining mass.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if observed.len() != probs.len() || observed.is_empty() {
        return Err(Error::Domain("observed and probability vectors must match".into()));
    }
    let total: u64 = observed.iter().sum();
    let t = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (x, p) in observed.iter().zip(probs) {
        o += *x as f64;
        e += p * t;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    let tail = (t - cells.iter().map(|c| c.0).sum::<f64>(), t - cells.iter().map(|c| c.1).sum::<f64>());
    match cells.last_mut() {
        Some(last) if tail.1 < 5.0 => {
            last.0 += tail.0;
            last.1 += tail.1;
        }
        _ => cells.push(tail),
    }
    if cells.len() < 2 {
        return Err(Error::InsufficientSamples { need: 10, got: total as usize });
    }
    let stat: f64 = cells.iter().filter(|c| c.1 > 0.0).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = cells.len() - 1;
    Ok(ChiSquare { statistic: stat, df, p_value: chi_square_sf(stat, df) })
}

/// Pearson test of independence for a contingency table.
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<ChiSquare> {
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let width = table.first().map_or(0, Vec::len);
    if table.len() < 2 || width < 2 || table.iter().any(|r| r.len() != width) {
        return Err(Error::Domain("need a rectangular table with at least 2 x 2 cells".into()));
    }
    let cols: Vec<f64> = (0..width).map(|j| table.iter().map(|r| r[j] as f64).sum()).collect();
    let t: f64 = rows.iter().sum();
    let mut stat = 0.0;
    for (i, r) in table.iter().enumerate() {
        for (j, x) in r.iter().enumerate() {
            let e = rows[i] * cols[j] / t;
            if e > 0.0 {
                stat += (*x as f64 - e).powi(2) / e;
            }
        }
    }
    let df = (table.len() - 1) * (width - 1);
    Ok(ChiSquare { statistic: stat, df, p_value: chi_square_sf(stat, df) })
}

fn chi_square_sf(x: f64, df: usize) -> f64 {
    let d = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    1.0 - d.cdf(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub variance: f64,
    pub jackknife_se: f64,
}

/// Unbiased sample variance with its jackknife standard error.
pub fn estimate_variance(samples: &[f64]) -> Result<VarianceEstimate> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::InsufficientSamples { need: 2, got: m });
    }
    let mf = m as f64;
    let mu = mean(samples);
    let ss: f64 = samples.iter().map(|x| (x - mu) * (x - mu)).sum();
    let variance = ss / (mf - 1.0);
    if m < 3 {
        return Ok(VarianceEstimate { variance, jackknife_se: f64::NAN });
    }
    // Leave-one-out: ss_i = ss - m/(m-1) (x_i - mu)^2.
    let loo: Vec<f64> = samples.iter().map(|x| (ss - mf / (mf - 1.0) * (x - mu).powi(2)) / (mf - 2.0)).collect();
    let lm = mean(&loo);
    let jackknife_se = ((mf - 1.0) / mf * loo.iter().map(|v| (v - lm).powi(2)).sum::<f64>()).sqrt();
    Ok(VarianceEstimate { variance, jackknife_se })
}

/// Empirical rate with its binomial standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rate {
    pub hits: u64,
    pub trials: u64,
}

impl Rate {
    pub fn value(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }

    /// `sqrt(p (1 - p) / m)` at the empirical `p`.
    pub fn sigma(&self) -> f64 {
        let p = self.value();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// `sqrt(p (1 - p) / m)` at a reference `p`.
    pub fn sigma_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}
