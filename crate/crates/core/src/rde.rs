//! Population dynamics for the matching recursion
//! `X = max(0, max_{i <= N} (xi_i - X_i))`, `N ~ MPoi(nu_hat)`, `xi_i ~ Exp(1)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::poisson;
use crate::rng::{derive, SiteRng};
use crate::weights::{wasserstein_1d, DiscreteLaw, Law, WeightSpec};

/// Minimum population size accepted by the fixed-point solver.
pub const MIN_POPULATION: usize = 1000;

/// Particle approximation of a law on `[0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub particles: Vec<f64>,
}

impl Population {
    pub fn zeros(size: usize) -> Self {
        Population { particles: vec![0.0; size] }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut s = self.particles.clone();
        s.sort_by(f64::total_cmp);
        s
    }

    /// Single-column CSV with header `x`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x\n");
        for x in &self.particles {
            s.push_str(&format!("{x}\n"));
        }
        s
    }
}

/// Key of the `t`-th application in a run keyed by `key`.
pub fn iteration_key(key: u64, t: usize) -> u64 {
    derive(key, t as u64)
}

/// One application of the operator. Particle `i` uses its own stream, so
/// the result does not depend on the thread count.
pub fn rde_apply(pop: &Population, spec: &WeightSpec, key: u64) -> Result<Population> {
    if pop.is_empty() {
        return Err(Error::InsufficientSamples { need: 1, got: 0 });
    }
    spec.validate()?;
    let hat = spec.size_biased();
    let m = pop.len() as u64;
    let particles = (0..pop.len())
        .into_par_iter()
        .map(|i| {
            let mut r = SiteRng::new(derive(key, i as u64));
            let w = hat.sample(&mut r);
            let n = poisson::quantile(w, r.uniform());
            let mut best = 0.0f64;
            for _ in 0..n {
                let xi = -r.uniform().ln();
                let x = pop.particles[r.below(m) as usize];
                best = best.max(xi - x);
            }
            best
        })
        .collect();
    Ok(Population { particles })
}

/// Per-iteration diagnostics of a fixed-point run.
#[derive(Debug, Clone, Serialize)]
pub struct RdeDiagnostics {
    /// `gaps[t-1] = W1(T^{t-1}(delta_0), T^t(delta_0))`, one even and one odd iterate.
    pub gaps: Vec<f64>,
    /// Sampling noise scale of a W1 estimate between two populations.
    pub noise: Vec<f64>,
    /// Largest increase `gaps[t] - gaps[t-1]` in units of `noise`.
    pub worst_increase_sigmas: f64,
    pub converged: bool,
}

impl RdeDiagnostics {
    pub fn final_gap(&self) -> f64 {
        *self.gaps.last().unwrap_or(&f64::NAN)
    }

    /// Whether the gap never rises by more than `k` noise units.
    pub fn non_increasing_within(&self, k: f64) -> bool {
        self.worst_increase_sigmas <= k
    }
}

/// `sqrt(2 / N) * int sqrt(F (1 - F))` for the pooled empirical `F`.
fn noise_scale(a: &[f64], b: &[f64]) -> f64 {
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let m = pooled.len() as f64;
    let mut s = 0.0;
    for (i, w) in pooled.windows(2).enumerate() {
        let f = (i + 1) as f64 / m;
        s += (f * (1.0 - f)).sqrt() * (w[1] - w[0]);
    }
    (2.0 / a.len() as f64).sqrt() * s
}

/// Iterates the operator from `delta_0` and tracks consecutive
/// even/odd gaps. Convergence is refused when the last five gaps are
/// non-decreasing and still above two noise units.
pub fn rde_fixed_point(
    spec: &WeightSpec,
    size: usize,
    iterations: usize,
    key: u64,
) -> Result<(Population, RdeDiagnostics)> {
    if size < MIN_POPULATION {
        return Err(Error::InsufficientSamples { need: MIN_POPULATION, got: size });
    }
    let mut pop = Population::zeros(size);
    let mut gaps = Vec::with_capacity(iterations);
    let mut noise = Vec::with_capacity(iterations);
    for t in 0..iterations {
        let next = rde_apply(&pop, spec, iteration_key(key, t))?;
        let a = DiscreteLaw::from_sample(&pop.particles);
        let b = DiscreteLaw::from_sample(&next.particles);
        gaps.push(wasserstein_1d(Law::Discrete(&a), Law::Discrete(&b))?);
        noise.push(noise_scale(&pop.particles, &next.particles));
        pop = next;
    }
    let mut worst = f64::NEG_INFINITY;
    for t in 1..gaps.len() {
        let s = noise[t].max(noise[t - 1]).max(f64::MIN_POSITIVE);
        worst = worst.max((gaps[t] - gaps[t - 1]) / s);
    }
    let tail = &gaps[gaps.len().saturating_sub(5)..];
    let stalled = tail.len() == 5
        && tail.windows(2).all(|w| w[1] >= w[0])
        && tail[4] > 2.0 * noise.last().copied().unwrap_or(0.0);
    Ok((pop, RdeDiagnostics { gaps, noise, worst_increase_sigmas: worst.max(0.0), converged: !stalled }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_population_gives_void_probability() {
        // From delta_0 the output is 0 iff N = 0: P = E[exp(-W_hat)].
        let c = 0.8;
        let pop = Population::zeros(200_000);
        let out = rde_apply(&pop, &WeightSpec::constant(c), 5).unwrap();
        let zeros = out.particles.iter().filter(|x| **x == 0.0).count() as f64 / pop.len() as f64;
        let p = (-c).exp();
        assert!((zeros - p).abs() < 4.0 * (p * (1.0 - p) / pop.len() as f64).sqrt(), "{zeros} vs {p}");
        // Gamma(2,1): nu_hat = Gamma(3,1), E[exp(-W_hat)] = 2^{-3}.
        let out = rde_apply(&pop, &WeightSpec::gamma(2.0, 1.0), 6).unwrap();
        let zeros = out.particles.iter().filter(|x| **x == 0.0).count() as f64 / pop.len() as f64;
        assert!((zeros - 0.125).abs() < 4.0 * (0.125 * 0.875 / pop.len() as f64).sqrt(), "{zeros}");
    }

    #[test]
    fn operator_is_antitone() {
        let spec = WeightSpec::constant(1.5);
        let small = Population { particles: (0..5000).map(|i| i as f64 * 1e-4).collect() };
        let large = Population { particles: small.particles.iter().map(|x| x + 0.3).collect() };
        let a = rde_apply(&small, &spec, 9).unwrap().particles;
        let b = rde_apply(&large, &spec, 9).unwrap().particles;
        assert!(a.iter().zip(&b).all(|(x, y)| y <= x));
    }

    #[test]
    fn first_iterate_matches_direct_application() {
        let spec = WeightSpec::constant(0.5);
        let (_, d) = rde_fixed_point(&spec, 2000, 1, 42).unwrap();
        let direct = rde_apply(&Population::zeros(2000), &spec, iteration_key(42, 0)).unwrap();
        let a = DiscreteLaw::from_sample(&vec![0.0; 2000]);
        let b = DiscreteLaw::from_sample(&direct.particles);
        assert_eq!(d.gaps[0], wasserstein_1d(Law::Discrete(&a), Law::Discrete(&b)).unwrap());
    }

    #[test]
    fn small_population_is_rejected() {
        assert!(rde_fixed_point(&WeightSpec::constant(0.5), 10, 3, 0).is_err());
    }
}
