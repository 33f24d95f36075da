//! Poisson law by inversion, so that draws can share uniforms.

use statrs::distribution::{Discrete, DiscreteCDF, Poisson};

/// `P(Poi(mean) = k)`.
pub fn pmf(mean: f64, k: u64) -> f64 {
    if mean <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    Poisson::new(mean).expect("positive mean").pmf(k)
}

/// `P(Poi(mean) <= k)`.
pub fn cdf(mean: f64, k: u64) -> f64 {
    if mean <= 0.0 {
        return 1.0;
    }
    Poisson::new(mean).expect("positive mean").cdf(k)
}

/// Smallest `k` with `P(Poi(mean) <= k) >= u`, for `u` in `(0, 1)`.
pub fn quantile(mean: f64, u: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean > 200.0 {
        return Poisson::new(mean).expect("positive mean").inverse_cdf(u);
    }
    let mut p = (-mean).exp();
    let mut acc = p;
    let mut k = 0u64;
    while acc < u {
        k += 1;
        p *= mean / k as f64;
        acc += p;
        if p == 0.0 && (k as f64) > mean {
            break;
        }
    }
    k
}

/// `(P(Poi < k), P(Poi <= k))`, the inversion interval of `k`.
pub fn interval(mean: f64, k: u64) -> (f64, f64) {
    let hi = cdf(mean, k);
    let lo = if k == 0 { 0.0 } else { cdf(mean, k - 1) };
    (lo, hi)
}
