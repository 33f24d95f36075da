//! Connectivity-weight laws and one-dimensional transport between them.

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

/// A parametric law on `(0, inf)` with closed-form moments and quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum WeightSpec {
    Constant { value: f64 },
    FiniteDiscrete { values: Vec<f64>, probs: Vec<f64> },
    Gamma { shape: f64, scale: f64 },
}

impl WeightSpec {
    pub fn constant(value: f64) -> Self {
        WeightSpec::Constant { value }
    }

    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Self {
        WeightSpec::FiniteDiscrete { values, probs }
    }

    pub fn gamma(shape: f64, scale: f64) -> Self {
        WeightSpec::Gamma { shape, scale }
    }

    /// Exp(rate) as a Gamma law.
    pub fn exponential(rate: f64) -> Self {
        WeightSpec::Gamma { shape: 1.0, scale: 1.0 / rate }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        match self {
            WeightSpec::Constant { value } => {
                if !pos(*value) {
                    return Err(Error::InvalidSpec(format!("constant value {value} must be positive")));
                }
            }
            WeightSpec::FiniteDiscrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::InvalidSpec(
                        "finite-discrete law needs equally many values and probabilities".into(),
                    ));
                }
                if let Some(v) = values.iter().find(|v| !pos(**v)) {
                    return Err(Error::InvalidSpec(format!("atom {v} must be positive")));
                }
                if let Some(p) = probs.iter().find(|p| !pos(**p)) {
                    return Err(Error::InvalidSpec(format!("probability {p} must be positive")));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidSpec(format!("probabilities sum to {total}, not 1")));
                }
            }
            WeightSpec::Gamma { shape, scale } => {
                if !pos(*shape) || !pos(*scale) {
                    return Err(Error::InvalidSpec(format!(
                        "gamma shape {shape} and scale {scale} must be positive"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `E[W^p]` for real `p >= 0`.
    pub fn raw_moment(&self, p: f64) -> f64 {
        match self {
            WeightSpec::Constant { value } => value.powf(p),
            WeightSpec::FiniteDiscrete { values, probs } => {
                values.iter().zip(probs).map(|(v, q)| q * v.powf(p)).sum()
            }
            WeightSpec::Gamma { shape, scale } => {
                (p * scale.ln() + ln_gamma(shape + p) - ln_gamma(*shape)).exp()
            }
        }
    }

    /// The model constant `theta = E[W]`.
    pub fn mean(&self) -> f64 {
        self.raw_moment(1.0)
    }

    /// `Gamma_p = E[W^p] / E[W]`.
    pub fn normalized_moment(&self, p: f64) -> f64 {
        self.raw_moment(p) / self.mean()
    }

    /// Size-biased law `W / E[W] dnu`. All supported families are closed
    /// under size-biasing.
    pub fn size_biased(&self) -> WeightSpec {
        match self {
            WeightSpec::Constant { value } => WeightSpec::Constant { value: *value },
            WeightSpec::FiniteDiscrete { values, probs } => {
                let m: f64 = values.iter().zip(probs).map(|(v, q)| v * q).sum();
                WeightSpec::FiniteDiscrete {
                    values: values.clone(),
                    probs: values.iter().zip(probs).map(|(v, q)| v * q / m).collect(),
                }
            }
            WeightSpec::Gamma { shape, scale } => WeightSpec::Gamma { shape: shape + 1.0, scale: *scale },
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, WeightSpec::Gamma { .. })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            WeightSpec::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(*shape, x / scale)
                }
            }
            _ => self.as_discrete().expect("discrete").cdf(x),
        }
    }

    /// Inverse CDF: smallest `x` with `F(x) >= u`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            WeightSpec::Gamma { shape, scale } => gamma_quantile(*shape, *scale, u),
            _ => self.as_discrete().expect("discrete").quantile(u),
        }
    }

    /// Point mass for discrete laws, density for Gamma.
    pub fn mass_or_density(&self, x: f64) -> f64 {
        match self {
            WeightSpec::Gamma { shape, scale } => gamma_density(*shape, *scale, x),
            _ => self.as_discrete().expect("discrete").mass(x),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            WeightSpec::Constant { value } => *value,
            WeightSpec::FiniteDiscrete { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("non-empty")
            }
            WeightSpec::Gamma { shape, scale } => {
                GammaDist::new(*shape, *scale).expect("validated gamma").sample(rng)
            }
        }
    }

    /// The law as sorted atoms, when discrete.
    pub fn as_discrete(&self) -> Option<DiscreteLaw> {
        match self {
            WeightSpec::Constant { value } => Some(DiscreteLaw::from_weighted(&[*value], &[1.0])),
            WeightSpec::FiniteDiscrete { values, probs } => Some(DiscreteLaw::from_weighted(values, probs)),
            WeightSpec::Gamma { .. } => None,
        }
    }
}

/// A finitely supported law as sorted, merged atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    values: Vec<f64>,
    cum: Vec<f64>,
}

impl DiscreteLaw {
    /// Empirical law of a sample (equal weights).
    pub fn from_sample(sample: &[f64]) -> Self {
        let w = vec![1.0; sample.len()];
        Self::from_weighted(sample, &w)
    }

    /// Law putting mass proportional to `weights[i]` on `values[i]`.
    pub fn from_weighted(values: &[f64], weights: &[f64]) -> Self {
        assert_eq!(values.len(), weights.len());
        assert!(!values.is_empty());
        let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut out_v: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut out_c: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut acc = 0.0;
        for (v, w) in pairs {
            acc += w;
            if out_v.last() == Some(&v) {
                *out_c.last_mut().expect("non-empty") = acc / total;
            } else {
                out_v.push(v);
                out_c.push(acc / total);
            }
        }
        *out_c.last_mut().expect("non-empty") = 1.0;
        DiscreteLaw { values: out_v, cum: out_c }
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, v)| {
            let lo = if i == 0 { 0.0 } else { self.cum[i - 1] };
            (*v, self.cum[i] - lo)
        })
    }

    /// `(value, F(value-), F(value))` for each atom.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, v)| {
            let lo = if i == 0 { 0.0 } else { self.cum[i - 1] };
            (*v, lo, self.cum[i])
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.values.partition_point(|v| *v <= x);
        if k == 0 {
            0.0
        } else {
            self.cum[k - 1]
        }
    }

    pub fn mass(&self, x: f64) -> f64 {
        match self.values.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => self.cum[i] - if i == 0 { 0.0 } else { self.cum[i - 1] },
            Err(_) => 0.0,
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let k = self.cum.partition_point(|c| *c < u);
        self.values[k.min(self.values.len() - 1)]
    }

    /// `(F(x-), F(x))` when `x` is an atom.
    pub fn interval_of(&self, x: f64) -> Option<(f64, f64)> {
        let i = self.values.binary_search_by(|v| v.total_cmp(&x)).ok()?;
        Some((if i == 0 { 0.0 } else { self.cum[i - 1] }, self.cum[i]))
    }

    /// Index of the atom whose CDF interval contains `u`.
    pub fn quantile_index(&self, u: f64) -> usize {
        self.cum.partition_point(|c| *c < u).min(self.values.len() - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(v, p)| v * p).sum()
    }
}

/// Either side of a one-dimensional transport problem.
#[derive(Debug, Clone, Copy)]
pub enum Law<'a> {
    Spec(&'a WeightSpec),
    Sample(&'a [f64]),
    Discrete(&'a DiscreteLaw),
}

enum Resolved {
    Discrete(DiscreteLaw),
    Gamma(f64, f64),
}

fn resolve(l: Law<'_>) -> Result<Resolved> {
    match l {
        Law::Spec(WeightSpec::Gamma { shape, scale }) => Ok(Resolved::Gamma(*shape, *scale)),
        Law::Spec(s) => Ok(Resolved::Discrete(s.as_discrete().expect("discrete"))),
        Law::Sample(xs) => {
            if xs.is_empty() {
                return Err(Error::InsufficientSamples { need: 1, got: 0 });
            }
            Ok(Resolved::Discrete(DiscreteLaw::from_sample(xs)))
        }
        Law::Discrete(d) => Ok(Resolved::Discrete(d.clone())),
    }
}

/// 1-Wasserstein distance through the quantile coupling,
/// `int_0^1 |F_a^{-1}(u) - F_b^{-1}(u)| du`.
///
/// Exact for discrete pairs. Discrete against Gamma integrates each atom's
/// quantile interval in closed form through the Gamma partial expectation.
/// Two Gamma laws are supported only with a common shape.
pub fn wasserstein_1d(a: Law<'_>, b: Law<'_>) -> Result<f64> {
    match (resolve(a)?, resolve(b)?) {
        (Resolved::Discrete(x), Resolved::Discrete(y)) => Ok(discrete_w1(&x, &y)),
        (Resolved::Discrete(x), Resolved::Gamma(k, s)) | (Resolved::Gamma(k, s), Resolved::Discrete(x)) => {
            Ok(discrete_gamma_w1(&x, k, s))
        }
        (Resolved::Gamma(k1, s1), Resolved::Gamma(k2, s2)) => {
            if k1 == k2 {
                Ok(k1 * (s1 - s2).abs())
            } else {
                Err(Error::Unsupported(format!(
                    "Wasserstein distance between Gamma laws of different shapes ({k1} vs {k2})"
                )))
            }
        }
    }
}

fn discrete_w1(a: &DiscreteLaw, b: &DiscreteLaw) -> f64 {
    let mut pts: Vec<f64> = a.values.iter().chain(&b.values).copied().collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2).map(|w| (a.cdf(w[0]) - b.cdf(w[0])).abs() * (w[1] - w[0])).sum()
}

fn discrete_gamma_w1(d: &DiscreteLaw, shape: f64, scale: f64) -> f64 {
    // Integral of the Gamma quantile over (0, p): E[X; X <= Q(p)].
    let mean = shape * scale;
    let partial_at_x = |x: f64| if x <= 0.0 { 0.0 } else { mean * gamma_lr(shape + 1.0, x / scale) };
    let partial = |p: f64| {
        if p <= 0.0 {
            0.0
        } else if p >= 1.0 {
            mean
        } else {
            partial_at_x(gamma_quantile(shape, scale, p))
        }
    };
    let mut total = 0.0;
    let mut g_lo = 0.0;
    for (x, p1, p2) in d.intervals() {
        let g_hi = partial(p2);
        let fx = gamma_lr(shape, x / scale);
        let pc = fx.clamp(p1, p2);
        let g_c = if fx <= p1 {
            g_lo
        } else if fx >= p2 {
            g_hi
        } else {
            partial_at_x(x)
        };
        let left = x * (pc - p1) - (g_c - g_lo);
        let right = (g_hi - g_c) - x * (p2 - pc);
        total += left.max(0.0) + right.max(0.0);
        g_lo = g_hi;
    }
    total
}

/// Total variation distance between two weight laws.
pub fn tv_distance(a: &WeightSpec, b: &WeightSpec) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    if a == b {
        return Ok(0.0);
    }
    match (a.as_discrete(), b.as_discrete()) {
        (Some(x), Some(y)) => {
            let mut pts: Vec<f64> = x.values().iter().chain(y.values()).copied().collect();
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            Ok(0.5 * pts.iter().map(|p| (x.mass(*p) - y.mass(*p)).abs()).sum::<f64>())
        }
        (None, None) => {
            let (WeightSpec::Gamma { shape: k1, scale: s1 }, WeightSpec::Gamma { shape: k2, scale: s2 }) = (a, b)
            else {
                unreachable!()
            };
            Ok(gamma_tv(*k1, *s1, *k2, *s2))
        }
        _ => Ok(1.0),
    }
}

// log f - log g = (k1-k2) ln x - x (1/s1 - 1/s2) + const has at most two
// sign changes; TV is the mass difference over the region where f > g.
fn gamma_tv(k1: f64, s1: f64, k2: f64, s2: f64) -> f64 {
    let c = ln_gamma(k2) + k2 * s2.ln() - ln_gamma(k1) - k1 * s1.ln();
    let a = k1 - k2;
    let b = 1.0 / s2 - 1.0 / s1;
    let phi = |x: f64| a * x.ln() + b * x + c;
    let mut cuts = vec![0.0];
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    let crit = if b != 0.0 { -a / b } else { f64::NAN };
    let hi = 1e6 * (k1 * s1 + k2 * s2 + 1.0);
    if crit.is_finite() && crit > 0.0 {
        pieces.push((1e-300, crit));
        pieces.push((crit, hi));
    } else {
        pieces.push((1e-300, hi));
    }
    for (lo, up) in pieces {
        let (fl, fu) = (phi(lo), phi(up));
        if fl.signum() != fu.signum() && fl != 0.0 && fu != 0.0 {
            let (mut l, mut u) = (lo.ln(), up.ln());
            for _ in 0..200 {
                let m = 0.5 * (l + u);
                if phi(m.exp()).signum() == fl.signum() {
                    l = m;
                } else {
                    u = m;
                }
            }
            cuts.push((0.5 * (l + u)).exp());
        }
    }
    cuts.push(f64::INFINITY);
    let f_cdf = |x: f64| if x.is_infinite() { 1.0 } else if x <= 0.0 { 0.0 } else { gamma_lr(k1, x / s1) };
    let g_cdf = |x: f64| if x.is_infinite() { 1.0 } else if x <= 0.0 { 0.0 } else { gamma_lr(k2, x / s2) };
    let mut tv = 0.0;
    for w in cuts.windows(2) {
        let d = (f_cdf(w[1]) - f_cdf(w[0])) - (g_cdf(w[1]) - g_cdf(w[0]));
        if d > 0.0 {
            tv += d;
        }
    }
    tv.clamp(0.0, 1.0)
}

/// Given `x ~ from`, returns `y ~ to` with `P(x != y) = d_TV(from, to)`.
pub fn tv_couple<R: Rng + ?Sized>(x: f64, from: &WeightSpec, to: &WeightSpec, rng: &mut R) -> f64 {
    if from == to {
        return x;
    }
    if from.is_discrete() != to.is_discrete() {
        return to.sample(rng);
    }
    let f = from.mass_or_density(x);
    let g = to.mass_or_density(x);
    if f > 0.0 && rng.random::<f64>() * f <= g {
        return x;
    }
    // Residual (g - f)^+ by rejection from g.
    loop {
        let y = to.sample(rng);
        let gy = to.mass_or_density(y);
        let fy = from.mass_or_density(y);
        if gy > 0.0 && rng.random::<f64>() * gy < gy - fy.min(gy) {
            return y;
        }
    }
}

pub(crate) fn gamma_density(shape: f64, scale: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    ((shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()).exp()
}

/// Gamma inverse CDF by bracketing and bisection.
pub fn gamma_quantile(shape: f64, scale: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    let mut hi = shape.max(1.0);
    while gamma_lr(shape, hi) < u {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gamma_lr(shape, mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    hi * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SiteRng;

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(WeightSpec::constant(0.0).validate().is_err());
        assert!(WeightSpec::gamma(-1.0, 1.0).validate().is_err());
        assert!(WeightSpec::discrete(vec![1.0], vec![0.5]).validate().is_err());
        assert!(WeightSpec::discrete(vec![1.0, 2.0], vec![0.5]).validate().is_err());
        assert!(WeightSpec::discrete(vec![1.0, 3.0], vec![0.5, 0.5]).validate().is_ok());
    }

    #[test]
    fn gamma_moments_closed_form() {
        let g = WeightSpec::gamma(2.0, 1.0);
        assert!((g.mean() - 2.0).abs() < 1e-12);
        assert!((g.raw_moment(2.0) - 6.0).abs() < 1e-10);
        assert!((g.raw_moment(3.0) - 24.0).abs() < 1e-9);
        assert!((g.normalized_moment(2.0) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn size_biasing_families() {
        assert_eq!(WeightSpec::constant(2.5).size_biased(), WeightSpec::constant(2.5));
        let d = WeightSpec::discrete(vec![1.0, 3.0], vec![0.5, 0.5]).size_biased();
        let WeightSpec::FiniteDiscrete { probs, .. } = d else { panic!() };
        assert!((probs[0] - 0.25).abs() < 1e-15 && (probs[1] - 0.75).abs() < 1e-15);
        assert_eq!(WeightSpec::gamma(2.0, 0.5).size_biased(), WeightSpec::gamma(3.0, 0.5));
        // Size-biased mean is E[W^2]/E[W].
        for s in [WeightSpec::gamma(2.0, 0.7), WeightSpec::discrete(vec![1.0, 4.0], vec![0.3, 0.7])] {
            assert!((s.size_biased().mean() - s.raw_moment(2.0) / s.mean()).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_quantile_inverts_cdf() {
        for (k, s) in [(0.5, 1.0), (2.0, 1.0), (3.0, 0.25), (10.0, 2.0)] {
            for u in [1e-6, 0.01, 0.3, 0.5, 0.9, 0.999999] {
                let x = gamma_quantile(k, s, u);
                let back = WeightSpec::gamma(k, s).cdf(x);
                assert!((back - u).abs() < 1e-12, "k={k} s={s} u={u} back={back}");
            }
        }
    }

    #[test]
    fn discrete_quantile_and_cdf() {
        let d = DiscreteLaw::from_weighted(&[3.0, 1.0, 3.0], &[1.0, 2.0, 1.0]);
        assert_eq!(d.values(), &[1.0, 3.0]);
        assert_eq!(d.cdf(0.5), 0.0);
        assert_eq!(d.cdf(1.0), 0.5);
        assert_eq!(d.quantile(0.5), 1.0);
        assert_eq!(d.quantile(0.5000001), 3.0);
        assert_eq!(d.mass(3.0), 0.5);
    }

    #[test]
    fn wasserstein_examples() {
        let a = WeightSpec::gamma(2.0, 1.0);
        assert_eq!(wasserstein_1d(Law::Spec(&a), Law::Spec(&a)).unwrap(), 0.0);
        let (x, y) = (WeightSpec::constant(1.5), WeightSpec::constant(4.0));
        assert!((wasserstein_1d(Law::Spec(&x), Law::Spec(&y)).unwrap() - 2.5).abs() < 1e-15);
        let u01 = WeightSpec::discrete(vec![0.5, 1.0], vec![0.5, 0.5]);
        let u12 = WeightSpec::discrete(vec![1.5, 2.0], vec![0.5, 0.5]);
        assert!((wasserstein_1d(Law::Spec(&u01), Law::Spec(&u12)).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            wasserstein_1d(Law::Spec(&a), Law::Spec(&WeightSpec::gamma(3.0, 1.0))),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn point_mass_against_gamma_is_mean_absolute_deviation() {
        // W1(delta_c, Gamma) = E|X - c|, computed here by brute quadrature.
        let (k, s, c) = (2.0, 1.0, 1.3);
        let w = wasserstein_1d(Law::Spec(&WeightSpec::constant(c)), Law::Spec(&WeightSpec::gamma(k, s))).unwrap();
        let m = 2_000_000;
        let h = 60.0 / m as f64;
        let mut q = 0.0;
        for i in 0..m {
            let x = (i as f64 + 0.5) * h;
            q += (x - c).abs() * gamma_density(k, s, x) * h;
        }
        assert!((w - q).abs() < 1e-6, "{w} vs {q}");
    }

    #[test]
    fn tv_distances() {
        let a = WeightSpec::discrete(vec![1.0, 2.0], vec![0.5, 0.5]);
        let b = WeightSpec::discrete(vec![1.0, 3.0], vec![0.25, 0.75]);
        assert!((tv_distance(&a, &b).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(tv_distance(&a, &WeightSpec::gamma(1.0, 1.0)).unwrap(), 1.0);
        // Exp(1) vs Exp(2): densities cross at ln 2, TV = 1/4.
        let tv = tv_distance(&WeightSpec::exponential(1.0), &WeightSpec::exponential(2.0)).unwrap();
        assert!((tv - 0.25).abs() < 1e-10, "{tv}");
    }

    #[test]
    fn tv_coupling_preserves_target_and_matches_rate() {
        let from = WeightSpec::discrete(vec![1.0, 2.0], vec![0.5, 0.5]);
        let to = WeightSpec::discrete(vec![1.0, 2.0, 3.0], vec![0.25, 0.5, 0.25]);
        let tv = tv_distance(&from, &to).unwrap();
        let mut rng = SiteRng::new(99);
        let m = 200_000;
        let (mut differ, mut threes) = (0usize, 0usize);
        for _ in 0..m {
            let x = from.sample(&mut rng);
            let y = tv_couple(x, &from, &to, &mut rng);
            differ += (x != y) as usize;
            threes += (y == 3.0) as usize;
        }
        let rate = differ as f64 / m as f64;
        let sd = (tv * (1.0 - tv) / m as f64).sqrt();
        assert!((rate - tv).abs() < 4.0 * sd, "{rate} vs {tv}");
        let p3 = threes as f64 / m as f64;
        assert!((p3 - 0.25).abs() < 4.0 * (0.25 * 0.75 / m as f64).sqrt());
    }
}
