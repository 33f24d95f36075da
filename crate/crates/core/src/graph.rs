//! Rank-one inhomogeneous random graphs with lazily addressable marks.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Domain, Seed, SiteRng};
use crate::weights::{wasserstein_1d, DiscreteLaw, Law, WeightSpec};

/// `min(Wu Wv / (n theta), 1)`.
pub fn edge_probability(wu: f64, wv: f64, n: usize, theta: f64) -> Result<f64> {
    if !(wu > 0.0 && wv > 0.0 && n > 0 && theta > 0.0) {
        return Err(Error::Domain(format!(
            "edge probability needs positive arguments, got Wu={wu} Wv={wv} n={n} theta={theta}"
        )));
    }
    Ok((wu * wv / (n as f64 * theta)).min(1.0))
}

/// Connectivity weights of the `n` vertices and the model constant `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalWeights {
    w: Vec<f64>,
    theta: f64,
}

impl EmpiricalWeights {
    pub fn new(w: Vec<f64>, theta: f64) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Domain("need at least one vertex".into()));
        }
        if let Some(x) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::Domain(format!("connectivity weight {x} must be positive")));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::Domain(format!("theta {theta} must be positive")));
        }
        Ok(EmpiricalWeights { w, theta })
    }

    /// I.i.d. weights from `spec`; `theta` is the closed-form mean of `spec`.
    pub fn sample(spec: &WeightSpec, n: usize, seed: Seed) -> Result<Self> {
        spec.validate()?;
        let w = (0..n)
            .map(|v| spec.sample(&mut SiteRng::for_site(seed, 0, Domain::ConnectivityWeight, v as u64, 0, false)))
            .collect();
        Self::new(w, spec.mean())
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn w(&self, v: usize) -> f64 {
        self.w[v]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `n theta`.
    pub fn n_theta(&self) -> f64 {
        self.n() as f64 * self.theta
    }

    /// `Lambda_n = sum_v W_v`.
    pub fn lambda(&self) -> f64 {
        self.w.iter().sum()
    }

    pub fn p(&self, u: usize, v: usize) -> f64 {
        (self.w[u] * self.w[v] / self.n_theta()).min(1.0)
    }

    /// `Gamma_{p,n} = (n theta)^{-1} sum_v W_v^p`.
    pub fn gamma_n(&self, p: f64) -> f64 {
        self.w.iter().map(|x| x.powf(p)).sum::<f64>() / self.n_theta()
    }

    /// `kappa_{p,n} = (n theta)^{-1} sum_v W_v^p 1{W_v > sqrt(n theta)}`.
    pub fn kappa_n(&self, p: f64) -> f64 {
        let t = self.n_theta().sqrt();
        // Adding zero turns the empty sum's -0.0 into 0.0.
        self.w.iter().filter(|x| **x > t).map(|x| x.powf(p)).sum::<f64>() / self.n_theta() + 0.0
    }

    /// Empirical law `nu_n`.
    pub fn law(&self) -> DiscreteLaw {
        DiscreteLaw::from_sample(&self.w)
    }

    /// Size-biased empirical law `nu_hat_n`, mass `W_v / Lambda_n` on `W_v`.
    pub fn size_biased_law(&self) -> DiscreteLaw {
        DiscreteLaw::from_weighted(&self.w, &self.w)
    }

    pub fn set_norms(&self, vs: &[usize]) -> SetNorms {
        let t = self.n_theta().sqrt();
        let mut s = SetNorms { card: vs.len() as f64, ..SetNorms::default() };
        for &v in vs {
            let x = self.w[v];
            s.norm += x;
            s.norm2 += x * x;
            if x > t {
                s.norm_plus += x;
            }
        }
        s
    }

    /// Moment summary relative to the limit law `spec`.
    pub fn moments(&self, spec: &WeightSpec) -> Result<MomentSummary> {
        spec.validate()?;
        let nu_n = self.law();
        let hat_n = self.size_biased_law();
        let a1 = wasserstein_1d(Law::Discrete(&nu_n), Law::Spec(spec))?;
        let a2 = wasserstein_1d(Law::Discrete(&hat_n), Law::Spec(&spec.size_biased()))?;
        let m = spec.mean();
        Ok(MomentSummary {
            n: self.n(),
            theta: self.theta,
            gamma: [0.0, 1.0, 2.0, 3.0].map(|p| self.gamma_n(p)),
            kappa: [0.0, 1.0, 2.0].map(|p| self.kappa_n(p)),
            lambda_n: self.lambda(),
            alpha_n: a1.max(a2) + 0.0,
            gamma_limit: [0.0, 1.0, 2.0, 3.0].map(|p| spec.raw_moment(p) / m),
        })
    }
}

/// `|V|`, `||V||`, `||V||_2` and `||V||_+` of a vertex set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SetNorms {
    pub card: f64,
    pub norm: f64,
    pub norm2: f64,
    pub norm_plus: f64,
}

/// Empirical moments `Gamma_{p,n}` (p = 0..3), `kappa_{p,n}` (p = 0..2),
/// `Lambda_n`, the transport distance `alpha_n` and the limit moments
/// `Gamma_p` of the weight law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub n: usize,
    pub theta: f64,
    pub gamma: [f64; 4],
    pub kappa: [f64; 3],
    pub lambda_n: f64,
    pub alpha_n: f64,
    pub gamma_limit: [f64; 4],
}

impl MomentSummary {
    pub fn n_theta(&self) -> f64 {
        self.n as f64 * self.theta
    }
}

/// Laws of the decorative vertex and edge weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkLaws {
    pub edge: WeightSpec,
    pub vertex: WeightSpec,
}

impl Default for MarkLaws {
    fn default() -> Self {
        MarkLaws { edge: WeightSpec::exponential(1.0), vertex: WeightSpec::exponential(1.0) }
    }
}

/// A vertex or an unordered vertex pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Site {
    Vertex(usize),
    Edge(usize, usize),
}

impl Site {
    pub fn edge(u: usize, v: usize) -> Site {
        Site::Edge(u.min(v), u.max(v))
    }
}

/// The set `F` of sites whose randomness is replaced in `G^F`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PerturbationSet {
    all: bool,
    vertices: BTreeSet<usize>,
    pairs: BTreeSet<(usize, usize)>,
}

impl PerturbationSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Every vertex and every pair.
    pub fn all() -> Self {
        PerturbationSet { all: true, ..Self::default() }
    }

    pub fn new(sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        let mut out = Self::default();
        for s in sites {
            let fresh = match s {
                Site::Vertex(v) => out.vertices.insert(v),
                Site::Edge(u, v) => {
                    if u == v {
                        return Err(Error::InvalidPerturbation(format!("pair ({u}, {v}) is a loop")));
                    }
                    out.pairs.insert((u.min(v), u.max(v)))
                }
            };
            if !fresh {
                return Err(Error::InvalidPerturbation(format!("site {s:?} listed twice")));
            }
        }
        Ok(out)
    }

    pub fn single(site: Site) -> Result<Self> {
        Self::new([site])
    }

    pub fn is_all(&self) -> bool {
        self.all
    }

    pub fn is_empty(&self) -> bool {
        !self.all && self.vertices.is_empty() && self.pairs.is_empty()
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        self.all || self.vertices.contains(&v)
    }

    pub fn contains_pair(&self, u: usize, v: usize) -> bool {
        self.all || self.pairs.contains(&(u.min(v), u.max(v)))
    }

    fn check_range(&self, n: usize) -> Result<()> {
        let bad = self.vertices.iter().copied().chain(self.pairs.iter().map(|p| p.1)).find(|v| *v >= n);
        match bad {
            Some(vertex) => Err(Error::VertexOutOfRange { vertex, n }),
            None => Ok(()),
        }
    }

    fn union(&self, other: &Self) -> Self {
        PerturbationSet {
            all: self.all || other.all,
            vertices: self.vertices.union(&other.vertices).copied().collect(),
            pairs: self.pairs.union(&other.pairs).copied().collect(),
        }
    }
}

/// Vertices grouped by `floor(log2 W)`, each group sorted by label.
#[derive(Debug)]
struct Buckets {
    members: Vec<Vec<usize>>,
    wmax: Vec<f64>,
    of: Vec<(usize, usize)>,
}

impl Buckets {
    fn new(w: &EmpiricalWeights) -> Self {
        let key = |x: f64| x.log2().floor() as i64;
        let mut keys: Vec<i64> = w.as_slice().iter().map(|x| key(*x)).collect();
        keys.sort_unstable();
        keys.dedup();
        let mut members = vec![Vec::new(); keys.len()];
        let mut wmax = vec![0.0f64; keys.len()];
        let mut of = vec![(0, 0); w.n()];
        for (v, x) in w.as_slice().iter().enumerate() {
            let b = keys.binary_search(&key(*x)).expect("bucket key");
            of[v] = (b, members[b].len());
            members[b].push(v);
            wmax[b] = wmax[b].max(*x);
        }
        Buckets { members, wmax, of }
    }
}

/// Geometric number of failures before a success of probability `q`.
fn skip(rng: &mut SiteRng, q: f64, cap: usize) -> usize {
    if q >= 1.0 {
        return 0;
    }
    let s = (rng.uniform().ln() / (-q).ln_1p()).floor();
    if s >= cap as f64 {
        cap
    } else {
        s as usize
    }
}

/// A realized graph together with deterministic access to every site's
/// primary and replacement randomness.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    weights: Arc<EmpiricalWeights>,
    buckets: Arc<Buckets>,
    marks: MarkLaws,
    seed: Seed,
    stream: u64,
    adj: Vec<Vec<usize>>,
    edges: usize,
    perturbation: PerturbationSet,
}

/// Samples `G_n` in expected `O(n log(max W / min W) + edges)` time.
///
/// For each row `u` and weight bucket `b`, candidates `v > u` in `b` are
/// visited by geometric skips at the bucket-maximal probability and then
/// accepted at the exact `p_uv`. Any single indicator can be recomputed by
/// replaying one row.
pub fn sample_graph(weights: &EmpiricalWeights, marks: &MarkLaws, seed: Seed, stream: u64) -> WeightedGraph {
    let weights = Arc::new(weights.clone());
    let buckets = Arc::new(Buckets::new(&weights));
    let mut g = WeightedGraph {
        weights,
        buckets,
        marks: marks.clone(),
        seed,
        stream,
        adj: Vec::new(),
        edges: 0,
        perturbation: PerturbationSet::empty(),
    };
    g.adj = g.generate(false);
    g.edges = g.adj.iter().map(Vec::len).sum::<usize>() / 2;
    g
}

impl WeightedGraph {
    fn generate(&self, flag: bool) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut adj = vec![Vec::new(); n];
        for u in 0..n {
            for b in 0..self.buckets.members.len() {
                self.scan_row(u, b, flag, usize::MAX, |v| {
                    adj[u].push(v);
                    adj[v].push(u);
                });
            }
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// Replays row `u` in bucket `b`, calling `hit` on accepted candidates
    /// with bucket position at most `stop`.
    fn scan_row(&self, u: usize, b: usize, flag: bool, stop: usize, mut hit: impl FnMut(usize)) {
        let members = &self.buckets.members[b];
        let mut pos = members.partition_point(|x| *x <= u);
        if pos >= members.len() {
            return;
        }
        let w = &self.weights;
        let q = (w.w(u) * self.buckets.wmax[b] / w.n_theta()).min(1.0);
        let mut rng = SiteRng::for_site(self.seed, self.stream, Domain::RowSkip, u as u64, b as u64, flag);
        loop {
            pos = pos.saturating_add(skip(&mut rng, q, members.len()));
            if pos >= members.len() || pos > stop {
                return;
            }
            let v = members[pos];
            if self.accept_uniform(u, v, flag) * q < w.p(u, v) {
                hit(v);
            }
            pos += 1;
        }
    }

    fn accept_uniform(&self, u: usize, v: usize, flag: bool) -> f64 {
        SiteRng::for_site(self.seed, self.stream, Domain::EdgeAccept, u as u64, v as u64, flag).uniform()
    }

    /// Primary (`replacement = false`) or replacement indicator of the pair,
    /// independent of any perturbation applied to this graph.
    pub fn indicator(&self, u: usize, v: usize, replacement: bool) -> bool {
        if u == v {
            return false;
        }
        let (a, c) = (u.min(v), u.max(v));
        let (b, pos) = self.buckets.of[c];
        let mut found = false;
        self.scan_row(a, b, replacement, pos, |x| found |= x == c);
        found
    }

    pub fn n(&self) -> usize {
        self.weights.n()
    }

    pub fn weights(&self) -> &EmpiricalWeights {
        &self.weights
    }

    pub fn marks(&self) -> &MarkLaws {
        &self.marks
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn perturbation(&self) -> &PerturbationSet {
        &self.perturbation
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Realized edges `(u, v)` with `u < v` in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, a)| a.iter().filter(move |v| **v > u).map(move |v| (u, *v)))
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.n() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { vertex: v, n: self.n() })
        }
    }

    /// Primary or replacement vertex weight `w_v` / `w'_v`.
    pub fn vertex_weight_raw(&self, v: usize, replacement: bool) -> f64 {
        let mut r = SiteRng::for_site(self.seed, self.stream, Domain::VertexWeight, v as u64, 0, replacement);
        self.marks.vertex.sample(&mut r)
    }

    /// Primary or replacement edge weight `w_e` / `w'_e`; defined for every pair.
    pub fn edge_weight_raw(&self, u: usize, v: usize, replacement: bool) -> f64 {
        let (a, b) = (u.min(v) as u64, u.max(v) as u64);
        let mut r = SiteRng::for_site(self.seed, self.stream, Domain::EdgeWeight, a, b, replacement);
        self.marks.edge.sample(&mut r)
    }

    /// Vertex weight in this (possibly perturbed) graph.
    pub fn vertex_weight(&self, v: usize) -> f64 {
        self.vertex_weight_raw(v, self.perturbation.contains_vertex(v))
    }

    /// Edge weight of the pair in this (possibly perturbed) graph.
    pub fn edge_weight(&self, u: usize, v: usize) -> f64 {
        self.edge_weight_raw(u, v, self.perturbation.contains_pair(u, v))
    }

    /// `G^F`: sites in `F` take their replacement randomness. Perturbations
    /// compose by union.
    pub fn perturb(&self, f: &PerturbationSet) -> Result<WeightedGraph> {
        f.check_range(self.n())?;
        let mut g = self.clone();
        g.perturbation = self.perturbation.union(f);
        if g.perturbation.is_all() {
            if !self.perturbation.is_all() {
                g.adj = g.generate(true);
            }
        } else {
            for &(u, v) in &f.pairs {
                if self.perturbation.contains_pair(u, v) {
                    continue;
                }
                let now = self.has_edge(u, v);
                let next = self.indicator(u, v, true);
                if now != next {
                    g.set_edge(u, v, next);
                }
            }
        }
        g.edges = g.adj.iter().map(Vec::len).sum::<usize>() / 2;
        Ok(g)
    }

    fn set_edge(&mut self, u: usize, v: usize, on: bool) {
        for (a, b) in [(u, v), (v, u)] {
            match (self.adj[a].binary_search(&b), on) {
                (Err(i), true) => self.adj[a].insert(i, b),
                (Ok(i), false) => {
                    self.adj[a].remove(i);
                }
                _ => {}
            }
        }
    }
}
