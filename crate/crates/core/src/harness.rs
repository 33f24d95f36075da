//! Monte Carlo experiment driver. Replicas run in parallel and are folded
//! in replica order, so every table is independent of the worker count.

use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::apps::App;
use crate::bounds::{self, BoundParams};
use crate::coupling::{couple_full, default_k_n, BreakReason, CouplingConfig};
use crate::error::{Error, Result};
use crate::graph::{sample_graph, EmpiricalWeights, MarkLaws, MomentSummary, WeightedGraph};
use crate::rde::{rde_fixed_point, Population, RdeDiagnostics};
use crate::rng::{site_key, Domain, Seed, SiteRng};
use crate::stats::{estimate_variance, ks_to_normal, standardize, KsReport, Rate};
use crate::weights::{tv_distance, WeightSpec};

pub const DEFAULT_CLT_REPLICAS: usize = 2000;
pub const DEFAULT_COUPLING_REPLICAS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdeConfig {
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

impl Default for RdeConfig {
    fn default() -> Self {
        RdeConfig { population: default_population(), iterations: default_iterations() }
    }
}

fn default_population() -> usize {
    100_000
}

fn default_iterations() -> usize {
    30
}

fn default_ells() -> Vec<usize> {
    vec![1, 2]
}

fn default_roots() -> usize {
    1
}

fn default_constant() -> f64 {
    1.0
}

fn default_app() -> App {
    App::EdgeSum
}

/// Experiment description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Law of the connectivity weights.
    pub weights: WeightSpec,
    /// Laws of the vertex and edge marks of the graph.
    #[serde(default)]
    pub marks: MarkLaws,
    /// Limit mark laws; default to `marks`.
    #[serde(default)]
    pub limit_marks: Option<MarkLaws>,
    pub n_grid: Vec<usize>,
    /// Depths `l` (coupling, bounds) or levels `k`.
    #[serde(default = "default_ells")]
    pub ells: Vec<usize>,
    /// Fixed `k_n`; `ceil(n^{1/3})` when absent.
    #[serde(default)]
    pub k_n: Option<f64>,
    #[serde(default)]
    pub replicas: Option<usize>,
    #[serde(default = "default_app")]
    pub app: App,
    /// Base seed as hex.
    #[serde(default)]
    pub seed: Option<String>,
    #[serde(default)]
    pub output: Option<String>,
    /// Number of coupled roots `|V|`.
    #[serde(default = "default_roots")]
    pub roots: usize,
    #[serde(default = "default_constant")]
    pub c: f64,
    #[serde(default = "default_constant")]
    pub c0: f64,
    #[serde(default)]
    pub rde: RdeConfig,
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.marks.edge.validate()?;
        self.marks.vertex.validate()?;
        if let Some(m) = &self.limit_marks {
            m.edge.validate()?;
            m.vertex.validate()?;
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(Error::Config("n_grid must be nonempty with positive entries".into()));
        }
        if self.ells.is_empty() {
            return Err(Error::Config("ells must be nonempty".into()));
        }
        if self.replicas == Some(0) {
            return Err(Error::Config("replicas must be at least 1".into()));
        }
        if self.roots == 0 || self.n_grid.iter().any(|n| *n < self.roots) {
            return Err(Error::Config("roots must be in 1..=n for every n".into()));
        }
        if let Some(k) = self.k_n {
            if k.is_nan() || k <= 0.0 || !k.is_finite() {
                return Err(Error::Config(format!("k_n = {k} must be positive")));
            }
        }
        if !(self.c > 0.0 && self.c0 > 0.0) {
            return Err(Error::Config("C and C0 must be positive".into()));
        }
        if let Some(s) = &self.seed {
            Seed::parse_hex(s).ok_or_else(|| Error::Config(format!("seed '{s}' is not hex")))?;
        }
        Ok(())
    }

    pub fn limit_marks(&self) -> &MarkLaws {
        self.limit_marks.as_ref().unwrap_or(&self.marks)
    }

    pub fn k_n(&self, n: usize) -> f64 {
        self.k_n.unwrap_or_else(|| default_k_n(n))
    }

    pub fn seed(&self) -> Seed {
        self.seed.as_deref().and_then(Seed::parse_hex).unwrap_or(Seed(0))
    }
}

/// SHA-256 of the config with keys sorted and whitespace removed.
pub fn config_hash(text: &str) -> Result<String> {
    let v: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
    let canonical = serde_json::to_string(&v).map_err(|e| Error::Config(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

/// Shared context of one invocation.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: ExperimentConfig,
    pub seed: Seed,
    pub config_hash: String,
    pub workers: usize,
}

impl RunContext {
    pub fn new(config: ExperimentConfig, seed: Seed, config_hash: String, workers: usize) -> Self {
        RunContext { config, seed, config_hash, workers: workers.max(1) }
    }

    /// Context for a config given as text, with its own seed.
    pub fn from_text(text: &str, workers: usize) -> Result<Self> {
        let config = ExperimentConfig::from_json(text)?;
        let seed = config.seed();
        Ok(RunContext::new(config, seed, config_hash(text)?, workers))
    }

    fn weights(&self, n: usize) -> Result<EmpiricalWeights> {
        EmpiricalWeights::sample(&self.config.weights, n, self.seed)
    }

    /// Graph of replica `r`; stream 0 is reserved for the weights.
    fn graph(&self, weights: &EmpiricalWeights, r: usize) -> WeightedGraph {
        sample_graph(weights, &self.config.marks, self.seed, r as u64 + 1)
    }

    /// Runs `f` on replicas `0..m` with `workers` threads, in replica order.
    pub fn replicate<T: Send>(&self, m: usize, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        let out: Vec<Result<T>> = pool.install(|| {
            (0..m)
                .into_par_iter()
                .map(|r| {
                    catch_unwind(AssertUnwindSafe(|| f(r))).unwrap_or_else(|p| {
                        let message = p
                            .downcast_ref::<&str>()
                            .map(|s| s.to_string())
                            .or_else(|| p.downcast_ref::<String>().cloned())
                            .unwrap_or_else(|| "unknown panic".into());
                        Err(Error::WorkerPanic { replica: r, message })
                    })
                })
                .collect()
        });
        out.into_iter().collect()
    }
}

/// One row of `clt_<app>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltRow {
    pub n: usize,
    pub mean: f64,
    pub sigma2: f64,
    pub sigma2_se: f64,
    /// Absent when the sample variance vanishes.
    pub ks: Option<KsReport>,
    pub n_over_sigma2: f64,
    pub replicas: usize,
    /// KS below the previous row's KS plus two null standard deviations.
    pub trend_ok: bool,
}

/// Replicates `f(G_n)` on frozen weights for every `n` of the grid.
pub fn clt_experiment(ctx: &RunContext, app: App) -> Result<Vec<CltRow>> {
    let m = ctx.config.replicas.unwrap_or(DEFAULT_CLT_REPLICAS);
    if m < 2 {
        return Err(Error::InsufficientSamples { need: 2, got: m });
    }
    let mut rows: Vec<CltRow> = Vec::new();
    for &n in &ctx.config.n_grid {
        let weights = ctx.weights(n)?;
        let values = ctx.replicate(m, |r| app.evaluate(&ctx.graph(&weights, r)))?;
        let v = estimate_variance(&values)?;
        let ks = match standardize(&values) {
            Ok(z) => Some(ks_to_normal(&z)?),
            Err(Error::DegenerateVariance) => None,
            Err(e) => return Err(e),
        };
        let trend_ok = match (rows.last().and_then(|r| r.ks), ks) {
            (Some(prev), Some(cur)) => cur.statistic < prev.statistic + 2.0 * prev.null_sd().max(cur.null_sd()),
            (Some(_), None) => false,
            _ => true,
        };
        rows.push(CltRow {
            n,
            mean: crate::stats::mean(&values),
            sigma2: v.variance,
            sigma2_se: v.jackknife_se,
            ks,
            n_over_sigma2: n as f64 / v.variance,
            replicas: m,
            trend_ok,
        });
    }
    Ok(rows)
}

/// Violations of the CLT acceptance thresholds: trend within two null
/// standard deviations, final KS below `ks_max`, and `n / sigma^2`
/// varying by less than `ratio_spread` (as `max/min - 1`).
pub fn clt_check(rows: &[CltRow], ks_max: f64, ratio_spread: f64) -> Vec<String> {
    let mut out = Vec::new();
    for r in rows {
        match r.ks {
            None => out.push(format!("n = {}: degenerate variance", r.n)),
            Some(_) if !r.trend_ok => out.push(format!("n = {}: KS rose above the noise band", r.n)),
            _ => {}
        }
    }
    if let Some(ks) = rows.last().and_then(|r| r.ks) {
        if ks.statistic >= ks_max {
            out.push(format!("final KS {} >= {ks_max}", ks.statistic));
        }
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.n_over_sigma2).collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if (hi / lo - 1.0).is_nan() || hi / lo - 1.0 >= ratio_spread {
        out.push(format!("n/sigma^2 spread {} >= {ratio_spread}", hi / lo - 1.0));
    }
    out
}

pub fn clt_csv(ctx: &RunContext, rows: &[CltRow]) -> String {
    let mut s = String::from("n,mean,sigma2,sigma2_se,ks,ks_null_sd,n_over_sigma2,replicas,trend_ok,seed,config_hash\n");
    for r in rows {
        let (ks, sd) = r.ks.map_or((String::new(), String::new()), |k| (k.statistic.to_string(), k.null_sd().to_string()));
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.mean,
            r.sigma2,
            r.sigma2_se,
            ks,
            sd,
            r.n_over_sigma2,
            r.replicas,
            r.trend_ok,
            ctx.seed.to_hex(),
            ctx.config_hash
        ));
    }
    s
}

/// One row of `coupling.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingRow {
    pub n: usize,
    pub ell: usize,
    pub k_n: f64,
    pub rate: Rate,
    /// Mean over replicas of `epsilon_{n,l}(V)` for the sampled root sets.
    pub bound: f64,
    /// First break reason of each broken replica, in [`BreakReason::ALL`] order.
    pub reasons: [u64; 7],
    /// Rate minus three binomial standard deviations exceeds the bound.
    pub violation: bool,
}

/// `k` distinct roots of replica `r`, uniform over the vertices.
pub fn sample_roots(seed: Seed, r: usize, n: usize, k: usize) -> Vec<usize> {
    let mut rng = SiteRng::for_site(seed, r as u64 + 1, Domain::Experiment, n as u64, k as u64, false);
    let mut out: Vec<usize> = Vec::with_capacity(k);
    while out.len() < k {
        let v = rng.below(n as u64) as usize;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Bound parameters of the configured experiment at `(n, l)`.
pub fn bound_params(ctx: &RunContext, moments: MomentSummary, n: usize, ell: usize) -> Result<BoundParams> {
    let mut p = BoundParams::new(moments, ell, ctx.config.k_n(n));
    let (g, l) = (&ctx.config.marks, ctx.config.limit_marks());
    p.tv_edge = tv_distance(&g.edge, &l.edge)?;
    p.tv_vertex = tv_distance(&g.vertex, &l.vertex)?;
    p.c = ctx.config.c;
    p.c0 = ctx.config.c0;
    Ok(p)
}

/// Break rate of the full coupling against the coupling bound on the
/// `n x l` grid.
pub fn coupling_experiment(ctx: &RunContext) -> Result<Vec<CouplingRow>> {
    let m = ctx.config.replicas.unwrap_or(DEFAULT_COUPLING_REPLICAS);
    let mut rows = Vec::new();
    for &n in &ctx.config.n_grid {
        let weights = ctx.weights(n)?;
        let moments = weights.moments(&ctx.config.weights)?;
        for &ell in &ctx.config.ells {
            let params = bound_params(ctx, moments.clone(), n, ell)?;
            let cfg = CouplingConfig { depth: ell, k_n: params.k_n, include_weights: true };
            let per = ctx.replicate(m, |r| {
                let g = ctx.graph(&weights, r);
                let roots = sample_roots(ctx.seed, r, n, ctx.config.roots);
                let outs = couple_full(&g, &roots, &cfg, &ctx.config.weights, ctx.config.limit_marks())?;
                let reason = outs.iter().find_map(|o| o.break_reason());
                let bound = bounds::epsilon_v_bound(&params, &weights.set_norms(&roots));
                Ok((reason, bound))
            })?;
            let mut reasons = [0u64; 7];
            let mut hits = 0;
            let mut bound = 0.0;
            for (reason, b) in &per {
                bound += b;
                if let Some(x) = reason {
                    hits += 1;
                    reasons[BreakReason::ALL.iter().position(|y| y == x).expect("known reason")] += 1;
                }
            }
            let rate = Rate { hits, trials: m as u64 };
            let bound = bound / m as f64;
            let violation = rate.value() - 3.0 * rate.sigma() > bound;
            rows.push(CouplingRow { n, ell, k_n: params.k_n, rate, bound, reasons, violation });
        }
    }
    Ok(rows)
}

pub fn coupling_csv(ctx: &RunContext, rows: &[CouplingRow]) -> String {
    let mut s = String::from("n,ell,k_n,breaks,replicas,rate,sigma,bound,violation");
    for r in BreakReason::ALL {
        s.push(',');
        s.push_str(r.name());
    }
    s.push_str(",seed,config_hash\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            r.ell,
            r.k_n,
            r.rate.hits,
            r.rate.trials,
            r.rate.value(),
            r.rate.sigma(),
            r.bound,
            r.violation
        ));
        for c in r.reasons {
            s.push_str(&format!(",{c}"));
        }
        s.push_str(&format!(",{},{}\n", ctx.seed.to_hex(), ctx.config_hash));
    }
    s
}

/// One row of `bounds_grid.csv`, for the root set `V = {0}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsRow {
    pub params: BoundParams,
    pub eps: f64,
    pub rho: f64,
    pub eta: f64,
    pub epsilon_v: f64,
    pub treecoup: f64,
    pub repair: f64,
    pub weight_mean: f64,
    pub not_a_tree: f64,
}

pub fn bounds_grid(ctx: &RunContext) -> Result<Vec<BoundsRow>> {
    let mut rows = Vec::new();
    for &n in &ctx.config.n_grid {
        let weights = ctx.weights(n)?;
        let moments = weights.moments(&ctx.config.weights)?;
        let v = weights.set_norms(&[0]);
        for &ell in &ctx.config.ells {
            let p = bound_params(ctx, moments.clone(), n, ell)?;
            let (eps, rho) = bounds::epsilon_rho(&p);
            rows.push(BoundsRow {
                eps,
                rho,
                eta: bounds::eta_bound(&p, &v),
                epsilon_v: bounds::epsilon_v_bound(&p, &v),
                treecoup: bounds::treecoup_bound(&p, &v),
                repair: bounds::repair_bound(&p, &v),
                weight_mean: bounds::structural::weight_mean(&p.moments, weights.w(0), ell),
                not_a_tree: bounds::structural::not_a_tree(&p.moments, weights.w(0), ell, p.c),
                params: p,
            });
        }
    }
    Ok(rows)
}

pub fn bounds_check(rows: &[BoundsRow]) -> Vec<String> {
    let mut out = Vec::new();
    for r in rows {
        let vals = [r.eps, r.rho, r.eta, r.epsilon_v, r.treecoup, r.repair, r.weight_mean, r.not_a_tree];
        if vals.iter().any(|x| !x.is_finite() || *x < 0.0) {
            out.push(format!("n = {}, l = {}: negative or non-finite bound", r.params.moments.n, r.params.ell));
        }
        if r.rho > 1.0 {
            out.push(format!("n = {}, l = {}: rho above 1", r.params.moments.n, r.params.ell));
        }
    }
    out
}

pub fn bounds_csv(ctx: &RunContext, rows: &[BoundsRow]) -> String {
    let mut s = String::from(
        "n,ell,k_n,theta,gamma0_n,gamma1_n,gamma2_n,gamma3_n,kappa1_n,kappa2_n,alpha_n,lambda_n,gamma2,tv_edge,tv_vertex,\
         c,c0,eps,rho,eta,epsilon_v,treecoup,repair,weight_mean,not_a_tree,seed,config_hash\n",
    );
    for r in rows {
        let p = &r.params;
        let m = &p.moments;
        let fields = [
            m.n.to_string(),
            p.ell.to_string(),
            p.k_n.to_string(),
            m.theta.to_string(),
            m.gamma[0].to_string(),
            m.gamma[1].to_string(),
            m.gamma[2].to_string(),
            m.gamma[3].to_string(),
            m.kappa[1].to_string(),
            m.kappa[2].to_string(),
            m.alpha_n.to_string(),
            m.lambda_n.to_string(),
            m.gamma_limit[2].to_string(),
            p.tv_edge.to_string(),
            p.tv_vertex.to_string(),
            p.c.to_string(),
            p.c0.to_string(),
            r.eps.to_string(),
            r.rho.to_string(),
            r.eta.to_string(),
            r.epsilon_v.to_string(),
            r.treecoup.to_string(),
            r.repair.to_string(),
            r.weight_mean.to_string(),
            r.not_a_tree.to_string(),
            ctx.seed.to_hex(),
            ctx.config_hash.clone(),
        ];
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

/// Population dynamics for the matching recursion under the configured
/// weight law.
pub fn rde_experiment(ctx: &RunContext) -> Result<(Population, RdeDiagnostics)> {
    let key = site_key(ctx.seed, 0, Domain::Rde, 0, 0, false);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let r = &ctx.config.rde;
    pool.install(|| rde_fixed_point(&ctx.config.weights, r.population, r.iterations, key))
}

pub fn rde_check(d: &RdeDiagnostics, gap_max: f64) -> Vec<String> {
    let mut out = Vec::new();
    if !d.non_increasing_within(2.0) {
        out.push(format!("gap rose by {} noise units", d.worst_increase_sigmas));
    }
    if d.final_gap().is_nan() || d.final_gap() >= gap_max {
        out.push(format!("final gap {} >= {gap_max}", d.final_gap()));
    }
    out
}

pub fn rde_csv(ctx: &RunContext, d: &RdeDiagnostics) -> String {
    let mut s = String::from("iteration,gap,noise,seed,config_hash\n");
    for (t, (g, z)) in d.gaps.iter().zip(&d.noise).enumerate() {
        s.push_str(&format!("{},{g},{z},{},{}\n", t + 1, ctx.seed.to_hex(), ctx.config_hash));
    }
    s
}

/// Text summary of the graph at the first grid size: `n`, edge count and
/// the moment table.
pub fn generate_summary(ctx: &RunContext) -> Result<(String, WeightedGraph)> {
    let n = ctx.config.n_grid[0];
    let weights = ctx.weights(n)?;
    let g = ctx.graph(&weights, 0);
    let m = weights.moments(&ctx.config.weights)?;
    let mut s = format!("n {n}\nedges {}\ntheta {}\nlambda_n {}\nalpha_n {}\n", g.edge_count(), m.theta, m.lambda_n, m.alpha_n);
    for p in 0..4 {
        s.push_str(&format!("gamma_{p}_n {} gamma_{p} {}\n", m.gamma[p], m.gamma_limit[p]));
    }
    for p in 1..3 {
        s.push_str(&format!("kappa_{p}_n {}\n", m.kappa[p]));
    }
    s.push_str(&format!("seed {}\nconfig_hash {}\n", ctx.seed.to_hex(), ctx.config_hash));
    Ok((s, g))
}

/// Written once per invocation next to the outputs it lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: String,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, ctx: &RunContext, outputs: Vec<String>) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            command: command.to_string(),
            config_hash: ctx.config_hash.clone(),
            seed: ctx.seed.to_hex(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
            outputs,
        }
    }
}
