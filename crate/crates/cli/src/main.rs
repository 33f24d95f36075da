//! `irg`: experiments on rank-one inhomogeneous random graphs.
//!
//! Exit codes: 0 success, 1 runtime failure (including a panicking
//! replica), 2 configuration or usage error, 3 threshold violation under
//! `--check`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use irg_core::apps::matching::{h_value, matching_sandwich, max_weight_matching, MatchGraph};
use irg_core::apps::App;
use irg_core::explore::{explore, is_tree};
use irg_core::harness::{
    bounds_check, bounds_csv, bounds_grid, clt_check, clt_csv, clt_experiment, config_hash, coupling_csv,
    coupling_experiment, generate_summary, rde_check, rde_csv, rde_experiment, ExperimentConfig, RunContext,
    RunManifest,
};
use irg_core::{Error, Seed};

/// Final KS bound and `n / sigma^2` spread enforced by `clt --check`.
const CLT_KS_MAX: f64 = 0.05;
const CLT_RATIO_SPREAD: f64 = 0.25;
/// Final even/odd gap enforced by `rde --check`.
const RDE_GAP_MAX: f64 = 0.02;
/// Relative slack of the sandwich check on sampled weights.
const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Parser, Debug)]
#[command(name = "irg", version, about = "Local couplings and CLT diagnostics for inhomogeneous random graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Base seed as up to 32 hex digits; overrides the config
    #[arg(long, env = "IRG_SEED")]
    seed: Option<String>,
    /// Replica count; overrides the config
    #[arg(long)]
    replicas: Option<usize>,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory; defaults to the config's `output`, then `.`
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Exit with code 3 when an acceptance threshold is violated
    #[arg(long)]
    check: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample one graph at the first grid size and print its summary
    Generate {
        #[command(flatten)]
        common: Common,
        /// Write the edge list `u v w_e` to this file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Break rates of the full coupling against the coupling bound
    Couple {
        #[command(flatten)]
        common: Common,
    },
    /// Kolmogorov distance of the standardized functional to the normal law
    Clt {
        #[command(flatten)]
        common: Common,
        /// `edge-sum` or `matching`; defaults to the config's `app`
        #[arg(long)]
        app: Option<App>,
    },
    /// Bound values over the `(n, l)` grid
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Population dynamics for the matching recursion
    Rde {
        #[command(flatten)]
        common: Common,
    },
    /// Exact matching, `h(G, v)` and the even/odd sandwich on a small graph
    MatchingOracle {
        #[command(flatten)]
        common: Common,
        /// Read the graph from an edge list `u v w` instead of sampling it
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Sandwich level `k`
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
}

enum Failure {
    Runtime(Error),
    Config(Error),
    Check(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidSpec(_) | Error::Io(_) => Failure::Config(e),
            other => Failure::Runtime(other),
        }
    }
}

struct Run {
    ctx: RunContext,
    out_dir: PathBuf,
    check: bool,
    outputs: Vec<String>,
}

impl Run {
    fn new(common: &Common) -> Result<Self, Failure> {
        let text = fs::read_to_string(&common.config)
            .map_err(|e| Failure::Config(Error::Config(format!("{}: {e}", common.config.display()))))?;
        let mut config = ExperimentConfig::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Failure::Config(Error::Config(format!("{}: {m}", common.config.display()))),
            other => Failure::Config(other),
        })?;
        if let Some(r) = common.replicas {
            if r == 0 {
                return Err(Failure::Config(Error::Config("--replicas must be at least 1".into())));
            }
            config.replicas = Some(r);
        }
        let seed = match &common.seed {
            Some(s) => Seed::parse_hex(s).ok_or_else(|| Failure::Config(Error::Config(format!("seed '{s}' is not hex"))))?,
            None => config.seed(),
        };
        let out_dir = common
            .out_dir
            .clone()
            .or_else(|| config.output.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let hash = config_hash(&text)?;
        let ctx = RunContext::new(config, seed, hash, common.workers);
        Ok(Run { ctx, out_dir, check: common.check, outputs: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        fs::create_dir_all(&self.out_dir).map_err(Error::from)?;
        fs::write(self.out_dir.join(name), contents).map_err(Error::from)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, command: &str, violations: Vec<String>) -> Result<(), Failure> {
        let name = format!("{command}_manifest.json");
        let manifest = RunManifest::new(command, &self.ctx, self.outputs.clone());
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
        fs::create_dir_all(&self.out_dir).map_err(Error::from)?;
        fs::write(self.out_dir.join(&name), text + "\n").map_err(Error::from)?;
        for f in &self.outputs {
            println!("wrote {}", self.out_dir.join(f).display());
        }
        self.outputs.clear();
        if self.check && !violations.is_empty() {
            return Err(Failure::Check(violations));
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate { common, out } => {
            let run = Run::new(&common)?;
            let (summary, g) = generate_summary(&run.ctx)?;
            print!("{summary}");
            if let Some(path) = out {
                let mut s = String::new();
                for (u, v) in g.edges() {
                    s.push_str(&format!("{u} {v} {}\n", g.edge_weight(u, v)));
                }
                fs::write(&path, s).map_err(Error::from)?;
            }
            Ok(())
        }
        Command::Couple { common } => {
            let mut run = Run::new(&common)?;
            let rows = coupling_experiment(&run.ctx)?;
            for r in &rows {
                println!("n {} l {} rate {} bound {} violation {}", r.n, r.ell, r.rate.value(), r.bound, r.violation);
            }
            let violations = rows
                .iter()
                .filter(|r| r.violation)
                .map(|r| format!("n = {}, l = {}: rate {} above bound {}", r.n, r.ell, r.rate.value(), r.bound))
                .collect();
            let csv = coupling_csv(&run.ctx, &rows);
            run.write("coupling.csv", &csv)?;
            run.finish("couple", violations)
        }
        Command::Clt { common, app } => {
            let mut run = Run::new(&common)?;
            let app = app.unwrap_or(run.ctx.config.app);
            let rows = clt_experiment(&run.ctx, app)?;
            for r in &rows {
                let ks = r.ks.map_or("none".to_string(), |k| k.statistic.to_string());
                println!("n {} sigma2 {} ks {ks} n/sigma2 {} trend_ok {}", r.n, r.sigma2, r.n_over_sigma2, r.trend_ok);
            }
            let csv = clt_csv(&run.ctx, &rows);
            run.write(&format!("clt_{}.csv", app.name()), &csv)?;
            run.finish("clt", clt_check(&rows, CLT_KS_MAX, CLT_RATIO_SPREAD))
        }
        Command::Bounds { common } => {
            let mut run = Run::new(&common)?;
            let rows = bounds_grid(&run.ctx)?;
            for r in &rows {
                println!("n {} l {} eps {} rho {} epsilon_v {}", r.params.moments.n, r.params.ell, r.eps, r.rho, r.epsilon_v);
            }
            let csv = bounds_csv(&run.ctx, &rows);
            run.write("bounds_grid.csv", &csv)?;
            run.finish("bounds", bounds_check(&rows))
        }
        Command::Rde { common } => {
            let mut run = Run::new(&common)?;
            let (pop, d) = rde_experiment(&run.ctx)?;
            println!("final gap {} worst increase {} sigma converged {}", d.final_gap(), d.worst_increase_sigmas, d.converged);
            let csv = rde_csv(&run.ctx, &d);
            run.write("rde.csv", &csv)?;
            run.write("rde_population.csv", &pop.to_csv())?;
            run.finish("rde", rde_check(&d, RDE_GAP_MAX))
        }
        Command::MatchingOracle { common, edges, k } => {
            let mut run = Run::new(&common)?;
            let (csv, violations) = match edges {
                Some(path) => oracle_from_file(&path)?,
                None => oracle_sampled(&run.ctx, k)?,
            };
            run.write("matching.csv", &csv)?;
            run.finish("matching-oracle", violations)
        }
    }
}

fn oracle_from_file(path: &Path) -> Result<(String, Vec<String>), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(Error::Config(format!("{}: {e}", path.display()))))?;
    let mut edges = Vec::new();
    let mut n = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Failure::Config(Error::Config(format!("{} line {}: expected `u v w`", path.display(), i + 1)));
        if f.len() != 3 {
            return Err(bad());
        }
        let u: usize = f[0].parse().map_err(|_| bad())?;
        let v: usize = f[1].parse().map_err(|_| bad())?;
        let w: f64 = f[2].parse().map_err(|_| bad())?;
        n = n.max(u + 1).max(v + 1);
        edges.push((u, v, w));
    }
    let g = MatchGraph::new(n, &edges).map_err(|e| Failure::Config(Error::Config(format!("{}: {e}", path.display()))))?;
    let m = max_weight_matching(&g)?;
    println!("matching weight {}", m.value);
    let mut s = String::from("vertex,h\n");
    for v in 0..n {
        s.push_str(&format!("{v},{}\n", h_value(&g, v)?));
    }
    Ok((s, Vec::new()))
}

fn oracle_sampled(ctx: &RunContext, k: usize) -> Result<(String, Vec<String>), Failure> {
    let n = ctx.config.n_grid[0];
    let weights = irg_core::graph::EmpiricalWeights::sample(&ctx.config.weights, n, ctx.seed)?;
    let g = irg_core::graph::sample_graph(&weights, &ctx.config.marks, ctx.seed, 1);
    let mg = MatchGraph::from_graph(&g);
    let m = max_weight_matching(&mg)?;
    println!("n {n} edges {} matching weight {}", g.edge_count(), m.value);
    let mut s = String::from("vertex,h,tree_shaped,g_lower,g_upper\n");
    let mut violations = Vec::new();
    for v in 0..n {
        let h = h_value(&mg, v)?;
        let nb = explore(&g, v, k)?;
        if is_tree(&nb) {
            let sw = matching_sandwich(&nb, &g, k)?;
            // Sampled marks are not dyadic, so the two sides round differently.
            let tol = ORACLE_TOLERANCE * (1.0 + h.abs());
            if !(sw.g_lower <= h + tol && h <= sw.g_upper + tol) {
                violations.push(format!("vertex {v}: {h} outside [{}, {}]", sw.g_lower, sw.g_upper));
            }
            s.push_str(&format!("{v},{h},true,{},{}\n", sw.g_lower, sw.g_upper));
        } else {
            s.push_str(&format!("{v},{h},false,,\n"));
        }
    }
    Ok((s, violations))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Check(v)) => {
            for line in v {
                eprintln!("check failed: {line}");
            }
            ExitCode::from(3)
        }
    }
}
