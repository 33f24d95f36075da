//! Explicit couplings of graph neighbourhoods to intermediate and limit
//! trees, with per-stage break accounting.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::Result;
use crate::explore::{explore, Neighbourhood};
use crate::graph::{MarkLaws, WeightedGraph};
use crate::limit::{grow, sample_intermediate_subtree, SizeBiasedIndex, NODE_BUDGET};
use crate::poisson;
use crate::rng::{Domain, SiteRng};
use crate::tree::RootedWeightedTree;
use crate::weights::{tv_couple, WeightSpec};

/// Why a coupled pair of objects differs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BreakReason {
    XneqZ,
    ActiveCollision,
    CompletedCollision,
    SizeOverflow,
    TypeRepeat,
    WassersteinRedraw,
    WeightMismatch,
}

impl BreakReason {
    pub const ALL: [BreakReason; 7] = [
        BreakReason::XneqZ,
        BreakReason::ActiveCollision,
        BreakReason::CompletedCollision,
        BreakReason::SizeOverflow,
        BreakReason::TypeRepeat,
        BreakReason::WassersteinRedraw,
        BreakReason::WeightMismatch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BreakReason::XneqZ => "x_neq_z",
            BreakReason::ActiveCollision => "active_collision",
            BreakReason::CompletedCollision => "completed_collision",
            BreakReason::SizeOverflow => "size_overflow",
            BreakReason::TypeRepeat => "type_repeat",
            BreakReason::WassersteinRedraw => "wasserstein_redraw",
            BreakReason::WeightMismatch => "weight_mismatch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BreakEvent {
    pub reason: BreakReason,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingConfig {
    pub depth: usize,
    /// Size threshold `k_n` for `||S_l(v)||`.
    pub k_n: f64,
    pub include_weights: bool,
}

impl CouplingConfig {
    /// `k_n = ceil(n^{1/3})`, weights included.
    pub fn new(n: usize, depth: usize) -> Self {
        CouplingConfig { depth, k_n: default_k_n(n), include_weights: true }
    }
}

pub fn default_k_n(n: usize) -> f64 {
    (n as f64).cbrt().ceil()
}

/// A neighbourhood paired with a tree. Every stage that fails appends an
/// event; the first event is the break.
#[derive(Debug, Clone)]
pub struct CouplingOutcome {
    pub root: usize,
    pub depth: usize,
    pub neighbourhood: Neighbourhood,
    pub tree: RootedWeightedTree,
    pub events: Vec<BreakEvent>,
}

impl CouplingOutcome {
    pub fn ok(&self) -> bool {
        self.events.is_empty()
    }

    pub fn break_reason(&self) -> Option<BreakReason> {
        self.events.first().map(|e| e.reason)
    }

    pub fn break_level(&self) -> Option<usize> {
        self.events.first().map(|e| e.level)
    }

    pub fn has(&self, reason: BreakReason) -> bool {
        self.events.iter().any(|e| e.reason == reason)
    }
}

/// `Y` given `X = 1` in the same-mean coupling of `Ber(p)` and `Poi(p)`:
/// `Y = 0` w.p. `(e^{-p} - 1 + p)/p`, `Y = 1` w.p. `e^{-p}`, `Y = k >= 2`
/// w.p. `Poi(p)(k)/p`. Then `P(X != Y) = p (1 - e^{-p}) <= p^2`.
fn poisson_given_one(p: f64, v: f64) -> u64 {
    let a0 = (p + (-p).exp_m1()) / p;
    let a1 = (-p).exp();
    if v < a0 {
        0
    } else if v < a0 + a1 {
        1
    } else {
        let r = (v - a0 - a1) * p;
        poisson::quantile(p, poisson::cdf(p, 1) + r).max(2)
    }
}

/// `Z ~ Poi(p')` coupled to a given `X ~ Ber(min(p', 1))`: first `Y ~ Poi(p_e)`
/// given `X`, then `Z = Y + Poi(p' - p_e)`. Consumes exactly two uniforms.
pub fn poisson_given_bernoulli(x: bool, p_prime: f64, rng: &mut SiteRng) -> u64 {
    let pe = p_prime.min(1.0);
    let v = rng.uniform();
    let y = if x && pe > 0.0 { poisson_given_one(pe, v) } else { 0 };
    y + poisson::quantile(p_prime - pe, rng.uniform())
}

/// `(X, Z)` with `X ~ Ber(min(p', 1))`, `Z ~ Poi(p')` and
/// `P(X != Z) <= p'^2 + p' 1{p' >= 1}`.
pub fn couple_bernoulli_poisson(p_prime: f64, rng: &mut SiteRng) -> (bool, u64) {
    let x = rng.uniform() < p_prime.min(1.0);
    (x, poisson_given_bernoulli(x, p_prime, rng))
}

#[derive(Clone, Copy, PartialEq)]
enum Seen {
    Active,
    Completed,
}

/// Explores `B_l(v)` and simultaneously builds the intermediate tree. Pair
/// counts into unexplored and active vertices are coupled to the realized
/// edges; counts into completed vertices (and the vertex itself) are fresh.
/// After the first break the tree is completed with fresh randomness.
pub fn couple_neighbourhood_to_intermediate(
    graph: &WeightedGraph,
    v: usize,
    cfg: &CouplingConfig,
) -> Result<CouplingOutcome> {
    let nb = explore(graph, v, cfg.depth)?;
    let w = graph.weights();
    let nt = w.n_theta();
    let g1 = w.lambda() / nt;
    let (seed, stream) = (graph.seed(), graph.stream());
    let mut rng = SiteRng::for_site(seed, stream, Domain::Coupling, v as u64, 0, false);

    let mut tree = RootedWeightedTree::root(w.w(v), 0.0);
    tree.node_mut(0).label = Some(v);
    let mut seen: HashMap<usize, Seen> = HashMap::from([(v, Seen::Active)]);
    let mut completed: Vec<usize> = Vec::new();
    let mut completed_weight = 0.0;
    let mut discovered_weight = w.w(v);
    let mut events = Vec::new();
    if discovered_weight > cfg.k_n {
        events.push(BreakEvent { reason: BreakReason::SizeOverflow, level: 0 });
    }

    let mut i = 0;
    while i < tree.len() && events.is_empty() {
        let level = tree.node(i).level;
        if level >= cfg.depth {
            i += 1;
            continue;
        }
        let x = tree.node(i).label.expect("coupled node carries its vertex");
        debug_assert_eq!(x, nb.order[i]);
        let (mut x_neq_z, mut active_hit) = (false, false);
        let mut kids: Vec<usize> = Vec::new();
        for &u in graph.neighbours(x) {
            let state = seen.get(&u).copied();
            if state == Some(Seen::Completed) {
                continue;
            }
            let mut r = SiteRng::for_site(seed, stream, Domain::EdgeCoupling, x.min(u) as u64, x.max(u) as u64, false);
            let z = poisson_given_bernoulli(true, w.w(x) * w.w(u) / nt, &mut r);
            x_neq_z |= z != 1;
            active_hit |= z > 0 && state == Some(Seen::Active);
            kids.extend(std::iter::repeat_n(u, z as usize));
        }
        let c_weight = completed_weight + w.w(x);
        let k_star = poisson::quantile(w.w(x) * c_weight / nt, rng.uniform());
        for _ in 0..k_star {
            let mut t = rng.uniform() * c_weight;
            let mut pick = x;
            for &c in &completed {
                if t < w.w(c) {
                    pick = c;
                    break;
                }
                t -= w.w(c);
            }
            kids.push(pick);
        }
        kids.shuffle(&mut rng);
        let reason = if x_neq_z {
            Some(BreakReason::XneqZ)
        } else if active_hit {
            Some(BreakReason::ActiveCollision)
        } else if k_star > 0 {
            Some(BreakReason::CompletedCollision)
        } else {
            None
        };
        if reason.is_none() {
            kids.sort_unstable();
        }
        for &u in &kids {
            let id = tree.add_child(i, w.w(u), 0.0, 0.0);
            tree.node_mut(id).label = Some(u);
            if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(u) {
                e.insert(Seen::Active);
                discovered_weight += w.w(u);
            }
        }
        seen.insert(x, Seen::Completed);
        completed.push(x);
        completed_weight += w.w(x);
        if let Some(reason) = reason {
            events.push(BreakEvent { reason, level: level + 1 });
        } else if discovered_weight > cfg.k_n {
            events.push(BreakEvent { reason: BreakReason::SizeOverflow, level: level + 1 });
        }
        i += 1;
    }

    if i < tree.len() {
        let idx = SizeBiasedIndex::new(w);
        while i < tree.len() {
            if tree.node(i).level < cfg.depth {
                let ty = tree.node(i).label.expect("intermediate nodes carry a type index");
                let k = poisson::quantile(w.w(ty) * g1, rng.uniform());
                for _ in 0..k {
                    let u = idx.sample(&mut rng);
                    let id = tree.add_child(i, w.w(u), 0.0, 0.0);
                    tree.node_mut(id).label = Some(u);
                }
            }
            i += 1;
        }
    }
    Ok(CouplingOutcome { root: v, depth: cfg.depth, neighbourhood: nb, tree, events })
}

/// Joint breadth-first pass over the trees of distinct roots. A node whose
/// type index already occurred in a different tree is replaced by a fresh
/// intermediate subtree of the remaining height, and its tree is flagged.
pub fn repair_independence(outcomes: &mut [CouplingOutcome], graph: &WeightedGraph) -> Result<()> {
    if outcomes.len() < 2 {
        return Ok(());
    }
    let w = graph.weights();
    let idx = SizeBiasedIndex::new(w);
    let mut rng = SiteRng::for_site(graph.seed(), graph.stream(), Domain::Repair, 0, 0, false);
    let depth = outcomes.iter().map(|o| o.depth).max().unwrap_or(0);
    let mut owner: HashMap<usize, usize> = HashMap::new();
    let mut rebuilt: Vec<RootedWeightedTree> = Vec::with_capacity(outcomes.len());
    let mut maps: Vec<Vec<Option<usize>>> = Vec::with_capacity(outcomes.len());
    for (t, o) in outcomes.iter().enumerate() {
        let root = o.tree.node(0);
        let mut nt = RootedWeightedTree::root(root.w_type, root.vertex_weight);
        nt.node_mut(0).label = root.label;
        rebuilt.push(nt);
        let mut m = vec![None; o.tree.len()];
        m[0] = Some(0);
        maps.push(m);
        if let Some(l) = root.label {
            owner.entry(l).or_insert(t);
        }
    }
    let mut flagged = vec![None; outcomes.len()];
    for level in 1..=depth {
        for (t, o) in outcomes.iter().enumerate() {
            for (i, node) in o.tree.nodes().iter().enumerate() {
                if node.level != level {
                    continue;
                }
                let Some(parent) = node.parent.and_then(|p| maps[t][p]) else { continue };
                let ty = node.label.expect("intermediate nodes carry a type index");
                let first = *owner.entry(ty).or_insert(t);
                if first != t {
                    let fresh = sample_intermediate_subtree(w, &idx, None, o.depth - level, &mut rng)?;
                    let id = rebuilt[t].attach_subtree(parent, &fresh, 0);
                    rebuilt[t].node_mut(id).edge_weight = node.edge_weight;
                    flagged[t].get_or_insert(level);
                } else {
                    let id = rebuilt[t].add_child(parent, node.w_type, node.vertex_weight, node.edge_weight);
                    rebuilt[t].node_mut(id).label = node.label;
                    maps[t][i] = Some(id);
                }
            }
        }
    }
    for ((o, t), f) in outcomes.iter_mut().zip(rebuilt).zip(flagged) {
        o.tree = t;
        if let Some(level) = f {
            o.events.push(BreakEvent { reason: BreakReason::TypeRepeat, level });
        }
    }
    Ok(())
}

/// Couples an intermediate tree to a limit tree node by node: the type is
/// moved by the conditional quantile coupling of `nu_hat_n` and `nu_hat`,
/// and the child count by the conditional quantile coupling of the two
/// Poisson laws. Surplus children are dropped and missing ones are grown
/// fresh. Returns the first node whose child count changed.
pub fn couple_intermediate_to_limit(
    tree: &RootedWeightedTree,
    graph: &WeightedGraph,
    spec: &WeightSpec,
    depth: usize,
) -> Result<(RootedWeightedTree, Option<BreakEvent>)> {
    let w = graph.weights();
    let g1 = w.lambda() / w.n_theta();
    let hat_n = w.size_biased_law();
    let hat = spec.size_biased();
    let root = tree.node(0);
    let key_root = root.label.unwrap_or(0) as u64;
    let mut rng = SiteRng::for_site(graph.seed(), graph.stream(), Domain::LimitCoupling, key_root, 0, false);
    let mut out = RootedWeightedTree::root(root.w_type, root.vertex_weight);
    out.node_mut(0).label = root.label;
    let mut map: Vec<Option<usize>> = vec![None; tree.len()];
    map[0] = Some(0);
    let mut event = None;
    for i in 0..tree.len() {
        let Some(ni) = map[i] else { continue };
        let node = tree.node(i);
        if node.level >= depth {
            continue;
        }
        let mu_n = node.w_type * g1;
        let mu = out.node(ni).w_type;
        let k_n = node.children.len() as u64;
        let (lo, hi) = poisson::interval(mu_n, k_n);
        let k = poisson::quantile(mu, lo + (hi - lo) * rng.uniform());
        if k != k_n && event.is_none() {
            event = Some(BreakEvent { reason: BreakReason::WassersteinRedraw, level: node.level + 1 });
        }
        for &c in node.children.iter().take(k as usize) {
            let child = tree.node(c);
            let (a, b) = hat_n.interval_of(child.w_type).unwrap_or((0.0, 1.0));
            let ty = hat.quantile(a + (b - a) * rng.uniform());
            let id = out.add_child(ni, ty, child.vertex_weight, child.edge_weight);
            out.node_mut(id).label = child.label;
            map[c] = Some(id);
        }
        for _ in k_n..k {
            let x = hat.sample(&mut rng);
            let fresh = grow((x, None, x), depth - node.level - 1, None, NODE_BUDGET, &mut rng, |r| {
                let y = hat.sample(r);
                (y, None, y)
            })?;
            out.attach_subtree(ni, &fresh, 0);
        }
    }
    Ok((out, event))
}

/// Replaces tree marks. When the coupling is intact, node `i` is the `i`-th
/// explored vertex and its marks are moved from the graph laws to the limit
/// laws by a maximal coupling; otherwise all marks are drawn fresh.
fn overlay_marks(o: &mut CouplingOutcome, graph: &WeightedGraph, limit: &MarkLaws) {
    let mut rng = SiteRng::for_site(graph.seed(), graph.stream(), Domain::MarkCoupling, o.root as u64, 0, false);
    let from = graph.marks();
    let intact = o.ok();
    let mut mismatch = None;
    for i in 0..o.tree.len() {
        let (vw, ew) = if intact {
            let x = o.neighbourhood.order[i];
            let vn = graph.vertex_weight(x);
            let vw = tv_couple(vn, &from.vertex, &limit.vertex, &mut rng);
            let ew = match o.neighbourhood.parent[i] {
                Some(p) => {
                    let en = graph.edge_weight(o.neighbourhood.order[p], x);
                    let ew = tv_couple(en, &from.edge, &limit.edge, &mut rng);
                    if ew != en {
                        mismatch.get_or_insert(o.tree.node(i).level);
                    }
                    ew
                }
                None => 0.0,
            };
            if vw != vn {
                mismatch.get_or_insert(o.tree.node(i).level);
            }
            (vw, ew)
        } else {
            let vw = limit.vertex.sample(&mut rng);
            let ew = if i == 0 { 0.0 } else { limit.edge.sample(&mut rng) };
            (vw, ew)
        };
        let n = o.tree.node_mut(i);
        n.vertex_weight = vw;
        n.edge_weight = ew;
    }
    if let Some(level) = mismatch {
        o.events.push(BreakEvent { reason: BreakReason::WeightMismatch, level });
    }
}

/// Full pipeline for distinct roots: neighbourhood to intermediate tree,
/// independence repair, intermediate to limit tree, then marks.
pub fn couple_full(
    graph: &WeightedGraph,
    roots: &[usize],
    cfg: &CouplingConfig,
    spec: &WeightSpec,
    limit_marks: &MarkLaws,
) -> Result<Vec<CouplingOutcome>> {
    let mut distinct = roots.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != roots.len() {
        return Err(crate::error::Error::Domain("coupling roots must be distinct".into()));
    }
    let mut outs = roots
        .iter()
        .map(|&v| couple_neighbourhood_to_intermediate(graph, v, cfg))
        .collect::<Result<Vec<_>>>()?;
    repair_independence(&mut outs, graph)?;
    for o in &mut outs {
        let (t, e) = couple_intermediate_to_limit(&o.tree, graph, spec, cfg.depth)?;
        o.tree = t;
        o.events.extend(e);
        if cfg.include_weights {
            overlay_marks(o, graph, limit_marks);
        }
    }
    Ok(outs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explore::{is_tree, to_rooted_tree};
    use crate::graph::{sample_graph, EmpiricalWeights};
    use crate::rng::Seed;
    use crate::tree::CodeFields;

    #[test]
    fn zero_rate_gives_zeros() {
        let mut r = SiteRng::new(1);
        for _ in 0..100 {
            assert_eq!(couple_bernoulli_poisson(0.0, &mut r), (false, 0));
        }
    }

    #[test]
    fn capped_bernoulli_is_one() {
        let mut r = SiteRng::new(2);
        for _ in 0..1000 {
            assert!(couple_bernoulli_poisson(1.3, &mut r).0);
        }
    }

    #[test]
    fn conditional_law_sums_to_poisson() {
        // P(Y = k) recovered from the X = 0 / X = 1 mixture.
        for p in [0.05, 0.4, 1.0] {
            let a0 = (p + f64::exp_m1(-p)) / p;
            let p0 = (1.0 - p) + p * a0;
            assert!((p0 - (-p).exp()).abs() < 1e-14);
            let tail = 1.0 - a0 - (-p).exp();
            assert!((p * tail - (1.0 - poisson::cdf(p, 1))).abs() < 1e-14);
        }
    }

    fn tiny_graph(seed: u64) -> WeightedGraph {
        let w = EmpiricalWeights::new(vec![1e-9; 50], 1.0).unwrap();
        sample_graph(&w, &MarkLaws::default(), Seed::from_u64(seed), 0)
    }

    #[test]
    fn edgeless_graph_couples_trivially() {
        let g = tiny_graph(3);
        let cfg = CouplingConfig::new(50, 2);
        let o = couple_neighbourhood_to_intermediate(&g, 7, &cfg).unwrap();
        assert!(o.ok());
        assert_eq!(o.tree.len(), 1);
        assert_eq!(o.neighbourhood.order, vec![7]);
    }

    #[test]
    fn intact_outcomes_agree_with_the_neighbourhood() {
        let spec = WeightSpec::gamma(2.0, 1.0);
        let w = EmpiricalWeights::sample(&spec, 500, Seed(1)).unwrap();
        let marks = MarkLaws::default();
        let cfg = CouplingConfig { depth: 2, k_n: 1e9, include_weights: true };
        let mut intact = 0;
        for s in 0..300 {
            let g = sample_graph(&w, &marks, Seed(1), s);
            let outs = couple_full(&g, &[0, 1], &cfg, &spec, &marks).unwrap();
            for o in outs {
                assert_eq!(o.tree.node(0).w_type, w.w(o.root));
                if o.ok() {
                    intact += 1;
                    assert!(is_tree(&o.neighbourhood));
                    let nt = to_rooted_tree(&o.neighbourhood, &g).unwrap();
                    assert_eq!(nt.code_with(CodeFields::MARKS), o.tree.code_with(CodeFields::MARKS));
                }
            }
        }
        assert!(intact > 100);
    }

    #[test]
    fn single_root_repair_is_identity() {
        let g = tiny_graph(4);
        let cfg = CouplingConfig::new(50, 2);
        let mut outs = vec![couple_neighbourhood_to_intermediate(&g, 1, &cfg).unwrap()];
        let before = outs[0].tree.clone();
        repair_independence(&mut outs, &g).unwrap();
        assert_eq!(outs[0].tree, before);
        assert!(outs[0].ok());
    }

    #[test]
    fn identical_laws_never_redraw() {
        let c = 2.0;
        let w = EmpiricalWeights::new(vec![c; 400], c).unwrap();
        let spec = WeightSpec::constant(c);
        let marks = MarkLaws::default();
        for s in 0..200 {
            let g = sample_graph(&w, &marks, Seed(9), s);
            let o = couple_neighbourhood_to_intermediate(&g, 3, &CouplingConfig::new(400, 2)).unwrap();
            let (t, e) = couple_intermediate_to_limit(&o.tree, &g, &spec, 2).unwrap();
            assert!(e.is_none());
            assert_eq!(t.code_with(CodeFields::SHAPE), o.tree.code_with(CodeFields::SHAPE));
            assert_eq!(t.node(0).w_type, c);
        }
    }
}
