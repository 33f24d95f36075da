//! Maximum weight matching, the increment `h(G, v) = M(G) - M(G - v)`, the
//! depth-limited recursion `h_k` on trees and the even/odd sandwich.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::explore::{is_tree, to_rooted_tree, Neighbourhood};
use crate::graph::WeightedGraph;
use crate::tree::RootedWeightedTree;

/// Largest connected component with a cycle that the exact solver accepts.
pub const MAX_EXACT_VERTICES: usize = 24;

/// Simple undirected graph with nonnegative edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchGraph {
    adj: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matching {
    /// Matched pairs `(u, v)` with `u < v`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub value: f64,
}

impl MatchGraph {
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::VertexOutOfRange { vertex: u.max(v), n });
            }
            if u == v {
                return Err(Error::Domain(format!("loop at {u}")));
            }
            if w.is_nan() || w < 0.0 || !w.is_finite() {
                return Err(Error::Domain(format!("edge weight {w} must be finite and nonnegative")));
            }
            if adj[u].iter().any(|(x, _)| *x == v) {
                return Err(Error::Domain(format!("duplicate edge {u} {v}")));
            }
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
        for a in &mut adj {
            a.sort_by_key(|e| e.0);
        }
        Ok(MatchGraph { adj })
    }

    /// Realized edges of `g` with their current edge weights.
    pub fn from_graph(g: &WeightedGraph) -> Self {
        let adj = (0..g.n()).map(|u| g.neighbours(u).iter().map(|v| (*v, g.edge_weight(u, *v))).collect()).collect();
        MatchGraph { adj }
    }

    /// Tree edges with node indices as vertices.
    pub fn from_tree(t: &RootedWeightedTree) -> Self {
        let mut adj = vec![Vec::new(); t.len()];
        for (i, node) in t.nodes().iter().enumerate() {
            if let Some(p) = node.parent {
                adj[p].push((i, node.edge_weight));
                adj[i].push((p, node.edge_weight));
            }
        }
        for a in &mut adj {
            a.sort_by_key(|e| e.0);
        }
        MatchGraph { adj }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbours(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[v]
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        self.adj[u].iter().find(|e| e.0 == v).map(|e| e.1)
    }

    /// Edges `(u, v, w)` with `u < v` in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (u, a) in self.adj.iter().enumerate() {
            for &(v, w) in a {
                if v > u {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    /// The same vertex set with every edge at the given vertices removed.
    pub fn without(&self, vs: &[usize]) -> MatchGraph {
        let adj = self
            .adj
            .iter()
            .enumerate()
            .map(|(u, a)| {
                if vs.contains(&u) {
                    Vec::new()
                } else {
                    a.iter().filter(|e| !vs.contains(&e.0)).copied().collect()
                }
            })
            .collect();
        MatchGraph { adj }
    }

    fn check(&self, v: usize) -> Result<()> {
        if v < self.n() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { vertex: v, n: self.n() })
        }
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n()];
        let mut out = Vec::new();
        for s in 0..self.n() {
            if seen[s] || self.adj[s].is_empty() {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut i = 0;
            while i < comp.len() {
                for &(u, _) in &self.adj[comp[i]] {
                    if !seen[u] {
                        seen[u] = true;
                        comp.push(u);
                    }
                }
                i += 1;
            }
            out.push(comp);
        }
        out
    }
}

/// Exact maximum weight matching. Tree components use a linear dynamic
/// program, cyclic components an exhaustive memoized search on
/// `M(G) = max{M(G - v), max_u w_vu + M(G - {v, u})}`. Ties prefer the
/// lexicographically smallest edge.
pub fn max_weight_matching(g: &MatchGraph) -> Result<Matching> {
    let mut edges = Vec::new();
    let mut value = 0.0;
    for comp in g.components() {
        let m = comp.iter().map(|v| g.adj[*v].len()).sum::<usize>() / 2;
        let (val, mut es) = if m + 1 == comp.len() {
            tree_component(g, &comp)
        } else if comp.len() <= MAX_EXACT_VERTICES {
            search_component(g, &comp)
        } else {
            return Err(Error::SolverLimit { n: comp.len(), limit: MAX_EXACT_VERTICES });
        };
        value += val;
        edges.append(&mut es);
    }
    edges.sort_unstable();
    Ok(Matching { edges, value })
}

/// `M(G)` only.
pub fn max_weight(g: &MatchGraph) -> Result<f64> {
    Ok(max_weight_matching(g)?.value)
}

fn tree_component(g: &MatchGraph, comp: &[usize]) -> (f64, Vec<(usize, usize)>) {
    let root = *comp.iter().min().expect("nonempty component");
    let mut order = vec![root];
    let mut parent: HashMap<usize, (usize, f64)> = HashMap::new();
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        for &(u, w) in &g.adj[v] {
            if u != root && !parent.contains_key(&u) && parent.get(&v).map(|p| p.0) != Some(u) {
                parent.insert(u, (v, w));
                order.push(u);
            }
        }
        i += 1;
    }
    // free[v]: best in the subtree with v unmatched; best[v]: overall;
    // pick[v]: child matched to v in the optimum, if any.
    let mut free: HashMap<usize, f64> = HashMap::new();
    let mut best: HashMap<usize, f64> = HashMap::new();
    let mut pick: HashMap<usize, Option<usize>> = HashMap::new();
    for &v in order.iter().rev() {
        let kids: Vec<(usize, f64)> = g.adj[v].iter().filter(|(u, _)| parent.get(u).map(|p| p.0) == Some(v)).copied().collect();
        let f: f64 = kids.iter().map(|(c, _)| best[c]).sum();
        let mut b = f;
        let mut choice = None;
        for &(c, w) in &kids {
            let cand = f - best[&c] + free[&c] + w;
            if cand > b {
                b = cand;
                choice = Some(c);
            }
        }
        free.insert(v, f);
        best.insert(v, b);
        pick.insert(v, choice);
    }
    let mut edges = Vec::new();
    let mut stack = vec![(root, false)];
    while let Some((v, matched)) = stack.pop() {
        let chosen = if matched { None } else { pick[&v] };
        if let Some(c) = chosen {
            edges.push((v.min(c), v.max(c)));
        }
        for &(u, _) in &g.adj[v] {
            if parent.get(&u).map(|p| p.0) == Some(v) {
                stack.push((u, Some(u) == chosen));
            }
        }
    }
    (best[&root], edges)
}

struct Search<'a> {
    adj: Vec<Vec<(usize, f64)>>,
    memo: HashMap<u32, f64>,
    labels: &'a [usize],
}

impl Search<'_> {
    fn value(&mut self, mask: u32) -> f64 {
        if mask == 0 {
            return 0.0;
        }
        if let Some(x) = self.memo.get(&mask) {
            return *x;
        }
        let v = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << v);
        let mut best = self.value(rest);
        for i in 0..self.adj[v].len() {
            let (u, w) = self.adj[v][i];
            if rest & (1 << u) != 0 {
                best = best.max(w + self.value(rest & !(1 << u)));
            }
        }
        self.memo.insert(mask, best);
        best
    }

    fn witness(&mut self, mut mask: u32) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        while mask != 0 {
            let target = self.value(mask);
            let v = mask.trailing_zeros() as usize;
            let rest = mask & !(1 << v);
            let mut next = rest;
            for i in 0..self.adj[v].len() {
                let (u, w) = self.adj[v][i];
                if rest & (1 << u) != 0 && w + self.value(rest & !(1 << u)) == target {
                    let (a, b) = (self.labels[v], self.labels[u]);
                    out.push((a.min(b), a.max(b)));
                    next = rest & !(1 << u);
                    break;
                }
            }
            mask = next;
        }
        out
    }
}

fn search_component(g: &MatchGraph, comp: &[usize]) -> (f64, Vec<(usize, usize)>) {
    let mut labels = comp.to_vec();
    labels.sort_unstable();
    let index: HashMap<usize, usize> = labels.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let adj = labels.iter().map(|v| g.adj[*v].iter().map(|(u, w)| (index[u], *w)).collect()).collect();
    let mut s = Search { adj, memo: HashMap::new(), labels: &labels };
    let full = if labels.len() == 32 { u32::MAX } else { (1u32 << labels.len()) - 1 };
    let val = s.value(full);
    (val, s.witness(full))
}

/// `h(G, v) = M(G) - M(G - v)`.
pub fn h_value(g: &MatchGraph, v: usize) -> Result<f64> {
    g.check(v)?;
    if g.adj[v].is_empty() {
        return Ok(0.0);
    }
    Ok(max_weight(g)? - max_weight(&g.without(&[v]))?)
}

/// `h_k` at the root: zero at leaves and at depth `k`, otherwise
/// `max{0, max_c (w_c - h_k(c))}` over children. Nodes below depth `k`
/// are ignored.
pub fn h_k(t: &RootedWeightedTree, k: usize) -> f64 {
    let mut h = vec![0.0f64; t.len()];
    for i in (0..t.len()).rev() {
        let node = t.node(i);
        if node.level >= k {
            continue;
        }
        let mut best = 0.0f64;
        for c in &node.children {
            best = best.max(t.node(*c).edge_weight - h[*c]);
        }
        h[i] = best;
    }
    h[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichResult {
    pub g_lower: f64,
    pub g_upper: f64,
    pub k_lower: usize,
    pub k_upper: usize,
}

/// Levels of the sandwich: `k_U` is the largest odd number `<= k`, `k_L = k_U - 1`.
pub fn sandwich_levels(k: usize) -> Result<(usize, usize)> {
    if k == 0 {
        return Err(Error::Domain("sandwich needs k >= 1".into()));
    }
    let ku = if k % 2 == 1 { k } else { k - 1 };
    Ok((ku - 1, ku))
}

/// `(h_{k_L}, h_{k_U})` at the root of a tree.
pub fn tree_sandwich(t: &RootedWeightedTree, k: usize) -> Result<SandwichResult> {
    let (kl, ku) = sandwich_levels(k)?;
    let g_lower = h_k(t, kl);
    let g_upper = h_k(t, ku);
    Ok(SandwichResult { g_lower, g_upper, k_lower: kl, k_upper: ku })
}

/// Sandwich for `h(G, v)` from a tree-shaped neighbourhood explored to
/// depth at least `k`.
pub fn matching_sandwich(nb: &Neighbourhood, graph: &WeightedGraph, k: usize) -> Result<SandwichResult> {
    if nb.depth < k {
        return Err(Error::DepthMismatch(format!("neighbourhood depth {} below k = {k}", nb.depth)));
    }
    if !is_tree(nb) {
        return Err(Error::NotATree { root: nb.root, depth: nb.depth });
    }
    tree_sandwich(&to_rooted_tree(nb, graph)?, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand::rngs::StdRng;

    fn brute(g: &MatchGraph) -> f64 {
        fn go(edges: &[(usize, usize, f64)], used: u32) -> f64 {
            match edges.split_first() {
                None => 0.0,
                Some((&(u, v, w), rest)) => {
                    let skip = go(rest, used);
                    if used & (1 << u) == 0 && used & (1 << v) == 0 {
                        skip.max(w + go(rest, used | 1 << u | 1 << v))
                    } else {
                        skip
                    }
                }
            }
        }
        go(&g.edges(), 0)
    }

    fn random_graph(rng: &mut StdRng, n: usize, p: f64) -> MatchGraph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((u, v, (rng.random_range(0..1024) as f64) / 256.0));
                }
            }
        }
        MatchGraph::new(n, &edges).unwrap()
    }

    #[test]
    fn small_examples() {
        assert_eq!(max_weight(&MatchGraph::new(2, &[(0, 1, 2.5)]).unwrap()).unwrap(), 2.5);
        let tri = MatchGraph::new(3, &[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 3.0)]).unwrap();
        let m = max_weight_matching(&tri).unwrap();
        assert_eq!(m.value, 3.0);
        assert_eq!(m.edges, vec![(0, 2)]);
        let path = MatchGraph::new(4, &[(0, 1, 2.0), (1, 2, 3.0), (2, 3, 2.0)]).unwrap();
        let m = max_weight_matching(&path).unwrap();
        assert_eq!(m.value, 4.0);
        assert_eq!(m.edges, vec![(0, 1), (2, 3)]);
        assert_eq!(max_weight(&MatchGraph::new(5, &[]).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(MatchGraph::new(2, &[(0, 0, 1.0)]).is_err());
        assert!(MatchGraph::new(2, &[(0, 1, -1.0)]).is_err());
        assert!(MatchGraph::new(2, &[(0, 2, 1.0)]).is_err());
        assert!(MatchGraph::new(2, &[(0, 1, 1.0), (1, 0, 2.0)]).is_err());
    }

    #[test]
    fn solver_limit_applies_to_cyclic_components() {
        let n = MAX_EXACT_VERTICES + 1;
        let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        let path = MatchGraph::new(n, &edges).unwrap();
        assert_eq!(max_weight(&path).unwrap(), (n / 2) as f64);
        edges.push((0, n - 1, 1.0));
        let cycle = MatchGraph::new(n, &edges).unwrap();
        assert!(matches!(max_weight(&cycle), Err(Error::SolverLimit { .. })));
    }

    #[test]
    fn matches_brute_force_and_witness_is_valid() {
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..300 {
            let n = rng.random_range(1..=8);
            let p = rng.random();
            let g = random_graph(&mut rng, n, p);
            let m = max_weight_matching(&g).unwrap();
            assert_eq!(m.value, brute(&g));
            let mut seen = vec![false; n];
            let mut total = 0.0;
            for &(u, v) in &m.edges {
                assert!(!seen[u] && !seen[v]);
                seen[u] = true;
                seen[v] = true;
                total += g.weight(u, v).unwrap();
            }
            assert_eq!(total, m.value);
        }
    }

    #[test]
    fn h_recursion_and_monotonicity() {
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..200 {
            let n = rng.random_range(1..=10);
            let g = random_graph(&mut rng, n, 0.4);
            let v = rng.random_range(0..n);
            let h = h_value(&g, v).unwrap();
            assert!(h >= 0.0);
            let gv = g.without(&[v]);
            let mut rhs = 0.0f64;
            for &(u, w) in g.neighbours(v) {
                rhs = rhs.max(w - h_value(&gv, u).unwrap());
            }
            assert_eq!(h, rhs);
        }
    }

    #[test]
    fn h_small_cases() {
        let g = MatchGraph::new(3, &[(0, 1, 1.5)]).unwrap();
        assert_eq!(h_value(&g, 2).unwrap(), 0.0);
        assert_eq!(h_value(&g, 0).unwrap(), 1.5);
    }

    #[test]
    fn h_k_examples() {
        let t = RootedWeightedTree::root(1.0, 0.0);
        assert_eq!(h_k(&t, 3), 0.0);
        let mut star = RootedWeightedTree::root(1.0, 0.0);
        for w in [0.4, 1.7, 0.9] {
            star.add_child(0, 1.0, 0.0, w);
        }
        assert_eq!(h_k(&star, 1), 1.7);
        assert_eq!(h_k(&star, 2), 1.7);
        assert_eq!(h_k(&star, 0), 0.0);
        let s = tree_sandwich(&star, 3).unwrap();
        assert_eq!((s.g_lower, s.g_upper, s.k_lower, s.k_upper), (1.7, 1.7, 2, 3));
        let s = tree_sandwich(&star, 2).unwrap();
        assert_eq!((s.g_lower, s.g_upper, s.k_lower, s.k_upper), (0.0, 1.7, 0, 1));
        assert!(tree_sandwich(&star, 0).is_err());
    }

    #[test]
    fn tree_dp_agrees_with_search() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.random_range(2..=14);
            let mut t = RootedWeightedTree::root(1.0, 0.0);
            for i in 1..n {
                let p = rng.random_range(0..i);
                t.add_child(p, 1.0, 0.0, rng.random_range(0..512) as f64 / 128.0);
            }
            let g = MatchGraph::from_tree(&t);
            let (val, _) = search_component(&g, &(0..n).collect::<Vec<_>>());
            assert_eq!(max_weight(&g).unwrap(), val);
            // On a tree h_k for k >= height is exact.
            assert_eq!(h_k(&t, t.height()), h_value(&g, 0).unwrap());
            let k = 2 * (t.height() / 2);
            let s = tree_sandwich(&t, k + 1).unwrap();
            let h = h_value(&g, 0).unwrap();
            assert!(s.g_lower <= h && h <= s.g_upper);
        }
    }
}
