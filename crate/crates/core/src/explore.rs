//! Breadth-first exploration of local neighbourhoods.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::tree::RootedWeightedTree;

/// `B_l(v)`: the subgraph formed by all paths of length at most `l` from
/// the root. Its edges are the edges with an endpoint in `S_{l-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbourhood {
    pub root: usize,
    pub depth: usize,
    /// Vertices in exploration order `v_0, v_1, ...`.
    pub order: Vec<usize>,
    /// Level of each entry of `order`.
    pub level: Vec<usize>,
    /// Exploration parent (index into `order`) of each entry.
    pub parent: Vec<Option<usize>>,
    /// `D_0, ..., D_l`, each in exploration order.
    pub levels: Vec<Vec<usize>>,
    /// Edges of `B_l(v)` that are not exploration tree edges.
    pub extra_edges: Vec<(usize, usize)>,
}

impl Neighbourhood {
    /// `S_l(v)` in exploration order.
    pub fn vertices(&self) -> &[usize] {
        &self.order
    }

    pub fn edge_count(&self) -> usize {
        self.order.len() - 1 + self.extra_edges.len()
    }

    /// Ulam-Harris address of the `i`-th explored vertex.
    pub fn address(&self, mut i: usize) -> Vec<u32> {
        let mut out = Vec::new();
        while let Some(p) = self.parent[i] {
            let rank = (p + 1..i).filter(|j| self.parent[*j] == Some(p)).count();
            out.push(rank as u32 + 1);
            i = p;
        }
        out.reverse();
        out
    }

    /// Edge list text `u v`, tree edges first.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for (i, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                s.push_str(&format!("{} {}\n", self.order[*p], self.order[i]));
            }
        }
        for (u, v) in &self.extra_edges {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }
}

/// Explores `B_depth(v)` breadth first; children are discovered in
/// ascending vertex label.
pub fn explore(graph: &WeightedGraph, v: usize, depth: usize) -> Result<Neighbourhood> {
    graph.check_vertex(v)?;
    let mut nb = Neighbourhood {
        root: v,
        depth,
        order: vec![v],
        level: vec![0],
        parent: vec![None],
        levels: vec![vec![v]],
        extra_edges: Vec::new(),
    };
    let mut index: HashMap<usize, usize> = HashMap::from([(v, 0)]);
    let mut head = 0;
    while head < nb.order.len() {
        let (x, r) = (nb.order[head], nb.level[head]);
        if r < depth {
            for &y in graph.neighbours(x) {
                if let std::collections::hash_map::Entry::Vacant(e) = index.entry(y) {
                    e.insert(nb.order.len());
                    nb.order.push(y);
                    nb.level.push(r + 1);
                    nb.parent.push(Some(head));
                    if nb.levels.len() <= r + 1 {
                        nb.levels.push(Vec::new());
                    }
                    nb.levels[r + 1].push(y);
                }
            }
        }
        head += 1;
    }
    for (i, &x) in nb.order.iter().enumerate() {
        if nb.level[i] >= depth {
            continue;
        }
        for &y in graph.neighbours(x) {
            let j = index[&y];
            if nb.level[j] < depth && y < x {
                continue;
            }
            if nb.parent[j] == Some(i) || nb.parent[i] == Some(j) {
                continue;
            }
            nb.extra_edges.push((x.min(y), x.max(y)));
        }
    }
    nb.extra_edges.sort_unstable();
    Ok(nb)
}

/// Whether `B_l(v)` is acyclic.
pub fn is_tree(nb: &Neighbourhood) -> bool {
    nb.extra_edges.is_empty()
}

/// The neighbourhood as a rooted tree carrying the graph's connectivity
/// types and (possibly perturbed) vertex and edge weights.
pub fn to_rooted_tree(nb: &Neighbourhood, graph: &WeightedGraph) -> Result<RootedWeightedTree> {
    if !is_tree(nb) {
        return Err(Error::NotATree { root: nb.root, depth: nb.depth });
    }
    let w = graph.weights();
    let mut t = RootedWeightedTree::root(w.w(nb.root), graph.vertex_weight(nb.root));
    t.node_mut(0).label = Some(nb.root);
    let mut map = vec![0usize; nb.order.len()];
    for i in 1..nb.order.len() {
        let p = nb.parent[i].expect("non-root has a parent");
        let (u, x) = (nb.order[p], nb.order[i]);
        let id = t.add_child(map[p], w.w(x), graph.vertex_weight(x), graph.edge_weight(u, x));
        t.node_mut(id).label = Some(x);
        map[i] = id;
    }
    Ok(t)
}

/// `D_1^{(U)}(v)`: neighbours of `v` outside `ignore`.
pub fn restricted_degree(graph: &WeightedGraph, v: usize, ignore: &HashSet<usize>) -> Result<Vec<usize>> {
    graph.check_vertex(v)?;
    if ignore.contains(&v) {
        return Err(Error::Domain(format!("vertex {v} lies in its own ignore set")));
    }
    Ok(graph.neighbours(v).iter().copied().filter(|u| !ignore.contains(u)).collect())
}

/// `S_l(V)` for a set of roots, sorted.
pub fn union_ball(graph: &WeightedGraph, roots: &[usize], depth: usize) -> Result<Vec<usize>> {
    let mut all = Vec::new();
    for &r in roots {
        all.extend(explore(graph, r, depth)?.order);
    }
    all.sort_unstable();
    all.dedup();
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{sample_graph, EmpiricalWeights, MarkLaws};
    use crate::rng::Seed;

    fn graph(n: usize, lambda: f64, seed: u64) -> WeightedGraph {
        let w = EmpiricalWeights::new(vec![lambda; n], lambda).unwrap();
        sample_graph(&w, &MarkLaws::default(), Seed::from_u64(seed), 0)
    }

    /// First graph from the seed sequence whose edge set is `want`.
    fn find_graph(n: usize, want: &[(usize, usize)]) -> WeightedGraph {
        for s in 0.. {
            let g = graph(n, n as f64 / 2.0, s);
            if g.edges().eq(want.iter().copied()) {
                return g;
            }
        }
        unreachable!()
    }

    #[test]
    fn isolated_vertex() {
        let g = graph(5, 1e-6, 1);
        let nb = explore(&g, 2, 3).unwrap();
        assert_eq!(nb.order, vec![2]);
        assert!(is_tree(&nb));
        assert_eq!(to_rooted_tree(&nb, &g).unwrap().len(), 1);
        assert!(explore(&g, 5, 1).is_err());
    }

    #[test]
    fn path_levels() {
        let g = find_graph(3, &[(0, 1), (1, 2)]);
        assert_eq!(explore(&g, 0, 1).unwrap().levels, vec![vec![0], vec![1]]);
        assert_eq!(explore(&g, 0, 2).unwrap().levels, vec![vec![0], vec![1], vec![2]]);
        let t = to_rooted_tree(&explore(&g, 0, 1).unwrap(), &g).unwrap();
        assert_eq!(t.node(1).edge_weight, g.edge_weight(0, 1));
    }

    #[test]
    fn triangle_is_not_a_tree() {
        let g = find_graph(3, &[(0, 1), (0, 2), (1, 2)]);
        for v in 0..3 {
            // The edge between the two level-1 vertices lies on no path of length 1.
            assert!(is_tree(&explore(&g, v, 1).unwrap()));
            let nb = explore(&g, v, 2).unwrap();
            assert!(!is_tree(&nb));
            assert!(matches!(to_rooted_tree(&nb, &g), Err(Error::NotATree { .. })));
        }
    }

    #[test]
    fn star_is_a_tree() {
        let g = find_graph(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]);
        assert!(is_tree(&explore(&g, 0, 1).unwrap()));
        // Leaves at level 2 of the other leaves are not joined by edges.
        assert!(is_tree(&explore(&g, 1, 2).unwrap()));
    }

    #[test]
    fn restricted_degree_examples() {
        let g = graph(30, 4.0, 3);
        let v = 0;
        assert_eq!(restricted_degree(&g, v, &HashSet::new()).unwrap(), g.neighbours(v));
        let all: HashSet<usize> = g.neighbours(v).iter().copied().collect();
        assert!(restricted_degree(&g, v, &all).unwrap().is_empty());
    }
}
