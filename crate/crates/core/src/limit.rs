//! Delayed Galton-Watson trees: the limit tree `T(W, nu)`, the intermediate
//! tree built from empirical weights, and grafted trees.

use crate::error::{Error, Result};
use crate::graph::{EmpiricalWeights, MarkLaws};
use crate::poisson;
use crate::rng::SiteRng;
use crate::tree::{graft, RootedWeightedTree};
use crate::weights::WeightSpec;

/// Default cap on the number of nodes of a sampled tree.
pub const NODE_BUDGET: usize = 1_000_000;

/// Draws vertex indices with probability `W_i / Lambda_n`.
#[derive(Debug, Clone)]
pub struct SizeBiasedIndex {
    cum: Vec<f64>,
}

impl SizeBiasedIndex {
    pub fn new(weights: &EmpiricalWeights) -> Self {
        let mut acc = 0.0;
        let cum = weights
            .as_slice()
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        SizeBiasedIndex { cum }
    }

    /// Index whose cumulative interval contains `u * Lambda_n`.
    pub fn index(&self, u: f64) -> usize {
        let t = u * self.cum.last().expect("non-empty");
        self.cum.partition_point(|c| *c <= t).min(self.cum.len() - 1)
    }

    pub fn sample(&self, rng: &mut SiteRng) -> usize {
        self.index(rng.uniform())
    }
}

/// One offspring: connectivity type, optional vertex label, and the mean of
/// its own offspring count.
pub type Offspring = (f64, Option<usize>, f64);

/// Grows a tree breadth first. The root has type `root.0` and Poisson
/// offspring with mean `root.2`; every further individual is drawn by
/// `child`. Marks are i.i.d. from `marks`, or zero when absent.
pub fn grow(
    root: Offspring,
    depth: usize,
    marks: Option<&MarkLaws>,
    budget: usize,
    rng: &mut SiteRng,
    mut child: impl FnMut(&mut SiteRng) -> Offspring,
) -> Result<RootedWeightedTree> {
    let mut t = RootedWeightedTree::root(root.0, marks.map_or(0.0, |m| m.vertex.sample(rng)));
    t.node_mut(0).label = root.1;
    let mut means = vec![root.2];
    let mut i = 0;
    while i < t.len() {
        if t.node(i).level < depth {
            let k = poisson::quantile(means[i], rng.uniform());
            for _ in 0..k {
                let (w, label, m) = child(rng);
                let (vw, ew) = marks.map_or((0.0, 0.0), |m| (m.vertex.sample(rng), m.edge.sample(rng)));
                let id = t.add_child(i, w, vw, ew);
                t.node_mut(id).label = label;
                means.push(m);
                if t.len() > budget {
                    return Err(Error::NodeBudget { limit: budget });
                }
            }
        }
        i += 1;
    }
    Ok(t)
}

/// `T_l(W, nu)` with i.i.d. marks: the root has `Poi(W)` children, every
/// other individual has type `W_hat ~ nu_hat` and `Poi(W_hat)` children.
pub fn sample_limit_tree(
    w: f64,
    spec: &WeightSpec,
    marks: &MarkLaws,
    depth: usize,
    rng: &mut SiteRng,
) -> Result<RootedWeightedTree> {
    let hat = spec.size_biased();
    grow((w, None, w), depth, Some(marks), NODE_BUDGET, rng, |r| {
        let x = hat.sample(r);
        (x, None, x)
    })
}

/// Intermediate tree of vertex `v`: root type `W_v` with
/// `Poi(W_v Lambda_n / (n theta))` children; other individuals take the type
/// of vertex `i` with probability `W_i / Lambda_n` and have
/// `Poi(Lambda_n W_i / (n theta))` children.
pub fn sample_intermediate_tree(
    weights: &EmpiricalWeights,
    v: usize,
    marks: &MarkLaws,
    depth: usize,
    rng: &mut SiteRng,
) -> Result<RootedWeightedTree> {
    let idx = SizeBiasedIndex::new(weights);
    let g1 = weights.lambda() / weights.n_theta();
    grow((weights.w(v), Some(v), weights.w(v) * g1), depth, Some(marks), NODE_BUDGET, rng, |r| {
        let i = idx.index(r.uniform());
        (weights.w(i), Some(i), weights.w(i) * g1)
    })
}

/// Intermediate-law subtree whose root type is itself drawn from `nu_hat_n`.
pub fn sample_intermediate_subtree(
    weights: &EmpiricalWeights,
    idx: &SizeBiasedIndex,
    marks: Option<&MarkLaws>,
    depth: usize,
    rng: &mut SiteRng,
) -> Result<RootedWeightedTree> {
    let g1 = weights.lambda() / weights.n_theta();
    let i = idx.sample(rng);
    grow((weights.w(i), Some(i), weights.w(i) * g1), depth, marks, NODE_BUDGET, rng, |r| {
        let i = idx.index(r.uniform());
        (weights.w(i), Some(i), weights.w(i) * g1)
    })
}

/// `T_l(W, W')`: an independent `T_{l-1}(W')` attached to the root of
/// `T_l(W)` by an edge with weight from `marks.edge`.
pub fn sample_grafted_tree(
    w: f64,
    w2: f64,
    spec: &WeightSpec,
    marks: &MarkLaws,
    depth: usize,
    rng: &mut SiteRng,
) -> Result<RootedWeightedTree> {
    if depth == 0 {
        return Err(Error::DepthMismatch("grafted tree needs depth at least 1".into()));
    }
    let t = sample_limit_tree(w, spec, marks, depth, rng)?;
    let t2 = sample_limit_tree(w2, spec, marks, depth - 1, rng)?;
    let e = marks.edge.sample(rng);
    graft(&t, &t2, e, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;

    fn mean_root_and_offspring(trees: &[RootedWeightedTree]) -> (f64, f64) {
        let root = trees.iter().map(|t| t.root_degree() as f64).sum::<f64>() / trees.len() as f64;
        let (mut kids, mut parents) = (0.0, 0.0);
        for t in trees {
            for i in t.children(0) {
                parents += 1.0;
                kids += t.children(*i).len() as f64;
            }
        }
        (root, kids / parents)
    }

    #[test]
    fn depth_zero_is_root_only() {
        let mut r = SiteRng::new(1);
        let t = sample_limit_tree(3.0, &WeightSpec::gamma(2.0, 1.0), &MarkLaws::default(), 0, &mut r).unwrap();
        assert_eq!(t.len(), 1);
        let w = EmpiricalWeights::new(vec![1.0, 2.0], 1.5).unwrap();
        let t = sample_intermediate_tree(&w, 1, &MarkLaws::default(), 0, &mut r).unwrap();
        assert_eq!((t.len(), t.node(0).w_type), (1, 2.0));
    }

    #[test]
    fn limit_tree_offspring_means() {
        // Root: Poi(W). Non-root: E[W^2]/E[W] = 3 for Gamma(2, 1).
        let spec = WeightSpec::gamma(2.0, 1.0);
        let mut r = SiteRng::new(7);
        let m = 20_000;
        let trees: Vec<_> =
            (0..m).map(|_| sample_limit_tree(1.5, &spec, &MarkLaws::default(), 2, &mut r).unwrap()).collect();
        let (root, off) = mean_root_and_offspring(&trees);
        assert!((root - 1.5).abs() < 4.0 * (1.5f64 / m as f64).sqrt(), "{root}");
        // Offspring variance E[W_hat] + Var(W_hat) = 3 + 3.
        let parents = 1.5 * m as f64;
        assert!((off - 3.0).abs() < 4.0 * (6.0 / parents).sqrt(), "{off}");
    }

    #[test]
    fn intermediate_tree_offspring_means() {
        let w = EmpiricalWeights::sample(&WeightSpec::gamma(2.0, 1.0), 400, Seed(3)).unwrap();
        let g1 = w.gamma_n(1.0);
        let g2 = w.gamma_n(2.0);
        let v = 5;
        let mut r = SiteRng::new(11);
        let m = 20_000;
        let trees: Vec<_> =
            (0..m).map(|_| sample_intermediate_tree(&w, v, &MarkLaws::default(), 2, &mut r).unwrap()).collect();
        let (root, off) = mean_root_and_offspring(&trees);
        let mu = w.w(v) * g1;
        assert!((root - mu).abs() < 4.0 * (mu / m as f64).sqrt(), "{root} vs {mu}");
        let parents = mu * m as f64;
        let var = g2 + w.gamma_n(3.0) * g1 - g2 * g2;
        assert!((off - g2).abs() < 4.0 * (var.max(g2) / parents).sqrt(), "{off} vs {g2}");
    }

    #[test]
    fn budget_is_enforced() {
        let mut r = SiteRng::new(2);
        let marks = MarkLaws::default();
        let res = grow((50.0, None, 50.0), 10, Some(&marks), 1000, &mut r, |_| (50.0, None, 50.0));
        assert!(matches!(res, Err(Error::NodeBudget { limit: 1000 })));
    }

    #[test]
    fn size_biased_index_respects_weights() {
        let w = EmpiricalWeights::new(vec![1.0, 3.0], 2.0).unwrap();
        let s = SizeBiasedIndex::new(&w);
        assert_eq!(s.index(0.2), 0);
        assert_eq!(s.index(0.3), 1);
    }
}
