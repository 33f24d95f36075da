//! The dependent edge-weight sum `N(G) = sum_{e = {u,v}} (w_u + w_v) X_e`.

use crate::error::Result;
use crate::graph::{PerturbationSet, Site, WeightedGraph};

/// `N(G)` summed over realized edges.
pub fn dependent_edge_sum(g: &WeightedGraph) -> f64 {
    g.edges().map(|(u, v)| g.vertex_weight(u) + g.vertex_weight(v)).sum()
}

/// `N(G) = sum_v |D_1(v)| w_v`.
pub fn dependent_edge_sum_by_degree(g: &WeightedGraph) -> f64 {
    (0..g.n()).map(|v| g.degree(v) as f64 * g.vertex_weight(v)).sum()
}

/// `Delta_e N = (w_u + w_v)(X_e - X'_e)`.
pub fn delta_edge(g: &WeightedGraph, u: usize, v: usize) -> Result<f64> {
    g.check_vertex(u)?;
    g.check_vertex(v)?;
    let x = g.has_edge(u, v) as i32 as f64;
    let x2 = g.indicator(u, v, true) as i32 as f64;
    Ok((g.vertex_weight(u) + g.vertex_weight(v)) * (x - x2))
}

/// `Delta_v N = |D_1(v)| (w_v - w'_v)`.
pub fn delta_vertex(g: &WeightedGraph, v: usize) -> Result<f64> {
    g.check_vertex(v)?;
    Ok(g.degree(v) as f64 * (g.vertex_weight(v) - g.vertex_weight_raw(v, true)))
}

/// Closed-form `Delta_site N`.
pub fn delta_n(g: &WeightedGraph, site: Site) -> Result<f64> {
    match site {
        Site::Vertex(v) => delta_vertex(g, v),
        Site::Edge(u, v) => delta_edge(g, u, v),
    }
}

/// `N(G) - N(G^site)` with both sides computed from scratch.
pub fn delta_n_recomputed(g: &WeightedGraph, site: Site) -> Result<f64> {
    let h = g.perturb(&PerturbationSet::single(site)?)?;
    Ok(dependent_edge_sum(g) - dependent_edge_sum(&h))
}
