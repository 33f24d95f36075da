//! The two functionals: the dependent edge-weight sum and maximum weight
//! matching, with their single-site perturbation envelopes.

pub mod edge_sum;
pub mod matching;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{PerturbationSet, Site, WeightedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum App {
    EdgeSum,
    Matching,
}

impl App {
    pub fn name(self) -> &'static str {
        match self {
            App::EdgeSum => "edge-sum",
            App::Matching => "matching",
        }
    }

    /// `f(G)`. Matching is exact and subject to the solver limit.
    pub fn evaluate(self, g: &WeightedGraph) -> Result<f64> {
        match self {
            App::EdgeSum => Ok(edge_sum::dependent_edge_sum(g)),
            App::Matching => matching::max_weight(&matching::MatchGraph::from_graph(g)),
        }
    }

    /// `Delta_site f = f(G) - f(G^site)`, both evaluated from scratch.
    pub fn delta(self, g: &WeightedGraph, site: Site) -> Result<f64> {
        let h = g.perturb(&PerturbationSet::single(site)?)?;
        Ok(self.evaluate(g)? - self.evaluate(&h)?)
    }

    /// Envelope dominating `|Delta_site f|`. For matching,
    /// `H_E = max{w_e, w'_e}` on `{max(X_e, X'_e) = 1}` and vertex sites
    /// carry no weight. For the edge sum, `H_E = w_u + w_v` on the same
    /// event and `H_V = |D_1(v)| (w_v + w'_v)`.
    pub fn envelope(self, g: &WeightedGraph, site: Site) -> Result<f64> {
        match site {
            Site::Vertex(v) => {
                g.check_vertex(v)?;
                Ok(match self {
                    App::Matching => 0.0,
                    App::EdgeSum => g.degree(v) as f64 * (g.vertex_weight(v) + g.vertex_weight_raw(v, true)),
                })
            }
            Site::Edge(u, v) => {
                g.check_vertex(u)?;
                g.check_vertex(v)?;
                if !(g.has_edge(u, v) || g.indicator(u, v, true)) {
                    return Ok(0.0);
                }
                Ok(match self {
                    App::Matching => g.edge_weight_raw(u, v, false).max(g.edge_weight_raw(u, v, true)),
                    App::EdgeSum => g.vertex_weight(u) + g.vertex_weight(v),
                })
            }
        }
    }
}

impl fmt::Display for App {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for App {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge-sum" => Ok(App::EdgeSum),
            "matching" => Ok(App::Matching),
            _ => Err(Error::Config(format!("unknown application '{s}', expected edge-sum or matching"))),
        }
    }
}
