//! Rank-one inhomogeneous random graphs, explicit couplings of their local
//! neighbourhoods to Galton-Watson trees, closed-form coupling bounds and
//! Monte Carlo diagnostics.

pub mod apps;
pub mod bounds;
pub mod coupling;
pub mod error;
pub mod explore;
pub mod graph;
pub mod harness;
pub mod limit;
pub mod poisson;
pub mod rde;
pub mod rng;
pub mod stats;
pub mod tree;
pub mod weights;

pub use error::{Error, Result};
pub use rng::{Domain, Seed, SiteRng};
pub use weights::{DiscreteLaw, Law, WeightSpec};
