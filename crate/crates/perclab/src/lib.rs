//! perclab: a long-range percolation laboratory.
//!
//! The crate samples random graphs on finite boxes of `Z^d` where distinct
//! sites `x`, `y` are joined independently with probability
//! `p_xy = 1 - exp(-q(x - y))` for a radially decaying `q`, measures chemical
//! distances, cluster fractions and binary hierarchies on the samples, and
//! evaluates the matching closed-form quantities and large-deviation bounds.
//!
//! Modules:
//! - [`lattice`]: points, norms, boxes and annuli;
//! - [`bondspace`]: the connection law and samplers;
//! - [`clusters`]: connected components, dense points, block renormalization;
//! - [`chemdist`]: shortest paths, graph diameter and hierarchy machinery;
//! - [`theory`]: closed forms — distance exponent, Chernoff rates, scale
//!   ladders, complete-graph bounds, shell sums;
//! - [`lab`]: reproducible experiments, reports and the command line.

pub mod bondspace;
pub mod chemdist;
pub mod clusters;
pub mod error;
pub mod lab;
pub mod lattice;
pub mod theory;

pub use bondspace::{BondModel, ConnectionProfile, GraphSample};
pub use error::{Error, Result};
pub use lattice::{annulus, AnnulusSpec, BoxMode, BoxSpec, NormKind, Point};

// Every code block in the guide runs as a doctest, keeping the book in sync
// with the crate.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub struct $name;
        };
    }
    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(Lattice, "../../../book/src/lattice.md");
    chapter!(Model, "../../../book/src/model.md");
    chapter!(Sampling, "../../../book/src/sampling.md");
    chapter!(Clusters, "../../../book/src/clusters.md");
    chapter!(Distance, "../../../book/src/distance.md");
    chapter!(Hierarchies, "../../../book/src/hierarchies.md");
    chapter!(Theory, "../../../book/src/theory.md");
    chapter!(Experiments, "../../../book/src/experiments.md");
    chapter!(Cli, "../../../book/src/cli.md");
}
