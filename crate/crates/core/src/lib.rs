//! Polynomial maps of phylogenetic tree models and their invariants.
//!
//! The crate builds the joint-probability map of a tree model as exact
//! polynomials ([`paramap`]), rewrites group-based models in Fourier
//! coordinates ([`fourier`]), and finds and checks the polynomial relations
//! among the coordinates ([`invariants`]). [`pipeline`] holds the numeric
//! side: exact distributions, simulation and quartet scoring.

pub mod exact;
pub mod fourier;
pub mod invariants;
pub mod models;
pub mod paramap;
pub mod pipeline;
pub mod tree;

pub use exact::{Poly, Rat, Var};
pub use models::{make_model, ModelKind, ModelSpec, ParamAssignment, RootMode};
pub use paramap::{expand_map, JointMap};
pub use tree::{Split, Subforest, Tree};
