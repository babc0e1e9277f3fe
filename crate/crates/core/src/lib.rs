//! Metrics on vector-valued measures over a weighted label graph.

pub mod dynamic;
pub mod bl;
pub mod error;
pub mod graph;
pub mod graph_wasserstein;
pub mod lifted;
pub mod lp;
pub mod measure;
pub mod ode;
mod optim;
pub mod pde;
pub mod verify;
pub mod quadrature;
pub mod static_ot;

pub use error::{Error, Result};
pub use graph::{
    alpha, beta_membership, graph_divergence, graph_gradient, laplacian_pinv_apply,
    tangent_inner_product, validate_interpolation, weighted_laplacian, EdgeField,
    GraphDistribution, Interpolation, InterpolationKind, InterpolationProperty, PropertyReport,
    WeightedGraph,
};
pub use graph_wasserstein::{
    simplex_distance, two_node_geodesic, wg_dynamic, wg_two_node, GraphPath, SimplexPoint,
};
pub use measure::{Atom, DiscreteVectorMeasure};
pub use dynamic::{w_dynamic, DynamicSolution, GridConfig, SolverConfig};
