//! Non-learned matching core.

mod attention;
mod graph;
mod sinkhorn;

pub use attention::{attention_weights, attentive_normalize, SIGMA_FLOOR};
pub use graph::{
    compatibility_block, compatibility_degree, default_edge_map, edge_aggregate, knn_graph, CorrGraph, EdgeFn, Embed,
    IdentityEmbed, DEFAULT_KNN_K,
};
pub use sinkhorn::{
    mutual_argmax, mutual_nearest_neighbors, select_matches, sinkhorn_assign, AssignmentMatrix, Match,
    DEFAULT_SINKHORN_ITERS,
};
