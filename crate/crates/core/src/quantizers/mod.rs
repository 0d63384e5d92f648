//! The three quantizers: k-means vector quantization, line quantization over
//! the centroid n-NN graph, and product quantization of displacements.

mod graph;
mod kmeans;
mod line;
mod pq;
mod training;

pub use graph::{build_nn_graph, NeighborGraph};
pub use kmeans::{assign_nearest, train_kmeans, train_kmeans_traced, Codebook};
pub use line::{
    anchor_displacement, assign_edge, assign_edge_from_dists, line_lambda, line_sqdist,
    EdgeAssignment,
};
pub use pq::{pq_decode, pq_encode, train_pq, train_pq_traced, PQCodebooks, PQ_CENTROIDS};
pub use training::{train_quantizers, train_residual_pq, Quantizers, TrainParams};

pub(crate) use kmeans::nearest_in;
pub(crate) use line::projection;
pub(crate) use pq::encode_into;
pub(crate) use training::argmin;
