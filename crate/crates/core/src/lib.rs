//! Vector and line quantization (VLQ) inverted index with asymmetric distance
//! computation (ADC).
//!
//! The index is two-level: a k-means codebook partitions the space into `k`
//! regions, and an n-nearest-neighbor graph over the centroids splits every
//! region into `n` sub-regions, one per outgoing edge. Each point is stored as
//! the PQ code of its displacement from the closest point ("anchor") on its
//! edge, plus a one-byte quantized position along that edge.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the bottom of this file pin the common `f32` instantiation used by the file
//! formats and the CLI.

pub mod data;
pub mod error;
pub mod eval;
pub mod index;
pub mod quantizers;
pub mod scalar;
pub mod search;

pub use data::{
    brute_force_gt, gen_synthetic, peek_dim, read_ground_truth, read_vecs, write_ground_truth,
    write_vecs, GroundTruth, VecsKind, VectorSet,
};
pub use error::{Error, Result};
pub use eval::{
    build_ivf_baseline, memory_report, recall_at, region_histogram, run_experiment,
    search_ivf_baseline, ExperimentConfig, ExperimentReport, IvfIndex, MemoryReport, RegionStats,
};
pub use index::{
    build_index, compute_t3, deserialize_index, serialize_index, BuildOptions, InvertedIndex,
    LambdaQuant, PostingList,
};
pub use quantizers::{
    assign_edge, assign_nearest, build_nn_graph, line_lambda, line_sqdist, pq_decode, pq_encode,
    train_kmeans, train_pq, train_quantizers, Codebook, EdgeAssignment, NeighborGraph,
    PQCodebooks, Quantizers, TrainParams,
};
pub use scalar::Scalar;
pub use search::{search_batch, search_one, select_topk, QueryParams, SearchResult};

pub type VectorSet32 = VectorSet<f32>;
pub type VectorSet64 = VectorSet<f64>;
pub type Codebook32 = Codebook<f32>;
pub type Codebook64 = Codebook<f64>;
pub type Quantizers32 = Quantizers<f32>;
pub type Quantizers64 = Quantizers<f64>;
pub type Index32 = InvertedIndex<f32>;
pub type Index64 = InvertedIndex<f64>;
pub type SearchResult32 = SearchResult<f32>;
pub type SearchResult64 = SearchResult<f64>;
