use rayon::prelude::*;

use crate::data::VectorSet;
use crate::error::{Error, Result};
use crate::quantizers::{
    anchor_displacement, assign_edge_from_dists, build_nn_graph, nearest_in, train_kmeans,
    train_pq, Codebook, NeighborGraph, PQCodebooks, PQ_CENTROIDS,
};
use crate::scalar::Scalar;

/// Hyper-parameters for training all three quantizers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainParams {
    /// First-level centroids.
    pub k: usize,
    /// Graph degree, i.e. sub-regions per first-level region.
    pub n: usize,
    /// PQ sub-quantizers (code bytes).
    pub m: usize,
    pub iters: usize,
    pub seed: u64,
    pub clamp_lambda: bool,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            k: 1 << 10,
            n: 16,
            m: 8,
            iters: 20,
            seed: 42,
            clamp_lambda: true,
        }
    }
}

impl TrainParams {
    pub fn validate(&self, dim: usize, train_count: usize) -> Result<()> {
        if self.k < 2 {
            return Err(Error::param("k must be at least 2"));
        }
        if self.n == 0 || self.n >= self.k {
            return Err(Error::param(format!(
                "n must be in [1, k): n={}, k={}",
                self.n, self.k
            )));
        }
        if self.m == 0 || !dim.is_multiple_of(self.m) {
            return Err(Error::param(format!(
                "m must divide the dimension: D={dim}, m={}",
                self.m
            )));
        }
        if self.iters == 0 {
            return Err(Error::param("iterations must be at least 1"));
        }
        let needed = self.k.max(PQ_CENTROIDS);
        if train_count < needed {
            return Err(Error::NotEnoughPoints {
                needed,
                got: train_count,
            });
        }
        Ok(())
    }
}

/// Trained codebook, centroid graph and displacement PQ.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantizers<S> {
    pub codebook: Codebook<S>,
    pub graph: NeighborGraph<S>,
    pub pq: PQCodebooks<S>,
    pub clamp_lambda: bool,
}

/// Trains k-means, builds the n-NN graph, then trains PQ on the training
/// points' displacements from their anchors.
pub fn train_quantizers<S: Scalar>(
    train: &VectorSet<S>,
    params: &TrainParams,
) -> Result<Quantizers<S>> {
    params.validate(train.dim(), train.len())?;
    let codebook = train_kmeans(train, params.k, params.iters, params.seed)?;
    let graph = build_nn_graph(&codebook, params.n)?;
    let displacements = anchor_displacements(train, &codebook, &graph, params.clamp_lambda)?;
    let pq = train_pq(
        &displacements,
        params.m,
        params.iters,
        params.seed.wrapping_add(1),
    )?;
    Ok(Quantizers {
        codebook,
        graph,
        pq,
        clamp_lambda: params.clamp_lambda,
    })
}

fn anchor_displacements<S: Scalar>(
    xs: &VectorSet<S>,
    codebook: &Codebook<S>,
    graph: &NeighborGraph<S>,
    clamp: bool,
) -> Result<VectorSet<S>> {
    let dim = xs.dim();
    let data: Vec<S> = xs
        .as_slice()
        .par_chunks_exact(dim)
        .flat_map_iter(|x| {
            let mut dists = Vec::with_capacity(codebook.k());
            codebook.sqdists_into(x, &mut dists);
            let i = argmin(&dists);
            let e = assign_edge_from_dists(i, &dists, graph, clamp);
            let s = graph.neighbor(i, e.edge_rank as usize) as usize;
            let mut r = vec![S::zero(); dim];
            anchor_displacement(x, codebook.centroid(i), codebook.centroid(s), e.lambda, &mut r);
            r
        })
        .collect();
    VectorSet::new(dim, data)
}

/// PQ over plain residuals `x - c_i`, as used by a single-level IVFADC index.
pub fn train_residual_pq<S: Scalar>(
    train: &VectorSet<S>,
    codebook: &Codebook<S>,
    m: usize,
    iters: usize,
    seed: u64,
) -> Result<PQCodebooks<S>> {
    let dim = train.dim();
    if dim != codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            found: dim,
        });
    }
    let data: Vec<S> = train
        .as_slice()
        .par_chunks_exact(dim)
        .flat_map_iter(|x| {
            let (i, _) = nearest_in(x, codebook.centroids(), dim);
            let c = codebook.centroid(i as usize);
            x.iter().zip(c).map(|(a, b)| *a - *b).collect::<Vec<_>>()
        })
        .collect();
    train_pq(&VectorSet::new(dim, data)?, m, iters, seed)
}

/// Index of the smallest value, lowest index on ties.
#[inline]
pub(crate) fn argmin<S: Scalar>(v: &[S]) -> usize {
    let mut best = 0;
    for (i, &d) in v.iter().enumerate().skip(1) {
        if d < v[best] {
            best = i;
        }
    }
    best
}
