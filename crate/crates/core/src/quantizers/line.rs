//! Line quantization: projecting a point onto the edges of the n-NN graph.

use crate::error::{Error, Result};
use crate::quantizers::{Codebook, NeighborGraph};
use crate::scalar::{sq_l2, Scalar};

/// Position of the orthogonal projection of `x` onto the line through
/// `c_i` and `c_j`, from `a = |x - c_i|^2`, `b = |x - c_j|^2` and
/// `c = |c_j - c_i|^2`. With `clamp`, the projection is restricted to the
/// segment.
pub fn line_lambda<S: Scalar>(a: S, b: S, c: S, clamp: bool) -> Result<S> {
    if !(c > S::zero()) {
        return Err(Error::param("edge length must be positive"));
    }
    Ok(projection(a, b, c, clamp))
}

#[inline]
pub(crate) fn projection<S: Scalar>(a: S, b: S, c: S, clamp: bool) -> S {
    let lambda = S::half() * (a + c - b) / c;
    if clamp {
        lambda.max(S::zero()).min(S::one())
    } else {
        lambda
    }
}

/// Squared distance from `x` to `(1 - lambda) c_i + lambda c_j`, from the same
/// three squared distances used by [`line_lambda`].
#[inline]
pub fn line_sqdist<S: Scalar>(a: S, b: S, c: S, lambda: S) -> S {
    (S::one() - lambda) * a + (lambda * lambda - lambda) * c + lambda * b
}

/// The sub-region a point falls into, inside its first-level region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeAssignment<S> {
    pub centroid_id: u32,
    pub edge_rank: u32,
    pub lambda: S,
    /// Squared distance from the point to its anchor.
    pub sqdist: S,
}

/// Picks the edge of centroid `i` whose anchor is closest to `x`.
pub fn assign_edge<S: Scalar>(
    x: &[S],
    centroid_id: usize,
    codebook: &Codebook<S>,
    graph: &NeighborGraph<S>,
    clamp: bool,
) -> Result<EdgeAssignment<S>> {
    if centroid_id >= codebook.k() || centroid_id >= graph.k() {
        return Err(Error::InvalidCentroid {
            id: centroid_id,
            k: codebook.k(),
        });
    }
    if x.len() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            found: x.len(),
        });
    }
    let a = sq_l2(x, codebook.centroid(centroid_id));
    Ok(best_edge(centroid_id, a, graph, clamp, |s| {
        sq_l2(x, codebook.centroid(s))
    }))
}

/// Same as [`assign_edge`], with `|x - c|^2` already computed for every
/// centroid.
pub fn assign_edge_from_dists<S: Scalar>(
    centroid_id: usize,
    sqdists: &[S],
    graph: &NeighborGraph<S>,
    clamp: bool,
) -> EdgeAssignment<S> {
    best_edge(centroid_id, sqdists[centroid_id], graph, clamp, |s| sqdists[s])
}

#[inline]
fn best_edge<S: Scalar>(
    i: usize,
    a: S,
    graph: &NeighborGraph<S>,
    clamp: bool,
    dist_to: impl Fn(usize) -> S,
) -> EdgeAssignment<S> {
    let mut best = EdgeAssignment {
        centroid_id: i as u32,
        edge_rank: 0,
        lambda: S::zero(),
        sqdist: S::infinity(),
    };
    for (j, (&s, &c)) in graph
        .neighbors(i)
        .iter()
        .zip(graph.edge_sq_lens(i))
        .enumerate()
    {
        let b = dist_to(s as usize);
        let lambda = projection(a, b, c, clamp);
        let d = line_sqdist(a, b, c, lambda);
        if d < best.sqdist {
            best.edge_rank = j as u32;
            best.lambda = lambda;
            best.sqdist = d;
        }
    }
    best
}

/// Writes `x - ((1 - lambda) c_i + lambda c_j)` into `out`.
#[inline]
pub fn anchor_displacement<S: Scalar>(x: &[S], ci: &[S], cj: &[S], lambda: S, out: &mut [S]) {
    let w = S::one() - lambda;
    for (((o, &v), &a), &b) in out.iter_mut().zip(x).zip(ci).zip(cj) {
        *o = v - (w * a + lambda * b);
    }
}
