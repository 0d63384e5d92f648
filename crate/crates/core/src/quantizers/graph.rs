use crate::error::{Error, Result};
use crate::quantizers::Codebook;
use crate::scalar::{dist_id_cmp, sq_l2, Scalar};

/// Directed n-NN graph over the codebook centroids. Row `i` lists the `n`
/// centroids closest to centroid `i` in ascending distance, together with the
/// squared edge lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph<S> {
    n: usize,
    ids: Vec<u32>,
    edge_sq_len: Vec<S>,
}

impl<S: Scalar> NeighborGraph<S> {
    /// Wraps raw rows, checking the structural invariants against `k`.
    pub fn from_parts(k: usize, n: usize, ids: Vec<u32>, edge_sq_len: Vec<S>) -> Result<Self> {
        if n == 0 || ids.len() != k * n || edge_sq_len.len() != k * n {
            return Err(Error::Corrupt(format!(
                "graph arrays do not match k={k}, n={n}"
            )));
        }
        for i in 0..k {
            let row = &ids[i * n..(i + 1) * n];
            for (j, &s) in row.iter().enumerate() {
                if s as usize >= k || s as usize == i || row[..j].contains(&s) {
                    return Err(Error::Corrupt(format!("invalid neighbor {s} in row {i}")));
                }
                let len = edge_sq_len[i * n + j];
                if !(len > S::zero() && len.is_finite()) {
                    return Err(Error::DegenerateEdge {
                        from: i,
                        to: s as usize,
                    });
                }
            }
        }
        Ok(Self {
            n,
            ids,
            edge_sq_len,
        })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.ids.len() / self.n
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.ids[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn edge_sq_lens(&self, i: usize) -> &[S] {
        &self.edge_sq_len[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn neighbor(&self, i: usize, j: usize) -> u32 {
        self.ids[i * self.n + j]
    }

    #[inline]
    pub fn edge_sq_len(&self, i: usize, j: usize) -> S {
        self.edge_sq_len[i * self.n + j]
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn all_edge_sq_lens(&self) -> &[S] {
        &self.edge_sq_len
    }
}

/// Exact all-pairs construction of the n-NN graph.
pub fn build_nn_graph<S: Scalar>(codebook: &Codebook<S>, n: usize) -> Result<NeighborGraph<S>> {
    let k = codebook.k();
    if n == 0 || n >= k {
        return Err(Error::param(format!(
            "graph degree n must be in [1, k) = [1, {k}), got {n}"
        )));
    }
    let mut ids = Vec::with_capacity(k * n);
    let mut lens = Vec::with_capacity(k * n);
    let mut row: Vec<(S, u32)> = Vec::with_capacity(k - 1);
    for i in 0..k {
        row.clear();
        let ci = codebook.centroid(i);
        row.extend(
            (0..k)
                .filter(|&j| j != i)
                .map(|j| (sq_l2(ci, codebook.centroid(j)), j as u32)),
        );
        row.select_nth_unstable_by(n - 1, |a, b| dist_id_cmp(*a, *b));
        row.truncate(n);
        row.sort_unstable_by(|a, b| dist_id_cmp(*a, *b));
        for &(d, j) in &row {
            if d <= S::zero() {
                return Err(Error::DegenerateEdge {
                    from: i,
                    to: j as usize,
                });
            }
            ids.push(j);
            lens.push(d);
        }
    }
    Ok(NeighborGraph {
        n,
        ids,
        edge_sq_len: lens,
    })
}
