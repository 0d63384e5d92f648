use rayon::prelude::*;

use crate::data::VectorSet;
use crate::error::{Error, Result};
use crate::index::LambdaQuant;
use crate::quantizers::{
    anchor_displacement, argmin, assign_edge_from_dists, encode_into, Codebook, NeighborGraph,
    PQCodebooks, Quantizers, PQ_CENTROIDS,
};
use crate::scalar::{dot, Scalar};

/// Entries of one second-level region, stored column-wise.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PostingList {
    pub ids: Vec<u32>,
    /// `len() * m` PQ code bytes.
    pub codes: Vec<u8>,
    /// Quantized lambda, one byte per entry.
    pub lambdas: Vec<u8>,
}

impl PostingList {
    #[inline]
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn code(&self, e: usize, m: usize) -> &[u8] {
        &self.codes[e * m..(e + 1) * m]
    }

    #[inline]
    pub fn entry(&self, e: usize, m: usize) -> PostingEntry<'_> {
        PostingEntry {
            point_id: self.ids[e],
            code: self.code(e, m),
            lambda_byte: self.lambdas[e],
        }
    }
}

/// One stored point: id, PQ code of its displacement and quantized lambda.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PostingEntry<'a> {
    pub point_id: u32,
    pub code: &'a [u8],
    pub lambda_byte: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub clamp_lambda: bool,
    /// Points processed per batch. The output does not depend on it.
    pub batch: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            clamp_lambda: true,
            batch: 100_000,
        }
    }
}

/// Immutable two-level inverted index. Cell `i * n + j` holds the points
/// whose nearest centroid is `i` and whose closest edge is `(i, S_i[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex<S> {
    pub(crate) codebook: Codebook<S>,
    pub(crate) graph: NeighborGraph<S>,
    pub(crate) pq: PQCodebooks<S>,
    pub(crate) clamp_lambda: bool,
    pub(crate) lambda_quant: LambdaQuant<S>,
    pub(crate) lists: Vec<PostingList>,
    pub(crate) t3: Vec<S>,
    pub(crate) base_count: usize,
}

impl<S: Scalar> InvertedIndex<S> {
    /// Builds from trained quantizers, choosing the lambda range from the
    /// clamping mode.
    pub fn build(base: &VectorSet<S>, quantizers: &Quantizers<S>, batch: usize) -> Result<Self> {
        let opts = BuildOptions {
            clamp_lambda: quantizers.clamp_lambda,
            batch,
        };
        let lq = if quantizers.clamp_lambda {
            LambdaQuant::unit()
        } else {
            observed_lambda_range(base, &quantizers.codebook, &quantizers.graph)?
        };
        build_index(
            base,
            &quantizers.codebook,
            &quantizers.graph,
            &quantizers.pq,
            lq,
            opts,
        )
    }

    /// Index with every posting list empty.
    pub fn empty(quantizers: &Quantizers<S>) -> Result<Self> {
        let dim = quantizers.codebook.dim();
        Self::build(&VectorSet::empty(dim), quantizers, 1)
    }

    pub fn codebook(&self) -> &Codebook<S> {
        &self.codebook
    }

    pub fn graph(&self) -> &NeighborGraph<S> {
        &self.graph
    }

    pub fn pq(&self) -> &PQCodebooks<S> {
        &self.pq
    }

    pub fn quantizers(&self) -> Quantizers<S> {
        Quantizers {
            codebook: self.codebook.clone(),
            graph: self.graph.clone(),
            pq: self.pq.clone(),
            clamp_lambda: self.clamp_lambda,
        }
    }

    pub fn clamp_lambda(&self) -> bool {
        self.clamp_lambda
    }

    pub fn lambda_quant(&self) -> &LambdaQuant<S> {
        &self.lambda_quant
    }

    pub fn dim(&self) -> usize {
        self.codebook.dim()
    }

    pub fn k(&self) -> usize {
        self.codebook.k()
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn m(&self) -> usize {
        self.pq.m()
    }

    pub fn base_count(&self) -> usize {
        self.base_count
    }

    pub fn num_cells(&self) -> usize {
        self.lists.len()
    }

    #[inline]
    pub fn list(&self, cell: usize) -> &PostingList {
        &self.lists[cell]
    }

    pub fn lists(&self) -> &[PostingList] {
        &self.lists
    }

    /// Centroid/sub-centroid inner products, `[i][p][j]`.
    pub fn t3(&self) -> &[S] {
        &self.t3
    }

    #[inline]
    pub(crate) fn t3_row(&self, i: usize) -> &[S] {
        let len = self.pq.m() * PQ_CENTROIDS;
        &self.t3[i * len..(i + 1) * len]
    }

    /// `(1 - lambda) c_i + lambda s_ij` for cell `(i, j)`.
    pub fn anchor(&self, i: usize, j: usize, lambda: S) -> Vec<S> {
        let s = self.graph.neighbor(i, j) as usize;
        let w = S::one() - lambda;
        self.codebook
            .centroid(i)
            .iter()
            .zip(self.codebook.centroid(s))
            .map(|(a, b)| w * *a + lambda * *b)
            .collect()
    }

    /// Checks every structural invariant; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let (k, n, m, dim) = (self.k(), self.n(), self.m(), self.dim());
        if self.graph.k() != k {
            return Err(Error::Corrupt("graph size differs from codebook".into()));
        }
        if self.pq.dim() != dim {
            return Err(Error::Corrupt("PQ dimension differs from codebook".into()));
        }
        if self.lists.len() != k * n {
            return Err(Error::Corrupt(format!(
                "{} posting lists, expected {}",
                self.lists.len(),
                k * n
            )));
        }
        if self.t3.len() != k * m * PQ_CENTROIDS {
            return Err(Error::Corrupt("t3 table has the wrong size".into()));
        }
        let mut seen = vec![false; self.base_count];
        let mut total = 0usize;
        for (cell, list) in self.lists.iter().enumerate() {
            if list.codes.len() != list.len() * m || list.lambdas.len() != list.len() {
                return Err(Error::Corrupt(format!("cell {cell} arrays disagree")));
            }
            for &id in &list.ids {
                let id = id as usize;
                if id >= self.base_count || seen[id] {
                    return Err(Error::Corrupt(format!(
                        "point id {id} out of range or duplicated"
                    )));
                }
                seen[id] = true;
            }
            total += list.len();
        }
        if total != self.base_count {
            return Err(Error::Corrupt(format!(
                "lists hold {total} points, header says {}",
                self.base_count
            )));
        }
        Ok(())
    }
}

/// Centroid/sub-centroid inner-product table, `k x m x 256`.
pub fn compute_t3<S: Scalar>(codebook: &Codebook<S>, pq: &PQCodebooks<S>) -> Vec<S> {
    let (m, sd) = (pq.m(), pq.sub_dim());
    let mut t3 = Vec::with_capacity(codebook.k() * m * PQ_CENTROIDS);
    for i in 0..codebook.k() {
        let c = codebook.centroid(i);
        for p in 0..m {
            let slice = &c[p * sd..(p + 1) * sd];
            t3.extend(
                pq.subspace(p)
                    .chunks_exact(sd)
                    .map(|sub| dot(slice, sub)),
            );
        }
    }
    t3
}

fn check_dims<S: Scalar>(
    base: &VectorSet<S>,
    codebook: &Codebook<S>,
    graph: &NeighborGraph<S>,
    pq: &PQCodebooks<S>,
) -> Result<()> {
    if base.dim() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            found: base.dim(),
        });
    }
    if pq.dim() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            found: pq.dim(),
        });
    }
    if graph.k() != codebook.k() {
        return Err(Error::param("graph and codebook disagree on k"));
    }
    if base.len() > u32::MAX as usize {
        return Err(Error::param("base too large for 32-bit ids"));
    }
    Ok(())
}

/// Range of the unclamped lambda over `base`, for the unclamped mode.
pub(crate) fn observed_lambda_range<S: Scalar>(
    base: &VectorSet<S>,
    codebook: &Codebook<S>,
    graph: &NeighborGraph<S>,
) -> Result<LambdaQuant<S>> {
    if base.dim() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            found: base.dim(),
        });
    }
    let lambdas: Vec<S> = base
        .as_slice()
        .par_chunks_exact(base.dim())
        .map_init(Vec::new, |dists, x| {
            codebook.sqdists_into(x, dists);
            assign_edge_from_dists(argmin(dists), dists, graph, false).lambda
        })
        .collect();
    LambdaQuant::covering(lambdas)
}

/// Assigns every base point to its cell, encodes its displacement from the
/// anchor and appends the entry to the cell, in point-id order.
pub fn build_index<S: Scalar>(
    base: &VectorSet<S>,
    codebook: &Codebook<S>,
    graph: &NeighborGraph<S>,
    pq: &PQCodebooks<S>,
    lambda_quant: LambdaQuant<S>,
    opts: BuildOptions,
) -> Result<InvertedIndex<S>> {
    check_dims(base, codebook, graph, pq)?;
    let (dim, n, m) = (base.dim(), graph.n(), pq.m());
    let mut lists = vec![PostingList::default(); codebook.k() * n];
    let batch = opts.batch.max(1);

    let mut cells: Vec<(u32, u8)> = Vec::new();
    let mut codes: Vec<u8> = Vec::new();
    for (b, chunk) in base.as_slice().chunks(batch * dim).enumerate() {
        let count = chunk.len() / dim;
        cells.clear();
        cells.resize(count, (0, 0));
        codes.clear();
        codes.resize(count * m, 0);
        chunk
            .par_chunks_exact(dim)
            .zip(cells.par_iter_mut())
            .zip(codes.par_chunks_mut(m))
            .for_each_init(
                || (Vec::with_capacity(codebook.k()), vec![S::zero(); dim]),
                |(dists, r), ((x, cell), code)| {
                    codebook.sqdists_into(x, dists);
                    let i = argmin(dists);
                    let e = assign_edge_from_dists(i, dists, graph, opts.clamp_lambda);
                    let j = e.edge_rank as usize;
                    let s = graph.neighbor(i, j) as usize;
                    anchor_displacement(x, codebook.centroid(i), codebook.centroid(s), e.lambda, r);
                    encode_into(r, pq, code);
                    *cell = ((i * n + j) as u32, lambda_quant.quantize(e.lambda));
                },
            );
        let first_id = b * batch;
        for (p, &(cell, lb)) in cells.iter().enumerate() {
            let list = &mut lists[cell as usize];
            list.ids.push((first_id + p) as u32);
            list.codes.extend_from_slice(&codes[p * m..(p + 1) * m]);
            list.lambdas.push(lb);
        }
    }

    Ok(InvertedIndex {
        codebook: codebook.clone(),
        graph: graph.clone(),
        pq: pq.clone(),
        clamp_lambda: opts.clamp_lambda,
        lambda_quant,
        lists,
        t3: compute_t3(codebook, pq),
        base_count: base.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_synthetic;
    use crate::quantizers::{assign_edge, assign_nearest, pq_encode, train_quantizers, TrainParams};

    fn fixture() -> (VectorSet<f32>, Quantizers<f32>) {
        let base: VectorSet<f32> = gen_synthetic(3000, 8, 12, 0.08, 1).unwrap();
        let params = TrainParams {
            k: 16,
            n: 4,
            m: 4,
            iters: 8,
            seed: 2,
            clamp_lambda: true,
        };
        let q = train_quantizers(&base, &params).unwrap();
        (base, q)
    }

    #[test]
    fn partition_and_batch_independence() {
        let (base, q) = fixture();
        let a = InvertedIndex::build(&base, &q, 100_000).unwrap();
        let b = InvertedIndex::build(&base, &q, 7).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        let mut ids: Vec<u32> = a.lists().iter().flat_map(|l| l.ids.iter().copied()).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..3000).collect::<Vec<u32>>());
    }

    #[test]
    fn replay_matches_single_point_ops() {
        let (base, q) = fixture();
        let idx = InvertedIndex::build(&base, &q, 333).unwrap();
        let lq = idx.lambda_quant();
        let mut where_: Vec<Option<(usize, usize)>> = vec![None; base.len()];
        for (cell, list) in idx.lists().iter().enumerate() {
            for (e, &id) in list.ids.iter().enumerate() {
                where_[id as usize] = Some((cell, e));
            }
        }
        for id in 0..1000 {
            let x = base.row(id);
            let (i, _) = assign_nearest(x, &q.codebook).unwrap();
            let ea = assign_edge(x, i as usize, &q.codebook, &q.graph, true).unwrap();
            let anchor = idx.anchor(i as usize, ea.edge_rank as usize, ea.lambda);
            let r: Vec<f32> = x.iter().zip(&anchor).map(|(a, b)| a - b).collect();
            let code = pq_encode(&r, &q.pq).unwrap();
            let (cell, e) = where_[id].unwrap();
            assert_eq!(cell, i as usize * 4 + ea.edge_rank as usize);
            let list = idx.list(cell);
            assert_eq!(list.code(e, 4), &code[..]);
            assert_eq!(list.lambdas[e], lq.quantize(ea.lambda));
        }
    }

    #[test]
    fn centroids_land_in_own_region() {
        let (_, q) = fixture();
        let k = q.codebook.k();
        let base = VectorSet::new(8, q.codebook.centroids().to_vec()).unwrap();
        let idx = InvertedIndex::build(&base, &q, 5).unwrap();
        for (cell, list) in idx.lists().iter().enumerate() {
            for (e, &id) in list.ids.iter().enumerate() {
                assert_eq!(cell, id as usize * 4, "centroid {id} lands on edge 0 of its own region");
                assert_eq!(list.lambdas[e], 0);
            }
        }
        assert_eq!(idx.base_count(), k);
    }

    #[test]
    fn t3_entries() {
        let (_, q) = fixture();
        let t3 = compute_t3(&q.codebook, &q.pq);
        for &(i, p, j) in &[(0usize, 0usize, 0usize), (3, 2, 100), (15, 3, 255)] {
            let c = &q.codebook.centroid(i)[p * 2..p * 2 + 2];
            let s = q.pq.sub_centroid(p, j);
            let direct = c[0] as f64 * s[0] as f64 + c[1] as f64 * s[1] as f64;
            let got = t3[(i * 4 + p) * 256 + j] as f64;
            assert!((got - direct).abs() <= 1e-6 * direct.abs().max(1e-6));
        }

        let mut cents = vec![0.0f32; 2 * 4];
        cents[4..8].copy_from_slice(&[1.0, 2.0, 0.0, 0.0]);
        let cb = Codebook::new(4, cents).unwrap();
        let mut table = vec![0.0f32; 2 * 256 * 2];
        table[7 * 2..7 * 2 + 2].copy_from_slice(&[3.0, 4.0]);
        let pq = PQCodebooks::new(2, 2, table).unwrap();
        let t3 = compute_t3(&cb, &pq);
        assert!(t3[..2 * 256].iter().all(|&v| v == 0.0));
        assert_eq!(t3[2 * 256 + 7], 11.0);
    }

    #[test]
    fn unclamped_range_covers_lambdas() {
        let (base, mut q) = fixture();
        q.clamp_lambda = false;
        let idx = InvertedIndex::build(&base, &q, 1000).unwrap();
        assert!(!idx.clamp_lambda());
        let lq = idx.lambda_quant();
        for x in base.rows().take(200) {
            let (i, _) = assign_nearest(x, &q.codebook).unwrap();
            let l = assign_edge(x, i as usize, &q.codebook, &q.graph, false).unwrap().lambda;
            assert!(l >= lq.lo() && l <= lq.hi());
        }
    }

    #[test]
    fn dimension_mismatch() {
        let (_, q) = fixture();
        let bad = VectorSet::new(4, vec![0.0f32; 8]).unwrap();
        assert!(matches!(
            InvertedIndex::build(&bad, &q, 10),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
