//! Query processing: two-stage region traversal, lookup-table ADC and top-K
//! re-ranking.
//!
//! For a candidate in cell `(i, j)` with edge end `s = S_i[j]`, stored
//! position `lambda` and PQ code `q`, the approximate squared distance is
//!
//! ```text
//! (1-l)|y-c_i|^2 + (l^2-l)|c_i-s|^2 + l|y-s|^2      anchor distance
//!   + sum_p |q_p|^2                                  t2, query independent
//!   + 2(1-l) sum_p <c_i^p, q_p> + 2l sum_p <s^p, q_p> t3, query independent
//!   - 2 sum_p <y^p, q_p>                             t5, once per query
//! ```
//!
//! which is `|y - anchor - decode(q)|^2` expanded. Each candidate costs
//! `4 * m` table lookups plus the closed-form anchor term; the three centroid
//! distances come from the first-level scan.

use rayon::prelude::*;

use crate::data::VectorSet;
use crate::error::{Error, Result};
use crate::index::{InvertedIndex, PostingEntry};
use crate::quantizers::{line_sqdist, projection, Codebook, NeighborGraph, PQCodebooks, PQ_CENTROIDS};
use crate::scalar::{dist_id_cmp, dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryParams {
    /// First-level regions visited.
    pub w1: usize,
    /// Fraction of the `w1 * n` visited sub-regions that are scanned.
    pub alpha: f64,
    /// Results per query.
    pub k: usize,
    /// Optional cap on scanned candidates per query.
    pub max_codes: Option<usize>,
}

impl Default for QueryParams {
    fn default() -> Self {
        Self {
            w1: 64,
            alpha: 0.25,
            k: 100,
            max_codes: None,
        }
    }
}

impl QueryParams {
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.w1 == 0 || self.w1 > k {
            return Err(Error::param(format!(
                "w1 must be in [1, k={k}], got {}",
                self.w1
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::param(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn with_w1(self, w1: usize) -> Self {
        Self { w1, ..self }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    /// Sub-regions kept out of `w1 * n`: `max(1, floor(alpha * w1 * n))`.
    pub fn w2(&self, n: usize) -> usize {
        let total = self.w1 * n;
        ((self.alpha * total as f64).floor() as usize).clamp(1, total)
    }
}

/// Ranked results of one query, ascending by approximate distance.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult<S> {
    pub ids: Vec<u32>,
    pub dists: Vec<S>,
    /// Candidates scored before re-ranking.
    pub scanned: usize,
}

impl<S> SearchResult<S> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Per-query lookup state.
#[derive(Debug, Clone)]
pub struct QueryWorkspace<S> {
    /// `|y - c|^2` for every centroid.
    pub centroid_sqdists: Vec<S>,
    /// `<y^p, q_pj>`, `m x 256`.
    pub t5: Vec<S>,
}

impl<S: Scalar> QueryWorkspace<S> {
    pub fn new(y: &[S], index: &InvertedIndex<S>) -> Result<Self> {
        check_dim(y, index.dim())?;
        let mut centroid_sqdists = Vec::with_capacity(index.k());
        index.codebook().sqdists_into(y, &mut centroid_sqdists);
        Ok(Self {
            centroid_sqdists,
            t5: query_term5(y, index.pq())?,
        })
    }
}

fn check_dim(y: &[impl Sized], dim: usize) -> Result<()> {
    if y.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: y.len(),
        });
    }
    Ok(())
}

/// The `w1` nearest centroids (ties by id) and the distance to every centroid.
pub fn first_level_scan<S: Scalar>(
    y: &[S],
    codebook: &Codebook<S>,
    w1: usize,
) -> Result<(Vec<u32>, Vec<S>)> {
    check_dim(y, codebook.dim())?;
    if w1 == 0 || w1 > codebook.k() {
        return Err(Error::param(format!(
            "w1 must be in [1, {}], got {w1}",
            codebook.k()
        )));
    }
    let mut dists = Vec::with_capacity(codebook.k());
    codebook.sqdists_into(y, &mut dists);
    Ok((top_centroids(&dists, w1), dists))
}

fn top_centroids<S: Scalar>(dists: &[S], w1: usize) -> Vec<u32> {
    let mut order: Vec<(S, u32)> = dists.iter().enumerate().map(|(i, &d)| (d, i as u32)).collect();
    if w1 < order.len() {
        order.select_nth_unstable_by(w1 - 1, |a, b| dist_id_cmp(*a, *b));
        order.truncate(w1);
    }
    order.sort_unstable_by(|a, b| dist_id_cmp(*a, *b));
    order.into_iter().map(|(_, i)| i).collect()
}

/// Ranks the edges of the visited cells by the squared distance from the
/// query to its own (clamped) projection on each edge and keeps `w2`.
/// Returns `(centroid_id, edge_rank)` pairs in ranking order.
pub fn second_level_rank<S: Scalar>(
    centroid_sqdists: &[S],
    top_cells: &[u32],
    graph: &NeighborGraph<S>,
    w2: usize,
) -> Vec<(u32, u32)> {
    let n = graph.n();
    let mut edges: Vec<(S, u32, u32)> = Vec::with_capacity(top_cells.len() * n);
    for &i in top_cells {
        let a = centroid_sqdists[i as usize];
        for (j, (&s, &c)) in graph
            .neighbors(i as usize)
            .iter()
            .zip(graph.edge_sq_lens(i as usize))
            .enumerate()
        {
            let b = centroid_sqdists[s as usize];
            let lambda = projection(a, b, c, true);
            edges.push((line_sqdist(a, b, c, lambda), i, j as u32));
        }
    }
    let cmp = |x: &(S, u32, u32), y: &(S, u32, u32)| {
        x.0.partial_cmp(&y.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    };
    let w2 = w2.min(edges.len());
    if w2 == 0 {
        return Vec::new();
    }
    if w2 < edges.len() {
        edges.select_nth_unstable_by(w2 - 1, cmp);
        edges.truncate(w2);
    }
    edges.sort_unstable_by(cmp);
    edges.into_iter().map(|(_, i, j)| (i, j)).collect()
}

/// Query/sub-centroid inner products, `m x 256`.
pub fn query_term5<S: Scalar>(y: &[S], pq: &PQCodebooks<S>) -> Result<Vec<S>> {
    check_dim(y, pq.dim())?;
    let sd = pq.sub_dim();
    let mut t5 = Vec::with_capacity(pq.m() * PQ_CENTROIDS);
    for p in 0..pq.m() {
        let slice = &y[p * sd..(p + 1) * sd];
        t5.extend(pq.subspace(p).chunks_exact(sd).map(|c| dot(slice, c)));
    }
    Ok(t5)
}

/// Query-side constants shared by every entry of one cell.
struct CellTerms<'a, S> {
    a: S,
    b: S,
    c: S,
    t3_i: &'a [S],
    t3_s: &'a [S],
}

impl<'a, S: Scalar> CellTerms<'a, S> {
    #[inline]
    fn new(index: &'a InvertedIndex<S>, ws: &QueryWorkspace<S>, i: usize, j: usize) -> Self {
        let s = index.graph().neighbor(i, j) as usize;
        Self {
            a: ws.centroid_sqdists[i],
            b: ws.centroid_sqdists[s],
            c: index.graph().edge_sq_len(i, j),
            t3_i: index.t3_row(i),
            t3_s: index.t3_row(s),
        }
    }

    #[inline]
    fn distance(&self, code: &[u8], lambda: S, t2: &[S], t5: &[S]) -> S {
        let (mut s2, mut s3i, mut s3s, mut s5) = (S::zero(), S::zero(), S::zero(), S::zero());
        for (p, &j) in code.iter().enumerate() {
            let at = p * PQ_CENTROIDS + j as usize;
            s2 += t2[at];
            s3i += self.t3_i[at];
            s3s += self.t3_s[at];
            s5 += t5[at];
        }
        let two = S::two();
        line_sqdist(self.a, self.b, self.c, lambda) + s2 + two * (S::one() - lambda) * s3i
            + two * lambda * s3s
            - two * s5
    }
}

/// Approximate squared distance between the query behind `ws` and one stored
/// entry of cell `(i, j)`.
pub fn adc_distance<S: Scalar>(
    entry: PostingEntry<'_>,
    cell: (usize, usize),
    ws: &QueryWorkspace<S>,
    index: &InvertedIndex<S>,
) -> S {
    let lambda = index.lambda_quant().dequantize(entry.lambda_byte);
    CellTerms::new(index, ws, cell.0, cell.1).distance(
        entry.code,
        lambda,
        index.pq().sub_sq_norms(),
        &ws.t5,
    )
}

/// The `k` smallest candidates by distance, ties by ascending id.
pub fn select_topk<S: Scalar>(mut candidates: Vec<(u32, S)>, k: usize) -> SearchResult<S> {
    let scanned = candidates.len();
    let cmp = |a: &(u32, S), b: &(u32, S)| dist_id_cmp((a.1, a.0), (b.1, b.0));
    if k == 0 {
        candidates.clear();
    } else if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, cmp);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(cmp);
    let (ids, dists) = candidates.into_iter().unzip();
    SearchResult {
        ids,
        dists,
        scanned,
    }
}

/// Sub-regions a query scans, in ranking order.
pub fn selected_cells<S: Scalar>(
    index: &InvertedIndex<S>,
    ws: &QueryWorkspace<S>,
    params: &QueryParams,
) -> Result<Vec<(u32, u32)>> {
    params.validate(index.k())?;
    let top = top_centroids(&ws.centroid_sqdists, params.w1);
    Ok(second_level_rank(
        &ws.centroid_sqdists,
        &top,
        index.graph(),
        params.w2(index.n()),
    ))
}

/// Ids of every candidate a query scores, in scan order.
pub fn candidate_ids<S: Scalar>(
    index: &InvertedIndex<S>,
    y: &[S],
    params: &QueryParams,
) -> Result<Vec<u32>> {
    let ws = QueryWorkspace::new(y, index)?;
    let n = index.n();
    let limit = params.max_codes.unwrap_or(usize::MAX);
    let mut ids = Vec::new();
    for (i, j) in selected_cells(index, &ws, params)? {
        let list = index.list(i as usize * n + j as usize);
        let room = limit - ids.len();
        ids.extend(list.ids.iter().take(room));
        if ids.len() >= limit {
            break;
        }
    }
    Ok(ids)
}

pub fn search_one<S: Scalar>(
    index: &InvertedIndex<S>,
    y: &[S],
    params: &QueryParams,
) -> Result<SearchResult<S>> {
    let ws = QueryWorkspace::new(y, index)?;
    let cells = selected_cells(index, &ws, params)?;
    let (n, m) = (index.n(), index.m());
    let levels = index.lambda_quant().levels();
    let t2 = index.pq().sub_sq_norms();
    let limit = params.max_codes.unwrap_or(usize::MAX);
    let mut cands: Vec<(u32, S)> = Vec::new();
    'cells: for (i, j) in cells {
        let (i, j) = (i as usize, j as usize);
        let list = index.list(i * n + j);
        if list.is_empty() {
            continue;
        }
        let terms = CellTerms::new(index, &ws, i, j);
        for (e, (&id, &lb)) in list.ids.iter().zip(&list.lambdas).enumerate() {
            if cands.len() >= limit {
                break 'cells;
            }
            let d = terms.distance(list.code(e, m), levels[lb as usize], t2, &ws.t5);
            cands.push((id, d));
        }
    }
    Ok(select_topk(cands, params.k))
}

/// Searches every query; output is independent of the thread count.
pub fn search_batch<S: Scalar>(
    index: &InvertedIndex<S>,
    queries: &VectorSet<S>,
    params: &QueryParams,
) -> Result<Vec<SearchResult<S>>> {
    if queries.dim() != index.dim() {
        return Err(Error::DimensionMismatch {
            expected: index.dim(),
            found: queries.dim(),
        });
    }
    params.validate(index.k())?;
    queries
        .as_slice()
        .par_chunks_exact(queries.dim())
        .map(|y| search_one(index, y, params))
        .collect()
}
