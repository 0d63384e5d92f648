//! Single-level IVFADC: k Voronoi lists of PQ-encoded residuals `x - c_i`.

use rayon::prelude::*;

use crate::data::VectorSet;
use crate::error::{Error, Result};
use crate::quantizers::{encode_into, nearest_in, Codebook, PQCodebooks, PQ_CENTROIDS};
use crate::scalar::{sq_l2, Scalar};
use crate::search::{select_topk, SearchResult};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IvfList {
    pub ids: Vec<u32>,
    pub codes: Vec<u8>,
}

impl IvfList {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvfIndex<S> {
    pub codebook: Codebook<S>,
    pub pq: PQCodebooks<S>,
    pub lists: Vec<IvfList>,
}

impl<S: Scalar> IvfIndex<S> {
    /// `|(y - c_i)^p - q_pj|^2` for every sub-centroid, `m x 256`.
    pub fn residual_table(&self, y: &[S], cell: usize, out: &mut Vec<S>) {
        let (m, sd) = (self.pq.m(), self.pq.sub_dim());
        let c = self.codebook.centroid(cell);
        let r: Vec<S> = y.iter().zip(c).map(|(a, b)| *a - *b).collect();
        out.clear();
        for p in 0..m {
            let slice = &r[p * sd..(p + 1) * sd];
            out.extend(self.pq.subspace(p).chunks_exact(sd).map(|q| sq_l2(slice, q)));
        }
    }

    /// ADC distance of entry `e` of `cell` given that cell's residual table.
    #[inline]
    pub fn entry_distance(&self, table: &[S], cell: usize, e: usize) -> S {
        let m = self.pq.m();
        let code = &self.lists[cell].codes[e * m..(e + 1) * m];
        let mut d = S::zero();
        for (p, &j) in code.iter().enumerate() {
            d += table[p * PQ_CENTROIDS + j as usize];
        }
        d
    }
}

pub fn build_ivf_baseline<S: Scalar>(
    base: &VectorSet<S>,
    codebook: &Codebook<S>,
    pq: &PQCodebooks<S>,
) -> Result<IvfIndex<S>> {
    let dim = codebook.dim();
    for found in [base.dim(), pq.dim()] {
        if found != dim {
            return Err(Error::DimensionMismatch { expected: dim, found });
        }
    }
    let m = pq.m();
    let mut cells = vec![0u32; base.len()];
    let mut codes = vec![0u8; base.len() * m];
    base.as_slice()
        .par_chunks_exact(dim)
        .zip(cells.par_iter_mut())
        .zip(codes.par_chunks_mut(m))
        .for_each_init(
            || vec![S::zero(); dim],
            |r, ((x, cell), code)| {
                let (i, _) = nearest_in(x, codebook.centroids(), dim);
                for ((o, a), b) in r.iter_mut().zip(x).zip(codebook.centroid(i as usize)) {
                    *o = *a - *b;
                }
                encode_into(r, pq, code);
                *cell = i;
            },
        );
    let mut lists = vec![IvfList::default(); codebook.k()];
    for (id, &c) in cells.iter().enumerate() {
        let list = &mut lists[c as usize];
        list.ids.push(id as u32);
        list.codes.extend_from_slice(&codes[id * m..(id + 1) * m]);
    }
    Ok(IvfIndex {
        codebook: codebook.clone(),
        pq: pq.clone(),
        lists,
    })
}

pub(crate) fn search_ivf_one<S: Scalar>(
    index: &IvfIndex<S>,
    y: &[S],
    w: usize,
    k: usize,
) -> SearchResult<S> {
    let mut order: Vec<(S, u32)> = (0..index.codebook.k())
        .map(|i| (sq_l2(y, index.codebook.centroid(i)), i as u32))
        .collect();
    let cmp = |a: &(S, u32), b: &(S, u32)| crate::scalar::dist_id_cmp(*a, *b);
    if w < order.len() {
        order.select_nth_unstable_by(w - 1, cmp);
        order.truncate(w);
    }
    order.sort_unstable_by(cmp);
    let mut table = Vec::new();
    let mut cands = Vec::new();
    for &(_, cell) in &order {
        let cell = cell as usize;
        let list = &index.lists[cell];
        if list.is_empty() {
            continue;
        }
        index.residual_table(y, cell, &mut table);
        for (e, &id) in list.ids.iter().enumerate() {
            cands.push((id, index.entry_distance(&table, cell, e)));
        }
    }
    select_topk(cands, k)
}

/// Scans the `w` nearest lists of each query and re-ranks by ADC distance.
pub fn search_ivf_baseline<S: Scalar>(
    index: &IvfIndex<S>,
    queries: &VectorSet<S>,
    w: usize,
    k: usize,
) -> Result<Vec<SearchResult<S>>> {
    if queries.dim() != index.codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: index.codebook.dim(),
            found: queries.dim(),
        });
    }
    if w == 0 || w > index.codebook.k() {
        return Err(Error::param(format!(
            "w must be in [1, {}], got {w}",
            index.codebook.k()
        )));
    }
    Ok(queries
        .as_slice()
        .par_chunks_exact(queries.dim())
        .map(|y| search_ivf_one(index, y, w, k))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_synthetic;
    use crate::quantizers::{pq_encode, train_kmeans, train_residual_pq};

    fn fixture() -> (VectorSet<f32>, IvfIndex<f32>) {
        let base: VectorSet<f32> = gen_synthetic(3000, 8, 10, 0.05, 1).unwrap();
        let cb = train_kmeans(&base, 16, 6, 2).unwrap();
        let pq = train_residual_pq(&base, &cb, 4, 6, 3).unwrap();
        let idx = build_ivf_baseline(&base, &cb, &pq).unwrap();
        (base, idx)
    }

    #[test]
    fn partition_and_replay() {
        let (base, idx) = fixture();
        assert_eq!(idx.lists.iter().map(|l| l.len()).sum::<usize>(), 3000);
        for (cell, list) in idx.lists.iter().enumerate() {
            for (e, &id) in list.ids.iter().enumerate().take(30) {
                let x = base.row(id as usize);
                let (i, _) = crate::quantizers::assign_nearest(x, &idx.codebook).unwrap();
                assert_eq!(i as usize, cell);
                let r: Vec<f32> = x.iter().zip(idx.codebook.centroid(cell)).map(|(a, b)| a - b).collect();
                assert_eq!(&list.codes[e * 4..e * 4 + 4], &pq_encode(&r, &idx.pq).unwrap()[..]);
            }
        }
    }

    #[test]
    fn centroids_as_base_encode_zero_residual() {
        let (_, idx) = fixture();
        let base = VectorSet::new(8, idx.codebook.centroids().to_vec()).unwrap();
        let b = build_ivf_baseline(&base, &idx.codebook, &idx.pq).unwrap();
        let zero_code = pq_encode(&[0.0f32; 8], &idx.pq).unwrap();
        for list in &b.lists {
            assert_eq!(list.len(), 1);
            assert_eq!(list.codes, zero_code);
        }
    }

    #[test]
    fn exhaustive_w_equals_full_adc_scan() {
        let (_, idx) = fixture();
        let qs: VectorSet<f32> = gen_synthetic(10, 8, 10, 0.05, 7).unwrap();
        let got = search_ivf_baseline(&idx, &qs, 16, 10).unwrap();
        let again = search_ivf_baseline(&idx, &qs, 16, 10).unwrap();
        assert_eq!(got, again);
        for (q, y) in qs.rows().enumerate() {
            let mut all = Vec::new();
            let mut table = Vec::new();
            for cell in 0..16 {
                idx.residual_table(y, cell, &mut table);
                for e in 0..idx.lists[cell].len() {
                    all.push((idx.lists[cell].ids[e], idx.entry_distance(&table, cell, e)));
                }
            }
            all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            let ids: Vec<u32> = all[..10].iter().map(|c| c.0).collect();
            assert_eq!(got[q].ids, ids);
        }
    }

    #[test]
    fn single_point_base() {
        let (base, idx) = fixture();
        let one = build_ivf_baseline(&base.head(1), &idx.codebook, &idx.pq).unwrap();
        let qs: VectorSet<f32> = gen_synthetic(3, 8, 2, 0.4, 9).unwrap();
        for r in search_ivf_baseline(&one, &qs, 16, 5).unwrap() {
            assert_eq!(r.ids, vec![0]);
        }
    }
}
