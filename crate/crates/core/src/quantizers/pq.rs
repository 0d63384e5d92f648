use crate::data::VectorSet;
use crate::error::{Error, Result};
use crate::quantizers::{nearest_in, train_kmeans_traced};
use crate::scalar::{sq_norm, Scalar};

/// Sub-codebook size; every code component is one byte.
pub const PQ_CENTROIDS: usize = 256;

/// `m` independent 256-entry codebooks, one per contiguous slice of
/// `dim / m` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PQCodebooks<S> {
    m: usize,
    sub_dim: usize,
    sub_centroids: Vec<S>,
    sub_sq_norms: Vec<S>,
}

impl<S: Scalar> PQCodebooks<S> {
    /// `sub_centroids` is laid out `[p][j][..sub_dim]`.
    pub fn new(m: usize, sub_dim: usize, sub_centroids: Vec<S>) -> Result<Self> {
        if m == 0 || sub_dim == 0 || sub_centroids.len() != m * PQ_CENTROIDS * sub_dim {
            return Err(Error::Corrupt(format!(
                "PQ table has {} values, expected m={m} x {PQ_CENTROIDS} x {sub_dim}",
                sub_centroids.len()
            )));
        }
        if sub_centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::Corrupt("non-finite PQ sub-centroid".into()));
        }
        let sub_sq_norms = sub_centroids.chunks_exact(sub_dim).map(sq_norm).collect();
        Ok(Self {
            m,
            sub_dim,
            sub_centroids,
            sub_sq_norms,
        })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn sub_dim(&self) -> usize {
        self.sub_dim
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.m * self.sub_dim
    }

    /// All 256 sub-centroids of subspace `p`, contiguous.
    #[inline]
    pub fn subspace(&self, p: usize) -> &[S] {
        let len = PQ_CENTROIDS * self.sub_dim;
        &self.sub_centroids[p * len..(p + 1) * len]
    }

    #[inline]
    pub fn sub_centroid(&self, p: usize, j: usize) -> &[S] {
        let start = (p * PQ_CENTROIDS + j) * self.sub_dim;
        &self.sub_centroids[start..start + self.sub_dim]
    }

    pub fn sub_centroids(&self) -> &[S] {
        &self.sub_centroids
    }

    /// Squared sub-centroid norms, `m x 256`.
    pub fn sub_sq_norms(&self) -> &[S] {
        &self.sub_sq_norms
    }
}

pub fn train_pq<S: Scalar>(
    displacements: &VectorSet<S>,
    m: usize,
    iters: usize,
    seed: u64,
) -> Result<PQCodebooks<S>> {
    train_pq_traced(displacements, m, iters, seed).map(|(pq, _)| pq)
}

/// Trains one k-means per subspace, returning the per-iteration error trace
/// of each.
pub fn train_pq_traced<S: Scalar>(
    displacements: &VectorSet<S>,
    m: usize,
    iters: usize,
    seed: u64,
) -> Result<(PQCodebooks<S>, Vec<Vec<f64>>)> {
    let dim = displacements.dim();
    if m == 0 || !dim.is_multiple_of(m) {
        return Err(Error::param(format!(
            "m must divide the dimension: D={dim}, m={m}"
        )));
    }
    if displacements.len() < PQ_CENTROIDS {
        return Err(Error::NotEnoughPoints {
            needed: PQ_CENTROIDS,
            got: displacements.len(),
        });
    }
    let sub_dim = dim / m;
    let mut table = Vec::with_capacity(m * PQ_CENTROIDS * sub_dim);
    let mut traces = Vec::with_capacity(m);
    for p in 0..m {
        let slice: Vec<S> = displacements
            .rows()
            .flat_map(|r| r[p * sub_dim..(p + 1) * sub_dim].iter().copied())
            .collect();
        let slice = VectorSet::new(sub_dim, slice)?;
        let (cb, errs) =
            train_kmeans_traced(&slice, PQ_CENTROIDS, iters, seed.wrapping_add(p as u64))?;
        table.extend_from_slice(cb.centroids());
        traces.push(errs);
    }
    Ok((PQCodebooks::new(m, sub_dim, table)?, traces))
}

pub fn pq_encode<S: Scalar>(r: &[S], pq: &PQCodebooks<S>) -> Result<Vec<u8>> {
    if r.len() != pq.dim() {
        return Err(Error::DimensionMismatch {
            expected: pq.dim(),
            found: r.len(),
        });
    }
    let mut code = vec![0u8; pq.m()];
    encode_into(r, pq, &mut code);
    Ok(code)
}

#[inline]
pub(crate) fn encode_into<S: Scalar>(r: &[S], pq: &PQCodebooks<S>, code: &mut [u8]) {
    let sd = pq.sub_dim();
    for (p, c) in code.iter_mut().enumerate() {
        *c = nearest_in(&r[p * sd..(p + 1) * sd], pq.subspace(p), sd).0 as u8;
    }
}

/// Concatenation of the sub-centroids named by `code`.
///
/// Panics if `code.len() != pq.m()`.
pub fn pq_decode<S: Scalar>(code: &[u8], pq: &PQCodebooks<S>) -> Vec<S> {
    assert_eq!(code.len(), pq.m(), "code length must equal m");
    let mut out = Vec::with_capacity(pq.dim());
    for (p, &c) in code.iter().enumerate() {
        out.extend_from_slice(pq.sub_centroid(p, c as usize));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_synthetic;
    use crate::scalar::sq_l2_f64;

    fn fixture(m: usize, dim: usize) -> (VectorSet<f64>, PQCodebooks<f64>) {
        let train: VectorSet<f64> = gen_synthetic(2000, dim, 10, 0.2, 6).unwrap();
        let pq = train_pq(&train, m, 6, 1).unwrap();
        (train, pq)
    }

    #[test]
    fn encode_picks_exact_sub_centroids() {
        let (_, pq) = fixture(2, 4);
        let mut r = pq.sub_centroid(0, 4).to_vec();
        r.extend_from_slice(pq.sub_centroid(1, 9));
        let code = pq_encode(&r, &pq).unwrap();
        // Duplicate sub-centroids would resolve to a lower id with the same value.
        assert!(code[0] <= 4 && code[1] <= 9);
        assert_eq!(pq_decode(&code, &pq), r);
        assert!(pq_encode(&[0.0; 3], &pq).is_err());
    }

    #[test]
    fn encode_hand_table() {
        let table: Vec<f32> = (0..2 * PQ_CENTROIDS)
            .flat_map(|j| {
                let v = (j % PQ_CENTROIDS) as f32;
                [v, v]
            })
            .collect();
        let pq = PQCodebooks::new(2, 2, table).unwrap();
        assert_eq!(pq_encode(&[4.0f32, 4.0, 9.0, 9.0], &pq).unwrap(), vec![4, 9]);
    }

    #[test]
    fn zero_code_and_zero_vector() {
        let mut table = vec![1.0f32; 2 * PQ_CENTROIDS * 2];
        table[..2].copy_from_slice(&[0.0, 0.0]);
        table[PQ_CENTROIDS * 2..PQ_CENTROIDS * 2 + 2].copy_from_slice(&[0.0, 0.0]);
        let pq = PQCodebooks::new(2, 2, table).unwrap();
        assert_eq!(pq_encode(&[0.0f32; 4], &pq).unwrap(), vec![0, 0]);
        assert_eq!(pq_decode(&[0, 0], &pq), vec![0.0; 4]);
        assert_eq!(pq_decode(&[0, 3], &pq), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn degenerate_single_subspace() {
        let (train, pq) = fixture(1, 2);
        assert_eq!((pq.m(), pq.sub_dim()), (1, 2));
        for x in train.rows().take(50) {
            let code = pq_encode(x, &pq).unwrap();
            let (j, _) = nearest_in(x, pq.subspace(0), 2);
            assert_eq!(code[0] as u32, j);
        }
    }

    #[test]
    fn encode_matches_linear_scan() {
        let (_, pq) = fixture(4, 8);
        let xs: VectorSet<f64> = gen_synthetic(100, 8, 3, 0.5, 31).unwrap();
        for x in xs.rows() {
            let code = pq_encode(x, &pq).unwrap();
            for p in 0..4 {
                let slice = &x[p * 2..p * 2 + 2];
                let mut best = (0usize, f64::INFINITY);
                for j in 0..PQ_CENTROIDS {
                    let d = sq_l2_f64(slice, pq.sub_centroid(p, j));
                    if d < best.1 {
                        best = (j, d);
                    }
                }
                assert_eq!(code[p] as usize, best.0);
            }
        }
    }

    #[test]
    fn decode_error_is_sum_of_subspace_errors() {
        let (_, pq) = fixture(4, 8);
        let xs: VectorSet<f64> = gen_synthetic(50, 8, 3, 0.5, 32).unwrap();
        for x in xs.rows() {
            let code = pq_encode(x, &pq).unwrap();
            let total = sq_l2_f64(x, &pq_decode(&code, &pq));
            let parts: f64 = (0..4)
                .map(|p| sq_l2_f64(&x[p * 2..p * 2 + 2], pq.sub_centroid(p, code[p] as usize)))
                .sum();
            assert!((total - parts).abs() <= 1e-12 * total.max(1.0));
        }
    }

    #[test]
    fn exact_when_points_coincide() {
        // 256 distinct slice values, each repeated three times.
        let rows: Vec<[f64; 2]> = (0..768).map(|i| [(i % 256) as f64, -((i % 256) as f64)]).collect();
        let train = VectorSet::from_rows(2, &rows).unwrap();
        let (_, traces) = train_pq_traced(&train, 2, 4, 0).unwrap();
        for t in &traces {
            assert_eq!(*t.last().unwrap(), 0.0);
        }
    }

    #[test]
    fn subspace_error_non_increasing() {
        let train: VectorSet<f64> = gen_synthetic(3000, 8, 20, 0.2, 13).unwrap();
        let (_, traces) = train_pq_traced(&train, 4, 12, 2).unwrap();
        for t in traces {
            for w in t.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn sub_sq_norms_match() {
        let (_, pq) = fixture(2, 4);
        for p in 0..2 {
            for j in 0..PQ_CENTROIDS {
                let direct: f64 = pq.sub_centroid(p, j).iter().map(|v| v * v).sum();
                let cached = pq.sub_sq_norms()[p * PQ_CENTROIDS + j];
                assert!((cached - direct).abs() <= 1e-6 * direct.max(1e-30));
            }
        }
    }

    #[test]
    fn preconditions() {
        let train: VectorSet<f64> = gen_synthetic(300, 6, 2, 0.2, 1).unwrap();
        assert!(train_pq(&train, 4, 2, 0).is_err());
        let small = train.head(100);
        assert!(matches!(
            train_pq(&small, 2, 2, 0),
            Err(Error::NotEnoughPoints { .. })
        ));
    }
}
