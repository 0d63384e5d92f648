use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::VectorSet;
use crate::error::{Error, Result};
use crate::scalar::{sq_l2, sq_norm, Scalar};

/// First-level codebook: `k` centroids of dimension `dim` with cached
/// squared norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<S> {
    dim: usize,
    centroids: Vec<S>,
    sq_norms: Vec<S>,
}

impl<S: Scalar> Codebook<S> {
    pub fn new(dim: usize, centroids: Vec<S>) -> Result<Self> {
        let set = VectorSet::new(dim, centroids)?;
        if set.is_empty() {
            return Err(Error::param("codebook needs at least one centroid"));
        }
        Ok(Self::from_set(set))
    }

    pub fn from_set(set: VectorSet<S>) -> Self {
        let dim = set.dim();
        let sq_norms = set.rows().map(sq_norm).collect();
        Self {
            dim,
            centroids: set.as_slice().to_vec(),
            sq_norms,
        }
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.sq_norms.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn centroid(&self, i: usize) -> &[S] {
        &self.centroids[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centroids(&self) -> &[S] {
        &self.centroids
    }

    pub fn sq_norms(&self) -> &[S] {
        &self.sq_norms
    }

    /// Squared distances from `x` to every centroid.
    pub fn sqdists_into(&self, x: &[S], out: &mut Vec<S>) {
        out.clear();
        out.extend(self.centroids.chunks_exact(self.dim).map(|c| sq_l2(x, c)));
    }
}

/// Nearest centroid by linear scan, lowest id on ties.
pub fn assign_nearest<S: Scalar>(x: &[S], codebook: &Codebook<S>) -> Result<(u32, S)> {
    if x.len() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            found: x.len(),
        });
    }
    Ok(nearest_in(x, codebook.centroids(), codebook.dim()))
}

#[inline]
pub(crate) fn nearest_in<S: Scalar>(x: &[S], centroids: &[S], dim: usize) -> (u32, S) {
    let mut best = (0u32, S::infinity());
    for (i, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_l2(x, c);
        if d < best.1 {
            best = (i as u32, d);
        }
    }
    best
}

/// Lloyd k-means with k-means++ seeding.
pub fn train_kmeans<S: Scalar>(
    train: &VectorSet<S>,
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<Codebook<S>> {
    train_kmeans_traced(train, k, iters, seed).map(|(cb, _)| cb)
}

/// Like [`train_kmeans`], also returning the total quantization error
/// observed at the assignment step of every iteration.
pub fn train_kmeans_traced<S: Scalar>(
    train: &VectorSet<S>,
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<(Codebook<S>, Vec<f64>)> {
    if k == 0 {
        return Err(Error::param("k must be positive"));
    }
    if iters == 0 {
        return Err(Error::param("iterations must be at least 1"));
    }
    if train.len() < k {
        return Err(Error::NotEnoughPoints {
            needed: k,
            got: train.len(),
        });
    }
    let dim = train.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp(train, k, &mut rng);
    let mut errors = Vec::with_capacity(iters);

    for _ in 0..iters {
        let assign: Vec<(u32, S)> = train
            .as_slice()
            .par_chunks_exact(dim)
            .map(|x| nearest_in(x, &centroids, dim))
            .collect();
        errors.push(assign.iter().map(|(_, d)| d.as_f64()).sum());

        let mut sums = vec![0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (x, &(c, _)) in train.rows().zip(&assign) {
            let c = c as usize;
            counts[c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(x) {
                *s += v.as_f64();
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for d in 0..dim {
                    centroids[c * dim + d] = S::of(sums[c * dim + d] * inv);
                }
            }
        }
        if counts.contains(&0) {
            repair_empty(train, &assign, &mut centroids, &mut counts);
        }
    }
    let set = VectorSet::new(dim, centroids)?;
    Ok((Codebook::from_set(set), errors))
}

fn kmeans_pp<S: Scalar>(train: &VectorSet<S>, k: usize, rng: &mut ChaCha8Rng) -> Vec<S> {
    let dim = train.dim();
    let n = train.len();
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(train.row(first));
    let mut min_d: Vec<f64> = train
        .as_slice()
        .par_chunks_exact(dim)
        .map(|x| sq_l2(x, train.row(first)).as_f64())
        .collect();
    while centroids.len() < k * dim {
        let total: f64 = min_d.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in min_d.iter().enumerate() {
                if r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            // Rounding can land on a zero-weight point; never re-pick a chosen one.
            if min_d[pick] == 0.0 {
                pick = min_d
                    .iter()
                    .rposition(|&d| d > 0.0)
                    .expect("positive total has a positive entry");
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = train.row(pick).to_vec();
        min_d
            .par_iter_mut()
            .zip(train.as_slice().par_chunks_exact(dim))
            .for_each(|(m, x)| {
                let d = sq_l2(x, &c).as_f64();
                if d < *m {
                    *m = d;
                }
            });
        centroids.extend_from_slice(&c);
    }
    centroids
}

/// Re-seeds every empty cluster at the farthest member of the cluster with
/// the largest remaining error.
fn repair_empty<S: Scalar>(
    train: &VectorSet<S>,
    assign: &[(u32, S)],
    centroids: &mut [S],
    counts: &mut [usize],
) {
    let dim = train.dim();
    let k = counts.len();
    let mut err = vec![0f64; k];
    let mut dist_to_mean = vec![0f64; assign.len()];
    for (p, (x, &(c, _))) in train.rows().zip(assign).enumerate() {
        let c = c as usize;
        let d = sq_l2(x, &centroids[c * dim..(c + 1) * dim]).as_f64();
        dist_to_mean[p] = d;
        err[c] += d;
    }
    let mut taken = vec![false; assign.len()];
    for empty in 0..k {
        if counts[empty] != 0 {
            continue;
        }
        let donor = (0..k)
            .filter(|&c| counts[c] > 1)
            .fold(None::<usize>, |best, c| match best {
                Some(b) if err[b] >= err[c] => Some(b),
                _ => Some(c),
            });
        let Some(donor) = donor else { break };
        let mut far: Option<usize> = None;
        for (p, &(c, _)) in assign.iter().enumerate() {
            if c as usize == donor && !taken[p] {
                match far {
                    Some(f) if dist_to_mean[f] >= dist_to_mean[p] => {}
                    _ => far = Some(p),
                }
            }
        }
        let Some(p) = far else { break };
        taken[p] = true;
        err[donor] -= dist_to_mean[p];
        counts[donor] -= 1;
        counts[empty] = 1;
        centroids[empty * dim..(empty + 1) * dim].copy_from_slice(train.row(p));
    }
}
