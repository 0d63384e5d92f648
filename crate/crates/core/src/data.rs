//! Vector containers, the `fvecs`/`bvecs`/`ivecs` file formats, synthetic data
//! and exact ground truth.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{sq_l2, Scalar};

/// A flat, row-major set of `len()` vectors of dimension `dim()`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet<S> {
    dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> VectorSet<S> {
    /// Wraps `data` as rows of length `dim`. Rejects ragged data and
    /// non-finite values.
    pub fn new(dim: usize, data: Vec<S>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dimension must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::LengthMismatch(format!(
                "{} values is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite value at index {i}")));
        }
        Ok(Self { dim, data })
    }

    pub fn empty(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            dim,
            data: Vec::new(),
        }
    }

    pub fn from_rows<R: AsRef<[S]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::InconsistentRecord {
                    record: i,
                    expected: dim,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, S> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn push(&mut self, row: &[S]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    /// Splits off rows `[at, len)` into a new set.
    pub fn split_off(&mut self, at: usize) -> Self {
        let tail = self.data.split_off(at.min(self.len()) * self.dim);
        Self {
            dim: self.dim,
            data: tail,
        }
    }

    /// First `count` rows (all rows if fewer).
    pub fn head(&self, count: usize) -> Self {
        let end = count.min(self.len()) * self.dim;
        Self {
            dim: self.dim,
            data: self.data[..end].to_vec(),
        }
    }

    pub fn cast<T: Scalar>(&self) -> VectorSet<T> {
        VectorSet {
            dim: self.dim,
            data: self.data.iter().map(|v| T::of(v.as_f64())).collect(),
        }
    }
}

/// On-disk record payload type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VecsKind {
    /// `fvecs`: 32-bit little-endian floats.
    F32,
    /// `bvecs`: unsigned bytes.
    Byte,
    /// `ivecs`: 32-bit little-endian signed integers.
    Int,
}

impl VecsKind {
    fn elem_size(self) -> usize {
        match self {
            VecsKind::F32 | VecsKind::Int => 4,
            VecsKind::Byte => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            VecsKind::F32 => "f32",
            VecsKind::Byte => "byte",
            VecsKind::Int => "i32",
        }
    }

    /// Guesses the kind from a file extension (`fvecs`, `bvecs`, `ivecs`).
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "fvecs" => Some(VecsKind::F32),
            "bvecs" => Some(VecsKind::Byte),
            "ivecs" => Some(VecsKind::Int),
            _ => None,
        }
    }
}

/// Reads every record of a vecs file. Byte and int payloads are widened to
/// reals.
pub fn read_vecs<S: Scalar>(path: impl AsRef<Path>, kind: VecsKind) -> Result<VectorSet<S>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    parse_vecs(&bytes, kind)
}

pub(crate) fn parse_vecs<S: Scalar>(bytes: &[u8], kind: VecsKind) -> Result<VectorSet<S>> {
    let mut records = parse_records(bytes, kind.elem_size())?;
    let dim = records.dim;
    let mut data = Vec::with_capacity(records.count * dim);
    for payload in records.by_ref() {
        let mut cur = payload;
        for _ in 0..dim {
            let v = match kind {
                VecsKind::F32 => S::of(cur.read_f32::<LittleEndian>()? as f64),
                VecsKind::Byte => S::of(cur.read_u8()? as f64),
                VecsKind::Int => S::of(cur.read_i32::<LittleEndian>()? as f64),
            };
            data.push(v);
        }
    }
    VectorSet::new(dim, data)
}

struct Records<'a> {
    bytes: &'a [u8],
    dim: usize,
    count: usize,
    elem: usize,
    next: usize,
}

impl<'a> Iterator for Records<'a> {
    type Item = &'a [u8];
    fn next(&mut self) -> Option<&'a [u8]> {
        if self.next == self.count {
            return None;
        }
        let rec = 4 + self.dim * self.elem;
        let start = self.next * rec + 4;
        self.next += 1;
        Some(&self.bytes[start..start + self.dim * self.elem])
    }
}

/// Validates the record framing of a whole file up front.
fn parse_records(bytes: &[u8], elem: usize) -> Result<Records<'_>> {
    if bytes.is_empty() {
        return Err(Error::NoRecords);
    }
    let mut pos = 0usize;
    let mut dim = None;
    let mut count = 0usize;
    while pos < bytes.len() {
        if bytes.len() - pos < 4 {
            return Err(Error::TruncatedRecord { record: count });
        }
        let d = i32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap());
        if d <= 0 {
            return Err(Error::param(format!(
                "record {count} declares non-positive dimension {d}"
            )));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expected) if expected != d => {
                return Err(Error::InconsistentRecord {
                    record: count,
                    expected,
                    found: d,
                })
            }
            _ => {}
        }
        pos += 4;
        if bytes.len() - pos < d * elem {
            return Err(Error::TruncatedRecord { record: count });
        }
        pos += d * elem;
        count += 1;
    }
    Ok(Records {
        bytes,
        dim: dim.expect("nonempty file has a first record"),
        count,
        elem,
        next: 0,
    })
}

/// Reads only the dimension of the first record.
pub fn peek_dim(path: impl AsRef<Path>) -> Result<usize> {
    let mut f = File::open(path)?;
    let d = match f.read_i32::<LittleEndian>() {
        Ok(d) => d,
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Err(Error::NoRecords),
        Err(e) => return Err(e.into()),
    };
    if d <= 0 {
        return Err(Error::param(format!("non-positive dimension {d}")));
    }
    Ok(d as usize)
}

pub fn write_vecs<S: Scalar>(set: &VectorSet<S>, path: impl AsRef<Path>, kind: VecsKind) -> Result<()> {
    let bytes = encode_vecs(set, kind)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub(crate) fn encode_vecs<S: Scalar>(set: &VectorSet<S>, kind: VecsKind) -> Result<Vec<u8>> {
    // Validate before producing any output.
    if kind != VecsKind::F32 {
        let (lo, hi) = match kind {
            VecsKind::Byte => (0.0, 255.0),
            _ => (i32::MIN as f64, i32::MAX as f64),
        };
        for (index, v) in set.data.iter().enumerate() {
            let v = v.as_f64();
            if v.fract() != 0.0 || v < lo || v > hi {
                return Err(Error::Unrepresentable {
                    kind: kind.name(),
                    index,
                    value: v,
                });
            }
        }
    }
    let dim = set.dim();
    let mut out = Vec::with_capacity(set.len() * (4 + dim * kind.elem_size()));
    for row in set.rows() {
        out.write_i32::<LittleEndian>(dim as i32)?;
        for v in row {
            match kind {
                VecsKind::F32 => out.write_f32::<LittleEndian>(v.as_f32())?,
                VecsKind::Byte => out.write_u8(v.as_f64() as u8)?,
                VecsKind::Int => out.write_i32::<LittleEndian>(v.as_f64() as i32)?,
            }
        }
    }
    Ok(out)
}

/// Generates a mixture of `clusters` isotropic Gaussians with standard
/// deviation `spread`, centers drawn uniformly from the unit cube.
pub fn gen_synthetic<S: Scalar>(
    count: usize,
    dim: usize,
    clusters: usize,
    spread: f64,
    seed: u64,
) -> Result<VectorSet<S>> {
    if dim == 0 || clusters == 0 {
        return Err(Error::param("dimension and cluster count must be positive"));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::param("spread must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<f64> = (0..clusters * dim).map(|_| rng.random::<f64>()).collect();
    let mut data = Vec::with_capacity(count * dim);
    for _ in 0..count {
        let c = rng.random_range(0..clusters);
        let center = &centers[c * dim..(c + 1) * dim];
        for &mu in center {
            let z: f64 = rng.sample(StandardNormal);
            data.push(S::of(mu + spread * z));
        }
    }
    VectorSet::new(dim, data)
}

/// Exact nearest neighbors of each query, `k` per row.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    k: usize,
    neighbors: Vec<u32>,
    distances: Option<Vec<f64>>,
}

impl GroundTruth {
    pub fn new(k: usize, neighbors: Vec<u32>) -> Result<Self> {
        if k == 0 || !neighbors.len().is_multiple_of(k) {
            return Err(Error::LengthMismatch(format!(
                "{} ids do not form rows of {k}",
                neighbors.len()
            )));
        }
        Ok(Self {
            k,
            neighbors,
            distances: None,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_queries(&self) -> usize {
        self.neighbors.len() / self.k
    }

    pub fn row(&self, q: usize) -> &[u32] {
        &self.neighbors[q * self.k..(q + 1) * self.k]
    }

    pub fn nearest(&self, q: usize) -> u32 {
        self.neighbors[q * self.k]
    }

    /// Exact squared distances, present when computed by [`brute_force_gt`].
    pub fn distances(&self, q: usize) -> Option<&[f64]> {
        self.distances
            .as_deref()
            .map(|d| &d[q * self.k..(q + 1) * self.k])
    }
}

#[derive(PartialEq)]
struct HeapItem(f64, u32);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Exhaustive k-NN by squared Euclidean distance, ties broken by ascending
/// id. Rows are computed independently, so the result does not depend on the
/// thread count.
pub fn brute_force_gt<S: Scalar>(
    base: &VectorSet<S>,
    queries: &VectorSet<S>,
    k: usize,
) -> Result<GroundTruth> {
    if base.dim() != queries.dim() {
        return Err(Error::DimensionMismatch {
            expected: base.dim(),
            found: queries.dim(),
        });
    }
    if k == 0 || k > base.len() {
        return Err(Error::param(format!(
            "neighbors per query must be in [1, {}], got {k}",
            base.len()
        )));
    }
    let rows: Vec<Vec<HeapItem>> = (0..queries.len())
        .into_par_iter()
        .map(|q| {
            let y = queries.row(q);
            let mut heap = BinaryHeap::with_capacity(k + 1);
            for (id, x) in base.rows().enumerate() {
                let item = HeapItem(sq_l2(y, x).as_f64(), id as u32);
                if heap.len() < k {
                    heap.push(item);
                } else if item < *heap.peek().unwrap() {
                    heap.pop();
                    heap.push(item);
                }
            }
            heap.into_sorted_vec()
        })
        .collect();
    let mut neighbors = Vec::with_capacity(queries.len() * k);
    let mut distances = Vec::with_capacity(queries.len() * k);
    for row in rows {
        for HeapItem(d, id) in row {
            neighbors.push(id);
            distances.push(d);
        }
    }
    Ok(GroundTruth {
        k,
        neighbors,
        distances: Some(distances),
    })
}

/// Writes ground truth as an `ivecs` file.
pub fn write_ground_truth(gt: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for q in 0..gt.num_queries() {
        w.write_i32::<LittleEndian>(gt.k as i32)?;
        for &id in gt.row(q) {
            w.write_i32::<LittleEndian>(id as i32)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let mut records = parse_records(&bytes, 4)?;
    let k = records.dim;
    let mut neighbors = Vec::with_capacity(records.count * k);
    for payload in records.by_ref() {
        let mut cur = payload;
        for _ in 0..k {
            let id = cur.read_i32::<LittleEndian>()?;
            if id < 0 {
                return Err(Error::param(format!("negative neighbor id {id}")));
            }
            neighbors.push(id as u32);
        }
    }
    GroundTruth::new(k, neighbors)
}
