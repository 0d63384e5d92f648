//! Binary index file.
//!
//! All integers little-endian, all reals 32-bit IEEE-754:
//!
//! ```text
//! "VLQ1" | version u32 | flags u32 (bit0 clamped lambda, bit1 t3 present)
//! D k n m N : u32 | lo hi : f32
//! codebook        k*D f32
//! graph           k*n u32 ids, k*n f32 squared edge lengths
//! PQ              m*256*(D/m) f32
//! t3 (optional)   k*m*256 f32
//! k*n lists       u32 L, L u32 ids, L*m code bytes, L lambda bytes
//! ```

use std::fs::File;
use std::io::{BufWriter, Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::index::{compute_t3, InvertedIndex, LambdaQuant, PostingList};
use crate::quantizers::{Codebook, NeighborGraph, PQCodebooks, PQ_CENTROIDS};
use crate::scalar::{sq_norm, Scalar};

pub const MAGIC: [u8; 4] = *b"VLQ1";
pub const VERSION: u32 = 1;

const FLAG_CLAMPED: u32 = 1;
const FLAG_T3: u32 = 1 << 1;
const HEADER_BYTES: u64 = 4 + 4 + 4 + 5 * 4 + 2 * 4;

/// Exact byte size of an index file with the given shape.
pub fn index_file_size(d: u64, k: u64, n: u64, m: u64, count: u64, with_t3: bool) -> u64 {
    let t3 = if with_t3 { 4 * k * m * PQ_CENTROIDS as u64 } else { 0 };
    HEADER_BYTES
        + 4 * k * d
        + 8 * k * n
        + 4 * PQ_CENTROIDS as u64 * d
        + t3
        + 4 * k * n
        + count * (4 + m + 1)
}

/// Writes the index with the t3 table included.
pub fn serialize_index<S: Scalar>(index: &InvertedIndex<S>, path: impl AsRef<Path>) -> Result<()> {
    let f = File::create(path)?;
    let mut w = BufWriter::new(f);
    write_index(index, &mut w, true)?;
    w.flush()?;
    Ok(())
}

pub fn write_index<S: Scalar, W: Write>(
    index: &InvertedIndex<S>,
    w: &mut W,
    with_t3: bool,
) -> Result<()> {
    let mut flags = 0;
    if index.clamp_lambda {
        flags |= FLAG_CLAMPED;
    }
    if with_t3 {
        flags |= FLAG_T3;
    }
    w.write_all(&MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(flags)?;
    for v in [
        index.dim(),
        index.k(),
        index.n(),
        index.m(),
        index.base_count,
    ] {
        w.write_u32::<LittleEndian>(v as u32)?;
    }
    w.write_f32::<LittleEndian>(index.lambda_quant.lo().as_f32())?;
    w.write_f32::<LittleEndian>(index.lambda_quant.hi().as_f32())?;
    write_reals(w, index.codebook.centroids())?;
    for &id in index.graph.ids() {
        w.write_u32::<LittleEndian>(id)?;
    }
    write_reals(w, index.graph.all_edge_sq_lens())?;
    write_reals(w, index.pq.sub_centroids())?;
    if with_t3 {
        write_reals(w, &index.t3)?;
    }
    for list in &index.lists {
        w.write_u32::<LittleEndian>(list.len() as u32)?;
        for &id in &list.ids {
            w.write_u32::<LittleEndian>(id)?;
        }
        w.write_all(&list.codes)?;
        w.write_all(&list.lambdas)?;
    }
    Ok(())
}

fn write_reals<S: Scalar, W: Write>(w: &mut W, vals: &[S]) -> Result<()> {
    for v in vals {
        w.write_f32::<LittleEndian>(v.as_f32())?;
    }
    Ok(())
}

pub fn deserialize_index<S: Scalar>(path: impl AsRef<Path>) -> Result<InvertedIndex<S>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    read_index(&bytes)
}

/// Parses and validates an index from its file bytes. A missing t3 table is
/// recomputed.
pub fn read_index<S: Scalar>(bytes: &[u8]) -> Result<InvertedIndex<S>> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut r = Cursor::new(&bytes[4..]);
    let version = u32_(&mut r)?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let flags = u32_(&mut r)?;
    if flags & !(FLAG_CLAMPED | FLAG_T3) != 0 {
        return Err(Error::Corrupt(format!("unknown flags {flags:#x}")));
    }
    let d = u32_(&mut r)? as usize;
    let k = u32_(&mut r)? as usize;
    let n = u32_(&mut r)? as usize;
    let m = u32_(&mut r)? as usize;
    let count = u32_(&mut r)? as usize;
    if d == 0 || k < 2 || n == 0 || n >= k || m == 0 || !d.is_multiple_of(m) {
        return Err(Error::Corrupt(format!(
            "invalid shape D={d} k={k} n={n} m={m}"
        )));
    }
    let min_size = index_file_size(
        d as u64,
        k as u64,
        n as u64,
        m as u64,
        count as u64,
        flags & FLAG_T3 != 0,
    );
    if (bytes.len() as u64) < min_size {
        return Err(Error::Truncated);
    }
    let lo = S::of(f32_(&mut r)? as f64);
    let hi = S::of(f32_(&mut r)? as f64);
    let lambda_quant = LambdaQuant::new(lo, hi).map_err(|e| Error::Corrupt(e.to_string()))?;

    let codebook: Codebook<S> = Codebook::new(d, reals(&mut r, k * d)?).map_err(corrupt)?;
    let mut ids = Vec::with_capacity(k * n);
    for _ in 0..k * n {
        ids.push(u32_(&mut r)?);
    }
    let lens = reals(&mut r, k * n)?;
    let graph = NeighborGraph::from_parts(k, n, ids, lens)?;
    let pq = PQCodebooks::new(m, d / m, reals(&mut r, m * PQ_CENTROIDS * (d / m))?)?;
    let t3 = if flags & FLAG_T3 != 0 {
        let stored: Vec<S> = reals(&mut r, k * m * PQ_CENTROIDS)?;
        let direct = compute_t3(&codebook, &pq);
        let sd = d / m;
        for (e, (a, b)) in stored.iter().zip(&direct).enumerate() {
            let (i, p, j) = (e / (m * PQ_CENTROIDS), (e / PQ_CENTROIDS) % m, e % PQ_CENTROIDS);
            let slice = &codebook.centroid(i)[p * sd..(p + 1) * sd];
            // Cauchy-Schwarz bound on the inner product's magnitude.
            let scale = (sq_norm(slice).as_f64() * pq.sub_sq_norms()[p * PQ_CENTROIDS + j].as_f64()).sqrt();
            if (a.as_f64() - b.as_f64()).abs() > 1e-5 * scale.max(1e-12) {
                return Err(Error::Corrupt(format!("t3 entry {e} inconsistent with codebooks")));
            }
        }
        direct
    } else {
        compute_t3(&codebook, &pq)
    };

    let mut lists = Vec::with_capacity(k * n);
    for _ in 0..k * n {
        let len = u32_(&mut r)? as usize;
        if len > count {
            return Err(Error::Corrupt(format!("list length {len} exceeds N={count}")));
        }
        let mut list = PostingList {
            ids: Vec::with_capacity(len),
            codes: vec![0; len * m],
            lambdas: vec![0; len],
        };
        for _ in 0..len {
            list.ids.push(u32_(&mut r)?);
        }
        r.read_exact(&mut list.codes).map_err(eof)?;
        r.read_exact(&mut list.lambdas).map_err(eof)?;
        lists.push(list);
    }
    if (r.position() as usize) != r.get_ref().len() {
        return Err(Error::Corrupt("trailing bytes after posting lists".into()));
    }

    let index = InvertedIndex {
        codebook,
        graph,
        pq,
        clamp_lambda: flags & FLAG_CLAMPED != 0,
        lambda_quant,
        lists,
        t3,
        base_count: count,
    };
    index.validate()?;
    Ok(index)
}

fn corrupt(e: Error) -> Error {
    Error::Corrupt(e.to_string())
}

fn eof(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Truncated
    } else {
        Error::Io(e)
    }
}

fn u32_(r: &mut Cursor<&[u8]>) -> Result<u32> {
    r.read_u32::<LittleEndian>().map_err(eof)
}

fn f32_(r: &mut Cursor<&[u8]>) -> Result<f32> {
    r.read_f32::<LittleEndian>().map_err(eof)
}

fn reals<S: Scalar>(r: &mut Cursor<&[u8]>, count: usize) -> Result<Vec<S>> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(S::of(f32_(r)? as f64));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, VectorSet};
    use crate::quantizers::{train_quantizers, Quantizers, TrainParams};

    fn small() -> (VectorSet<f32>, Quantizers<f32>) {
        let base: VectorSet<f32> = gen_synthetic(1500, 8, 6, 0.1, 4).unwrap();
        let params = TrainParams {
            k: 8,
            n: 3,
            m: 2,
            iters: 4,
            seed: 1,
            clamp_lambda: true,
        };
        let q = train_quantizers(&base, &params).unwrap();
        (base, q)
    }

    #[test]
    fn roundtrip_and_size() {
        let (base, q) = small();
        let idx = InvertedIndex::build(&base, &q, 500).unwrap();
        for with_t3 in [true, false] {
            let mut buf = Vec::new();
            write_index(&idx, &mut buf, with_t3).unwrap();
            assert_eq!(
                buf.len() as u64,
                index_file_size(8, 8, 3, 2, 1500, with_t3)
            );
            let back: InvertedIndex<f32> = read_index(&buf).unwrap();
            assert_eq!(back, idx);
        }
    }

    #[test]
    fn empty_lists_roundtrip() {
        let (_, q) = small();
        let idx = InvertedIndex::empty(&q).unwrap();
        let mut buf = Vec::new();
        write_index(&idx, &mut buf, true).unwrap();
        assert_eq!(buf.len() as u64, index_file_size(8, 8, 3, 2, 0, true));
        let back: InvertedIndex<f32> = read_index(&buf).unwrap();
        assert!(back.lists().iter().all(|l| l.is_empty()));
        assert_eq!(back, idx);
    }

    #[test]
    fn corrupt_inputs() {
        let (base, q) = small();
        let idx = InvertedIndex::build(&base, &q, 500).unwrap();
        let mut buf = Vec::new();
        write_index(&idx, &mut buf, true).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_index::<f32>(&bad), Err(Error::BadMagic)));

        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(
            read_index::<f32>(&bad),
            Err(Error::UnsupportedVersion(9))
        ));

        for cut in [10, 60, buf.len() / 2, buf.len() - 1] {
            assert!(
                matches!(read_index::<f32>(&buf[..cut]), Err(Error::Truncated)),
                "cut at {cut}"
            );
        }

        let mut bad = buf.clone();
        bad.push(0);
        assert!(matches!(read_index::<f32>(&bad), Err(Error::Corrupt(_))));

        let t3_at = (40 + 4 * 8 * 8 + 8 * 8 * 3 + 4 * 256 * 8) as usize;
        let mut bad = buf.clone();
        bad[t3_at..t3_at + 4].copy_from_slice(&1e3f32.to_le_bytes());
        assert!(matches!(read_index::<f32>(&bad), Err(Error::Corrupt(m)) if m.contains("t3")));

        // Duplicate a point id: flip the first id of the first nonempty list.
        let (cell, _) = idx
            .lists()
            .iter()
            .enumerate()
            .find(|(_, l)| l.len() >= 2)
            .unwrap();
        let mut offset = index_file_size(8, 8, 3, 2, 0, true) as usize - 4 * 24;
        for l in &idx.lists()[..cell] {
            offset += 4 + l.len() * (4 + 2 + 1);
        }
        let second = idx.list(cell).ids[1];
        let mut bad = buf.clone();
        bad[offset + 4..offset + 8].copy_from_slice(&second.to_le_bytes());
        assert!(matches!(read_index::<f32>(&bad), Err(Error::Corrupt(_))));
    }
}
