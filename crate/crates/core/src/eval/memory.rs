use std::fmt;

use crate::quantizers::PQ_CENTROIDS;

/// Index memory footprint in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryReport {
    /// 4-byte point ids.
    pub ids_bytes: u64,
    /// `m`-byte PQ codes.
    pub codes_bytes: u64,
    /// One byte of quantized lambda per point.
    pub lambda_bytes: u64,
    /// Codebook, graph (id + length per edge) and the t3 lookup table.
    pub structure_bytes: u64,
    pub total_bytes: u64,
}

pub fn memory_report(count: u64, dim: u64, k: u64, n: u64, m: u64) -> MemoryReport {
    let ids_bytes = 4 * count;
    let codes_bytes = m * count;
    let lambda_bytes = count;
    let structure_bytes = 4 * k * (dim + 2 * n + m * PQ_CENTROIDS as u64);
    MemoryReport {
        ids_bytes,
        codes_bytes,
        lambda_bytes,
        structure_bytes,
        total_bytes: ids_bytes + codes_bytes + lambda_bytes + structure_bytes,
    }
}

/// Bytes for the n-NN graph alone: one 32-bit id and one 32-bit length per edge.
pub fn graph_overhead_bytes(k: u64, n: u64) -> u64 {
    k * n * 8
}

impl fmt::Display for MemoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let gb = |b: u64| b as f64 / 1e9;
        writeln!(f, "ids:       {:>16} B ({:.3} GB)", self.ids_bytes, gb(self.ids_bytes))?;
        writeln!(f, "codes:     {:>16} B ({:.3} GB)", self.codes_bytes, gb(self.codes_bytes))?;
        writeln!(f, "lambda:    {:>16} B ({:.3} GB)", self.lambda_bytes, gb(self.lambda_bytes))?;
        writeln!(
            f,
            "structure: {:>16} B ({:.3} GB)",
            self.structure_bytes,
            gb(self.structure_bytes)
        )?;
        write!(f, "total:     {:>16} B ({:.3} GB)", self.total_bytes, gb(self.total_bytes))
    }
}
