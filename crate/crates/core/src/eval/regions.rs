use std::fmt;

use crate::index::InvertedIndex;
use crate::scalar::Scalar;

pub const BUCKET_LABELS: [&str; 5] = ["0", "1-100", "101-300", "301-500", ">500"];

/// Occupancy histogram of the second-level regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionStats {
    pub buckets: [usize; 5],
    pub total_regions: usize,
    /// Sum of all region sizes.
    pub total_points: usize,
    pub max_occupancy: usize,
}

impl RegionStats {
    pub fn fractions(&self) -> [f64; 5] {
        let t = self.total_regions.max(1) as f64;
        self.buckets.map(|b| b as f64 / t)
    }
}

fn bucket(len: usize) -> usize {
    match len {
        0 => 0,
        1..=100 => 1,
        101..=300 => 2,
        301..=500 => 3,
        _ => 4,
    }
}

pub fn region_histogram_from_lengths(lengths: impl IntoIterator<Item = usize>) -> RegionStats {
    let mut stats = RegionStats {
        buckets: [0; 5],
        total_regions: 0,
        total_points: 0,
        max_occupancy: 0,
    };
    for len in lengths {
        stats.buckets[bucket(len)] += 1;
        stats.total_regions += 1;
        stats.total_points += len;
        stats.max_occupancy = stats.max_occupancy.max(len);
    }
    stats
}

pub fn region_histogram<S: Scalar>(index: &InvertedIndex<S>) -> RegionStats {
    region_histogram_from_lengths(index.lists().iter().map(|l| l.len()))
}

impl fmt::Display for RegionStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "regions: {} (points {})", self.total_regions, self.total_points)?;
        for (label, (count, frac)) in BUCKET_LABELS
            .iter()
            .zip(self.buckets.iter().zip(self.fractions()))
        {
            writeln!(f, "  {label:>8}: {count:>8} ({:6.2}%)", frac * 100.0)?;
        }
        write!(f, "  max occupancy: {}", self.max_occupancy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_cell_per_bucket() {
        let s = region_histogram_from_lengths([0, 50, 200, 400, 600]);
        assert_eq!(s.buckets, [1, 1, 1, 1, 1]);
        assert_eq!(s.total_points, 1250);
    }

    #[test]
    fn boundaries() {
        let s = region_histogram_from_lengths([1, 100, 101, 300, 301, 500, 501]);
        assert_eq!(s.buckets, [0, 2, 2, 2, 1]);
    }

    #[test]
    fn all_empty() {
        let s = region_histogram_from_lengths(std::iter::repeat_n(0, 12));
        assert_eq!(s.buckets, [12, 0, 0, 0, 0]);
        assert_eq!(s.buckets.iter().sum::<usize>(), s.total_regions);
    }
}
