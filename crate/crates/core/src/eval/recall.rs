use crate::data::GroundTruth;
use crate::error::{Error, Result};
use crate::search::SearchResult;

/// Fraction of queries whose true nearest neighbor is among the first `k`
/// returned ids.
pub fn recall_at<S>(results: &[SearchResult<S>], gt: &GroundTruth, k: usize) -> Result<f64> {
    if results.len() != gt.num_queries() {
        return Err(Error::LengthMismatch(format!(
            "{} results for {} ground-truth queries",
            results.len(),
            gt.num_queries()
        )));
    }
    if results.is_empty() {
        return Ok(0.0);
    }
    let hits = results
        .iter()
        .enumerate()
        .filter(|(q, r)| r.ids.iter().take(k).any(|&id| id == gt.nearest(*q)))
        .count();
    Ok(hits as f64 / results.len() as f64)
}
