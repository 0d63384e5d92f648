//! Evaluation: recall, region occupancy, memory accounting, the single-level
//! IVFADC baseline and the experiment driver.

mod baseline;
mod experiment;
mod memory;
mod recall;
mod regions;

pub use baseline::{build_ivf_baseline, search_ivf_baseline, IvfIndex, IvfList};
pub use experiment::{
    evaluate_baseline, evaluate_index, exact_rerank_search, run_experiment, run_grid, DataSource, ExperimentConfig, ExperimentReport,
    IndexVariant, ReportRow, System,
};
pub use memory::{graph_overhead_bytes, memory_report, MemoryReport};
pub use recall::recall_at;
pub use regions::{region_histogram, region_histogram_from_lengths, RegionStats, BUCKET_LABELS};
