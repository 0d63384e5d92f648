//! Parameter-grid experiments: train, build, search, score and report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;

use crate::data::{brute_force_gt, gen_synthetic, read_ground_truth, read_vecs, GroundTruth, VecsKind, VectorSet};
use crate::error::{Error, Result};
use crate::eval::baseline::{build_ivf_baseline, search_ivf_one, IvfIndex};
use crate::eval::recall_at;
use crate::index::InvertedIndex;
use crate::quantizers::{train_quantizers, train_residual_pq, TrainParams};
use crate::scalar::{sq_l2, Scalar};
use crate::search::{candidate_ids, search_one, select_topk, QueryParams, SearchResult};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Gaussian mixture; queries are extra draws from the same mixture.
    Synthetic {
        count: usize,
        dim: usize,
        clusters: usize,
        spread: f64,
        queries: usize,
        seed: u64,
    },
    /// Vector files; the kind is taken from the extension.
    Files {
        base: PathBuf,
        queries: PathBuf,
        ground_truth: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub struct IndexVariant {
    pub k: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Leading base points used for training.
    pub train_size: usize,
    pub variants: Vec<IndexVariant>,
    pub m: usize,
    pub iters: usize,
    pub seed: u64,
    pub clamp_lambda: bool,
    pub batch: usize,
    pub w1: Vec<usize>,
    pub alpha: Vec<f64>,
    pub recall_ks: Vec<usize>,
    /// Also evaluate single-level IVFADC on the same first-level codebook.
    pub baseline: bool,
    /// Queries run untimed before each timed grid cell.
    pub warmup: usize,
    pub out_csv: Option<PathBuf>,
    pub out_table: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic {
                count: 1_000_000,
                dim: 32,
                clusters: 200,
                spread: 0.1,
                queries: 1000,
                seed: 42,
            },
            train_size: 100_000,
            variants: vec![IndexVariant { k: 1 << 10, n: 16 }],
            m: 8,
            iters: 20,
            seed: 42,
            clamp_lambda: true,
            batch: 100_000,
            w1: vec![64],
            alpha: vec![0.25],
            recall_ks: vec![1, 10, 100],
            baseline: true,
            warmup: 10,
            out_csv: None,
            out_table: None,
        }
    }
}

impl ExperimentConfig {
    /// Checks the grid before any data is touched.
    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() || self.w1.is_empty() || self.alpha.is_empty() {
            return Err(Error::param("grid needs at least one variant, w1 and alpha"));
        }
        if self.recall_ks.is_empty() || self.recall_ks.contains(&0) {
            return Err(Error::param("recall K values must be positive"));
        }
        for v in &self.variants {
            if v.n == 0 || v.n >= v.k {
                return Err(Error::param(format!("variant needs 1 <= n < k, got k={} n={}", v.k, v.n)));
            }
            if let Some(w) = self.w1.iter().find(|&&w| w == 0 || w > v.k) {
                return Err(Error::param(format!("w1={w} outside [1, k={}]", v.k)));
            }
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return Err(Error::param(format!("alpha={a} outside (0, 1]")));
        }
        if self.m == 0 || self.iters == 0 || self.batch == 0 {
            return Err(Error::param("m, iters and batch must be positive"));
        }
        if let DataSource::Synthetic { dim, .. } = self.data {
            if dim % self.m != 0 {
                return Err(Error::param(format!("m must divide the dimension: D={dim}, m={}", self.m)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    VlqAdc,
    IvfAdc,
}

impl System {
    pub fn name(self) -> &'static str {
        match self {
            System::VlqAdc => "vlq-adc",
            System::IvfAdc => "ivfadc",
        }
    }
}

/// One grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub system: System,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub w1: usize,
    /// `None` for the baseline, which has no second level.
    pub alpha: Option<f64>,
    pub w2: Option<usize>,
    /// `(K, recall@K)` pairs.
    pub recall: Vec<(usize, f64)>,
    pub mean_query_ms: f64,
    pub median_query_ms: f64,
    pub mean_scanned: f64,
}

impl ReportRow {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.recall.iter().find(|(kk, _)| *kk == k).map(|r| r.1)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    fn recall_ks(&self) -> Vec<usize> {
        self.rows
            .first()
            .map(|r| r.recall.iter().map(|p| p.0).collect())
            .unwrap_or_default()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["system", "k", "n", "m", "w1", "alpha", "w2"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend(self.recall_ks().iter().map(|k| format!("R@{k}")));
        h.extend(["mean_query_ms", "median_query_ms", "mean_scanned"].map(String::from));
        h
    }

    fn record(row: &ReportRow) -> Vec<String> {
        let mut r = vec![
            row.system.name().to_string(),
            row.k.to_string(),
            row.n.to_string(),
            row.m.to_string(),
            row.w1.to_string(),
            row.alpha.map(|a| a.to_string()).unwrap_or_else(|| "-".into()),
            row.w2.map(|w| w.to_string()).unwrap_or_else(|| "-".into()),
        ];
        r.extend(row.recall.iter().map(|(_, v)| format!("{v:.4}")));
        r.push(format!("{:.4}", row.mean_query_ms));
        r.push(format!("{:.4}", row.median_query_ms));
        r.push(format!("{:.1}", row.mean_scanned));
        r
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.header())?;
        for row in &self.rows {
            w.write_record(Self::record(row))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Fixed-width text table.
    pub fn to_table(&self) -> String {
        let header = self.header();
        let records: Vec<Vec<String>> = self.rows.iter().map(Self::record).collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                records
                    .iter()
                    .map(|r| r[c].len())
                    .chain([header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let line = |cells: &[String], out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            let _ = writeln!(out, "{}", parts.join("  "));
        };
        line(&header, &mut out);
        let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        for r in &records {
            line(r, &mut out);
        }
        out
    }
}

/// Loads or generates the data, then runs [`run_grid`] and writes any
/// requested report files.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let (base, queries, gt) = load_data(config)?;
    let report = run_grid(&base, &queries, &gt, config)?;
    if let Some(p) = &config.out_csv {
        report.write_csv(p)?;
    }
    if let Some(p) = &config.out_table {
        std::fs::write(p, report.to_table())?;
    }
    Ok(report)
}

fn load_data(config: &ExperimentConfig) -> Result<(VectorSet<f32>, VectorSet<f32>, GroundTruth)> {
    let gt_k = |base: &VectorSet<f32>| 100.min(base.len());
    match &config.data {
        DataSource::Synthetic {
            count,
            dim,
            clusters,
            spread,
            queries,
            seed,
        } => {
            let mut base: VectorSet<f32> = gen_synthetic(count + queries, *dim, *clusters, *spread, *seed)?;
            let queries = base.split_off(*count);
            let gt = brute_force_gt(&base, &queries, gt_k(&base))?;
            Ok((base, queries, gt))
        }
        DataSource::Files {
            base,
            queries,
            ground_truth,
        } => {
            let kind = |p: &Path| {
                VecsKind::from_path(p).ok_or_else(|| {
                    Error::param(format!("cannot infer vector format of {}", p.display()))
                })
            };
            let b: VectorSet<f32> = read_vecs(base, kind(base)?)?;
            let q: VectorSet<f32> = read_vecs(queries, kind(queries)?)?;
            if !b.dim().is_multiple_of(config.m) {
                return Err(Error::param(format!(
                    "m must divide the dimension: D={}, m={}",
                    b.dim(),
                    config.m
                )));
            }
            let gt = match ground_truth {
                Some(p) => read_ground_truth(p)?,
                None => brute_force_gt(&b, &q, gt_k(&b))?,
            };
            Ok((b, q, gt))
        }
    }
}

fn timed<S, F>(queries: &VectorSet<S>, warmup: usize, mut f: F) -> Result<(Vec<SearchResult<S>>, f64, f64)>
where
    S: Scalar,
    F: FnMut(&[S]) -> Result<SearchResult<S>>,
{
    for y in queries.rows().take(warmup) {
        f(y)?;
    }
    let mut results = Vec::with_capacity(queries.len());
    let mut times = Vec::with_capacity(queries.len());
    for y in queries.rows() {
        let t = Instant::now();
        let r = f(y)?;
        times.push(t.elapsed().as_secs_f64() * 1e3);
        results.push(r);
    }
    let mean = times.iter().sum::<f64>() / times.len().max(1) as f64;
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if times.is_empty() {
        0.0
    } else if times.len() % 2 == 1 {
        times[times.len() / 2]
    } else {
        0.5 * (times[times.len() / 2 - 1] + times[times.len() / 2])
    };
    Ok((results, mean, median))
}

fn recalls<S>(results: &[SearchResult<S>], gt: &GroundTruth, ks: &[usize]) -> Result<Vec<(usize, f64)>> {
    ks.iter().map(|&k| Ok((k, recall_at(results, gt, k)?))).collect()
}

fn mean_scanned<S>(results: &[SearchResult<S>]) -> f64 {
    results.iter().map(|r| r.scanned as f64).sum::<f64>() / results.len().max(1) as f64
}

/// Runs every grid cell sequentially on in-memory data.
pub fn run_grid<S: Scalar>(
    base: &VectorSet<S>,
    queries: &VectorSet<S>,
    gt: &GroundTruth,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    config.validate()?;
    if base.dim() != queries.dim() {
        return Err(Error::DimensionMismatch {
            expected: base.dim(),
            found: queries.dim(),
        });
    }
    if gt.num_queries() != queries.len() {
        return Err(Error::LengthMismatch(format!(
            "{} ground-truth rows for {} queries",
            gt.num_queries(),
            queries.len()
        )));
    }
    let train = base.head(config.train_size);
    let mut rows = Vec::new();
    for v in &config.variants {
        let params = TrainParams {
            k: v.k,
            n: v.n,
            m: config.m,
            iters: config.iters,
            seed: config.seed,
            clamp_lambda: config.clamp_lambda,
        };
        let quantizers = train_quantizers(&train, &params)?;
        let index = InvertedIndex::build(base, &quantizers, config.batch)?;
        rows.extend(evaluate_index(
            &index,
            queries,
            gt,
            &config.w1,
            &config.alpha,
            &config.recall_ks,
            config.warmup,
        )?);
        if config.baseline {
            let pq = train_residual_pq(
                &train,
                &quantizers.codebook,
                config.m,
                config.iters,
                config.seed.wrapping_add(1),
            )?;
            let ivf = build_ivf_baseline(base, &quantizers.codebook, &pq)?;
            rows.extend(evaluate_baseline(
                &ivf,
                queries,
                gt,
                &config.w1,
                &config.recall_ks,
                config.warmup,
            )?);
        }
    }
    Ok(ExperimentReport { rows })
}

/// Scores a built index over a `w1 x alpha` grid.
pub fn evaluate_index<S: Scalar>(
    index: &InvertedIndex<S>,
    queries: &VectorSet<S>,
    gt: &GroundTruth,
    w1s: &[usize],
    alphas: &[f64],
    recall_ks: &[usize],
    warmup: usize,
) -> Result<Vec<ReportRow>> {
    let max_k = recall_ks.iter().copied().max().unwrap_or(1);
    let mut rows = Vec::with_capacity(w1s.len() * alphas.len());
    for &w1 in w1s {
        for &alpha in alphas {
            let qp = QueryParams {
                w1,
                alpha,
                k: max_k,
                max_codes: None,
            };
            qp.validate(index.k())?;
            let (results, mean, median) = timed(queries, warmup, |y| search_one(index, y, &qp))?;
            rows.push(ReportRow {
                system: System::VlqAdc,
                k: index.k(),
                n: index.n(),
                m: index.m(),
                w1,
                alpha: Some(alpha),
                w2: Some(qp.w2(index.n())),
                recall: recalls(&results, gt, recall_ks)?,
                mean_query_ms: mean,
                median_query_ms: median,
                mean_scanned: mean_scanned(&results),
            });
        }
    }
    Ok(rows)
}

/// Scores the IVFADC baseline for each number of visited regions `w`.
/// Rows echo `n = 0` and `m` from the baseline's PQ.
pub fn evaluate_baseline<S: Scalar>(
    ivf: &IvfIndex<S>,
    queries: &VectorSet<S>,
    gt: &GroundTruth,
    ws: &[usize],
    recall_ks: &[usize],
    warmup: usize,
) -> Result<Vec<ReportRow>> {
    let k = ivf.codebook.k();
    if queries.dim() != ivf.codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: ivf.codebook.dim(),
            found: queries.dim(),
        });
    }
    let max_k = recall_ks.iter().copied().max().unwrap_or(1);
    let mut rows = Vec::with_capacity(ws.len());
    for &w in ws {
        if w == 0 || w > k {
            return Err(Error::param(format!("w must be in [1, k={k}], got {w}")));
        }
        let (results, mean, median) = timed(queries, warmup, |y| Ok(search_ivf_one(ivf, y, w, max_k)))?;
        rows.push(ReportRow {
            system: System::IvfAdc,
            k,
            n: 0,
            m: ivf.pq.m(),
            w1: w,
            alpha: None,
            w2: None,
            recall: recalls(&results, gt, recall_ks)?,
            mean_query_ms: mean,
            median_query_ms: median,
            mean_scanned: mean_scanned(&results),
        });
    }
    Ok(rows)
}

/// Traverses like [`search_one`] but re-ranks the candidates by exact
/// distance to the original vectors.
pub fn exact_rerank_search<S: Scalar>(
    index: &InvertedIndex<S>,
    base: &VectorSet<S>,
    queries: &VectorSet<S>,
    params: &QueryParams,
) -> Result<Vec<SearchResult<S>>> {
    if base.len() != index.base_count() {
        return Err(Error::LengthMismatch(format!(
            "index holds {} points, base has {}",
            index.base_count(),
            base.len()
        )));
    }
    queries
        .rows()
        .map(|y| {
            let cands = candidate_ids(index, y, params)?
                .into_iter()
                .map(|id| (id, sq_l2(y, base.row(id as usize))))
                .collect();
            Ok(select_topk(cands, params.k))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            data: DataSource::Synthetic {
                count: 4000,
                dim: 8,
                clusters: 10,
                spread: 0.05,
                queries: 30,
                seed: 3,
            },
            train_size: 4000,
            variants: vec![IndexVariant { k: 16, n: 4 }],
            m: 4,
            iters: 5,
            w1: vec![4],
            alpha: vec![0.5],
            warmup: 2,
            ..Default::default()
        }
    }

    #[test]
    fn single_cell_grid() {
        let report = run_experiment(&small_config()).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[0].system, System::VlqAdc);
        assert_eq!(report.rows[1].system, System::IvfAdc);
        let r = &report.rows[0];
        assert!(r.recall_at(1).unwrap() <= r.recall_at(10).unwrap());
        assert!(r.recall_at(10).unwrap() <= r.recall_at(100).unwrap());
        let table = report.to_table();
        assert!(table.contains("R@10") && table.contains("ivfadc"));
    }

    #[test]
    fn invalid_grids_rejected() {
        let mut c = small_config();
        c.w1 = vec![];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.w1 = vec![17];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.alpha = vec![1.5];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.m = 3;
        assert!(c.validate().unwrap_err().to_string().contains("m must divide"));
    }

    #[test]
    fn csv_output() {
        let mut c = small_config();
        let dir = tempfile::tempdir().unwrap();
        c.out_csv = Some(dir.path().join("r.csv"));
        c.out_table = Some(dir.path().join("r.txt"));
        run_experiment(&c).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("system,k,n,m,w1,alpha,w2,R@1,R@10,R@100"));
        assert_eq!(lines.count(), 2);
        assert!(dir.path().join("r.txt").exists());
    }
}
