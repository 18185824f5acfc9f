//! Screening quality metrics, the K × λ sweep and latency benchmarking.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use rayon::prelude::*;

use crate::embedding::{check_dims, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::exact::{argmax_rows, exact_argmax, SearchResult};
use crate::screening::{screened_search, train, ScreeningModel, ScreeningTrainSet, TrainConfig};

/// Per-query wall-clock statistics in nanoseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyStats {
    pub mean_ns: f64,
    pub p50_ns: f64,
    pub p99_ns: f64,
    pub queries: usize,
    /// Screened queries whose oracle winner was inside the subset yet a
    /// different index came back. Always 0 for a correct implementation.
    pub mismatches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub speedup_ratio: f64,
    pub mean_subset_size: f64,
    /// Fraction of queries where screened search returned the oracle index.
    pub top1_agreement: f64,
    pub recall_at_1: Option<f64>,
    pub latency: Option<LatencyStats>,
    pub loss_trajectory: Vec<f64>,
}

fn check_shapes(model: &ScreeningModel, contexts: &EmbeddingMatrix, candidates: &EmbeddingMatrix) -> Result<()> {
    candidates.ensure_searchable()?;
    if contexts.is_empty() {
        return Err(Error::InvalidArgument("no evaluation contexts".into()));
    }
    if model.n() != candidates.len() {
        return Err(Error::ShapeMismatch(format!(
            "model screens {} candidates but {} were given",
            model.n(),
            candidates.len()
        )));
    }
    check_dims(candidates.dim(), contexts.dim())?;
    check_dims(model.dim(), contexts.dim())
}

/// Per-context facts shared by the metrics below.
struct QueryOutcome {
    contained: bool,
    subset_size: usize,
    agrees: bool,
}

fn outcomes(model: &ScreeningModel, contexts: &EmbeddingMatrix, candidates: &EmbeddingMatrix) -> Vec<QueryOutcome> {
    (0..contexts.len())
        .into_par_iter()
        .map(|i| {
            let c = contexts.row(i);
            let oracle = argmax_rows(c, candidates, 0..candidates.len());
            let pred = model.predict(c);
            let screened = argmax_rows(c, candidates, pred.indices());
            QueryOutcome {
                contained: pred.contains(oracle.index),
                subset_size: pred.size(),
                agrees: screened.index == oracle.index,
            }
        })
        .collect()
}

/// Fraction of contexts whose exact MIPS winner lies in the predicted subset.
/// Fallback (full-set) predictions count as containing it.
pub fn screening_accuracy(model: &ScreeningModel, contexts: &EmbeddingMatrix, candidates: &EmbeddingMatrix) -> Result<f64> {
    check_shapes(model, contexts, candidates)?;
    let hits = outcomes(model, contexts, candidates).iter().filter(|o| o.contained).count();
    Ok(hits as f64 / contexts.len() as f64)
}

/// Mean predicted-subset size; fallbacks count as `N`.
pub fn mean_subset_size(model: &ScreeningModel, contexts: &EmbeddingMatrix) -> Result<f64> {
    if contexts.is_empty() {
        return Err(Error::InvalidArgument("no evaluation contexts".into()));
    }
    check_dims(model.dim(), contexts.dim())?;
    let total: usize = (0..contexts.len()).into_par_iter().map(|i| model.predict(contexts.row(i)).size()).sum();
    Ok(total as f64 / contexts.len() as f64)
}

/// `N / mean subset size` (ratio of means).
pub fn speedup_ratio(model: &ScreeningModel, contexts: &EmbeddingMatrix) -> Result<f64> {
    Ok(model.n() as f64 / mean_subset_size(model, contexts)?)
}

/// Accuracy, speedup and top-1 agreement in one pass.
pub fn evaluate(model: &ScreeningModel, contexts: &EmbeddingMatrix, candidates: &EmbeddingMatrix) -> Result<EvalReport> {
    check_shapes(model, contexts, candidates)?;
    let out = outcomes(model, contexts, candidates);
    let m = out.len() as f64;
    for (i, o) in out.iter().enumerate() {
        if o.contained && !o.agrees {
            return Err(Error::InvalidArgument(format!(
                "screened search missed the oracle winner for context {i} although it was in the subset"
            )));
        }
    }
    let mean = out.iter().map(|o| o.subset_size).sum::<usize>() as f64 / m;
    Ok(EvalReport {
        accuracy: out.iter().filter(|o| o.contained).count() as f64 / m,
        speedup_ratio: model.n() as f64 / mean,
        mean_subset_size: mean,
        top1_agreement: out.iter().filter(|o| o.agrees).count() as f64 / m,
        recall_at_1: None,
        latency: None,
        loss_trajectory: Vec::new(),
    })
}

/// One cell of the K × λ grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub k: usize,
    pub lambda: f64,
    pub seed: u64,
    /// `Err` carries the training or evaluation failure message.
    pub outcome: std::result::Result<GridMetrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMetrics {
    pub accuracy: f64,
    pub speedup: f64,
    pub mean_subset: f64,
}

/// Trains one model per (K, λ) cell with `base` as template and evaluates it on
/// `test_contexts`. Failed cells are recorded and the sweep continues. Rows are
/// sorted by (K, λ).
pub fn grid_sweep(
    set: &ScreeningTrainSet,
    test_contexts: &EmbeddingMatrix,
    ks: &[usize],
    lambdas: &[f64],
    base: &TrainConfig,
) -> Result<Vec<GridRow>> {
    if ks.is_empty() || lambdas.is_empty() {
        return Err(Error::InvalidArgument("K and λ lists must be non-empty".into()));
    }
    let mut cells: Vec<(usize, f64)> = ks.iter().flat_map(|&k| lambdas.iter().map(move |&l| (k, l))).collect();
    cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let rows = cells
        .into_iter()
        .map(|(k, lambda)| {
            let cfg = TrainConfig { k, lambda, ..base.clone() };
            let outcome = train(set, &cfg)
                .and_then(|t| evaluate(&t.model, test_contexts, set.candidates()))
                .map(|r| GridMetrics { accuracy: r.accuracy, speedup: r.speedup_ratio, mean_subset: r.mean_subset_size })
                .map_err(|e| e.to_string());
            GridRow { k, lambda, seed: base.sgd.seed, outcome }
        })
        .collect();
    Ok(rows)
}

pub const CSV_HEADER: &str = "K,lambda,accuracy,speedup,mean_subset,seed";

/// CSV report. `comments` become leading `# ` lines; failed cells carry
/// `NaN` metrics.
pub fn grid_csv(rows: &[GridRow], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    let _ = writeln!(out, "{CSV_HEADER}");
    for r in rows {
        match &r.outcome {
            Ok(m) => {
                let _ = writeln!(out, "{},{:e},{:.6},{:.6},{:.3},{}", r.k, r.lambda, m.accuracy, m.speedup, m.mean_subset, r.seed);
            }
            Err(_) => {
                let _ = writeln!(out, "{},{:e},NaN,NaN,NaN,{}", r.k, r.lambda, r.seed);
            }
        }
    }
    out
}

/// Aligned human-readable table of the same rows.
pub fn grid_table(rows: &[GridRow]) -> String {
    let mut out = format!("{:>5} {:>10} {:>9} {:>9} {:>11}\n", "K", "lambda", "accuracy", "speedup", "mean_subset");
    for r in rows {
        match &r.outcome {
            Ok(m) => {
                let _ = writeln!(
                    out,
                    "{:>5} {:>10.1e} {:>8.2}% {:>8.2}x {:>11.1}",
                    r.k,
                    r.lambda,
                    100.0 * m.accuracy,
                    m.speedup,
                    m.mean_subset
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{:>5} {:>10.1e}   failed: {e}", r.k, r.lambda);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub enum Searcher<'a> {
    Exact,
    Screened(&'a ScreeningModel),
}

/// Times every context query single-threaded: `warmup` untimed passes over
/// all contexts, then `iters` timed passes. Screened results are checked
/// against the oracle whenever its winner is in the predicted subset.
pub fn bench_latency(
    searcher: Searcher<'_>,
    contexts: &EmbeddingMatrix,
    candidates: &EmbeddingMatrix,
    warmup: usize,
    iters: usize,
) -> Result<LatencyStats> {
    if iters == 0 {
        return Err(Error::InvalidArgument("iters must be ≥ 1".into()));
    }
    if contexts.is_empty() {
        return Err(Error::InvalidArgument("no benchmark contexts".into()));
    }
    candidates.ensure_searchable()?;
    check_dims(candidates.dim(), contexts.dim())?;
    if let Searcher::Screened(model) = searcher {
        check_shapes(model, contexts, candidates)?;
    }
    let run = |c: &[f32]| -> SearchResult {
        match searcher {
            Searcher::Exact => argmax_rows(c, candidates, 0..candidates.len()),
            Searcher::Screened(model) => argmax_rows(c, candidates, model.predict(c).indices()),
        }
    };
    for _ in 0..warmup {
        for c in contexts.rows() {
            black_box(run(black_box(c)));
        }
    }
    let mut times = Vec::with_capacity(iters * contexts.len());
    for _ in 0..iters {
        for c in contexts.rows() {
            let start = Instant::now();
            black_box(run(black_box(c)));
            times.push(start.elapsed().as_nanos() as f64);
        }
    }
    let mut mismatches = 0;
    if let Searcher::Screened(model) = searcher {
        for c in contexts.rows() {
            let oracle = exact_argmax(c, candidates)?;
            if model.predict(c).contains(oracle.index) && screened_search(c, model, candidates)?.index != oracle.index {
                mismatches += 1;
            }
        }
    }
    times.sort_by(f64::total_cmp);
    let pct = |q: f64| times[((times.len() - 1) as f64 * q).round() as usize];
    Ok(LatencyStats {
        mean_ns: times.iter().sum::<f64>() / times.len() as f64,
        p50_ns: pct(0.5),
        p99_ns: pct(0.99),
        queries: times.len(),
        mismatches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::build_labels;
    use crate::screening::BitSet;
    use crate::synth::{gen_synthetic, SyntheticSpec};

    fn data() -> (ScreeningTrainSet, EmbeddingMatrix) {
        let spec = SyntheticSpec { m_train: 300, m_test: 100, n: 80, dim: 6, topics: 5, noise_sigma: 0.3, seed: 2 };
        let d = gen_synthetic(&spec).unwrap();
        (ScreeningTrainSet::from_oracle(d.train_contexts, d.candidates).unwrap(), d.test_contexts)
    }

    fn two_centroids() -> EmbeddingMatrix {
        EmbeddingMatrix::from_flat(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], 6).unwrap()
    }

    #[test]
    fn unscreened_model_is_exact() {
        let (set, test) = data();
        let model = ScreeningModel::unscreened(two_centroids(), set.n(), 0.1).unwrap();
        let r = evaluate(&model, &test, set.candidates()).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.speedup_ratio, 1.0);
        assert_eq!(r.top1_agreement, 1.0);
    }

    #[test]
    fn half_subsets_double_speed() {
        let (set, test) = data();
        let half = BitSet::from_fn(set.n(), |j| j % 2 == 0);
        let model = ScreeningModel::new(two_centroids(), vec![half.clone(), half], 0.1).unwrap();
        assert_eq!(speedup_ratio(&model, &test).unwrap(), 2.0);
    }

    #[test]
    fn one_flipped_oracle_costs_one_percent() {
        let (set, test) = data();
        assert_eq!(test.len(), 100);
        let mut model = ScreeningModel::unscreened(two_centroids(), set.n(), 0.1).unwrap();
        let c = test.row(0);
        let oracle = exact_argmax(c, set.candidates()).unwrap().index;
        let k = model.predict_cluster(c);
        model.subsets_mut()[k].remove(oracle);
        let expected_misses = (0..test.len())
            .filter(|&i| {
                let ci = test.row(i);
                model.predict_cluster(ci) == k && exact_argmax(ci, set.candidates()).unwrap().index == oracle
            })
            .count();
        let acc = screening_accuracy(&model, &test, set.candidates()).unwrap();
        assert_eq!(acc, 1.0 - expected_misses as f64 / 100.0);
        let r = evaluate(&model, &test, set.candidates()).unwrap();
        assert!((r.speedup_ratio * r.mean_subset_size - set.n() as f64).abs() < 1e-9);
    }

    #[test]
    fn k1_model_has_full_accuracy_on_seen_labels() {
        let (set, _) = data();
        let t = train(&set, &TrainConfig::new(1, 1e-4)).unwrap();
        assert_eq!(screening_accuracy(&t.model, set.contexts(), set.candidates()).unwrap(), 1.0);
    }

    #[test]
    fn grid_singleton_matches_direct_metrics() {
        let (set, test) = data();
        let cfg = TrainConfig::new(3, 1e-3);
        let rows = grid_sweep(&set, &test, &[3], &[1e-3], &cfg).unwrap();
        assert_eq!(rows.len(), 1);
        let direct = train(&set, &cfg).unwrap().model;
        let m = rows[0].outcome.as_ref().unwrap();
        assert_eq!(m.accuracy, screening_accuracy(&direct, &test, set.candidates()).unwrap());
        assert_eq!(m.speedup, speedup_ratio(&direct, &test).unwrap());
    }

    #[test]
    fn grid_marks_failed_cells_and_sorts() {
        let (set, test) = data();
        let rows = grid_sweep(&set, &test, &[4, 1, 100_000], &[1e-3, 1e-4], &TrainConfig::new(1, 0.5)).unwrap();
        let keys: Vec<(usize, f64)> = rows.iter().map(|r| (r.k, r.lambda)).collect();
        assert_eq!(keys, vec![(1, 1e-4), (1, 1e-3), (4, 1e-4), (4, 1e-3), (100_000, 1e-4), (100_000, 1e-3)]);
        assert!(rows[..4].iter().all(|r| r.outcome.is_ok()));
        assert!(rows[4..].iter().all(|r| r.outcome.is_err()));
        // A single cluster keeps exactly the training labels, so accuracy is
        // the share of test winners that were seen during training.
        let seen: std::collections::HashSet<usize> = set.labels().iter().copied().collect();
        let test_labels = build_labels(&test, set.candidates()).unwrap();
        let covered = test_labels.iter().filter(|l| seen.contains(l)).count() as f64 / test_labels.len() as f64;
        for r in &rows[..2] {
            assert_eq!(r.outcome.as_ref().unwrap().accuracy, covered);
        }
        let csv = grid_csv(&rows, &["note".into()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# note");
        assert_eq!(lines[1], CSV_HEADER);
        assert_eq!(lines.len(), 8);
        assert!(lines[7].contains("NaN"));
        assert!(grid_sweep(&set, &test, &[], &[1e-3], &TrainConfig::new(1, 0.5)).is_err());
    }

    #[test]
    fn bench_rejects_zero_iters_and_times_queries() {
        let (set, test) = data();
        assert!(bench_latency(Searcher::Exact, &test, set.candidates(), 1, 0).is_err());
        let stats = bench_latency(Searcher::Exact, &test, set.candidates(), 0, 2).unwrap();
        assert_eq!(stats.queries, 200);
        assert!(stats.p50_ns <= stats.p99_ns);
        let t = train(&set, &TrainConfig::new(3, 1e-3)).unwrap();
        let s = bench_latency(Searcher::Screened(&t.model), &test, set.candidates(), 1, 1).unwrap();
        assert_eq!(s.mismatches, 0);
    }
}
