//! Alternating minimization: closed-form subset step, then SGD on centroids.

use rand::seq::SliceRandom;

use super::objective::{centroids_f64, compute_alpha, fast_loss, soft_assign_all, update_subsets};
use super::{centroid_gradient_f64, BitSet, ScreeningModel, ScreeningTrainSet};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::kmeans::{spherical_kmeans, KMeansConfig};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub epochs_per_alternation: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { learning_rate: 0.05, epochs_per_alternation: 1, batch_size: 256, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub lambda: f64,
    /// Number of alternations `T`.
    pub alternations: usize,
    pub sgd: SgdConfig,
    pub kmeans_max_iters: usize,
    pub kmeans_tol: f64,
}

impl TrainConfig {
    pub fn new(k: usize, lambda: f64) -> Self {
        Self { k, lambda, alternations: 10, sgd: SgdConfig::default(), kmeans_max_iters: 50, kmeans_tol: 1e-4 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sgd.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("K must be ≥ 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidArgument(format!("lambda = {} must lie in (0, 1)", self.lambda)));
        }
        if self.alternations == 0 {
            return Err(Error::InvalidArgument("T must be ≥ 1".into()));
        }
        if !(self.sgd.learning_rate > 0.0) || self.sgd.batch_size == 0 {
            return Err(Error::InvalidArgument("learning rate must be > 0 and batch size ≥ 1".into()));
        }
        Ok(())
    }
}

/// Loss bookkeeping for one alternation.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternationStats {
    pub alternation: usize,
    pub loss_before_subsets: f64,
    pub loss_after_subsets: f64,
    pub loss_after_sgd: f64,
    pub mean_subset_size: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest loss observed right after a subset step.
    pub model: ScreeningModel,
    pub trajectory: Vec<AlternationStats>,
    pub best_alternation: usize,
    pub best_loss: f64,
}

impl TrainOutcome {
    /// Loss after each subset step, in order.
    pub fn subset_losses(&self) -> Vec<f64> {
        self.trajectory.iter().map(|s| s.loss_after_subsets).collect()
    }
}

fn round_to_f32(v: &mut [f64]) {
    for x in v {
        *x = f64::from(*x as f32);
    }
}

/// Trains a screening model on oracle-labelled contexts.
///
/// Centroids start from spherical k-means on the contexts and subsets from all
/// zeros. Each alternation replaces the subsets with the exact minimizer for
/// the current centroids, then runs mini-batch SGD on the centroids. Everything
/// is deterministic given `cfg.sgd.seed`.
pub fn train(set: &ScreeningTrainSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let m = set.m();
    let n = set.n();
    if m < cfg.k {
        return Err(Error::InvalidArgument(format!("M = {m} contexts is fewer than K = {}", cfg.k)));
    }
    let contexts = set.contexts();
    let labels = set.labels();
    let dim = contexts.dim();
    let k = cfg.k;

    let km = spherical_kmeans(
        contexts,
        &KMeansConfig { k, max_iters: cfg.kmeans_max_iters, seed: cfg.sgd.seed, tol: cfg.kmeans_tol },
    )?;
    let mut centroids = centroids_f64(&km.centroids);
    let mut subsets = vec![BitSet::zeros(n); k];

    let mut trajectory = Vec::with_capacity(cfg.alternations);
    let mut best: Option<(f64, usize, Vec<f64>, Vec<BitSet>)> = None;
    let mut order: Vec<usize> = (0..m).collect();

    for t in 0..cfg.alternations {
        let mu = soft_assign_all(contexts, &centroids, k);
        let loss_before_subsets = fast_loss(&mu, &subsets, labels, cfg.lambda);
        let alpha = compute_alpha(&mu, labels, n, cfg.lambda)?;
        subsets = update_subsets(&alpha);
        let loss_after_subsets = fast_loss(&mu, &subsets, labels, cfg.lambda);
        if best.as_ref().map_or(true, |b| loss_after_subsets < b.0) {
            best = Some((loss_after_subsets, t, centroids.clone(), subsets.clone()));
        }

        for epoch in 0..cfg.sgd.epochs_per_alternation {
            let mut shuffle = rng::stream(cfg.sgd.seed, ((t as u64) << 32) | epoch as u64);
            order.shuffle(&mut shuffle);
            for batch in order.chunks(cfg.sgd.batch_size) {
                let grad = centroid_gradient_f64(&centroids, &subsets, cfg.lambda, contexts, labels, batch);
                let step = cfg.sgd.learning_rate / batch.len() as f64;
                for (a, g) in centroids.iter_mut().zip(&grad) {
                    *a -= step * g;
                }
            }
        }
        round_to_f32(&mut centroids);
        if let Some(bad) = centroids.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        let loss_after_sgd = if cfg.sgd.epochs_per_alternation == 0 {
            loss_after_subsets
        } else {
            fast_loss(&soft_assign_all(contexts, &centroids, k), &subsets, labels, cfg.lambda)
        };
        let mean_subset_size = subsets.iter().map(|s| s.count_ones() as f64).sum::<f64>() / k as f64;
        trajectory.push(AlternationStats {
            alternation: t,
            loss_before_subsets,
            loss_after_subsets,
            loss_after_sgd,
            mean_subset_size,
        });
    }

    let (best_loss, best_alternation, cents, subsets) = best.expect("at least one alternation");
    let centroids = EmbeddingMatrix::from_flat(cents.iter().map(|&x| x as f32).collect(), dim)?;
    Ok(TrainOutcome {
        model: ScreeningModel::new(centroids, subsets, cfg.lambda)?,
        trajectory,
        best_alternation,
        best_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screening::total_loss;
    use crate::synth::{gen_synthetic, SyntheticSpec};
    use approx::assert_relative_eq;

    fn small_set(seed: u64) -> ScreeningTrainSet {
        let spec = SyntheticSpec { m_train: 400, m_test: 10, n: 120, dim: 8, topics: 6, noise_sigma: 0.3, seed };
        let data = gen_synthetic(&spec).unwrap();
        ScreeningTrainSet::from_oracle(data.train_contexts, data.candidates).unwrap()
    }

    #[test]
    fn single_closed_form_step() {
        let set = small_set(1);
        let mut cfg = TrainConfig::new(4, 1e-3);
        cfg.alternations = 1;
        cfg.sgd.epochs_per_alternation = 0;
        let out = train(&set, &cfg).unwrap();
        let s = &out.trajectory[0];
        assert_eq!(s.loss_before_subsets, set.m() as f64);
        assert!(s.loss_after_subsets <= s.loss_before_subsets);
        assert_relative_eq!(total_loss(&out.model, &set).unwrap(), out.best_loss, max_relative = 1e-9);
    }

    #[test]
    fn k1_subset_is_label_set() {
        let set = small_set(2);
        let out = train(&set, &TrainConfig::new(1, 1e-6)).unwrap();
        let mut labels = set.labels().to_vec();
        labels.sort_unstable();
        labels.dedup();
        assert_eq!(out.model.subsets()[0].iter_ones().collect::<Vec<_>>(), labels);
    }

    #[test]
    fn subset_steps_never_increase_loss() {
        let set = small_set(3);
        let out = train(&set, &TrainConfig::new(5, 1e-3)).unwrap();
        for s in &out.trajectory {
            assert!(s.loss_after_subsets <= s.loss_before_subsets, "{s:?}");
        }
        let best = out.subset_losses().into_iter().fold(f64::INFINITY, f64::min);
        assert_eq!(best, out.best_loss);
    }

    #[test]
    fn training_is_deterministic() {
        let set = small_set(4);
        let cfg = TrainConfig::new(3, 1e-2).with_seed(9);
        let a = train(&set, &cfg).unwrap();
        let b = train(&set, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.trajectory, b.trajectory);
    }

    #[test]
    fn rejects_bad_configs() {
        let set = small_set(5);
        assert!(train(&set, &TrainConfig::new(0, 0.1)).is_err());
        assert!(train(&set, &TrainConfig::new(500, 0.1)).is_err());
        assert!(train(&set, &TrainConfig::new(2, 1.5)).is_err());
        let mut cfg = TrainConfig::new(2, 0.1);
        cfg.alternations = 0;
        assert!(train(&set, &cfg).is_err());
    }
}
