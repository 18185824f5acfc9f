//! Learned candidate screening.
//!
//! A [`ScreeningModel`] holds `K` context-cluster centroids and one candidate
//! subset per cluster. A query is hard-assigned to the centroid with the largest
//! inner product and searched exhaustively inside that cluster's subset only.
//! Training ([`train`]) alternates a closed-form subset update with SGD on the
//! centroids.

mod bits;
mod objective;
mod train;

pub use bits::{BitSet, Ones};
pub use objective::{
    batch_loss_f64, centroid_gradient, centroid_gradient_f64, compute_alpha, objective_from_alpha,
    soft_assign_all, total_loss, update_subsets, AlphaMatrix, ScreeningTrainSet, SoftAssignments,
};
pub use train::{train, AlternationStats, SgdConfig, TrainConfig, TrainOutcome};

use crate::embedding::{check_dims, dot, dot_mixed, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::exact::{argmax_rows, SearchResult};

/// Trained screening predictor: centroids `{a_k}`, subsets `{s_k}` and the
/// balancing coefficient it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningModel {
    centroids: EmbeddingMatrix,
    subsets: Vec<BitSet>,
    lambda: f64,
}

impl ScreeningModel {
    pub fn new(centroids: EmbeddingMatrix, subsets: Vec<BitSet>, lambda: f64) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::InvalidArgument("screening model needs K ≥ 1 centroids".into()));
        }
        if subsets.len() != centroids.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} centroids but {} subsets",
                centroids.len(),
                subsets.len()
            )));
        }
        let n = subsets[0].len();
        if n == 0 || subsets.iter().any(|s| s.len() != n) {
            return Err(Error::ShapeMismatch("subsets must share one non-zero length N".into()));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidArgument(format!("lambda = {lambda} must lie in (0, 1)")));
        }
        Ok(Self { centroids, subsets, lambda })
    }

    /// Model whose every subset is the full candidate set (no screening).
    pub fn unscreened(centroids: EmbeddingMatrix, n: usize, lambda: f64) -> Result<Self> {
        let k = centroids.len();
        Self::new(centroids, vec![BitSet::ones(n); k], lambda)
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn n(&self) -> usize {
        self.subsets[0].len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.dim()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn centroids(&self) -> &EmbeddingMatrix {
        &self.centroids
    }

    pub fn subsets(&self) -> &[BitSet] {
        &self.subsets
    }

    pub fn subsets_mut(&mut self) -> &mut [BitSet] {
        &mut self.subsets
    }

    /// Cluster chosen at inference: `argmax_k cᵀa_k`, lowest `k` on ties.
    pub fn predict_cluster(&self, c: &[f32]) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (k, a) in self.centroids.rows().enumerate() {
            let s = dot(c, a);
            if s > best.1 {
                best = (k, s);
            }
        }
        best.0
    }

    /// Predicted subset for `c`, falling back to the full set when the
    /// assigned cluster's subset is empty.
    pub fn predict(&self, c: &[f32]) -> Prediction<'_> {
        let k = self.predict_cluster(c);
        let subset = &self.subsets[k];
        if subset.count_ones() == 0 {
            Prediction::Fallback { cluster: k, n: self.n() }
        } else {
            Prediction::Cluster { cluster: k, subset }
        }
    }

    pub fn predict_subset(&self, c: &[f32]) -> Result<Vec<usize>> {
        check_dims(self.dim(), c.len())?;
        Ok(self.predict(c).indices().collect())
    }

    pub fn screened_search(&self, c: &[f32], candidates: &EmbeddingMatrix) -> Result<SearchResult> {
        screened_search(c, self, candidates)
    }
}

/// Outcome of [`ScreeningModel::predict`].
#[derive(Debug, Clone, Copy)]
pub enum Prediction<'a> {
    Cluster { cluster: usize, subset: &'a BitSet },
    Fallback { cluster: usize, n: usize },
}

impl<'a> Prediction<'a> {
    pub fn cluster(&self) -> usize {
        match *self {
            Prediction::Cluster { cluster, .. } | Prediction::Fallback { cluster, .. } => cluster,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Prediction::Cluster { subset, .. } => subset.count_ones(),
            Prediction::Fallback { n, .. } => *n,
        }
    }

    pub fn contains(&self, j: usize) -> bool {
        match self {
            Prediction::Cluster { subset, .. } => subset.contains(j),
            Prediction::Fallback { n, .. } => j < *n,
        }
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self, Prediction::Fallback { .. })
    }

    pub fn indices(&self) -> PredictionIter<'a> {
        match *self {
            Prediction::Cluster { subset, .. } => PredictionIter::Subset(subset.iter_ones()),
            Prediction::Fallback { n, .. } => PredictionIter::Full(0..n),
        }
    }
}

pub enum PredictionIter<'a> {
    Subset(Ones<'a>),
    Full(std::ops::Range<usize>),
}

impl Iterator for PredictionIter<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        match self {
            PredictionIter::Subset(it) => it.next(),
            PredictionIter::Full(it) => it.next(),
        }
    }
}

/// Soft cluster membership `μ_k = softmax_k(cᵀa_k)`, max-shifted for stability.
pub fn soft_assign(c: &[f32], centroids: &EmbeddingMatrix) -> Result<Vec<f64>> {
    if centroids.is_empty() {
        return Err(Error::InvalidArgument("no centroids".into()));
    }
    check_dims(centroids.dim(), c.len())?;
    let flat: Vec<f64> = centroids.as_slice().iter().map(|&x| f64::from(x)).collect();
    let mut mu = vec![0.0; centroids.len()];
    softmax_into(c, &flat, centroids.dim(), &mut mu);
    Ok(mu)
}

pub(crate) fn softmax_into(c: &[f32], centroids: &[f64], dim: usize, out: &mut [f64]) {
    let mut max = f64::NEG_INFINITY;
    for (o, a) in out.iter_mut().zip(centroids.chunks_exact(dim)) {
        *o = dot_mixed(c, a);
        max = max.max(*o);
    }
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// `p_j = Σ_k μ_k · s_k[j]`.
pub fn retrieve_prob(mu: &[f64], subsets: &[BitSet], j: usize) -> Result<f64> {
    if mu.len() != subsets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} memberships for {} subsets",
            mu.len(),
            subsets.len()
        )));
    }
    let n = subsets.first().map_or(0, BitSet::len);
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, len: n });
    }
    Ok(mu.iter().zip(subsets).filter(|(_, s)| s.contains(j)).map(|(m, _)| m).sum())
}

/// Per-pair screening loss `λ·p·(1−y) + (1−p)·y`.
#[inline]
pub fn pair_loss(p: f64, y: bool, lambda: f64) -> f64 {
    if y {
        1.0 - p
    } else {
        lambda * p
    }
}

/// Predicted cluster for `c` as a list of candidate indices.
pub fn predict_subset(c: &[f32], model: &ScreeningModel) -> Result<Vec<usize>> {
    model.predict_subset(c)
}

/// Exact MIPS restricted to the predicted subset; lowest index on ties.
pub fn screened_search(
    c: &[f32],
    model: &ScreeningModel,
    candidates: &EmbeddingMatrix,
) -> Result<SearchResult> {
    candidates.ensure_searchable()?;
    if model.n() != candidates.len() {
        return Err(Error::ShapeMismatch(format!(
            "model screens {} candidates but {} were given",
            model.n(),
            candidates.len()
        )));
    }
    check_dims(candidates.dim(), c.len())?;
    check_dims(model.dim(), c.len())?;
    Ok(argmax_rows(c, candidates, model.predict(c).indices()))
}
