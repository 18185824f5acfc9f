//! The screening objective `L = Σ_i Σ_j l_ij`, its closed-form subset
//! minimizer and the centroid gradient.

use rayon::prelude::*;

use super::{pair_loss, softmax_into, BitSet, ScreeningModel};
use crate::embedding::{check_dims, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::exact::build_labels;

/// Contexts, candidates and the oracle best-candidate label of every context.
#[derive(Debug, Clone)]
pub struct ScreeningTrainSet {
    contexts: EmbeddingMatrix,
    candidates: EmbeddingMatrix,
    labels: Vec<usize>,
}

impl ScreeningTrainSet {
    /// Labels every context with its exact MIPS winner.
    pub fn from_oracle(contexts: EmbeddingMatrix, candidates: EmbeddingMatrix) -> Result<Self> {
        let labels = build_labels(&contexts, &candidates)?;
        Self::new(contexts, candidates, labels)
    }

    /// Uses precomputed labels. Only ranges are checked here; use
    /// [`verify_labels`](Self::verify_labels) to compare against the oracle.
    pub fn new(contexts: EmbeddingMatrix, candidates: EmbeddingMatrix, labels: Vec<usize>) -> Result<Self> {
        check_dims(candidates.dim(), contexts.dim())?;
        if contexts.is_empty() {
            return Err(Error::InvalidArgument("training set has no contexts".into()));
        }
        candidates.ensure_searchable()?;
        if labels.len() != contexts.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} contexts",
                labels.len(),
                contexts.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= candidates.len()) {
            return Err(Error::IndexOutOfRange { index: bad, len: candidates.len() });
        }
        Ok(Self { contexts, candidates, labels })
    }

    /// Checks that every label is the exact argmax for its context.
    pub fn verify_labels(&self) -> Result<()> {
        let oracle = build_labels(&self.contexts, &self.candidates)?;
        match oracle.iter().zip(&self.labels).position(|(a, b)| a != b) {
            None => Ok(()),
            Some(i) => Err(Error::InvalidArgument(format!(
                "label of context {i} is {} but the exact argmax is {}",
                self.labels[i], oracle[i]
            ))),
        }
    }

    pub fn contexts(&self) -> &EmbeddingMatrix {
        &self.contexts
    }

    pub fn candidates(&self) -> &EmbeddingMatrix {
        &self.candidates
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn m(&self) -> usize {
        self.contexts.len()
    }

    pub fn n(&self) -> usize {
        self.candidates.len()
    }
}

/// Row-major `M × K` matrix of soft memberships `μ_ik`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignments {
    k: usize,
    data: Vec<f64>,
}

impl SoftAssignments {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn from_rows(k: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 || data.len() % k != 0 {
            return Err(Error::ShapeMismatch("membership buffer is not M × K".into()));
        }
        Ok(Self { k, data })
    }
}

/// `μ` for every context. `centroids` is a flat `K × dim` buffer.
pub fn soft_assign_all(contexts: &EmbeddingMatrix, centroids: &[f64], k: usize) -> SoftAssignments {
    let dim = contexts.dim();
    debug_assert_eq!(centroids.len(), k * dim);
    let mut data = vec![0.0; contexts.len() * k];
    data.par_chunks_mut(k)
        .enumerate()
        .for_each(|(i, row)| softmax_into(contexts.row(i), centroids, dim, row));
    SoftAssignments { k, data }
}

pub(crate) fn centroids_f64(m: &EmbeddingMatrix) -> Vec<f64> {
    m.as_slice().iter().map(|&x| f64::from(x)).collect()
}

fn check_model(model: &ScreeningModel, set: &ScreeningTrainSet) -> Result<()> {
    if model.n() != set.n() {
        return Err(Error::ShapeMismatch(format!(
            "model has N = {} but the training set has {} candidates",
            model.n(),
            set.n()
        )));
    }
    check_dims(model.dim(), set.contexts.dim())
}

/// `L = Σ_i Σ_j l_ij` evaluated pair by pair.
pub fn total_loss(model: &ScreeningModel, set: &ScreeningTrainSet) -> Result<f64> {
    check_model(model, set)?;
    let mu = soft_assign_all(&set.contexts, &centroids_f64(model.centroids()), model.k());
    Ok(pairwise_loss(&mu, model.subsets(), &set.labels, model.lambda()))
}

fn pairwise_loss(mu: &SoftAssignments, subsets: &[BitSet], labels: &[usize], lambda: f64) -> f64 {
    let n = subsets[0].len();
    let per_context: Vec<f64> = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let row = mu.row(i);
            let mut acc = 0.0;
            for j in 0..n {
                let p: f64 = row.iter().zip(subsets).filter(|(_, s)| s.contains(j)).map(|(m, _)| m).sum();
                acc += pair_loss(p, labels[i] == j, lambda);
            }
            acc
        })
        .collect();
    per_context.iter().sum()
}

/// Per-context closed form `l_i = 1 + Σ_k μ_ik·[λ(|s_k| − s_k[y_i]) − s_k[y_i]]`,
/// summed with Neumaier compensation.
pub(crate) fn fast_loss(mu: &SoftAssignments, subsets: &[BitSet], labels: &[usize], lambda: f64) -> f64 {
    let sizes: Vec<f64> = subsets.iter().map(|s| s.count_ones() as f64).collect();
    let per_context: Vec<f64> = (0..mu.len())
        .into_par_iter()
        .map(|i| {
            let y = labels[i];
            let mut acc = 1.0;
            for ((m, s), size) in mu.row(i).iter().zip(subsets).zip(&sizes) {
                let hit = if s.contains(y) { 1.0 } else { 0.0 };
                acc += m * (lambda * (size - hit) - hit);
            }
            acc
        })
        .collect();
    neumaier_sum(&per_context)
}

fn neumaier_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Row-major `K × N` matrix of subset coefficients `α_kj`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatrix {
    n: usize,
    data: Vec<f64>,
}

impl AlphaMatrix {
    pub fn k(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.data[k * self.n + j]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.n..(k + 1) * self.n]
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || data.is_empty() || data.len() % n != 0 {
            return Err(Error::ShapeMismatch("alpha buffer is not K × N".into()));
        }
        Ok(Self { n, data })
    }
}

/// `α_kj = Σ_i μ_ik·(λ − (λ+1)·y_ij)`, accumulated as
/// `λ·Σ_i μ_ik − (λ+1)·Σ_{i: y_i = j} μ_ik` in context order.
pub fn compute_alpha(mu: &SoftAssignments, labels: &[usize], n: usize, lambda: f64) -> Result<AlphaMatrix> {
    if labels.len() != mu.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} membership rows",
            labels.len(),
            mu.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("N must be ≥ 1".into()));
    }
    let k = mu.k();
    let mut mass = vec![0.0f64; k];
    let mut label_mass = vec![0.0f64; k * n];
    for (i, &y) in labels.iter().enumerate() {
        if y >= n {
            return Err(Error::IndexOutOfRange { index: y, len: n });
        }
        for (c, &m) in mu.row(i).iter().enumerate() {
            mass[c] += m;
            label_mass[c * n + y] += m;
        }
    }
    let data = label_mass
        .chunks_exact(n)
        .zip(&mass)
        .flat_map(|(row, &total)| row.iter().map(move |&lm| lambda * total - (lambda + 1.0) * lm))
        .collect();
    Ok(AlphaMatrix { n, data })
}

/// Exact minimizer of `L` over binary subsets: `s_k[j] = 1` iff `α_kj ≤ 0`.
pub fn update_subsets(alpha: &AlphaMatrix) -> Vec<BitSet> {
    (0..alpha.k())
        .map(|k| {
            let row = alpha.row(k);
            BitSet::from_fn(alpha.n, |j| row[j] <= 0.0)
        })
        .collect()
}

/// `L = Σ_k Σ_j α_kj·s_k[j] + Σ_i Σ_j y_ij` (one label per context, so the
/// second term is `M`).
pub fn objective_from_alpha(alpha: &AlphaMatrix, subsets: &[BitSet], m: usize) -> Result<f64> {
    if subsets.len() != alpha.k() || subsets.iter().any(|s| s.len() != alpha.n) {
        return Err(Error::ShapeMismatch("subsets do not match alpha".into()));
    }
    let mut acc = 0.0;
    for (k, s) in subsets.iter().enumerate() {
        for j in s.iter_ones() {
            acc += alpha.get(k, j);
        }
    }
    Ok(acc + m as f64)
}

/// `∂L/∂a_k` of the loss summed over the given contexts, with subsets fixed.
/// Returned row-major `K × D`.
pub fn centroid_gradient(model: &ScreeningModel, contexts: &EmbeddingMatrix, labels: &[usize]) -> Result<Vec<f64>> {
    check_dims(model.dim(), contexts.dim())?;
    if contexts.is_empty() || labels.len() != contexts.len() {
        return Err(Error::ShapeMismatch("batch must be non-empty with one label per context".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= model.n()) {
        return Err(Error::IndexOutOfRange { index: bad, len: model.n() });
    }
    let idx: Vec<usize> = (0..contexts.len()).collect();
    Ok(centroid_gradient_f64(
        &centroids_f64(model.centroids()),
        model.subsets(),
        model.lambda(),
        contexts,
        labels,
        &idx,
    ))
}

/// Gradient over the contexts listed in `batch`. Using
/// `l_i = 1 + Σ_k μ_ik g_ik` with `g_ik = λ(|s_k| − s_k[y_i]) − s_k[y_i]`,
/// `∂l_i/∂a_k = μ_ik (g_ik − Σ_l μ_il g_il) c_i`.
pub fn centroid_gradient_f64(
    centroids: &[f64],
    subsets: &[BitSet],
    lambda: f64,
    contexts: &EmbeddingMatrix,
    labels: &[usize],
    batch: &[usize],
) -> Vec<f64> {
    let k = subsets.len();
    let dim = contexts.dim();
    let sizes: Vec<f64> = subsets.iter().map(|s| s.count_ones() as f64).collect();
    let mut grad = vec![0.0f64; k * dim];
    let mut mu = vec![0.0f64; k];
    let mut g = vec![0.0f64; k];
    for &i in batch {
        let c = contexts.row(i);
        softmax_into(c, centroids, dim, &mut mu);
        let y = labels[i];
        let mut mean = 0.0;
        for ((gk, s), size) in g.iter_mut().zip(subsets).zip(&sizes) {
            let hit = if s.contains(y) { 1.0 } else { 0.0 };
            *gk = lambda * (size - hit) - hit;
        }
        for (m, gk) in mu.iter().zip(&g) {
            mean += m * gk;
        }
        for (kk, row) in grad.chunks_exact_mut(dim).enumerate() {
            let w = mu[kk] * (g[kk] - mean);
            if w != 0.0 {
                for (r, &x) in row.iter_mut().zip(c) {
                    *r += w * f64::from(x);
                }
            }
        }
    }
    grad
}

/// Loss summed over `batch`, evaluated pair by pair from a flat `K × D`
/// buffer of `f64` centroids.
pub fn batch_loss_f64(
    centroids: &[f64],
    subsets: &[BitSet],
    lambda: f64,
    contexts: &EmbeddingMatrix,
    labels: &[usize],
    batch: &[usize],
) -> f64 {
    let k = subsets.len();
    let sub = contexts.select(batch).expect("batch indices in range");
    let y: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
    let mu = soft_assign_all(&sub, centroids, k);
    pairwise_loss(&mu, subsets, &y, lambda)
}
