//! Brute-force maximum inner product search and the Recall@1/N protocol.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedding::{check_dims, dot, EmbeddingMatrix};
use crate::error::{Error, Result};

/// A candidate row and its raw (pre-sigmoid) inner product with the query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchResult {
    pub index: usize,
    pub score: f64,
}

/// Orders results best-first: higher score, then lower index.
fn rank_order(a: &SearchResult, b: &SearchResult) -> Ordering {
    b.score.total_cmp(&a.score).then(a.index.cmp(&b.index))
}

/// Exact `argmax_r cᵀr`. Ties resolve to the lowest index.
pub fn exact_argmax(c: &[f32], candidates: &EmbeddingMatrix) -> Result<SearchResult> {
    candidates.ensure_searchable()?;
    check_dims(candidates.dim(), c.len())?;
    Ok(argmax_rows(c, candidates, 0..candidates.len()))
}

/// Argmax over an index iterator; caller guarantees it is non-empty and
/// yields indices in ascending order.
pub(crate) fn argmax_rows(
    c: &[f32],
    candidates: &EmbeddingMatrix,
    indices: impl IntoIterator<Item = usize>,
) -> SearchResult {
    let mut best = SearchResult { index: usize::MAX, score: f64::NEG_INFINITY };
    for j in indices {
        let s = dot(c, candidates.row(j));
        if s > best.score || best.index == usize::MAX {
            best = SearchResult { index: j, score: s };
        }
    }
    best
}

/// The `k` best candidates, best-first, stable by index among equal scores.
pub fn top_k(c: &[f32], candidates: &EmbeddingMatrix, k: usize) -> Result<Vec<SearchResult>> {
    candidates.ensure_searchable()?;
    check_dims(candidates.dim(), c.len())?;
    if k == 0 || k > candidates.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} outside 1..={}",
            candidates.len()
        )));
    }
    let mut all: Vec<SearchResult> = candidates
        .rows()
        .enumerate()
        .map(|(index, r)| SearchResult { index, score: dot(c, r) })
        .collect();
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, rank_order);
        all.truncate(k);
    }
    all.sort_unstable_by(rank_order);
    Ok(all)
}

/// Oracle labels: `labels[i] = exact_argmax(contexts[i], candidates).index`.
pub fn build_labels(contexts: &EmbeddingMatrix, candidates: &EmbeddingMatrix) -> Result<Vec<usize>> {
    candidates.ensure_searchable()?;
    check_dims(candidates.dim(), contexts.dim())?;
    Ok((0..contexts.len())
        .into_par_iter()
        .map(|i| argmax_rows(contexts.row(i), candidates, 0..candidates.len()).index)
        .collect())
}

/// One Recall@1/N instance: a context, its ground-truth candidate and N−1 distractors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingInstance {
    pub context: usize,
    pub positive: usize,
    pub distractors: Vec<usize>,
}

impl RankingInstance {
    pub fn new(context: usize, positive: usize, distractors: Vec<usize>) -> Result<Self> {
        if distractors.is_empty() {
            return Err(Error::InvalidArgument("at least one distractor is required".into()));
        }
        let mut seen = distractors.clone();
        seen.push(positive);
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "instance for context {context} has repeated candidate ids"
            )));
        }
        Ok(Self { context, positive, distractors })
    }

    /// Total candidates scored, ground truth included.
    pub fn n(&self) -> usize {
        self.distractors.len() + 1
    }
}

/// Builds one instance per entry of `positives` (context `i` ↔ candidate
/// `positives[i]`), drawing `n - 1` distinct distractors from the remaining
/// candidates. Distractors are drawn once, with a fixed seed.
pub fn sample_instances(
    positives: &[usize],
    num_candidates: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<RankingInstance>> {
    if n < 2 || n > num_candidates {
        return Err(Error::InvalidArgument(format!(
            "N = {n} must be in 2..={num_candidates}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<usize> = (0..num_candidates).collect();
    positives
        .iter()
        .enumerate()
        .map(|(context, &positive)| {
            if positive >= num_candidates {
                return Err(Error::IndexOutOfRange { index: positive, len: num_candidates });
            }
            let mut distractors = Vec::with_capacity(n - 1);
            while distractors.len() < n - 1 {
                let &j = pool.choose(&mut rng).expect("non-empty pool");
                if j != positive && !distractors.contains(&j) {
                    distractors.push(j);
                }
            }
            RankingInstance::new(context, positive, distractors)
        })
        .collect()
}

/// Fraction of instances where the ground truth scores strictly above every
/// distractor. A tie counts as a miss.
pub fn recall_at_1<F>(
    mut scorer: F,
    instances: &[RankingInstance],
    contexts: &EmbeddingMatrix,
    candidates: &EmbeddingMatrix,
) -> Result<f64>
where
    F: FnMut(&[f32], &[f32]) -> f64,
{
    if instances.is_empty() {
        return Err(Error::InvalidArgument("no ranking instances".into()));
    }
    let resolve = |m: &EmbeddingMatrix, i: usize| -> Result<()> {
        if i >= m.len() {
            Err(Error::IndexOutOfRange { index: i, len: m.len() })
        } else {
            Ok(())
        }
    };
    let mut hits = 0usize;
    for inst in instances {
        resolve(contexts, inst.context)?;
        resolve(candidates, inst.positive)?;
        for &d in &inst.distractors {
            resolve(candidates, d)?;
        }
        let c = contexts.row(inst.context);
        let truth = scorer(c, candidates.row(inst.positive));
        let mut won = true;
        for &d in &inst.distractors {
            if scorer(c, candidates.row(d)) >= truth {
                won = false;
            }
        }
        if won {
            hits += 1;
        }
    }
    Ok(hits as f64 / instances.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{inner_product, sigmoid};
    use rand::Rng;

    fn m(rows: &[&[f32]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn argmax_examples() {
        let r = m(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let hit = exact_argmax(&[1.0, 2.0], &r).unwrap();
        assert_eq!(hit, SearchResult { index: 2, score: 3.0 });

        let s = std::f32::consts::FRAC_1_SQRT_2;
        let unit = m(&[&[1.0, 0.0], &[s, s], &[0.0, 1.0], &[-s, s]]);
        assert_eq!(exact_argmax(&[s, s], &unit).unwrap().index, 1);

        let tied = m(&[&[0.0, 1.0], &[2.0, 2.0], &[1.0, 0.0], &[0.5, 0.5], &[2.0, 2.0]]);
        assert_eq!(exact_argmax(&[1.0, 1.0], &tied).unwrap().index, 1);
    }

    #[test]
    fn argmax_errors() {
        let empty = EmbeddingMatrix::new(2).unwrap();
        assert!(matches!(exact_argmax(&[1.0, 0.0], &empty), Err(Error::EmptyCandidates)));
        let r = m(&[&[1.0, 0.0]]);
        assert!(matches!(exact_argmax(&[1.0], &r), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn top_k_examples() {
        let r = m(&[&[0.0, 1.0], &[2.0, 0.0], &[1.0, 0.0]]);
        let idx: Vec<usize> = top_k(&[1.0, 0.0], &r, 2).unwrap().iter().map(|h| h.index).collect();
        assert_eq!(idx, vec![1, 2]);

        let one = top_k(&[1.0, 0.0], &r, 1).unwrap();
        assert_eq!(one[0], exact_argmax(&[1.0, 0.0], &r).unwrap());

        let ties = m(&[&[1.0], &[3.0], &[1.0], &[3.0], &[2.0]]);
        let full: Vec<usize> = top_k(&[1.0], &ties, 5).unwrap().iter().map(|h| h.index).collect();
        assert_eq!(full, vec![1, 3, 4, 0, 2]);

        assert!(top_k(&[1.0], &ties, 0).is_err());
        assert!(top_k(&[1.0], &ties, 6).is_err());
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, dim: usize) -> EmbeddingMatrix {
        let data = (0..rows * dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        EmbeddingMatrix::from_flat(data, dim).unwrap()
    }

    #[test]
    fn top_k_prefix_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let dim = rng.gen_range(1..8);
            let n = rng.gen_range(1..40);
            let r = random_matrix(&mut rng, n, dim);
            // quantized query so exact ties show up
            let c: Vec<f32> = (0..dim).map(|_| rng.gen_range(-2i32..3) as f32).collect();
            let mut prev = top_k(&c, &r, 1).unwrap();
            for k in 2..=n {
                let cur = top_k(&c, &r, k).unwrap();
                assert_eq!(&cur[..k - 1], &prev[..]);
                prev = cur;
            }
        }
    }

    #[test]
    fn build_labels_examples() {
        let r = m(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0]]);
        assert_eq!(build_labels(&r, &r).unwrap(), vec![0, 1, 2]);
        let single = m(&[&[0.3, -0.2]]);
        assert_eq!(build_labels(&r, &single).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn build_labels_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let dim = rng.gen_range(1..10);
            let m = rng.gen_range(1..20);
            let ctx = random_matrix(&mut rng, m, dim);
            let n = rng.gen_range(1..30);
            let cand = random_matrix(&mut rng, n, dim);
            let labels = build_labels(&ctx, &cand).unwrap();
            for (i, &l) in labels.iter().enumerate() {
                let mut best = 0;
                let mut best_s = f64::NEG_INFINITY;
                for j in 0..cand.len() {
                    let mut s = 0.0f64;
                    for d in 0..dim {
                        s += f64::from(ctx.row(i)[d]) * f64::from(cand.row(j)[d]);
                    }
                    if s > best_s {
                        best_s = s;
                        best = j;
                    }
                }
                assert_eq!(l, best);
            }
        }
    }

    #[test]
    fn recall_examples() {
        let s = std::f32::consts::FRAC_1_SQRT_2;
        let cands = m(&[&[1.0, 0.0], &[0.0, 1.0], &[s, s], &[-1.0, 0.0]]);
        let ctx = m(&[&[1.0, 0.1], &[0.1, 1.0], &[1.0, 1.0]]);
        let positives = [0, 1, 2];
        let inst = sample_instances(&positives, 4, 3, 9).unwrap();
        let perfect = recall_at_1(|c, r| inner_product(c, r).unwrap(), &inst, &ctx, &cands).unwrap();
        assert_eq!(perfect, 1.0);
        let constant = recall_at_1(|_, _| 0.25, &inst, &ctx, &cands).unwrap();
        assert_eq!(constant, 0.0);
        let squashed =
            recall_at_1(|c, r| sigmoid(inner_product(c, r).unwrap()), &inst, &ctx, &cands).unwrap();
        assert_eq!(squashed, perfect);
    }

    #[test]
    fn recall_rejects_dangling_ids() {
        let cands = m(&[&[1.0], &[2.0]]);
        let ctx = m(&[&[1.0]]);
        let bad = vec![RankingInstance::new(0, 0, vec![7]).unwrap()];
        assert!(matches!(
            recall_at_1(|_, _| 0.0, &bad, &ctx, &cands),
            Err(Error::IndexOutOfRange { index: 7, .. })
        ));
        assert!(RankingInstance::new(0, 1, vec![1]).is_err());
    }
}
