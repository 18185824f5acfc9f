//! Dual-encoder training with knowledge distillation from a teacher scorer.
//!
//! The encoders are linear maps `F → D` (one per side). A pair is scored by
//! `sigmoid(cᵀr)` and trained on `β·(s_dual − s_teacher)² + BCE(s_dual, y)`.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::embedding::{check_dims, sigmoid, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::rng::{self, Gaussian};

const CLAMP: f64 = 1e-12;

/// Binary cross-entropy with the score clamped to `[1e-12, 1 − 1e-12]`.
pub fn bce(score: f64, label: bool) -> f64 {
    let s = score.clamp(CLAMP, 1.0 - CLAMP);
    if label {
        -s.ln()
    } else {
        -(1.0 - s).ln()
    }
}

/// Distillation loss `β·(s_dual − s_cross)² + BCE(s_dual, label)`.
pub fn kd_loss(score_dual: f64, score_cross: f64, label: bool, beta: f64) -> f64 {
    let gap = score_dual - score_cross;
    beta * gap * gap + bce(score_dual, label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Context,
    Response,
}

/// Two linear encoders with row-major `F × D` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEncoder {
    features: usize,
    dim: usize,
    w_ctx: Vec<f32>,
    w_resp: Vec<f32>,
}

impl DualEncoder {
    pub fn new(features: usize, dim: usize, w_ctx: Vec<f32>, w_resp: Vec<f32>) -> Result<Self> {
        if features == 0 || dim == 0 {
            return Err(Error::InvalidArgument("encoder dimensions must be ≥ 1".into()));
        }
        for w in [&w_ctx, &w_resp] {
            check_dims(features * dim, w.len())?;
            if let Some(p) = w.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(p));
            }
        }
        Ok(Self { features, dim, w_ctx, w_resp })
    }

    /// Both maps equal to the `F × F` identity.
    pub fn identity(features: usize) -> Result<Self> {
        let eye: Vec<f32> = (0..features * features)
            .map(|i| if i / features == i % features { 1.0 } else { 0.0 })
            .collect();
        Self::new(features, features, eye.clone(), eye)
    }

    /// Gaussian weights with standard deviation `1/√F`.
    pub fn random(features: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut g = Gaussian::new(rng::stream(seed, 0xDE4C));
        let std = 1.0 / (features.max(1) as f64).sqrt();
        let mut draw = || (0..features * dim).map(|_| (std * g.sample()) as f32).collect::<Vec<_>>();
        let w_ctx = draw();
        let w_resp = draw();
        Self::new(features, dim, w_ctx, w_resp)
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self, side: Side) -> &[f32] {
        match side {
            Side::Context => &self.w_ctx,
            Side::Response => &self.w_resp,
        }
    }

    /// `e_d = Σ_f x_f · W[f, d]`.
    pub fn encode(&self, features: &[f32], side: Side) -> Result<Vec<f32>> {
        check_dims(self.features, features.len())?;
        let w = self.weights(side);
        let mut out = vec![0.0f64; self.dim];
        for (x, row) in features.iter().zip(w.chunks_exact(self.dim)) {
            for (o, &wv) in out.iter_mut().zip(row) {
                *o += f64::from(*x) * f64::from(wv);
            }
        }
        Ok(out.into_iter().map(|v| v as f32).collect())
    }

    pub fn encode_all(&self, rows: &EmbeddingMatrix, side: Side) -> Result<EmbeddingMatrix> {
        check_dims(self.features, rows.dim())?;
        let encoded: Vec<f32> = rows
            .rows()
            .flat_map(|r| self.encode(r, side).expect("checked dims"))
            .collect();
        EmbeddingMatrix::from_flat(encoded, self.dim)
    }

    /// `sigmoid(encode(ctx)ᵀ encode(resp))`.
    pub fn score(&self, ctx: &[f32], resp: &[f32]) -> Result<f64> {
        let c = self.encode(ctx, Side::Context)?;
        let r = self.encode(resp, Side::Response)?;
        crate::embedding::score_dual(&c, &r)
    }

    pub fn params(&self) -> EncoderParams {
        EncoderParams {
            features: self.features,
            dim: self.dim,
            w_ctx: self.w_ctx.iter().map(|&x| f64::from(x)).collect(),
            w_resp: self.w_resp.iter().map(|&x| f64::from(x)).collect(),
        }
    }
}

/// A scorer in (0, 1) standing in for a joint (cross) encoder.
pub trait TeacherOracle: Sync {
    fn score(&self, ctx: &[f32], resp: &[f32]) -> f64;
}

impl<F: Fn(&[f32], &[f32]) -> f64 + Sync> TeacherOracle for F {
    fn score(&self, ctx: &[f32], resp: &[f32]) -> f64 {
        self(ctx, resp)
    }
}

/// Fixed two-layer network over the concatenation `[x; r]`.
///
/// The hidden layer has `2·rank` quadratic units `(u_mᵀx ± v_mᵀr)²` whose
/// output weights `±κ/4` sum to the planted bilinear form `κ·Σ_m (u_mᵀx)(v_mᵀr)`,
/// plus `tanh` units with random weights. The output is squashed by a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTeacher {
    features: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    tanh_in: Vec<f64>,
    tanh_out: Vec<f64>,
    bilinear_scale: f64,
    bias: f64,
}

impl PlantedTeacher {
    pub fn new(features: usize, rank: usize, tanh_units: usize, seed: u64) -> Result<Self> {
        if features == 0 || rank == 0 {
            return Err(Error::InvalidArgument("teacher needs F ≥ 1 and rank ≥ 1".into()));
        }
        let mut g = Gaussian::new(rng::stream(seed, 0x7EAC));
        let std = 1.0 / (features as f64).sqrt();
        let u = (0..rank * features).map(|_| std * g.sample()).collect();
        let v = (0..rank * features).map(|_| std * g.sample()).collect();
        let in_std = 1.0 / (2.0 * features as f64).sqrt();
        let tanh_in = (0..tanh_units * 2 * features).map(|_| in_std * g.sample()).collect();
        let tanh_out = (0..tanh_units).map(|_| g.sample()).collect();
        Ok(Self { features, u, v, tanh_in, tanh_out, bilinear_scale: 1.0, bias: -1.0 })
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn rank(&self) -> usize {
        self.u.len() / self.features
    }

    fn project(w: &[f64], x: &[f32]) -> f64 {
        w.iter().zip(x).map(|(a, b)| a * f64::from(*b)).sum()
    }

    pub fn logit(&self, ctx: &[f32], resp: &[f32]) -> f64 {
        let f = self.features;
        let mut z = self.bias;
        for (um, vm) in self.u.chunks_exact(f).zip(self.v.chunks_exact(f)) {
            let a = Self::project(um, ctx);
            let b = Self::project(vm, resp);
            z += self.bilinear_scale * 0.25 * ((a + b).powi(2) - (a - b).powi(2));
        }
        for (w, o) in self.tanh_in.chunks_exact(2 * f).zip(&self.tanh_out) {
            let h = Self::project(&w[..f], ctx) + Self::project(&w[f..], resp);
            z += o * h.tanh();
        }
        z
    }

    /// Planted positive response for a context: `Σ_m (u_mᵀx)·v_m / ‖v_m‖²`
    /// plus noise, so its bilinear score is large.
    fn positive_for(&self, ctx: &[f32], noise: f64, g: &mut Gaussian<rand_chacha::ChaCha8Rng>) -> Vec<f32> {
        let f = self.features;
        let mut r = vec![0.0f64; f];
        for (um, vm) in self.u.chunks_exact(f).zip(self.v.chunks_exact(f)) {
            let a = Self::project(um, ctx);
            let vv: f64 = vm.iter().map(|x| x * x).sum();
            for (ri, vi) in r.iter_mut().zip(vm) {
                *ri += a * vi / vv;
            }
        }
        let std = noise / (f as f64).sqrt();
        r.into_iter().map(|x| (x + std * g.sample()) as f32).collect()
    }
}

impl TeacherOracle for PlantedTeacher {
    fn score(&self, ctx: &[f32], resp: &[f32]) -> f64 {
        sigmoid(self.logit(ctx, resp))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub context: Vec<f32>,
    pub response: Vec<f32>,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistillConfig {
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Embedding dimension `D` of the trained encoders.
    pub embed_dim: usize,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self { beta: 1.0, learning_rate: 0.1, epochs: 60, batch_size: 32, seed: 42, embed_dim: 8 }
    }
}

#[derive(Debug, Clone)]
pub struct DistillOutcome {
    pub encoder: DualEncoder,
    /// Mean training loss after every epoch.
    pub loss_trajectory: Vec<f64>,
}

/// Encoder weights in `f64`, as used during training.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub features: usize,
    pub dim: usize,
    pub w_ctx: Vec<f64>,
    pub w_resp: Vec<f64>,
}

impl EncoderParams {
    fn encode(&self, x: &[f32], w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (xf, row) in x.iter().zip(w.chunks_exact(self.dim)) {
            for (o, wv) in out.iter_mut().zip(row) {
                *o += f64::from(*xf) * wv;
            }
        }
        out
    }

    fn score(&self, pair: &LabeledPair) -> (Vec<f64>, Vec<f64>, f64) {
        let c = self.encode(&pair.context, &self.w_ctx);
        let r = self.encode(&pair.response, &self.w_resp);
        let z: f64 = c.iter().zip(&r).map(|(a, b)| a * b).sum();
        (c, r, sigmoid(z))
    }

    pub fn to_encoder(&self) -> Result<DualEncoder> {
        DualEncoder::new(
            self.features,
            self.dim,
            self.w_ctx.iter().map(|&x| x as f32).collect(),
            self.w_resp.iter().map(|&x| x as f32).collect(),
        )
    }
}

/// Mean kd loss over `batch` and its gradient w.r.t. both weight matrices.
pub fn loss_and_grad(
    p: &EncoderParams,
    pairs: &[LabeledPair],
    teacher: &[f64],
    batch: &[usize],
    beta: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let (f, d) = (p.features, p.dim);
    let mut g_ctx = vec![0.0; f * d];
    let mut g_resp = vec![0.0; f * d];
    let mut total = 0.0;
    for &i in batch {
        let pair = &pairs[i];
        let (c, r, s) = p.score(pair);
        let y = if pair.label { 1.0 } else { 0.0 };
        total += kd_loss(s, teacher[i], pair.label, beta);
        // BCE is flat where the score is clamped
        let dbce = if (CLAMP..=1.0 - CLAMP).contains(&s) { s - y } else { 0.0 };
        let dz = 2.0 * beta * (s - teacher[i]) * s * (1.0 - s) + dbce;
        for (fi, (&xc, &xr)) in pair.context.iter().zip(&pair.response).enumerate() {
            let (xc, xr) = (f64::from(xc), f64::from(xr));
            let gc = &mut g_ctx[fi * d..(fi + 1) * d];
            let gr = &mut g_resp[fi * d..(fi + 1) * d];
            for k in 0..d {
                gc[k] += dz * xc * r[k];
                gr[k] += dz * xr * c[k];
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    g_ctx.iter_mut().chain(g_resp.iter_mut()).for_each(|g| *g *= scale);
    (total * scale, g_ctx, g_resp)
}

fn validate_pairs(pairs: &[LabeledPair], features: usize) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no training pairs".into()));
    }
    for p in pairs {
        check_dims(features, p.context.len())?;
        check_dims(features, p.response.len())?;
    }
    if !pairs.iter().any(|p| p.label) || pairs.iter().all(|p| p.label) {
        return Err(Error::InvalidArgument("need at least one positive and one negative pair".into()));
    }
    Ok(())
}

/// Teacher scores for every pair, computed once.
pub fn teacher_scores(pairs: &[LabeledPair], teacher: &dyn TeacherOracle) -> Vec<f64> {
    pairs.par_iter().map(|p| teacher.score(&p.context, &p.response)).collect()
}

/// Trains a dual encoder by mini-batch SGD on the mean kd loss.
pub fn train_distilled(pairs: &[LabeledPair], teacher: &dyn TeacherOracle, cfg: &DistillConfig) -> Result<DistillOutcome> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no training pairs".into()));
    }
    let scores = teacher_scores(pairs, teacher);
    train_with_scores(pairs, &scores, cfg)
}

/// As [`train_distilled`], with teacher scores already cached per pair.
pub fn train_with_scores(pairs: &[LabeledPair], teacher: &[f64], cfg: &DistillConfig) -> Result<DistillOutcome> {
    let features = pairs.first().map(|p| p.context.len()).unwrap_or(0);
    validate_pairs(pairs, features)?;
    if teacher.len() != pairs.len() {
        return Err(Error::ShapeMismatch(format!("{} teacher scores for {} pairs", teacher.len(), pairs.len())));
    }
    if let Some(i) = teacher.iter().position(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidArgument(format!("teacher score {i} is outside [0, 1]")));
    }
    if !(cfg.beta >= 0.0) || !(cfg.learning_rate > 0.0) || cfg.batch_size == 0 || cfg.embed_dim == 0 {
        return Err(Error::InvalidArgument("need β ≥ 0, learning rate > 0, batch ≥ 1, D ≥ 1".into()));
    }
    let mut params = DualEncoder::random(features, cfg.embed_dim, cfg.seed)?.params();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let all = order.clone();
    let mut loss_trajectory = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng::stream(cfg.seed, 0x5EED_0000_0000 | epoch as u64));
        for batch in order.chunks(cfg.batch_size) {
            let (_, gc, gr) = loss_and_grad(&params, pairs, teacher, batch, cfg.beta);
            for (w, g) in params.w_ctx.iter_mut().zip(&gc) {
                *w -= cfg.learning_rate * g;
            }
            for (w, g) in params.w_resp.iter_mut().zip(&gr) {
                *w -= cfg.learning_rate * g;
            }
        }
        loss_trajectory.push(loss_and_grad(&params, pairs, teacher, &all, cfg.beta).0);
    }
    Ok(DistillOutcome { encoder: params.to_encoder()?, loss_trajectory })
}

/// Mean squared gap between student and teacher scores.
pub fn teacher_gap(encoder: &DualEncoder, pairs: &[LabeledPair], teacher: &dyn TeacherOracle) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no pairs".into()));
    }
    let mut acc = 0.0;
    for p in pairs {
        let gap = encoder.score(&p.context, &p.response)? - teacher.score(&p.context, &p.response);
        acc += gap * gap;
    }
    Ok(acc / pairs.len() as f64)
}

/// Synthetic pair data scored by a [`PlantedTeacher`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTaskSpec {
    pub features: usize,
    pub rank: usize,
    pub tanh_units: usize,
    /// Positive training pairs; as many negatives are added.
    pub train_positives: usize,
    pub test_contexts: usize,
    pub response_noise: f64,
    pub teacher_seed: u64,
    pub data_seed: u64,
}

impl Default for PlantedTaskSpec {
    fn default() -> Self {
        Self {
            features: 16,
            rank: 4,
            tanh_units: 8,
            train_positives: 200,
            test_contexts: 500,
            response_noise: 1.0,
            teacher_seed: 7,
            data_seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedTask {
    pub teacher: PlantedTeacher,
    pub train: Vec<LabeledPair>,
    /// Held-out pairs, one positive and one negative per test context.
    pub test_pairs: Vec<LabeledPair>,
    /// Held-out contexts; row `i` of `test_responses` is the positive for context `i`.
    pub test_contexts: EmbeddingMatrix,
    pub test_responses: EmbeddingMatrix,
}

/// Positives pair a context with its planted response; each negative
/// replaces the response with the response of another random context.
pub fn planted_task(spec: &PlantedTaskSpec) -> Result<PlantedTask> {
    if spec.train_positives < 2 || spec.test_contexts < 2 {
        return Err(Error::InvalidArgument("need at least two train and two test contexts".into()));
    }
    let teacher = PlantedTeacher::new(spec.features, spec.rank, spec.tanh_units, spec.teacher_seed)?;
    let f = spec.features;
    let mut g = Gaussian::new(rng::stream(spec.data_seed, 0xDA7A));
    let mut draw = |count: usize| {
        let ctx: Vec<Vec<f32>> = (0..count).map(|_| (0..f).map(|_| g.sample() as f32).collect()).collect();
        let resp: Vec<Vec<f32>> = ctx.iter().map(|c| teacher.positive_for(c, spec.response_noise, &mut g)).collect();
        let mut pairs = Vec::with_capacity(2 * count);
        for i in 0..count {
            pairs.push(LabeledPair { context: ctx[i].clone(), response: resp[i].clone(), label: true });
            let mut other = i;
            while other == i {
                other = rand::Rng::gen_range(g.rng_mut(), 0..count);
            }
            pairs.push(LabeledPair { context: ctx[i].clone(), response: resp[other].clone(), label: false });
        }
        (ctx, resp, pairs)
    };
    let (_, _, train) = draw(spec.train_positives);
    let (test_ctx, test_resp, test_pairs) = draw(spec.test_contexts);
    Ok(PlantedTask {
        teacher: teacher.clone(),
        train,
        test_pairs,
        test_contexts: EmbeddingMatrix::from_rows(&test_ctx)?,
        test_responses: EmbeddingMatrix::from_rows(&test_resp)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bce_examples() {
        assert!(bce(1.0 - 1e-15, true) < 1e-11);
        assert_relative_eq!(bce(0.5, true), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_relative_eq!(bce(0.5, false), std::f64::consts::LN_2, epsilon = 1e-15);
        let worst = bce(1e-300, true);
        assert!(worst.is_finite() && worst <= 1e12f64.ln() + 1e-9);
    }

    #[test]
    fn kd_loss_examples() {
        for (s, t, y) in [(0.3, 0.9, true), (0.7, 0.1, false), (0.5, 0.5, true)] {
            assert_eq!(kd_loss(s, t, y, 0.0), bce(s, y));
        }
        assert_eq!(kd_loss(0.4, 0.4, false, 2.0), bce(0.4, false));
        assert_relative_eq!(kd_loss(0.8, 0.6, true, 0.5), 0.02 + 0.8f64.ln().abs(), epsilon = 1e-12);
        assert_relative_eq!(kd_loss(0.8, 0.6, true, 0.5), 0.243144, epsilon = 1e-6);
    }

    #[test]
    fn encode_examples() {
        let id = DualEncoder::identity(3).unwrap();
        assert_eq!(id.encode(&[1.0, -2.0, 0.5], Side::Context).unwrap(), vec![1.0, -2.0, 0.5]);
        let rnd = DualEncoder::random(4, 3, 1).unwrap();
        let zero = rnd.encode(&[0.0; 4], Side::Context).unwrap();
        assert_eq!(zero, vec![0.0; 3]);
        assert_eq!(rnd.score(&[0.0; 4], &[1.0, 2.0, 3.0, 4.0]).unwrap(), 0.5);
        assert!(rnd.encode(&[1.0; 3], Side::Response).is_err());
    }

    #[test]
    fn encode_matches_reference_matvec() {
        for seed in 0..20 {
            let enc = DualEncoder::random(5, 4, seed).unwrap();
            let x: Vec<f32> = (0..5).map(|i| (i as f32 - 2.0) * 0.37 + seed as f32 * 0.01).collect();
            for side in [Side::Context, Side::Response] {
                let w = enc.weights(side);
                let got = enc.encode(&x, side).unwrap();
                for d in 0..4 {
                    let mut want = 0.0f64;
                    for f in 0..5 {
                        want += f64::from(x[f]) * f64::from(w[f * 4 + d]);
                    }
                    assert!((f64::from(got[d]) - want).abs() < 1e-6);
                }
            }
        }
    }

    fn random_pairs(seed: u64, count: usize, f: usize) -> (Vec<LabeledPair>, Vec<f64>) {
        let mut g = Gaussian::new(rng::stream(seed, 99));
        let pairs: Vec<LabeledPair> = (0..count)
            .map(|i| LabeledPair {
                context: (0..f).map(|_| g.sample() as f32).collect(),
                response: (0..f).map(|_| g.sample() as f32).collect(),
                label: i % 2 == 0,
            })
            .collect();
        let teacher = (0..count).map(|_| sigmoid(g.sample())).collect();
        (pairs, teacher)
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..10u64 {
            let f = 2 + seed as usize % 5;
            let d = 1 + (seed as usize * 3) % 6;
            let (pairs, teacher) = random_pairs(seed, 6, f);
            let params = DualEncoder::random(f, d, seed + 50).unwrap().params();
            let idx: Vec<usize> = (0..pairs.len()).collect();
            let beta = [0.0, 0.2, 0.5, 1.0][seed as usize % 4];
            let (_, gc, gr) = loss_and_grad(&params, &pairs, &teacher, &idx, beta);
            let h = 1e-4;
            let loss = |p: &EncoderParams| loss_and_grad(p, &pairs, &teacher, &idx, beta).0;
            for (side, analytic) in [(0, &gc), (1, &gr)] {
                let scale = analytic.iter().fold(0.0f64, |a, g| a.max(g.abs()));
                for i in 0..analytic.len() {
                    let mut plus = params.clone();
                    let mut minus = params.clone();
                    if side == 0 {
                        plus.w_ctx[i] += h;
                        minus.w_ctx[i] -= h;
                    } else {
                        plus.w_resp[i] += h;
                        minus.w_resp[i] -= h;
                    }
                    let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                    let err = (fd - analytic[i]).abs() / analytic[i].abs().max(scale * 1e-3).max(1e-12);
                    assert!(err <= 1e-4, "seed {seed} side {side} [{i}]: fd {fd} vs {}", analytic[i]);
                }
            }
        }
    }

    #[test]
    fn training_is_deterministic_and_descends() {
        let task = planted_task(&PlantedTaskSpec { train_positives: 60, test_contexts: 10, ..Default::default() }).unwrap();
        let cfg = DistillConfig { epochs: 15, ..Default::default() };
        let a = train_distilled(&task.train, &task.teacher, &cfg).unwrap();
        let b = train_distilled(&task.train, &task.teacher, &cfg).unwrap();
        assert_eq!(a.encoder, b.encoder);
        assert_eq!(a.loss_trajectory, b.loss_trajectory);
        assert!(a.loss_trajectory.last().unwrap() < a.loss_trajectory.first().unwrap());
    }

    #[test]
    fn rejects_degenerate_datasets() {
        let t = |_: &[f32], _: &[f32]| 0.5;
        let cfg = DistillConfig::default();
        assert!(train_distilled(&[], &t, &cfg).is_err());
        let only_pos = vec![LabeledPair { context: vec![1.0], response: vec![1.0], label: true }];
        assert!(train_distilled(&only_pos, &t, &cfg).is_err());
    }

    #[test]
    fn teacher_separates_planted_pairs() {
        let task = planted_task(&PlantedTaskSpec::default()).unwrap();
        let (mut pos, mut neg) = (0.0, 0.0);
        for p in &task.test_pairs {
            let s = task.teacher.score(&p.context, &p.response);
            assert!(s > 0.0 && s < 1.0);
            if p.label {
                pos += s;
            } else {
                neg += s;
            }
        }
        assert!(pos > neg * 1.5, "{pos} vs {neg}");
    }
}
