//! WebAssembly bindings for a small interactive demo.
//!
//! The page exposes three operations:
//! * [`ScreeningDemo`] trains a screening model on 2-D data and answers point queries,
//! * [`tradeoff_curve`] sweeps λ and reports accuracy against speedup,
//! * [`DistillDemo`] trains two dual encoders with and without the teacher term.
//!
//! Each has a plain Rust core so it can be tested without a browser.

use wasm_bindgen::prelude::*;

use mips_screen::distill::{self, DistillConfig, PlantedTaskSpec};
use mips_screen::eval::{screening_accuracy, speedup_ratio};
use mips_screen::exact::{recall_at_1, sample_instances};
use mips_screen::screening::{train, ScreeningModel, ScreeningTrainSet, TrainConfig};
use mips_screen::synth::{gen_synthetic, SyntheticSpec};
use mips_screen::{exact_argmax, EmbeddingMatrix};

fn js_err(e: mips_screen::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Data shape used by the page. Two dimensions so it can be drawn directly.
pub fn demo_spec(seed: u64, topics: usize) -> SyntheticSpec {
    SyntheticSpec { m_train: 800, m_test: 200, n: 150, dim: 2, topics, noise_sigma: 0.5, seed }
}

pub struct ScreeningCore {
    pub model: ScreeningModel,
    pub candidates: EmbeddingMatrix,
    pub test: EmbeddingMatrix,
    pub accuracy: f64,
    pub speedup: f64,
}

impl ScreeningCore {
    pub fn build(seed: u64, topics: usize, k: usize, lambda: f64) -> mips_screen::Result<Self> {
        let data = gen_synthetic(&demo_spec(seed, topics))?;
        let set = ScreeningTrainSet::from_oracle(data.train_contexts, data.candidates)?;
        let model = train(&set, &TrainConfig::new(k, lambda).with_seed(seed))?.model;
        let accuracy = screening_accuracy(&model, &data.test_contexts, set.candidates())?;
        let speedup = speedup_ratio(&model, &data.test_contexts)?;
        Ok(Self { model, candidates: set.candidates().clone(), test: data.test_contexts, accuracy, speedup })
    }

    /// `[cluster, exact index, screened index, subset size]` for the point `(x, y)`.
    pub fn query(&self, x: f32, y: f32) -> mips_screen::Result<[f64; 4]> {
        let c = [x, y];
        let pred = self.model.predict(&c);
        let exact = exact_argmax(&c, &self.candidates)?;
        let screened = self.model.screened_search(&c, &self.candidates)?;
        Ok([pred.cluster() as f64, exact.index as f64, screened.index as f64, pred.size() as f64])
    }
}

#[wasm_bindgen]
pub struct ScreeningDemo {
    core: ScreeningCore,
}

#[wasm_bindgen]
impl ScreeningDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, topics: u32, k: u32, lambda: f64) -> Result<ScreeningDemo, JsValue> {
        ScreeningCore::build(u64::from(seed), topics as usize, k as usize, lambda)
            .map(|core| Self { core })
            .map_err(js_err)
    }

    /// Row-major `(x, y)` pairs.
    pub fn candidates(&self) -> Vec<f32> {
        self.core.candidates.as_slice().to_vec()
    }

    pub fn test_contexts(&self) -> Vec<f32> {
        self.core.test.as_slice().to_vec()
    }

    pub fn centroids(&self) -> Vec<f32> {
        self.core.model.centroids().as_slice().to_vec()
    }

    /// Candidate indices kept by cluster `k`.
    pub fn subset(&self, k: u32) -> Vec<u32> {
        self.core.model.subsets().get(k as usize).map_or_else(Vec::new, |s| s.iter_ones().map(|j| j as u32).collect())
    }

    pub fn k(&self) -> u32 {
        self.core.model.k() as u32
    }

    pub fn accuracy(&self) -> f64 {
        self.core.accuracy
    }

    pub fn speedup(&self) -> f64 {
        self.core.speedup
    }

    pub fn query(&self, x: f32, y: f32) -> Result<Vec<f64>, JsValue> {
        self.core.query(x, y).map(|q| q.to_vec()).map_err(js_err)
    }
}

/// `(λ, accuracy, speedup)` per λ, all on one dataset.
pub fn tradeoff(seed: u64, topics: usize, k: usize, lambdas: &[f64]) -> mips_screen::Result<Vec<[f64; 3]>> {
    let data = gen_synthetic(&demo_spec(seed, topics))?;
    let set = ScreeningTrainSet::from_oracle(data.train_contexts, data.candidates)?;
    lambdas
        .iter()
        .map(|&lambda| {
            let model = train(&set, &TrainConfig::new(k, lambda).with_seed(seed))?.model;
            let acc = screening_accuracy(&model, &data.test_contexts, set.candidates())?;
            Ok([lambda, acc, speedup_ratio(&model, &data.test_contexts)?])
        })
        .collect()
}

/// Flat `[λ, accuracy, speedup, λ, …]`.
#[wasm_bindgen]
pub fn tradeoff_curve(seed: u32, topics: u32, k: u32, lambdas: Vec<f64>) -> Result<Vec<f64>, JsValue> {
    tradeoff(u64::from(seed), topics as usize, k as usize, &lambdas)
        .map(|rows| rows.into_iter().flatten().collect())
        .map_err(js_err)
}

/// Per-β results of [`distill_compare`].
#[derive(Debug, Clone)]
pub struct DistillRun {
    pub beta: f64,
    pub losses: Vec<f64>,
    pub teacher_gap: f64,
    pub recall: f64,
}

/// Trains with `β = beta` and with `β = 0` on one planted task.
pub fn distill_compare(seed: u64, beta: f64, epochs: usize) -> mips_screen::Result<[DistillRun; 2]> {
    let task = distill::planted_task(&PlantedTaskSpec { data_seed: seed, test_contexts: 200, ..Default::default() })?;
    let scores = distill::teacher_scores(&task.train, &task.teacher);
    let positives: Vec<usize> = (0..task.test_contexts.len()).collect();
    let instances = sample_instances(&positives, task.test_responses.len(), 10, seed)?;
    let run = |beta: f64| -> mips_screen::Result<DistillRun> {
        let cfg = DistillConfig { beta, epochs, seed, ..Default::default() };
        let out = distill::train_with_scores(&task.train, &scores, &cfg)?;
        let enc = out.encoder;
        let teacher_gap = distill::teacher_gap(&enc, &task.test_pairs, &task.teacher)?;
        let recall = recall_at_1(
            |c, r| enc.score(c, r).unwrap_or(0.0),
            &instances,
            &task.test_contexts,
            &task.test_responses,
        )?;
        Ok(DistillRun { beta, losses: out.loss_trajectory, teacher_gap, recall })
    };
    Ok([run(beta)?, run(0.0)?])
}

#[wasm_bindgen]
pub struct DistillDemo {
    runs: [DistillRun; 2],
}

#[wasm_bindgen]
impl DistillDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, beta: f64, epochs: u32) -> Result<DistillDemo, JsValue> {
        distill_compare(u64::from(seed), beta, epochs as usize).map(|runs| Self { runs }).map_err(js_err)
    }

    /// Index 0 is the distilled run, index 1 the label-only run.
    pub fn losses(&self, run: u32) -> Vec<f64> {
        self.runs.get(run as usize).map_or_else(Vec::new, |r| r.losses.clone())
    }

    pub fn teacher_gap(&self, run: u32) -> f64 {
        self.runs.get(run as usize).map_or(f64::NAN, |r| r.teacher_gap)
    }

    pub fn recall(&self, run: u32) -> f64 {
        self.runs.get(run as usize).map_or(f64::NAN, |r| r.recall)
    }
}
