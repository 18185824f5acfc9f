//! Seeded synthetic retrieval data with planted topic structure.
//!
//! `topics` random unit directions are drawn; candidate `j` belongs to topic
//! `j mod topics`, contexts pick a topic uniformly. Every vector is its topic
//! direction plus isotropic Gaussian noise with per-coordinate standard
//! deviation `σ/√D`, so the noise vector has expected norm close to `σ`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::rng::{self, Gaussian};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub m_train: usize,
    pub m_test: usize,
    pub n: usize,
    pub dim: usize,
    pub topics: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { m_train: 5000, m_test: 500, n: 1000, dim: 16, topics: 20, noise_sigma: 0.3, seed: 42 }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.topics == 0 {
            return bad("topics must be ≥ 1");
        }
        if self.dim == 0 {
            return bad("dimension must be ≥ 1");
        }
        if self.n < self.topics {
            return bad("N must be ≥ topics");
        }
        if self.m_train < self.topics {
            return bad("M_train must be ≥ topics");
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad("noise sigma must be a finite value ≥ 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub train_contexts: EmbeddingMatrix,
    pub test_contexts: EmbeddingMatrix,
    pub candidates: EmbeddingMatrix,
    pub train_topics: Vec<usize>,
    pub test_topics: Vec<usize>,
    pub candidate_topics: Vec<usize>,
    pub topic_directions: EmbeddingMatrix,
}

// stream ids for the independent row families
const TOPIC_STREAM: u64 = 1 << 60;
const CANDIDATE_STREAM: u64 = 2 << 60;
const TRAIN_STREAM: u64 = 3 << 60;
const TEST_STREAM: u64 = 4 << 60;

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let dim = spec.dim;
    let mut g = Gaussian::new(rng::stream(spec.seed, TOPIC_STREAM));
    let mut dirs = Vec::with_capacity(spec.topics * dim);
    for _ in 0..spec.topics {
        let row = loop {
            let v: Vec<f64> = (0..dim).map(|_| g.sample()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| (x / norm) as f32).collect::<Vec<_>>();
            }
        };
        dirs.extend(row);
    }
    let topic_directions = EmbeddingMatrix::from_flat(dirs, dim)?;
    let scale = spec.noise_sigma / (dim as f64).sqrt();

    let make_rows = |count: usize, family: u64, topic_of: &(dyn Fn(usize, &mut Gaussian<ChaCha8Rng>) -> usize + Sync)| {
        let rows: Vec<(usize, Vec<f32>)> = (0..count)
            .into_par_iter()
            .map(|i| {
                let mut g = Gaussian::new(rng::stream(spec.seed, family | i as u64));
                let topic = topic_of(i, &mut g);
                let dir = topic_directions.row(topic);
                let v = dir.iter().map(|&d| (f64::from(d) + scale * g.sample()) as f32).collect();
                (topic, v)
            })
            .collect();
        let topics: Vec<usize> = rows.iter().map(|r| r.0).collect();
        let flat: Vec<f32> = rows.into_iter().flat_map(|r| r.1).collect();
        EmbeddingMatrix::from_flat(flat, dim).map(|m| (m, topics))
    };

    let t = spec.topics;
    let (candidates, candidate_topics) = make_rows(spec.n, CANDIDATE_STREAM, &|j, _| j % t)?;
    let (train_contexts, train_topics) =
        make_rows(spec.m_train, TRAIN_STREAM, &|_, g| g.rng_mut().gen_range(0..t))?;
    let (test_contexts, test_topics) =
        make_rows(spec.m_test, TEST_STREAM, &|_, g| g.rng_mut().gen_range(0..t))?;

    Ok(SyntheticData {
        train_contexts,
        test_contexts,
        candidates,
        train_topics,
        test_topics,
        candidate_topics,
        topic_directions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::build_labels;

    #[test]
    fn noiseless_contexts_pick_their_topic() {
        let spec = SyntheticSpec { m_train: 40, m_test: 10, n: 12, dim: 6, topics: 12, noise_sigma: 0.0, seed: 3 };
        let data = gen_synthetic(&spec).unwrap();
        let labels = build_labels(&data.train_contexts, &data.candidates).unwrap();
        for (l, t) in labels.iter().zip(&data.train_topics) {
            assert_eq!(l, t);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec { m_train: 50, m_test: 5, n: 30, dim: 4, topics: 3, noise_sigma: 0.5, seed: 8 };
        let a = gen_synthetic(&spec).unwrap();
        let b = gen_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        let c = gen_synthetic(&SyntheticSpec { seed: 9, ..spec }).unwrap();
        assert_ne!(a.candidates, c.candidates);
    }

    #[test]
    fn default_spec_has_learnable_structure() {
        let data = gen_synthetic(&SyntheticSpec::default()).unwrap();
        let labels = build_labels(&data.train_contexts, &data.candidates).unwrap();
        let agree = labels
            .iter()
            .zip(&data.train_topics)
            .filter(|(&l, &t)| data.candidate_topics[l] == t)
            .count();
        let rate = agree as f64 / labels.len() as f64;
        assert!(rate >= 0.90, "topic agreement {rate}");
    }

    #[test]
    fn large_noise_stays_finite() {
        for sigma in [0.0, 1.0, 1e3, 1e6] {
            let spec = SyntheticSpec { m_train: 20, m_test: 5, n: 10, dim: 3, topics: 2, noise_sigma: sigma, seed: 1 };
            let d = gen_synthetic(&spec).unwrap();
            assert!(d.candidates.as_slice().iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let base = SyntheticSpec::default();
        assert!(gen_synthetic(&SyntheticSpec { topics: 0, ..base.clone() }).is_err());
        assert!(gen_synthetic(&SyntheticSpec { n: 5, ..base.clone() }).is_err());
        assert!(gen_synthetic(&SyntheticSpec { m_train: 3, ..base.clone() }).is_err());
        assert!(gen_synthetic(&SyntheticSpec { noise_sigma: -1.0, ..base }).is_err());
    }
}
