//! Maximum inner product search with learned candidate screening.
//!
//! * [`embedding`] vector primitives and the dual-encoder score `sigmoid(cᵀr)`.
//! * [`exact`] brute-force MIPS, top-k and the Recall@1/N protocol.
//! * [`kmeans`] spherical k-means used to seed the screening centroids.
//! * [`screening`] the screening model, its objective and the alternating trainer.
//! * [`distill`] linear dual encoders trained with a distillation loss.
//! * [`eval`] screening accuracy, speedup ratio, grid sweeps and latency.
//! * [`synth`] seeded synthetic data; [`io`] binary file formats.

pub mod distill;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod exact;
pub mod io;
pub mod kmeans;
pub mod rng;
pub mod screening;
pub mod synth;

pub use embedding::{inner_product, l2_normalize, score_dual, sigmoid, EmbeddingMatrix};
pub use error::{Error, Result};
pub use exact::{build_labels, exact_argmax, recall_at_1, top_k, RankingInstance, SearchResult};
pub use screening::{screened_search, ScreeningModel, ScreeningTrainSet, TrainConfig};
