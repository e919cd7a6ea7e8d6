//! Deep non-smooth nonnegative matrix factorization.
//!
//! The model factorizes a nonnegative data matrix `X` (features × samples) as
//! `X ≈ Z₁S₁Z₂S₂⋯Z_mS_mH_m`, where each `S_i = (1 − θ_i) I + (θ_i / r_i) 11ᵀ` is a
//! fixed smoothing matrix that pushes sparseness into the factors. Training
//! stacks single-layer nsNMF fits and then fine-tunes all factors jointly with
//! block-coordinate accelerated proximal gradient.
//!
//! Modules:
//!
//! * [`matrix`]: dense matrices, products, projections, spectral norm, thin SVD.
//! * [`proximal`]: APG solver for NNLS and sandwiched least-squares blocks.
//! * [`shallow`]: MU-NMF and nsNMF baselines.
//! * [`init`]: NNDSVD and random initialization.
//! * [`deep`]: layer stacks, pre-training, fine-tuning, layer features.
//! * [`eval`]: k-means, clustering accuracy, NMI, Hoyer sparseness.
//! * [`runner`]: datasets, checkpoints, reports, feature images, experiments.

pub mod config;
pub mod deep;
pub mod error;
pub mod eval;
pub mod init;
pub mod matrix;
pub mod proximal;
pub mod runner;
pub mod shallow;

pub use config::{InitMethod, SolverConfig};
pub use deep::{finetune, layer_features, pretrain, reconstruct, FinetuneOutcome, LayerStack, SweepReport};
pub use error::{Error, Result};
pub use eval::{accuracy, hoyer_sparseness, kmeans, nmi, ClusteringReport, LabelVector};
pub use init::{nndsvd, InitPair};
pub use matrix::{DenseMatrix, SpectralNormEstimate};
pub use proximal::{apg_solve, NnlsProblem, SandwichProblem};
pub use runner::{run_experiment, ExperimentConfig, Method};
pub use shallow::{mu_nmf, nsnmf, smoothing_matrix, ShallowFactorization, SmoothingSpec};
