//! Reconstruction-based anomaly scoring.
//!
//! A stack of stochastic reconstructions of an input is summarized into a
//! pseudo-healthy pixel distribution. The input is then scored by inverted
//! SSIM against the mean reconstruction, weighted by a pixel-space
//! Mahalanobis map computed with either a diagonal or a full (low-rank plus
//! ridge) covariance. Synthetic phantoms with oracle reconstructors and
//! voxel-level metrics close the loop.

pub mod diffusion;
pub mod error;
pub mod mahalanobis;
pub mod metrics;
pub mod phantom;
pub mod pseudostats;
pub mod scoring;
pub mod seed;
pub mod ssim;
pub mod volume;

pub use diffusion::{
    estimate_x0, forward_noise, sample_stack, simplex_noise, NoiseKind, NoiseSchedule, Reconstructor, SimplexParams,
};
pub use error::{Error, Result};
pub use mahalanobis::{
    dense_mhd_oracle, mhd_diag_map, mhd_full_map, smooth_mhd, woodbury_solve, MhdResult, DEFAULT_LAMBDA,
};
pub use metrics::{
    auprc, best_dice, dice, evaluate, evaluate_map, paired_permutation_test, permutation_test, DiceSweep, EvalResult,
    SweepMode,
};
pub use phantom::{
    gen_dataset, gen_healthy, gen_population, inject_lesion, make_oracle_reconstructor, OracleReconstructor,
    PerturbationConfig, PhantomCase, PhantomConfig,
};
pub use pseudostats::{summarize, PseudoHealthyDistribution};
pub use scoring::{binarize, population_cm_score, score_case, ScoredCase, ScoringConfig, Variant};
pub use ssim::{s_mean, ssim_map, SsimParams};
pub use volume::{flatten, gaussian_filter, reshape, BinaryMask, Image2D, ReconstructionStack, Volume3D};
