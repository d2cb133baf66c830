//! Composition of the anomaly maps and the population-covariance baseline.

use rayon::prelude::*;

use crate::diffusion::{sample_stack, NoiseKind, NoiseSchedule, Reconstructor};
use crate::error::{param_err, Result};
use crate::mahalanobis::{mhd_diag_map, mhd_full_map, smooth_mhd, DEFAULT_LAMBDA};
use crate::pseudostats::summarize;
use crate::ssim::{s_mean, SsimParams};
use crate::volume::{BinaryMask, Image2D, ReconstructionStack};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringConfig {
    pub n_reconstructions: usize,
    pub t_test: usize,
    pub lambda: f64,
    pub mhd_smooth_sigma: f64,
    pub ssim: SsimParams,
    pub noise_kind: NoiseKind,
    pub seed: u64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            n_reconstructions: 10,
            t_test: 500,
            lambda: DEFAULT_LAMBDA,
            mhd_smooth_sigma: 1.0,
            ssim: SsimParams::default(),
            noise_kind: NoiseKind::Simplex,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCase {
    pub input: Image2D,
    pub ground_truth: Option<BinaryMask>,
    pub s_mean: Image2D,
    pub s_mhd: Image2D,
    pub s_smhd: Image2D,
    pub mhd_scalar_diag: f64,
    pub mhd_scalar_full: f64,
}

/// Anomaly map variants produced by [`score_case`] plus the population baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    SMean,
    SMhd,
    SSmhd,
    Cm,
}

impl Variant {
    pub const SCORED: [Variant; 3] = [Variant::SMean, Variant::SMhd, Variant::SSmhd];

    pub fn name(self) -> &'static str {
        match self {
            Variant::SMean => "s_mean",
            Variant::SMhd => "s_mhd",
            Variant::SSmhd => "s_smhd",
            Variant::Cm => "cm",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s_mean" => Ok(Variant::SMean),
            "s_mhd" => Ok(Variant::SMhd),
            "s_smhd" => Ok(Variant::SSmhd),
            "cm" => Ok(Variant::Cm),
            other => param_err(format!("unknown variant `{other}` (expected s_mean|s_mhd|s_smhd|cm)")),
        }
    }
}

impl ScoredCase {
    /// Map for one of the scored variants; `None` for [`Variant::Cm`].
    pub fn map(&self, variant: Variant) -> Option<&Image2D> {
        match variant {
            Variant::SMean => Some(&self.s_mean),
            Variant::SMhd => Some(&self.s_mhd),
            Variant::SSmhd => Some(&self.s_smhd),
            Variant::Cm => None,
        }
    }
}

/// Scores `x` against a stack of its reconstructions.
///
/// Both MHD maps are smoothed before being multiplied into `1 − SSIM`.
pub fn score_case(x: &Image2D, stack: &ReconstructionStack, cfg: &ScoringConfig) -> Result<ScoredCase> {
    let dist = summarize(stack)?;
    x.check_same_shape(dist.mean())?;
    let sm = s_mean(x, dist.mean(), &cfg.ssim)?;
    let diag = mhd_diag_map(&dist, x, cfg.lambda)?;
    let full = mhd_full_map(&dist, x, cfg.lambda)?;
    let s_mhd = sm.zip_map(&smooth_mhd(&diag, cfg.mhd_smooth_sigma)?, |a, b| a * b)?;
    let s_smhd = sm.zip_map(&smooth_mhd(&full, cfg.mhd_smooth_sigma)?, |a, b| a * b)?;
    Ok(ScoredCase {
        input: x.clone(),
        ground_truth: None,
        s_mean: sm,
        s_mhd,
        s_smhd,
        mhd_scalar_diag: diag.scalar(),
        mhd_scalar_full: full.scalar(),
    })
}

/// Samples `cfg.n_reconstructions` reconstructions of `x` and scores it.
pub fn reconstruct_and_score(
    x: &Image2D,
    rec: &dyn Reconstructor,
    sched: &NoiseSchedule,
    cfg: &ScoringConfig,
) -> Result<ScoredCase> {
    let stack = sample_stack(
        rec,
        x,
        cfg.t_test,
        cfg.n_reconstructions,
        sched,
        cfg.noise_kind,
        cfg.seed,
    )?;
    score_case(x, &stack, cfg)
}

/// Population baseline: smoothed full-covariance MHD map of `x` against a
/// set of healthy images, with no SSIM factor.
pub fn population_cm_score(x: &Image2D, healthy_set: &ReconstructionStack, cfg: &ScoringConfig) -> Result<Image2D> {
    let dist = summarize(healthy_set)?;
    let full = mhd_full_map(&dist, x, cfg.lambda)?;
    smooth_mhd(&full, cfg.mhd_smooth_sigma)
}

/// `true` where `map > threshold`.
pub fn binarize(map: &Image2D, threshold: f64) -> BinaryMask {
    let (h, w) = map.shape();
    BinaryMask::from_fn(h, w, |r, c| map.get(r, c) > threshold)
}

/// Scores each slice of a volume against its own stack; results are in slice order.
pub fn score_volume(
    slices: &[Image2D],
    stacks: &[ReconstructionStack],
    cfg: &ScoringConfig,
) -> Result<Vec<ScoredCase>> {
    if slices.len() != stacks.len() {
        return crate::error::dim_err(format!("{} slices but {} stacks", slices.len(), stacks.len()));
    }
    slices
        .par_iter()
        .zip(stacks.par_iter())
        .map(|(x, s)| score_case(x, s, cfg))
        .collect()
}
