//! `key = value` run configuration.
//!
//! Lines starting with `#` are comments. Pairs are written `a,b`. Unknown
//! keys are rejected.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use mhdmap::{NoiseKind, PerturbationConfig, PhantomConfig, ScoringConfig, SsimParams, SweepMode};

use crate::error::{CliError, CliResult};

/// Environment variable that overrides the `threads` key.
pub const THREADS_ENV: &str = "MHDMAP_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMask {
    All,
    Brain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub cases: usize,
    pub population_size: usize,
    pub phantom: PhantomConfig,
    pub perturbation: PerturbationConfig,
    /// `seed` here is ignored; per-case scoring seeds derive from [`RunConfig::seed`].
    pub scoring: ScoringConfig,
    pub eval_mask: EvalMask,
    pub sweep: SweepMode,
    pub permutation_rounds: usize,
    /// 0 means available parallelism.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            cases: 50,
            population_size: 50,
            phantom: PhantomConfig::default(),
            perturbation: PerturbationConfig::default(),
            scoring: ScoringConfig::default(),
            eval_mask: EvalMask::All,
            sweep: SweepMode::Exact,
            permutation_rounds: 10_000,
            threads: 0,
        }
    }
}

/// Keys describing how a phantom dataset was generated; recorded in manifests.
pub const DATASET_KEYS: &[&str] = &[
    "size",
    "texture_frequency",
    "texture_amplitude",
    "lesion_radius_range",
    "lesion_contrast_range",
    "ellipse_axes_fraction",
    "bias_field_frequency",
    "bias_amplitude",
    "pixel_noise_sigma",
    "symmetry_coupling",
    "bias_rank",
    "systematic_fraction",
];

pub const KEYS: &[&str] = &[
    "seed",
    "cases",
    "population_size",
    "size",
    "texture_frequency",
    "texture_amplitude",
    "lesion_radius_range",
    "lesion_contrast_range",
    "ellipse_axes_fraction",
    "bias_field_frequency",
    "bias_amplitude",
    "pixel_noise_sigma",
    "symmetry_coupling",
    "bias_rank",
    "systematic_fraction",
    "n_reconstructions",
    "t_test",
    "lambda",
    "mhd_smooth_sigma",
    "ssim_sigma",
    "ssim_data_range",
    "noise_kind",
    "eval_mask",
    "sweep",
    "permutation_rounds",
    "threads",
];

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse `{value}`")))
}

fn parse_pair(key: &str, value: &str) -> CliResult<(f64, f64)> {
    let (a, b) = value
        .split_once(',')
        .ok_or_else(|| CliError::Config(format!("{key}: expected `a,b`, got `{value}`")))?;
    Ok((parse(key, a.trim())?, parse(key, b.trim())?))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "cases" => self.cases = parse(key, v)?,
            "population_size" => self.population_size = parse(key, v)?,
            "size" => self.phantom.size = parse(key, v)?,
            "texture_frequency" => self.phantom.texture_frequency = parse(key, v)?,
            "texture_amplitude" => self.phantom.texture_amplitude = parse(key, v)?,
            "lesion_radius_range" => self.phantom.lesion_radius_range = parse_pair(key, v)?,
            "lesion_contrast_range" => self.phantom.lesion_contrast_range = parse_pair(key, v)?,
            "ellipse_axes_fraction" => self.phantom.ellipse_axes_fraction = parse_pair(key, v)?,
            "bias_field_frequency" => self.perturbation.bias_field_frequency = parse(key, v)?,
            "bias_amplitude" => self.perturbation.bias_amplitude = parse(key, v)?,
            "pixel_noise_sigma" => self.perturbation.pixel_noise_sigma = parse(key, v)?,
            "symmetry_coupling" => self.perturbation.symmetry_coupling = parse(key, v)?,
            "bias_rank" => self.perturbation.bias_rank = parse(key, v)?,
            "systematic_fraction" => self.perturbation.systematic_fraction = parse(key, v)?,
            "n_reconstructions" => self.scoring.n_reconstructions = parse(key, v)?,
            "t_test" => self.scoring.t_test = parse(key, v)?,
            "lambda" => self.scoring.lambda = parse(key, v)?,
            "mhd_smooth_sigma" => self.scoring.mhd_smooth_sigma = parse(key, v)?,
            "ssim_sigma" => self.scoring.ssim.kernel_sigma = parse(key, v)?,
            "ssim_data_range" => {
                let range: f64 = parse(key, v)?;
                self.scoring.ssim = SsimParams {
                    kernel_sigma: self.scoring.ssim.kernel_sigma,
                    ..SsimParams::for_range(range)
                };
            }
            "noise_kind" => {
                self.scoring.noise_kind = NoiseKind::from_str(v).map_err(|e| CliError::Config(e.to_string()))?
            }
            "eval_mask" => {
                self.eval_mask = match v {
                    "all" => EvalMask::All,
                    "brain" => EvalMask::Brain,
                    _ => return Err(CliError::Config(format!("eval_mask: expected all|brain, got `{v}`"))),
                }
            }
            "sweep" => {
                self.sweep = match v {
                    "exact" => SweepMode::Exact,
                    "quantile" => SweepMode::Quantile,
                    _ => return Err(CliError::Config(format!("sweep: expected exact|quantile, got `{v}`"))),
                }
            }
            "permutation_rounds" => self.permutation_rounds = parse(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let pair = |(a, b): (f64, f64)| format!("{a},{b}");
        Some(match key {
            "seed" => self.seed.to_string(),
            "cases" => self.cases.to_string(),
            "population_size" => self.population_size.to_string(),
            "size" => self.phantom.size.to_string(),
            "texture_frequency" => self.phantom.texture_frequency.to_string(),
            "texture_amplitude" => self.phantom.texture_amplitude.to_string(),
            "lesion_radius_range" => pair(self.phantom.lesion_radius_range),
            "lesion_contrast_range" => pair(self.phantom.lesion_contrast_range),
            "ellipse_axes_fraction" => pair(self.phantom.ellipse_axes_fraction),
            "bias_field_frequency" => self.perturbation.bias_field_frequency.to_string(),
            "bias_amplitude" => self.perturbation.bias_amplitude.to_string(),
            "pixel_noise_sigma" => self.perturbation.pixel_noise_sigma.to_string(),
            "symmetry_coupling" => self.perturbation.symmetry_coupling.to_string(),
            "bias_rank" => self.perturbation.bias_rank.to_string(),
            "systematic_fraction" => self.perturbation.systematic_fraction.to_string(),
            "n_reconstructions" => self.scoring.n_reconstructions.to_string(),
            "t_test" => self.scoring.t_test.to_string(),
            "lambda" => self.scoring.lambda.to_string(),
            "mhd_smooth_sigma" => self.scoring.mhd_smooth_sigma.to_string(),
            "ssim_sigma" => self.scoring.ssim.kernel_sigma.to_string(),
            "ssim_data_range" => self.scoring.ssim.data_range.to_string(),
            "noise_kind" => self.scoring.noise_kind.to_string(),
            "eval_mask" => match self.eval_mask {
                EvalMask::All => "all".into(),
                EvalMask::Brain => "brain".into(),
            },
            "sweep" => match self.sweep {
                SweepMode::Exact => "exact".into(),
                SweepMode::Quantile => "quantile".into(),
            },
            "permutation_rounds" => self.permutation_rounds.to_string(),
            "threads" => self.threads.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(k.trim(), v).map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("line {}: {msg}", i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Every key, one `key = value` per line, in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for k in KEYS {
            let _ = writeln!(out, "{k} = {}", self.get(k).expect("known key"));
        }
        out
    }

    pub fn validate(&self) -> CliResult<()> {
        let cfg_err = |e: mhdmap::Error| CliError::Config(e.to_string());
        self.phantom.validate().map_err(cfg_err)?;
        self.perturbation.validate().map_err(cfg_err)?;
        let s = &self.scoring;
        if s.n_reconstructions < 2 {
            return Err(CliError::Config("n_reconstructions must be at least 2".into()));
        }
        if s.t_test == 0 || s.t_test > mhdmap::diffusion::DEFAULT_T_MAX {
            return Err(CliError::Config(format!(
                "t_test must lie in 1..={}",
                mhdmap::diffusion::DEFAULT_T_MAX
            )));
        }
        if !(s.lambda > 0.0 && s.lambda.is_finite()) {
            return Err(CliError::Config("lambda must be positive".into()));
        }
        if !(s.mhd_smooth_sigma > 0.0 && s.ssim.kernel_sigma > 0.0 && s.ssim.data_range > 0.0) {
            return Err(CliError::Config(
                "smoothing sigmas and SSIM data range must be positive".into(),
            ));
        }
        if self.cases == 0 {
            return Err(CliError::Config("cases must be at least 1".into()));
        }
        if self.population_size < 2 {
            return Err(CliError::Config("population_size must be at least 2".into()));
        }
        if self.permutation_rounds == 0 {
            return Err(CliError::Config("permutation_rounds must be at least 1".into()));
        }
        Ok(())
    }

    /// Thread count after the environment override; 0 = available parallelism.
    pub fn effective_threads(&self) -> CliResult<usize> {
        match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => parse(THREADS_ENV, v.trim()),
            _ => Ok(self.threads),
        }
    }
}
