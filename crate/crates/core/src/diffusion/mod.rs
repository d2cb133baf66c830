//! Closed-form DDPM forward process, single-step reverse math, single-shot
//! x₀ estimation and the reconstructor contract used to sample
//! pseudo-healthy stacks.
//!
//! No denoising network lives here. Noise predictions are passed in as data
//! (or through a [`NoisePredictor`]), which keeps the process math testable
//! with analytic predictors.

mod schedule;
mod simplex;

pub use schedule::{NoiseSchedule, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_T_MAX};
pub use simplex::{simplex_noise, SimplexParams};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{param_err, Error, Result};
use crate::seed::{derive_seed, stream_rng};
use crate::volume::{Image2D, ReconstructionStack};

/// Noise family used to corrupt inputs before reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    Gaussian,
    Simplex,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "simplex" => Ok(Self::Simplex),
            other => param_err(format!("unknown noise kind `{other}` (expected gaussian|simplex)")),
        }
    }
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Simplex => "simplex",
        })
    }
}

/// Draws one unit-variance noise field of the given kind.
pub fn draw_noise(kind: NoiseKind, height: usize, width: usize, seed: u64) -> Image2D {
    match kind {
        NoiseKind::Gaussian => gaussian_noise(height, width, seed),
        NoiseKind::Simplex => simplex_noise(height, width, SimplexParams::with_seed(seed)),
    }
}

pub fn gaussian_noise(height: usize, width: usize, seed: u64) -> Image2D {
    let mut rng = stream_rng(seed, 0x6A55);
    Image2D::from_fn(height, width, |_, _| StandardNormal.sample(&mut rng))
}

/// x_t = √ᾱ_t·x₀ + √(1−ᾱ_t)·ε
pub fn forward_noise(x0: &Image2D, t: usize, sched: &NoiseSchedule, eps: &Image2D) -> Result<Image2D> {
    sched.check_t(t)?;
    let a = sched.alpha_bar(t);
    let (sa, sn) = (a.sqrt(), (1.0 - a).sqrt());
    x0.zip_map(eps, |x, e| sa * x + sn * e)
}

/// ‖ε − ε̂‖², summed over all pixels.
pub fn simple_loss(eps: &Image2D, eps_hat: &Image2D) -> Result<f64> {
    eps.check_same_shape(eps_hat)?;
    Ok(eps
        .as_slice()
        .iter()
        .zip(eps_hat.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// One reverse step x_t → x_{t−1} with the fixed posterior variance.
///
/// `z` is the caller's standard-normal draw; it must be present for `t > 1`
/// and is ignored at `t = 1`, where the variance is zero.
pub fn denoise_step(
    xt: &Image2D,
    t: usize,
    eps_hat: &Image2D,
    sched: &NoiseSchedule,
    z: Option<&Image2D>,
) -> Result<Image2D> {
    sched.check_t(t)?;
    let beta = sched.beta(t);
    let coef = beta / (1.0 - sched.alpha_bar(t)).sqrt();
    let inv_sqrt_alpha = 1.0 / (1.0 - beta).sqrt();
    let mu = xt.zip_map(eps_hat, |x, e| inv_sqrt_alpha * (x - coef * e))?;
    if t == 1 {
        return Ok(mu);
    }
    let Some(z) = z else {
        return param_err(format!("denoise_step at t={t} needs a noise field z"));
    };
    let sigma = sched.posterior_variance(t).sqrt();
    mu.zip_map(z, |m, n| m + sigma * n)
}

/// Single-shot estimate x̂₀ = (x_t − √(1−ᾱ_t)·ε̂)/√ᾱ_t.
pub fn estimate_x0(xt: &Image2D, t: usize, eps_hat: &Image2D, sched: &NoiseSchedule) -> Result<Image2D> {
    sched.check_t(t)?;
    let a = sched.alpha_bar(t);
    let (sa, sn) = (a.sqrt(), (1.0 - a).sqrt());
    xt.zip_map(eps_hat, |x, e| (x - sn * e) / sa)
}

/// Produces one pseudo-healthy reconstruction from a noised input.
///
/// Implementations must return an image of the input's shape, be callable
/// concurrently, and be deterministic for a given `seed`.
pub trait Reconstructor: Send + Sync {
    fn reconstruct(&self, noised: &Image2D, t: usize, sched: &NoiseSchedule, seed: u64) -> Result<Image2D>;
}

impl<F> Reconstructor for F
where
    F: Fn(&Image2D, usize, &NoiseSchedule, u64) -> Result<Image2D> + Send + Sync,
{
    fn reconstruct(&self, noised: &Image2D, t: usize, sched: &NoiseSchedule, seed: u64) -> Result<Image2D> {
        self(noised, t, sched, seed)
    }
}

/// Predicts the noise component ε̂ of a noised image.
pub trait NoisePredictor: Send + Sync {
    fn predict(&self, xt: &Image2D, t: usize, sched: &NoiseSchedule) -> Result<Image2D>;
}

/// Reconstructs by one call to the predictor followed by [`estimate_x0`].
pub struct SingleShot<P>(pub P);

impl<P: NoisePredictor> Reconstructor for SingleShot<P> {
    fn reconstruct(&self, noised: &Image2D, t: usize, sched: &NoiseSchedule, _seed: u64) -> Result<Image2D> {
        let eps_hat = self.0.predict(noised, t, sched)?;
        estimate_x0(noised, t, &eps_hat, sched)
    }
}

/// Analytic predictor that attributes everything except `target` to noise,
/// so single-shot estimation returns `target` exactly.
pub struct TargetPredictor {
    pub target: Image2D,
}

impl NoisePredictor for TargetPredictor {
    fn predict(&self, xt: &Image2D, t: usize, sched: &NoiseSchedule) -> Result<Image2D> {
        sched.check_t(t)?;
        let a = sched.alpha_bar(t);
        let (sa, sn) = (a.sqrt(), (1.0 - a).sqrt());
        xt.zip_map(&self.target, |x, g| (x - sa * g) / sn)
    }
}

/// Samples `n` reconstructions of `x0`, each from a freshly noised copy at `t_test`.
///
/// Draw `i` uses noise seeded by `derive_seed(seed, i)`, so the stack does not
/// depend on how the reconstructions are scheduled across threads.
pub fn sample_stack(
    rec: &dyn Reconstructor,
    x0: &Image2D,
    t_test: usize,
    n: usize,
    sched: &NoiseSchedule,
    noise_kind: NoiseKind,
    seed: u64,
) -> Result<ReconstructionStack> {
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    sched.check_t(t_test)?;
    let (h, w) = x0.shape();
    let images = (0..n)
        .into_par_iter()
        .map(|i| {
            let draw_seed = derive_seed(seed, i as u64);
            let eps = draw_noise(noise_kind, h, w, draw_seed);
            let xt = forward_noise(x0, t_test, sched, &eps)?;
            let wrap = |e: Error| Error::Reconstructor {
                index: i,
                source: Box::new(e),
            };
            let out = rec
                .reconstruct(&xt, t_test, sched, derive_seed(draw_seed, 1))
                .map_err(wrap)?;
            if out.shape() != (h, w) {
                return Err(wrap(Error::Dimension(format!(
                    "reconstruction has shape {:?}, input is {:?}",
                    out.shape(),
                    (h, w)
                ))));
            }
            if out.as_slice().iter().any(|v| !v.is_finite()) {
                return Err(wrap(Error::Numeric("non-finite reconstruction".into())));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    ReconstructionStack::new(images)
}
