//! Synthetic brain-like phantoms with exact lesion ground truth, and oracle
//! reconstructors whose imperfections are spatially correlated.
//!
//! The oracle reconstructor stands in for a trained generative model. Each
//! reconstruction is the healthy image plus a smooth bias field and white
//! noise. The bias fields of one case live in a small case-specific subspace
//! (a handful of band-limited basis fields, optionally mirror-coupled across
//! the vertical midline) and share a nonzero case-specific offset, so the
//! mean reconstruction is systematically off in the same directions along
//! which the reconstructions vary.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::diffusion::{simplex_noise, NoiseSchedule, Reconstructor, SimplexParams};
use crate::error::{param_err, Error, Result};
use crate::seed::{derive_seed, stream_rng};
use crate::volume::{BinaryMask, Image2D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomConfig {
    /// Image side length (H = W).
    pub size: usize,
    /// Texture base frequency, cycles/pixel.
    pub texture_frequency: f64,
    pub texture_amplitude: f64,
    /// Lesion semi-axis range in pixels.
    pub lesion_radius_range: (f64, f64),
    /// Absolute lesion contrast range; the sign is drawn per case.
    pub lesion_contrast_range: (f64, f64),
    /// Brain ellipse semi-axes (vertical, horizontal) as fractions of half the size.
    pub ellipse_axes_fraction: (f64, f64),
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            size: 64,
            texture_frequency: 1.0 / 16.0,
            texture_amplitude: 0.15,
            lesion_radius_range: (3.0, 9.0),
            lesion_contrast_range: (0.25, 0.5),
            ellipse_axes_fraction: (0.8, 0.65),
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < 16 {
            return param_err(format!("phantom size must be at least 16, got {}", self.size));
        }
        let (r0, r1) = self.lesion_radius_range;
        let (c0, c1) = self.lesion_contrast_range;
        let (a0, a1) = self.ellipse_axes_fraction;
        if !(r0 > 0.0 && r0 <= r1) || !(c0 >= 0.0 && c0 <= c1) {
            return param_err("lesion radius and contrast ranges must be nonempty and nonnegative");
        }
        if !(a0 > 0.0 && a0 <= 1.0 && a1 > 0.0 && a1 <= 1.0) {
            return param_err("ellipse axis fractions must lie in (0, 1]");
        }
        if !(self.texture_frequency > 0.0 && self.texture_amplitude >= 0.0) {
            return param_err("texture frequency must be positive and amplitude nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationConfig {
    /// Base frequency of the bias basis fields, cycles/pixel.
    pub bias_field_frequency: f64,
    /// Per-pixel standard deviation scale of the bias fields.
    pub bias_amplitude: f64,
    pub pixel_noise_sigma: f64,
    /// 0 = independent halves, 1 = exactly mirror-symmetric bias.
    pub symmetry_coupling: f64,
    /// Number of basis fields spanning a case's bias subspace.
    pub bias_rank: usize,
    /// Scale of the case-specific offset shared by all reconstructions,
    /// relative to the reconstruction-to-reconstruction spread.
    pub systematic_fraction: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            bias_field_frequency: 1.0 / 32.0,
            bias_amplitude: 0.05,
            pixel_noise_sigma: 0.01,
            symmetry_coupling: 0.5,
            bias_rank: 6,
            systematic_fraction: 1.0,
        }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bias_amplitude >= 0.0 && self.pixel_noise_sigma >= 0.0 && self.systematic_fraction >= 0.0) {
            return param_err("perturbation amplitudes must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.symmetry_coupling) {
            return param_err("symmetry coupling must lie in [0, 1]");
        }
        if self.bias_field_frequency.is_nan() || self.bias_field_frequency <= 0.0 || self.bias_rank == 0 {
            return param_err("bias field frequency must be positive and rank at least 1");
        }
        Ok(())
    }
}

fn ellipse_norm(cfg: &PhantomConfig, r: usize, c: usize) -> f64 {
    let half = cfg.size as f64 / 2.0;
    let center = (cfg.size as f64 - 1.0) / 2.0;
    let (fy, fx) = cfg.ellipse_axes_fraction;
    let dy = (r as f64 - center) / (fy * half);
    let dx = (c as f64 - center) / (fx * half);
    dx * dx + dy * dy
}

/// Healthy phantom and its brain mask.
pub fn gen_healthy(cfg: &PhantomConfig, seed: u64) -> Result<(Image2D, BinaryMask)> {
    cfg.validate()?;
    let n = cfg.size;
    let texture = simplex_noise(
        n,
        n,
        SimplexParams {
            octaves: 2,
            persistence: 0.5,
            lacunarity: 2.0,
            base_frequency: cfg.texture_frequency,
            seed: derive_seed(seed, 1),
        },
    );
    let brain = BinaryMask::from_fn(n, n, |r, c| ellipse_norm(cfg, r, c) <= 1.0);
    let img = Image2D::from_fn(n, n, |r, c| {
        if brain.get(r, c) {
            (0.5 + cfg.texture_amplitude * texture.get(r, c)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    });
    Ok((img, brain))
}

const LESION_EDGE_WIDTH: f64 = 1.5;
const LESION_SUPPORT_WIDTHS: f64 = 4.0;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Adds one smooth elliptical lesion fully inside the brain.
///
/// The profile is a sigmoid of the approximate signed distance to the lesion
/// boundary, rescaled to reach exactly zero four edge widths outside it.
/// The returned mask marks pixels whose added contrast exceeds half its peak.
pub fn inject_lesion(
    img: &Image2D,
    brain: &BinaryMask,
    cfg: &PhantomConfig,
    seed: u64,
) -> Result<(Image2D, BinaryMask)> {
    cfg.validate()?;
    if img.shape() != brain.shape() {
        return Err(Error::Dimension("image and brain mask shapes differ".into()));
    }
    if brain.count() == 0 {
        return Err(Error::Generation("brain mask is empty".into()));
    }
    let (h, w) = img.shape();
    let mut rng = stream_rng(seed, 2);
    let (r0, r1) = cfg.lesion_radius_range;
    let (c0, c1) = cfg.lesion_contrast_range;
    let floor = sigmoid(-LESION_SUPPORT_WIDTHS);

    for _attempt in 0..1000 {
        let ry = r0 + (r1 - r0) * rng.random::<f64>();
        let rx = r0 + (r1 - r0) * rng.random::<f64>();
        let cy = rng.random::<f64>() * (h - 1) as f64;
        let cx = rng.random::<f64>() * (w - 1) as f64;
        let scale = (rx + ry) / 2.0;
        let margin = LESION_SUPPORT_WIDTHS * LESION_EDGE_WIDTH;

        let profile = Image2D::from_fn(h, w, |r, c| {
            let dy = (r as f64 - cy) / ry;
            let dx = (c as f64 - cx) / rx;
            let dist = (1.0 - (dx * dx + dy * dy).sqrt()) * scale;
            if dist <= -margin {
                0.0
            } else {
                ((sigmoid(dist / LESION_EDGE_WIDTH) - floor) / (1.0 - floor)).max(0.0)
            }
        });
        let inside = profile
            .as_slice()
            .iter()
            .zip(brain.as_slice())
            .all(|(&p, &b)| p == 0.0 || b);
        if !inside {
            continue;
        }
        let peak = profile.max();
        if peak <= 0.0 {
            continue;
        }
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let contrast = sign * (c0 + (c1 - c0) * rng.random::<f64>());
        let lesioned = img.zip_map(
            &profile,
            |v, p| if p > 0.0 { (v + contrast * p).clamp(0.0, 1.0) } else { v },
        )?;
        let mask = BinaryMask::new(h, w, profile.as_slice().iter().map(|&p| p > 0.5 * peak).collect())?;
        return Ok((lesioned, mask));
    }
    Err(Error::Generation(format!(
        "could not place a lesion of radius {r0}..{r1} inside the brain"
    )))
}

/// Reconstructor that returns `healthy + bias_i + noise_i` inside the brain
/// and ignores its noised input.
#[derive(Debug, Clone)]
pub struct OracleReconstructor {
    healthy: Image2D,
    brain: BinaryMask,
    pert: PerturbationConfig,
    basis: Vec<Image2D>,
    offset: Vec<f64>,
}

impl OracleReconstructor {
    pub fn healthy(&self) -> &Image2D {
        &self.healthy
    }

    /// Smooth bias field for coefficient vector `coef` (length = rank).
    fn bias(&self, coef: &[f64]) -> Image2D {
        let (h, w) = self.healthy.shape();
        let mut out = vec![0.0; h * w];
        for (field, &a) in self.basis.iter().zip(coef) {
            for (o, &f) in out.iter_mut().zip(field.as_slice()) {
                *o += a * f;
            }
        }
        Image2D::from_raw(h, w, out)
    }
}

/// Builds the oracle reconstructor for one case. `seed` fixes the case's bias
/// subspace and systematic offset; per-call randomness comes from the seed
/// passed to [`Reconstructor::reconstruct`].
pub fn make_oracle_reconstructor(
    healthy: &Image2D,
    brain: &BinaryMask,
    pert: &PerturbationConfig,
    seed: u64,
) -> Result<OracleReconstructor> {
    pert.validate()?;
    if healthy.shape() != brain.shape() {
        return Err(Error::Dimension("healthy image and brain mask shapes differ".into()));
    }
    let (h, w) = healthy.shape();
    let s = pert.symmetry_coupling;
    let basis = (0..pert.bias_rank)
        .map(|j| {
            let field = simplex_noise(
                h,
                w,
                SimplexParams {
                    octaves: 2,
                    persistence: 0.5,
                    lacunarity: 2.0,
                    base_frequency: pert.bias_field_frequency,
                    seed: derive_seed(seed, 100 + j as u64),
                },
            );
            let mirror = field.mirrored();
            // (1−s)·b + s·sym(b), sym(b) = (b + mirror(b))/2
            let mut coupled = field
                .zip_map(&mirror, |b, m| (1.0 - s) * b + s * 0.5 * (b + m))
                .expect("same shape");
            let sd = (coupled.as_slice().iter().map(|v| v * v).sum::<f64>() / coupled.len() as f64).sqrt();
            if sd > 0.0 {
                coupled = coupled.map(|v| v / sd);
            }
            coupled
        })
        .collect();
    let mut rng = stream_rng(seed, 200);
    let coef_scale = pert.bias_amplitude / (pert.bias_rank as f64).sqrt();
    let offset = (0..pert.bias_rank)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * coef_scale * pert.systematic_fraction
        })
        .collect();
    Ok(OracleReconstructor {
        healthy: healthy.clone(),
        brain: brain.clone(),
        pert: *pert,
        basis,
        offset,
    })
}

impl Reconstructor for OracleReconstructor {
    fn reconstruct(&self, noised: &Image2D, _t: usize, _sched: &NoiseSchedule, seed: u64) -> Result<Image2D> {
        noised.check_same_shape(&self.healthy)?;
        let mut rng = stream_rng(seed, 300);
        let coef_scale = self.pert.bias_amplitude / (self.pert.bias_rank as f64).sqrt();
        let coef: Vec<f64> = self
            .offset
            .iter()
            .map(|&o| {
                let z: f64 = StandardNormal.sample(&mut rng);
                o + z * coef_scale
            })
            .collect();
        let bias = self.bias(&coef);
        let sigma = self.pert.pixel_noise_sigma;
        let (h, w) = self.healthy.shape();
        let out = (0..h * w)
            .map(|k| {
                let base = self.healthy.as_slice()[k];
                if !self.brain.as_slice()[k] {
                    return base;
                }
                let z: f64 = StandardNormal.sample(&mut rng);
                (base + bias.as_slice()[k] + sigma * z).clamp(0.0, 1.0)
            })
            .collect();
        Ok(Image2D::from_raw(h, w, out))
    }
}

/// One generated evaluation case.
#[derive(Debug, Clone)]
pub struct PhantomCase {
    pub seed: u64,
    pub healthy: Image2D,
    pub brain: BinaryMask,
    pub image: Image2D,
    pub lesion: BinaryMask,
    /// Seed that rebuilds `reconstructor` from `healthy` and `brain`.
    pub reconstructor_seed: u64,
    pub reconstructor: OracleReconstructor,
}

/// Seed of case `index` in a dataset generated from `seed`.
pub fn case_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

pub fn gen_case(cfg: &PhantomConfig, pert: &PerturbationConfig, seed: u64) -> Result<PhantomCase> {
    let (healthy, brain) = gen_healthy(cfg, derive_seed(seed, 10))?;
    let (image, lesion) = inject_lesion(&healthy, &brain, cfg, derive_seed(seed, 11))?;
    let reconstructor_seed = derive_seed(seed, 12);
    let reconstructor = make_oracle_reconstructor(&healthy, &brain, pert, reconstructor_seed)?;
    Ok(PhantomCase {
        seed,
        healthy,
        brain,
        image,
        lesion,
        reconstructor_seed,
        reconstructor,
    })
}

/// `n_cases` independent cases with seeds derived from `(seed, index)`.
pub fn gen_dataset(
    cfg: &PhantomConfig,
    pert: &PerturbationConfig,
    n_cases: usize,
    seed: u64,
) -> Result<Vec<PhantomCase>> {
    if n_cases == 0 {
        return param_err("dataset needs at least one case");
    }
    use rayon::prelude::*;
    (0..n_cases)
        .into_par_iter()
        .map(|i| gen_case(cfg, pert, case_seed(seed, i)))
        .collect()
}

/// Healthy reference population for the population-covariance baseline.
/// Seeds are drawn from a stream disjoint from the case seeds.
pub fn gen_population(cfg: &PhantomConfig, k: usize, seed: u64) -> Result<Vec<Image2D>> {
    (0..k)
        .map(|i| gen_healthy(cfg, derive_seed(derive_seed(seed, u64::MAX), i as u64)).map(|(img, _)| img))
        .collect()
}
