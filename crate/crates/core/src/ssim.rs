//! Pixel-wise structural similarity with a Gaussian window.

use crate::error::{param_err, Result};
use crate::volume::{convolve_separable, gaussian_kernel1d, Image2D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub kernel_sigma: f64,
    pub c1: f64,
    pub c2: f64,
    pub data_range: f64,
}

impl SsimParams {
    /// Standard stabilizers `(0.01·L)²` and `(0.03·L)²` for data range `L`.
    pub fn for_range(data_range: f64) -> Self {
        Self {
            kernel_sigma: 1.0,
            c1: (0.01 * data_range).powi(2),
            c2: (0.03 * data_range).powi(2),
            data_range,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return param_err("SSIM stabilizers must be positive");
        }
        if self.kernel_sigma.is_nan() || self.kernel_sigma <= 0.0 {
            return param_err("SSIM kernel sigma must be positive");
        }
        Ok(())
    }
}

impl Default for SsimParams {
    fn default() -> Self {
        Self::for_range(1.0)
    }
}

/// Local SSIM at every pixel, clamped to `[-1, 1]`.
pub fn ssim_map(x: &Image2D, y: &Image2D, params: &SsimParams) -> Result<Image2D> {
    params.validate()?;
    x.check_same_shape(y)?;
    let taps = gaussian_kernel1d(params.kernel_sigma)?;
    let blur = |img: &Image2D| convolve_separable(img, &taps);

    let mu_x = blur(x);
    let mu_y = blur(y);
    let xx = blur(&x.map(|v| v * v));
    let yy = blur(&y.map(|v| v * v));
    let xy = blur(&x.zip_map(y, |a, b| a * b)?);

    let (c1, c2) = (params.c1, params.c2);
    let (h, w) = x.shape();
    let out = (0..x.len())
        .map(|k| {
            let mx = mu_x.as_slice()[k];
            let my = mu_y.as_slice()[k];
            let vx = xx.as_slice()[k] - mx * mx;
            let vy = yy.as_slice()[k] - my * my;
            let cov = xy.as_slice()[k] - mx * my;
            let s = ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            s.clamp(-1.0, 1.0)
        })
        .collect();
    Ok(Image2D::from_raw(h, w, out))
}

/// Inverted SSIM anomaly map `1 − SSIM(x, μ)`, in `[0, 2]`.
pub fn s_mean(x: &Image2D, mu: &Image2D, params: &SsimParams) -> Result<Image2D> {
    Ok(ssim_map(x, mu, params)?.map(|s| 1.0 - s))
}
