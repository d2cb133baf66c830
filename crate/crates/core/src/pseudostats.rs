//! Pseudo-healthy distribution of a reconstruction stack: mean image,
//! unbiased per-pixel variance and the centered deviation matrix that
//! factors the full pixel covariance.

use crate::error::{Error, Result};
use crate::volume::{Image2D, ReconstructionStack};

/// Summary of `N` reconstructions over `D = H·W` pixels.
///
/// The full covariance `Σ = C·Cᵀ/(N−1)` is never materialized; only the
/// `D × N` factor `C` is kept, stored column-major so that column `i`
/// (reconstruction `i` minus the mean) is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoHealthyDistribution {
    mean: Image2D,
    variance: Image2D,
    centered: Vec<f64>,
    n: usize,
}

impl PseudoHealthyDistribution {
    pub fn mean(&self) -> &Image2D {
        &self.mean
    }

    pub fn variance(&self) -> &Image2D {
        &self.variance
    }

    /// Number of reconstructions `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Pixel count `D`.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mean.shape()
    }

    /// Column `i` of the centered matrix, length `D`.
    pub fn centered_column(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.centered[i * d..(i + 1) * d]
    }

    /// The whole `D × N` centered matrix, column-major.
    pub fn centered(&self) -> &[f64] {
        &self.centered
    }
}

/// Two-pass mean-then-center summary of `stack`.
pub fn summarize(stack: &ReconstructionStack) -> Result<PseudoHealthyDistribution> {
    let n = stack.n();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let (h, w) = stack.shape();
    let d = h * w;
    let images = stack.images();

    let mut mean = vec![0.0; d];
    for img in images {
        for (m, &v) in mean.iter_mut().zip(img.as_slice()) {
            *m += v;
        }
    }
    let inv_n = 1.0 / n as f64;
    mean.iter_mut().for_each(|m| *m *= inv_n);

    let mut centered = Vec::with_capacity(d * n);
    for img in images {
        centered.extend(img.as_slice().iter().zip(&mean).map(|(v, m)| v - m));
    }

    let mut variance = vec![0.0; d];
    for col in centered.chunks_exact(d) {
        for (s, c) in variance.iter_mut().zip(col) {
            *s += c * c;
        }
    }
    let inv_dof = 1.0 / (n - 1) as f64;
    variance.iter_mut().for_each(|s| *s *= inv_dof);

    Ok(PseudoHealthyDistribution {
        mean: Image2D::from_raw(h, w, mean),
        variance: Image2D::from_raw(h, w, variance),
        centered,
        n,
    })
}
