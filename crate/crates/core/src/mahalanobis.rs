//! Pixel-space Mahalanobis distance maps against a pseudo-healthy
//! distribution.
//!
//! The full-covariance path never forms the `D × D` covariance. With the
//! centered factor `C` (`D × N`) the regularized inverse is applied through
//! the Woodbury identity
//!
//! ```text
//! (λI + C·Cᵀ/(N−1))⁻¹ d = (d − C·y) / λ,   (λI_N + CᵀC/(N−1))·y = Cᵀd/(N−1)
//! ```
//!
//! which costs `O(D·N²)` time and `O(D·N)` memory.
//!
//! Per-pixel maps use the contribution `m_k = d_k·(Σ_reg⁻¹ d)_k`. The
//! contributions sum to the squared distance; the map shows `√max(0, m_k)`.
//! On the diagonal path this is the standardized deviation `|d_k|/√(σ²_k+λ)`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{param_err, Error, Result};
use crate::pseudostats::PseudoHealthyDistribution;
use crate::volume::{gaussian_filter, Image2D};

/// Regularizer added to the covariance diagonal.
pub const DEFAULT_LAMBDA: f64 = 1e-5;

/// Largest pixel count the dense oracle will materialize.
pub const DENSE_ORACLE_MAX_DIM: usize = 4096;

// Row-block size for the Gram and projection reductions. Fixed so that the
// summation order (and therefore every bit of the result) does not depend on
// the number of worker threads.
const ROW_BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct MhdResult {
    map: Image2D,
    contributions: Vec<f64>,
    scalar: f64,
    lambda: f64,
}

impl MhdResult {
    fn from_contributions(height: usize, width: usize, contributions: Vec<f64>, lambda: f64) -> Self {
        let total: f64 = contributions.iter().sum();
        let map = contributions.iter().map(|&m| m.max(0.0).sqrt()).collect();
        Self {
            map: Image2D::from_raw(height, width, map),
            scalar: total.max(0.0).sqrt(),
            contributions,
            lambda,
        }
    }

    /// Per-pixel map `√max(0, m_k)`.
    pub fn map(&self) -> &Image2D {
        &self.map
    }

    /// Unclamped per-pixel contributions `m_k`; they sum to `scalar²`.
    pub fn contributions(&self) -> &[f64] {
        &self.contributions
    }

    /// Mahalanobis distance of the whole flattened image.
    pub fn scalar(&self) -> f64 {
        self.scalar
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return param_err(format!("lambda must be positive and finite, got {lambda}"));
    }
    Ok(())
}

fn deviation(dist: &PseudoHealthyDistribution, x: &Image2D) -> Result<Vec<f64>> {
    x.check_same_shape(dist.mean())?;
    Ok(x.as_slice()
        .iter()
        .zip(dist.mean().as_slice())
        .map(|(a, m)| a - m)
        .collect())
}

/// Diagonal-covariance map: each pixel standardized by its own spread.
pub fn mhd_diag_map(dist: &PseudoHealthyDistribution, x: &Image2D, lambda: f64) -> Result<MhdResult> {
    check_lambda(lambda)?;
    let d = deviation(dist, x)?;
    let contributions = d
        .iter()
        .zip(dist.variance().as_slice())
        .map(|(dk, s2)| dk * dk / (s2 + lambda))
        .collect();
    let (h, w) = dist.shape();
    Ok(MhdResult::from_contributions(h, w, contributions, lambda))
}

/// `v = (Σ_full + λI)⁻¹ d` through the low-rank identity.
pub fn woodbury_solve(dist: &PseudoHealthyDistribution, d: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    let dim = dist.dim();
    let n = dist.n();
    if d.len() != dim {
        return Err(Error::Dimension(format!(
            "vector has length {}, distribution has {dim} pixels",
            d.len()
        )));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite deviation vector".into()));
    }
    let cols: Vec<&[f64]> = (0..n).map(|i| dist.centered_column(i)).collect();

    // Gram matrix CᵀC (lower triangle) and Cᵀd, reduced per row block.
    let n_blocks = dim.div_ceil(ROW_BLOCK);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * ROW_BLOCK;
            let hi = (lo + ROW_BLOCK).min(dim);
            let mut gram = vec![0.0; n * n];
            let mut proj = vec![0.0; n];
            for i in 0..n {
                let ci = &cols[i][lo..hi];
                proj[i] = dot(ci, &d[lo..hi]);
                for j in 0..=i {
                    gram[i * n + j] = dot(ci, &cols[j][lo..hi]);
                }
            }
            (gram, proj)
        })
        .collect();

    let scale = 1.0 / (n - 1) as f64;
    let mut system = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for (gram, proj) in &partials {
        for (s, g) in system.iter_mut().zip(gram) {
            *s += g;
        }
        for (r, p) in rhs.iter_mut().zip(proj) {
            *r += p;
        }
    }
    for i in 0..n {
        for j in 0..=i {
            system[i * n + j] *= scale;
        }
        system[i * n + i] += lambda;
        rhs[i] *= scale;
    }
    let y = cholesky_solve(&mut system, n, rhs)?;

    let inv_lambda = 1.0 / lambda;
    let mut v = vec![0.0; dim];
    v.par_chunks_mut(ROW_BLOCK).enumerate().for_each(|(b, out)| {
        let lo = b * ROW_BLOCK;
        for (k, o) in out.iter_mut().enumerate() {
            let row = lo + k;
            let mut acc = d[row];
            for (col, &yi) in cols.iter().zip(&y) {
                acc -= col[row] * yi;
            }
            *o = acc * inv_lambda;
        }
    });
    Ok(v)
}

/// Full-covariance map through [`woodbury_solve`].
pub fn mhd_full_map(dist: &PseudoHealthyDistribution, x: &Image2D, lambda: f64) -> Result<MhdResult> {
    check_lambda(lambda)?;
    let d = deviation(dist, x)?;
    let v = woodbury_solve(dist, &d, lambda)?;
    let contributions: Vec<f64> = d.iter().zip(&v).map(|(a, b)| a * b).collect();
    check_quadratic_form(&d, &contributions)?;
    let (h, w) = dist.shape();
    Ok(MhdResult::from_contributions(h, w, contributions, lambda))
}

fn check_quadratic_form(d: &[f64], contributions: &[f64]) -> Result<()> {
    let q: f64 = contributions.iter().sum();
    let norm2: f64 = d.iter().map(|v| v * v).sum();
    if !q.is_finite() || q < -1e-9 * norm2 {
        return Err(Error::Numeric(format!(
            "quadratic form {q} is negative; covariance solve failed"
        )));
    }
    Ok(())
}

/// Reference path: materializes `Σ_full + λI` and solves it directly.
/// Bounded to [`DENSE_ORACLE_MAX_DIM`] pixels.
pub fn dense_mhd_oracle(dist: &PseudoHealthyDistribution, x: &Image2D, lambda: f64) -> Result<MhdResult> {
    check_lambda(lambda)?;
    let dim = dist.dim();
    if dim > DENSE_ORACLE_MAX_DIM {
        return Err(Error::Guard(format!(
            "dense oracle refuses D = {dim} (limit {DENSE_ORACLE_MAX_DIM})"
        )));
    }
    let d = deviation(dist, x)?;
    let n = dist.n();
    let c = DMatrix::from_column_slice(dim, n, dist.centered());
    let mut cov = &c * c.transpose() / (n - 1) as f64;
    for k in 0..dim {
        cov[(k, k)] += lambda;
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Numeric("dense covariance is not positive definite".into()))?;
    let v = chol.solve(&nalgebra::DVector::from_column_slice(&d));
    let contributions: Vec<f64> = d.iter().zip(v.iter()).map(|(a, b)| a * b).collect();
    check_quadratic_form(&d, &contributions)?;
    let (h, w) = dist.shape();
    Ok(MhdResult::from_contributions(h, w, contributions, lambda))
}

/// Gaussian-smoothed MHD map.
pub fn smooth_mhd(result: &MhdResult, sigma: f64) -> Result<Image2D> {
    gaussian_filter(result.map(), sigma)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators; fixed order, so still deterministic.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = 4 * i;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Solves `A·x = b` for a symmetric positive-definite `A` given by its lower
/// triangle (row-major, `n × n`). `A` is overwritten by its Cholesky factor.
fn cholesky_solve(a: &mut [f64], n: usize, mut b: Vec<f64>) -> Result<Vec<f64>> {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if diag.is_nan() || diag <= 0.0 {
            return Err(Error::Numeric(format!("system is not positive definite at pivot {j}")));
        }
        let l_jj = diag.sqrt();
        a[j * n + j] = l_jj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / l_jj;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(b)
}
