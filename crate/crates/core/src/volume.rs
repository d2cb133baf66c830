//! Dense single-channel scalar fields, binary masks and separable Gaussian
//! filtering.
//!
//! Images are stored row-major (row index slowest) in 64-bit floats.

use crate::error::{dim_err, param_err, Error, Result};

/// A 2D scalar field of `height × width` pixels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image2D {
    /// Wraps `data` as an image, checking its length and that every value is finite.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return dim_err(format!("image dimensions must be positive, got {height}x{width}"));
        }
        if data.len() != height * width {
            return dim_err(format!(
                "expected {} values for a {height}x{width} image, got {}",
                height * width,
                data.len()
            ));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite value at index {k}")));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    /// Builds an image by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { height, width, data }
    }

    // Internal constructor for buffers already known to have the right length.
    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise combination of two images of the same shape.
    pub fn zip_map(&self, other: &Image2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self::from_raw(
            self.height,
            self.width,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    pub fn check_same_shape(&self, other: &Image2D) -> Result<()> {
        if self.shape() != other.shape() {
            return dim_err(format!(
                "shape {}x{} does not match {}x{}",
                self.height, self.width, other.height, other.width
            ));
        }
        Ok(())
    }

    /// Mirror image across the vertical midline (column `c` ↔ `width-1-c`).
    pub fn mirrored(&self) -> Self {
        Self::from_fn(self.height, self.width, |r, c| self.get(r, self.width - 1 - c))
    }

    /// Row-major vector view, `k = row * width + col`.
    pub fn flatten(&self) -> Vec<f64> {
        self.data.clone()
    }
}

/// Inverse of [`Image2D::flatten`].
pub fn reshape(v: &[f64], height: usize, width: usize) -> Result<Image2D> {
    if v.len() != height * width {
        return dim_err(format!("cannot reshape {} values into {height}x{width}", v.len()));
    }
    Image2D::new(height, width, v.to_vec())
}

pub fn flatten(img: &Image2D) -> Vec<f64> {
    img.flatten()
}

/// Stack of `S` images sharing one `H × W` shape, processed slice-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    height: usize,
    width: usize,
    slices: Vec<Image2D>,
}

impl Volume3D {
    pub fn new(slices: Vec<Image2D>) -> Result<Self> {
        let Some(first) = slices.first() else {
            return dim_err("a volume needs at least one slice");
        };
        let (height, width) = first.shape();
        for (i, s) in slices.iter().enumerate() {
            if s.shape() != (height, width) {
                return dim_err(format!(
                    "slice {i} has shape {:?}, expected {:?}",
                    s.shape(),
                    (height, width)
                ));
            }
        }
        Ok(Self { height, width, slices })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn slices(&self) -> &[Image2D] {
        &self.slices
    }

    pub fn into_slices(self) -> Vec<Image2D> {
        self.slices
    }
}

/// One bit per pixel; `true` marks foreground (anomalous or in-brain).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return dim_err(format!(
                "mask of {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            ));
        }
        Ok(Self { height, width, data })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.shape() == other.shape() && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    /// 0/1 valued image.
    pub fn to_image(&self) -> Image2D {
        Image2D::from_raw(
            self.height,
            self.width,
            self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }

    /// Mean (row, col) of the foreground, or `None` for an empty mask.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sr, mut sc, mut n) = (0.0, 0.0, 0usize);
        for r in 0..self.height {
            for c in 0..self.width {
                if self.get(r, c) {
                    sr += r as f64;
                    sc += c as f64;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sr / n as f64, sc / n as f64))
    }
}

/// `N` reconstructions of one input slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionStack {
    images: Vec<Image2D>,
}

impl ReconstructionStack {
    pub fn new(images: Vec<Image2D>) -> Result<Self> {
        let Some(first) = images.first() else {
            return dim_err("reconstruction stack is empty");
        };
        let shape = first.shape();
        if let Some(i) = images.iter().position(|im| im.shape() != shape) {
            return dim_err(format!(
                "reconstruction {i} has shape {:?}, expected {shape:?}",
                images[i].shape()
            ));
        }
        Ok(Self { images })
    }

    pub fn n(&self) -> usize {
        self.images.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.images[0].shape()
    }

    pub fn images(&self) -> &[Image2D] {
        &self.images
    }

    pub fn into_images(self) -> Vec<Image2D> {
        self.images
    }
}

/// Normalized 1D Gaussian taps for offsets `-radius..=radius`, radius = ceil(3σ).
pub fn gaussian_kernel1d(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return param_err(format!("gaussian sigma must be positive and finite, got {sigma}"));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(taps)
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Separable Gaussian blur with reflected borders.
pub fn gaussian_filter(img: &Image2D, sigma: f64) -> Result<Image2D> {
    let taps = gaussian_kernel1d(sigma)?;
    Ok(convolve_separable(img, &taps))
}

pub(crate) fn convolve_separable(img: &Image2D, taps: &[f64]) -> Image2D {
    let (h, w) = img.shape();
    let radius = (taps.len() / 2) as isize;
    let src = img.as_slice();

    let mut tmp = vec![0.0; h * w];
    for r in 0..h {
        let row = &src[r * w..(r + 1) * w];
        let out = &mut tmp[r * w..(r + 1) * w];
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * row[reflect_index(c as isize + k as isize - radius, w)];
            }
            *o = acc;
        }
    }

    let mut out = vec![0.0; h * w];
    for (k, &t) in taps.iter().enumerate() {
        for r in 0..h {
            let sr = reflect_index(r as isize + k as isize - radius, h);
            let src_row = &tmp[sr * w..(sr + 1) * w];
            let dst = &mut out[r * w..(r + 1) * w];
            for (d, &s) in dst.iter_mut().zip(src_row) {
                *d += t * s;
            }
        }
    }
    Image2D::from_raw(h, w, out)
}
