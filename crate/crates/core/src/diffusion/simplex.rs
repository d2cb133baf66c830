//! Multi-octave 2D simplex gradient noise.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::seed::stream_rng;
use crate::volume::Image2D;

/// Octave settings for [`simplex_noise`]. Frequencies are in cycles per pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexParams {
    pub octaves: u32,
    pub persistence: f64,
    pub lacunarity: f64,
    pub base_frequency: f64,
    pub seed: u64,
}

impl Default for SimplexParams {
    fn default() -> Self {
        Self {
            octaves: 6,
            persistence: 0.8,
            lacunarity: 2.0,
            base_frequency: 1.0 / 64.0,
            seed: 0,
        }
    }
}

impl SimplexParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Frequency of the finest octave.
    pub fn highest_frequency(&self) -> f64 {
        self.base_frequency * self.lacunarity.powi(self.octaves.saturating_sub(1) as i32)
    }
}

const F2: f64 = 0.366_025_403_784_438_6; // (√3 − 1) / 2
const G2: f64 = 0.211_324_865_405_187_1; // (3 − √3) / 6
const N_GRADIENTS: usize = 12;

/// Single-octave simplex noise with a seeded gradient permutation.
struct SimplexLattice {
    perm: [u8; 512],
    gradients: [(f64, f64); N_GRADIENTS],
}

impl SimplexLattice {
    fn new(rng: &mut impl Rng) -> Self {
        let mut p: Vec<u8> = (0..=255).collect();
        p.shuffle(rng);
        let mut perm = [0u8; 512];
        for i in 0..512 {
            perm[i] = p[i & 255];
        }
        let mut gradients = [(0.0, 0.0); N_GRADIENTS];
        for (k, g) in gradients.iter_mut().enumerate() {
            let a = std::f64::consts::TAU * k as f64 / N_GRADIENTS as f64;
            *g = (a.cos(), a.sin());
        }
        Self { perm, gradients }
    }

    #[inline]
    fn gradient(&self, i: i64, j: i64) -> (f64, f64) {
        let ii = (i & 255) as usize;
        let jj = (j & 255) as usize;
        let h = self.perm[ii + self.perm[jj] as usize] as usize;
        self.gradients[h % N_GRADIENTS]
    }

    fn sample(&self, x: f64, y: f64) -> f64 {
        let s = (x + y) * F2;
        let i = (x + s).floor();
        let j = (y + s).floor();
        let t = (i + j) * G2;
        let x0 = x - (i - t);
        let y0 = y - (j - t);
        let (i1, j1) = if x0 > y0 { (1.0, 0.0) } else { (0.0, 1.0) };
        let corners = [
            (x0, y0, 0.0, 0.0),
            (x0 - i1 + G2, y0 - j1 + G2, i1, j1),
            (x0 - 1.0 + 2.0 * G2, y0 - 1.0 + 2.0 * G2, 1.0, 1.0),
        ];
        let (ii, jj) = (i as i64, j as i64);
        let mut total = 0.0;
        for (dx, dy, oi, oj) in corners {
            let falloff = 0.5 - dx * dx - dy * dy;
            if falloff > 0.0 {
                let (gx, gy) = self.gradient(ii + oi as i64, jj + oj as i64);
                let f2 = falloff * falloff;
                total += f2 * f2 * (gx * dx + gy * dy);
            }
        }
        70.0 * total
    }
}

/// Sum of `octaves` simplex layers, standardized to zero mean and unit variance
/// over the image. A constant field (e.g. a single pixel) comes back as zeros.
pub fn simplex_noise(height: usize, width: usize, params: SimplexParams) -> Image2D {
    let mut rng = stream_rng(params.seed, 0x5137_91E5);
    let lattice = SimplexLattice::new(&mut rng);
    let octaves: Vec<(f64, f64, f64, f64)> = (0..params.octaves)
        .map(|k| {
            let freq = params.base_frequency * params.lacunarity.powi(k as i32);
            let amp = params.persistence.powi(k as i32);
            (freq, amp, rng.random::<f64>() * 256.0, rng.random::<f64>() * 256.0)
        })
        .collect();

    let mut field = Image2D::from_fn(height, width, |r, c| {
        octaves
            .iter()
            .map(|&(freq, amp, ox, oy)| amp * lattice.sample(c as f64 * freq + ox, r as f64 * freq + oy))
            .sum()
    });
    standardize(&mut field);
    field
}

pub(crate) fn standardize(img: &mut Image2D) {
    let mean = img.mean();
    let var = img.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / img.len() as f64;
    let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 0.0 };
    *img = img.map(|v| (v - mean) * scale);
}
