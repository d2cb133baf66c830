use crate::error::{param_err, Result};

/// β₁..β_T together with the cumulative products ᾱ_t = ∏_{s≤t}(1−β_s).
///
/// Timesteps are 1-based; `alpha_bar(0)` is defined as 1.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

pub const DEFAULT_T_MAX: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

impl NoiseSchedule {
    /// β linearly interpolated from `beta_start` to `beta_end`, both inclusive.
    pub fn linear(t_max: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if t_max == 0 {
            return param_err("schedule needs at least one step");
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return param_err(format!(
                "need 0 < beta_start <= beta_end < 1, got {beta_start}..{beta_end}"
            ));
        }
        let betas = if t_max == 1 {
            vec![beta_start]
        } else {
            let step = (beta_end - beta_start) / (t_max - 1) as f64;
            (0..t_max).map(|i| beta_start + step * i as f64).collect()
        };
        Self::from_betas(betas)
    }

    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return param_err("schedule needs at least one step");
        }
        if let Some((i, b)) = betas.iter().enumerate().find(|(_, &b)| !(b > 0.0 && b < 1.0)) {
            return param_err(format!("beta_{} = {b} is outside (0, 1)", i + 1));
        }
        let mut acc = 1.0;
        let alpha_bars = betas
            .iter()
            .map(|b| {
                acc *= 1.0 - b;
                acc
            })
            .collect();
        Ok(Self { betas, alpha_bars })
    }

    pub fn t_max(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    /// Fixed reverse-process variance ((1−ᾱ_{t−1})/(1−ᾱ_t))·β_t; zero at t = 1.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t)) * self.beta(t)
    }

    pub(crate) fn check_t(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.t_max() {
            return param_err(format!("timestep {t} outside 1..={}", self.t_max()));
        }
        Ok(())
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::linear(DEFAULT_T_MAX, DEFAULT_BETA_START, DEFAULT_BETA_END).expect("valid default schedule")
    }
}
