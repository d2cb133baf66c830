//! Segmentation metrics over voxel-level anomaly scores: Dice, best
//! achievable Dice over all thresholds, area under the precision-recall
//! curve and two-sample permutation tests.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{dim_err, param_err, Error, Result};
use crate::seed::stream_rng;
use crate::volume::{BinaryMask, Image2D};

/// Pooled evaluation of one score map (or a set of them) against ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub auprc: f64,
    pub dice_best: f64,
    pub dice_threshold: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Result of a threshold sweep. `threshold` is the value to pass to
/// [`crate::scoring::binarize`] (which keeps scores strictly above it).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiceSweep {
    pub dice: f64,
    pub threshold: f64,
    /// Set when there were no positive labels; `dice` is then 1 by convention.
    pub no_positives: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    /// Every distinct score value is a cut.
    #[default]
    Exact,
    /// 1001 evenly spaced score quantiles.
    Quantile,
}

/// `2·|pred ∩ gt| / (|pred| + |gt|)`, 1 when both are empty.
pub fn dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    if pred.shape() != gt.shape() {
        return dim_err(format!("mask shapes {:?} and {:?} differ", pred.shape(), gt.shape()));
    }
    let (mut inter, mut sum) = (0usize, 0usize);
    for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
        inter += (p && g) as usize;
        sum += p as usize + g as usize;
    }
    Ok(if sum == 0 { 1.0 } else { 2.0 * inter as f64 / sum as f64 })
}

fn check_pair(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return dim_err(format!("{} scores but {} labels", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    Ok(())
}

/// Pairs sorted by descending score.
fn sorted_desc(scores: &[f64], labels: &[bool]) -> Vec<(f64, bool)> {
    let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Threshold strictly below `hi` and at least `lo`.
fn cut_between(hi: f64, lo: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Highest Dice over all binarization thresholds. Ties go to the lowest threshold.
pub fn best_dice(scores: &[f64], labels: &[bool], mode: SweepMode) -> Result<DiceSweep> {
    check_pair(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Ok(DiceSweep {
            dice: 1.0,
            threshold: f64::INFINITY,
            no_positives: true,
        });
    }
    let pairs = sorted_desc(scores, labels);
    let dice_at = |tp: usize, predicted: usize| 2.0 * tp as f64 / (predicted + n_pos) as f64;
    let v = pairs.len();

    // Cut "predict nothing": threshold at the maximum.
    let mut best = DiceSweep {
        dice: 0.0,
        threshold: pairs[0].0,
        no_positives: false,
    };
    match mode {
        SweepMode::Exact => {
            let (mut tp, mut i) = (0usize, 0usize);
            while i < v {
                let s = pairs[i].0;
                while i < v && pairs[i].0 == s {
                    tp += pairs[i].1 as usize;
                    i += 1;
                }
                let threshold = if i < v {
                    cut_between(s, pairs[i].0)
                } else {
                    s - 1.0f64.max(s.abs())
                };
                let d = dice_at(tp, i);
                if d >= best.dice {
                    best = DiceSweep {
                        dice: d,
                        threshold,
                        no_positives: false,
                    };
                }
            }
        }
        SweepMode::Quantile => {
            // ascending order with prefix counts of positives
            let asc: Vec<(f64, bool)> = pairs.iter().rev().copied().collect();
            let mut prefix_pos = Vec::with_capacity(v + 1);
            prefix_pos.push(0usize);
            for &(_, l) in &asc {
                prefix_pos.push(prefix_pos.last().unwrap() + l as usize);
            }
            for j in 0..=1000usize {
                let idx = ((j as f64 / 1000.0) * (v - 1) as f64).round() as usize;
                let q = asc[idx].0;
                let kept_from = asc.partition_point(|p| p.0 <= q);
                let predicted = v - kept_from;
                let tp = n_pos - prefix_pos[kept_from];
                let d = dice_at(tp, predicted);
                if d > best.dice || (d == best.dice && q < best.threshold) {
                    best = DiceSweep {
                        dice: d,
                        threshold: q,
                        no_positives: false,
                    };
                }
            }
        }
    }
    Ok(best)
}

/// Average precision `Σ (R_i − R_{i−1})·P_i` over distinct-score cuts.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_pair(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(Error::UndefinedMetric("AUPRC needs at least one positive label".into()));
    }
    let pairs = sorted_desc(scores, labels);
    let (mut tp, mut i, mut ap, mut prev_recall) = (0usize, 0usize, 0.0, 0.0);
    while i < pairs.len() {
        let s = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == s {
            tp += pairs[i].1 as usize;
            i += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / i as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

/// AUPRC and best Dice of one pooled score vector.
pub fn evaluate(scores: &[f64], labels: &[bool]) -> Result<EvalResult> {
    let sweep = best_dice(scores, labels, SweepMode::Exact)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    Ok(EvalResult {
        auprc: auprc(scores, labels)?,
        dice_best: sweep.dice,
        dice_threshold: sweep.threshold,
        n_pos,
        n_neg: labels.len() - n_pos,
    })
}

/// Appends the voxels of `map` to a pooled score/label set, optionally
/// restricted to `eval_mask`.
pub fn pool_voxels(
    map: &Image2D,
    gt: &BinaryMask,
    eval_mask: Option<&BinaryMask>,
    scores: &mut Vec<f64>,
    labels: &mut Vec<bool>,
) -> Result<()> {
    if map.shape() != gt.shape() || eval_mask.is_some_and(|m| m.shape() != map.shape()) {
        return dim_err("score map, ground truth and evaluation mask must share a shape");
    }
    for k in 0..map.len() {
        if eval_mask.is_none_or(|m| m.as_slice()[k]) {
            scores.push(map.as_slice()[k]);
            labels.push(gt.as_slice()[k]);
        }
    }
    Ok(())
}

/// Per-volume (single map) evaluation.
pub fn evaluate_map(map: &Image2D, gt: &BinaryMask, eval_mask: Option<&BinaryMask>) -> Result<EvalResult> {
    let (mut s, mut l) = (Vec::new(), Vec::new());
    pool_voxels(map, gt, eval_mask, &mut s, &mut l)?;
    evaluate(&s, &l)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn at_least(stat: f64, observed: f64) -> bool {
    stat >= observed - 1e-12 * observed.abs()
}

/// Two-sided two-sample permutation test on the difference of means.
///
/// `p = (1 + #{|Δ_perm| ≥ |Δ_obs|}) / (1 + rounds)`; round `r` shuffles the
/// pooled sample with a generator derived from `(seed, r)`.
pub fn permutation_test(a: &[f64], b: &[f64], rounds: usize, seed: u64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return param_err("permutation test needs two non-empty samples");
    }
    if rounds == 0 {
        return param_err("permutation test needs at least one round");
    }
    let observed = (mean(a) - mean(b)).abs();
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let na = a.len();
    let hits = (0..rounds)
        .into_par_iter()
        .map_init(
            || pooled.clone(),
            |buf, r| {
                buf.copy_from_slice(&pooled);
                buf.shuffle(&mut stream_rng(seed, r as u64));
                let stat = (mean(&buf[..na]) - mean(&buf[na..])).abs();
                at_least(stat, observed)
            },
        )
        .filter(|&hit| hit)
        .count();
    Ok((1 + hits) as f64 / (1 + rounds) as f64)
}

/// Paired variant: random sign flips of the per-pair differences.
pub fn paired_permutation_test(a: &[f64], b: &[f64], rounds: usize, seed: u64) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return param_err("paired permutation test needs two non-empty samples of equal length");
    }
    if rounds == 0 {
        return param_err("permutation test needs at least one round");
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let observed = mean(&diffs).abs();
    let hits = (0..rounds)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = stream_rng(seed, r as u64);
            let s: f64 = diffs.iter().map(|&d| if rng.random::<bool>() { d } else { -d }).sum();
            at_least((s / diffs.len() as f64).abs(), observed)
        })
        .count();
    Ok((1 + hits) as f64 / (1 + rounds) as f64)
}
