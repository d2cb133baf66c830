//! Acceptance suite. Runs every criterion at its pinned tolerance, prints one
//! PASS/FAIL line each and exits non-zero if any fails.
//!
//! Oracles here are independent of the library code paths they check: dense
//! linear algebra for the low-rank solve, brute-force enumeration for the
//! metrics and direct Monte Carlo for the forward process.

use std::alloc::{GlobalAlloc, Layout, System};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use mhdmap::diffusion::gaussian_noise;
use mhdmap::{
    auprc, best_dice, binarize, dense_mhd_oracle, dice, forward_noise, mhd_diag_map, mhd_full_map,
    paired_permutation_test, permutation_test, s_mean, ssim_map, summarize, BinaryMask, Image2D, MhdResult,
    NoiseSchedule, PseudoHealthyDistribution, ReconstructionStack, SsimParams, SweepMode,
};
use mhdmap_cli::pipeline::{self, read_eval_csv, with_threads};
use mhdmap_cli::volb::{decode, encode, VolumeData};
use mhdmap_cli::{encode_pgm, CliError, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::SeqCst) + layout.size();
            PEAK.fetch_max(now, Ordering::SeqCst);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        CURRENT.fetch_sub(layout.size(), Ordering::SeqCst);
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = unsafe { System.realloc(ptr, layout, new_size) };
        if !p.is_null() {
            if new_size >= layout.size() {
                let now = CURRENT.fetch_add(new_size - layout.size(), Ordering::SeqCst) + new_size - layout.size();
                PEAK.fetch_max(now, Ordering::SeqCst);
            } else {
                CURRENT.fetch_sub(layout.size() - new_size, Ordering::SeqCst);
            }
        }
        p
    }
}

#[global_allocator]
static ALLOC: Counting = Counting;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_image(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Image2D {
    Image2D::from_fn(h, w, |_, _| rng.random::<f64>())
}

fn random_stack(n: usize, h: usize, w: usize, rng: &mut ChaCha8Rng) -> ReconstructionStack {
    ReconstructionStack::new((0..n).map(|_| random_image(h, w, rng)).collect()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn c1_woodbury_dense() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_scalar, mut worst_pixel) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let dist = summarize(&random_stack(10, 16, 16, &mut rng)).unwrap();
        let x = random_image(16, 16, &mut rng);
        let fast = mhd_full_map(&dist, &x, 1e-5).unwrap();
        let dense = dense_mhd_oracle(&dist, &x, 1e-5).unwrap();
        worst_scalar = worst_scalar.max(rel(fast.scalar(), dense.scalar()));
        for (a, b) in fast.map().as_slice().iter().zip(dense.map().as_slice()) {
            worst_pixel = worst_pixel.max(rel(*a, *b));
        }
    }
    let elapsed = start.elapsed();
    check(
        worst_scalar < 1e-6 && worst_pixel < 1e-6 && elapsed < Duration::from_secs(5),
        format!("max rel err scalar {worst_scalar:.2e}, per-pixel {worst_pixel:.2e}; {elapsed:.2?} for 100 cases"),
    )
}

/// Orthonormal contrasts of length `n`, each orthogonal to the ones vector.
fn helmert(n: usize) -> Vec<Vec<f64>> {
    (1..n)
        .map(|k| {
            let norm = ((k * (k + 1)) as f64).sqrt();
            (0..n)
                .map(|i| match i.cmp(&k) {
                    std::cmp::Ordering::Less => 1.0 / norm,
                    std::cmp::Ordering::Equal => -(k as f64) / norm,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect()
}

fn c2_diagonal_reduction() -> Outcome {
    // pixel k varies along its own contrast, so the covariance is diagonal
    let (n, d) = (5, 4);
    let h = helmert(n);
    let mean = [0.2, 0.5, 0.7, 0.4];
    let spread = [0.3, 0.05, 1.2, 0.6];
    let images = (0..n)
        .map(|i| Image2D::new(2, 2, (0..d).map(|k| mean[k] + spread[k] * h[k][i]).collect()).unwrap())
        .collect();
    let dist = summarize(&ReconstructionStack::new(images).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let x = Image2D::from_fn(2, 2, |_, _| rng.random::<f64>() * 2.0 - 0.5);
        for lambda in [1e-5, 1e-2, 1.0] {
            let full = mhd_full_map(&dist, &x, lambda).unwrap();
            let diag = mhd_diag_map(&dist, &x, lambda).unwrap();
            worst = worst.max((full.scalar() - diag.scalar()).abs());
            for (a, b) in full.map().as_slice().iter().zip(diag.map().as_slice()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(worst < 1e-8, format!("max |full − diag| {worst:.2e} (D = 4, N = 5)"))
}

fn decomposition_err(r: &MhdResult) -> f64 {
    let total: f64 = r.contributions().iter().sum();
    rel(total, r.scalar() * r.scalar())
}

fn c3_decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let h = rng.random_range(1..10);
        let w = rng.random_range(1..10);
        let n = rng.random_range(2..12);
        let dist = summarize(&random_stack(n, h, w, &mut rng)).unwrap();
        let x = random_image(h, w, &mut rng);
        let lambda = 10f64.powf(rng.random_range(-6.0..0.0));
        worst = worst.max(decomposition_err(&mhd_diag_map(&dist, &x, lambda).unwrap()));
        worst = worst.max(decomposition_err(&mhd_full_map(&dist, &x, lambda).unwrap()));
    }
    check(
        worst < 1e-9,
        format!("max rel |Σm − MHD²| {worst:.2e} over 1000 cases, both paths"),
    )
}

fn scaled(dist_stack: &ReconstructionStack, k: f64) -> PseudoHealthyDistribution {
    let imgs = dist_stack.images().iter().map(|im| im.map(|v| k * v)).collect();
    summarize(&ReconstructionStack::new(imgs).unwrap()).unwrap()
}

fn c4_scaling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let stack = random_stack(10, 12, 12, &mut rng);
        let x = random_image(12, 12, &mut rng);
        let base = summarize(&stack).unwrap();
        let lambda = 1e-5;
        let ref_full = mhd_full_map(&base, &x, lambda).unwrap();
        let ref_diag = mhd_diag_map(&base, &x, lambda).unwrap();
        for k in [0.1, 3.0, 100.0] {
            let dist = scaled(&stack, k);
            let kx = x.map(|v| k * v);
            let full = mhd_full_map(&dist, &kx, k * k * lambda).unwrap();
            let diag = mhd_diag_map(&dist, &kx, k * k * lambda).unwrap();
            for (a, b) in [(&full, &ref_full), (&diag, &ref_diag)] {
                worst = worst.max(rel(a.scalar(), b.scalar()));
                for (p, q) in a.map().as_slice().iter().zip(b.map().as_slice()) {
                    worst = worst.max(rel(*p, *q));
                }
            }
        }
    }
    check(
        worst < 1e-9,
        format!("max rel change {worst:.2e} for k ∈ {{0.1, 3, 100}}"),
    )
}

/// Average precision by enumerating every distinct threshold and rescanning.
fn brute_auprc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut cuts: Vec<f64> = scores.to_vec();
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let (mut ap, mut prev_r) = (0.0, 0.0);
    for t in cuts {
        let (mut tp, mut pp) = (0.0, 0.0);
        for (s, &l) in scores.iter().zip(labels) {
            if *s >= t {
                pp += 1.0;
                if l {
                    tp += 1.0;
                }
            }
        }
        let r = tp / n_pos;
        ap += (r - prev_r) * (tp / pp);
        prev_r = r;
    }
    ap
}

fn brute_best_dice(scores: &[f64], labels: &[bool]) -> f64 {
    let gt = BinaryMask::new(1, labels.len(), labels.to_vec()).unwrap();
    let mut best = 0.0f64;
    let mut cuts: Vec<f64> = scores.to_vec();
    cuts.push(f64::INFINITY);
    for t in cuts {
        let pred = BinaryMask::new(1, scores.len(), scores.iter().map(|&s| s >= t).collect()).unwrap();
        best = best.max(dice(&pred, &gt).unwrap());
    }
    best
}

fn c5_metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_ap, mut dice_mismatch, mut thr_mismatch, mut instances) = (0.0f64, 0, 0, 0);
    for _ in 0..300 {
        let v = rng.random_range(1..=500);
        let coarse = rng.random_bool(0.5);
        let scores: Vec<f64> = (0..v)
            .map(|_| {
                if coarse {
                    rng.random_range(0..8) as f64 / 4.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let mut labels: Vec<bool> = (0..v).map(|_| rng.random_bool(0.3)).collect();
        if !labels.contains(&true) {
            labels[0] = true;
        }
        instances += 1;
        worst_ap = worst_ap.max((auprc(&scores, &labels).unwrap() - brute_auprc(&scores, &labels)).abs());
        let sweep = best_dice(&scores, &labels, SweepMode::Exact).unwrap();
        if sweep.dice != brute_best_dice(&scores, &labels) {
            dice_mismatch += 1;
        }
        let map = Image2D::new(1, v, scores.clone()).unwrap();
        let gt = BinaryMask::new(1, v, labels.clone()).unwrap();
        if dice(&binarize(&map, sweep.threshold), &gt).unwrap() != sweep.dice {
            thr_mismatch += 1;
        }
    }
    let a = [10.0, 11.0, 12.0, 13.0, 14.0];
    let b = [0.0, 1.0, 2.0, 3.0, 4.0];
    let exact = 2.0 / 252.0;
    let p = permutation_test(&a, &b, 10_000, 7).unwrap();
    check(
        worst_ap < 1e-12 && dice_mismatch == 0 && thr_mismatch == 0 && (p - exact).abs() <= 0.003,
        format!(
            "{instances} instances: max |AP − brute| {worst_ap:.1e}, best-Dice mismatches {dice_mismatch}, \
             threshold mismatches {thr_mismatch}; 5-vs-5 p = {p:.5} vs exact {exact:.5}"
        ),
    )
}

fn c6_ssim() -> Outcome {
    let p = SsimParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut self_err, mut asym, mut out_of_bounds) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..100 {
        let h = rng.random_range(1..24);
        let w = rng.random_range(1..24);
        let x = random_image(h, w, &mut rng);
        let y = random_image(h, w, &mut rng);
        for &v in ssim_map(&x, &x, &p).unwrap().as_slice() {
            self_err = self_err.max((v - 1.0).abs());
        }
        let xy = ssim_map(&x, &y, &p).unwrap();
        let yx = ssim_map(&y, &x, &p).unwrap();
        for (a, b) in xy.as_slice().iter().zip(yx.as_slice()) {
            asym = asym.max((a - b).abs());
            out_of_bounds += !(-1.0..=1.0).contains(a) as usize;
        }
        out_of_bounds += s_mean(&x, &y, &p)
            .unwrap()
            .as_slice()
            .iter()
            .filter(|v| !(0.0..=2.0).contains(*v))
            .count();
    }
    let constant = ssim_map(&Image2D::filled(8, 8, 0.3), &Image2D::filled(8, 8, 0.7), &p).unwrap();
    let closed = constant.as_slice()[27];
    let spread = constant.max() - constant.min();
    check(
        self_err < 1e-9 && asym == 0.0 && out_of_bounds == 0 && (closed - 0.72425).abs() < 1e-4 && spread < 1e-12,
        format!(
            "self-identity err {self_err:.1e}, asymmetry {asym:.1e}, out of bounds {out_of_bounds}, \
             constant pair {closed:.6} (c1 = {})",
            p.c1
        ),
    )
}

fn c7_forward_process() -> Outcome {
    let sched = NoiseSchedule::default();
    let t = 500;
    let a = sched.alpha_bar(t);
    let (h, w, draws) = (64, 64, 10_000);
    let x0 = Image2D::from_fn(h, w, |r, c| (r * w + c) as f64 / (h * w - 1) as f64);
    let d = h * w;
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    for i in 0..draws {
        let xt = forward_noise(&x0, t, &sched, &gaussian_noise(h, w, 1_000_000 + i as u64)).unwrap();
        for (k, &v) in xt.as_slice().iter().enumerate() {
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let n = draws as f64;
    let means: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let vars: Vec<f64> = sum_sq
        .iter()
        .zip(&means)
        .map(|(q, m)| (q - n * m * m) / (n - 1.0))
        .collect();
    // least-squares fit mean_k ≈ slope·x0_k + intercept over all pixels
    let xs = x0.as_slice();
    let mx = xs.iter().sum::<f64>() / d as f64;
    let my = means.iter().sum::<f64>() / d as f64;
    let sxy: f64 = xs.iter().zip(&means).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let pooled_mean_ratio = my / (a.sqrt() * mx);
    let pooled_var = vars.iter().sum::<f64>() / d as f64;
    let slope_err = rel(slope, a.sqrt());
    let mean_err = (pooled_mean_ratio - 1.0).abs();
    let var_err = rel(pooled_var, 1.0 - a);
    check(
        slope_err < 0.02 && mean_err < 0.02 && var_err < 0.02 && intercept.abs() < 0.02 * a.sqrt(),
        format!(
            "ᾱ_500 = {a:.5}: slope {slope:.5} vs √ᾱ {:.5} ({:.2}%), pooled mean {:.2}%, \
             pooled variance {pooled_var:.5} vs {:.5} ({:.2}%), intercept {intercept:.1e}",
            a.sqrt(),
            100.0 * slope_err,
            100.0 * mean_err,
            1.0 - a,
            100.0 * var_err
        ),
    )
}

struct Benchmark {
    pooled: Vec<(String, f64)>,
    p_paired: f64,
    elapsed: Duration,
}

fn run_benchmark(dir: &Path) -> Result<Benchmark, CliError> {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let manifest = pipeline::phantom_gen(&cfg, &dir.join("phantoms"))?;
    let scores = pipeline::score(&cfg, &manifest, &dir.join("scores"))?;
    let csv = dir.join("eval.csv");
    let rows = pipeline::eval(&cfg, &manifest, &scores, &csv)?;
    let cmp = pipeline::compare(&cfg, &csv, "s_smhd", "s_mean", true, None)?;
    let pooled = rows
        .iter()
        .filter(|r| r.case_id.is_none())
        .map(|r| (r.variant.clone(), r.auprc))
        .collect();
    Ok(Benchmark {
        pooled,
        p_paired: cmp.p_value,
        elapsed: start.elapsed(),
    })
}

fn pooled(b: &Benchmark, v: &str) -> f64 {
    b.pooled.iter().find(|(n, _)| n == v).map(|x| x.1).unwrap_or(f64::NAN)
}

fn c8_ordering(b: &Benchmark, csv: &Path) -> Outcome {
    let (smhd, mhd, mean) = (pooled(b, "s_smhd"), pooled(b, "s_mhd"), pooled(b, "s_mean"));
    // independent recomputation of the paired test from the CSV rows
    let rows = read_eval_csv(csv).map_err(|e| e.to_string())?;
    let per = |v: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.variant == v && r.case_id.is_some())
            .map(|r| r.auprc)
            .collect()
    };
    let p_check = paired_permutation_test(&per("s_smhd"), &per("s_mean"), 10_000, RunConfig::default().seed).unwrap();
    check(
        smhd > mhd && smhd > mean && b.p_paired < 0.05 && p_check == b.p_paired && b.elapsed < Duration::from_secs(120),
        format!(
            "pooled AUPRC S_sMHD {smhd:.4} > S_MHD {mhd:.4}, > S_mean {mean:.4}; paired p = {:.5} ({} cases); {:.2?}",
            b.p_paired,
            per("s_smhd").len(),
            b.elapsed
        ),
    )
}

fn c9_cm(b: &Benchmark) -> Outcome {
    let (cm, smhd) = (pooled(b, "cm"), pooled(b, "s_smhd"));
    check(cm < smhd, format!("pooled AUPRC CM {cm:.4} < S_sMHD {smhd:.4}"))
}

fn c10_performance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (h, w, n) = (192, 192, 10);
    let dist = summarize(&random_stack(n, h, w, &mut rng)).unwrap();
    let x = random_image(h, w, &mut rng);
    let (times, peak_extra) = with_threads(1, || {
        let _ = mhd_full_map(&dist, &x, 1e-5).unwrap();
        let mut times = Vec::new();
        let mut peak_extra = 0usize;
        for _ in 0..5 {
            let base = CURRENT.load(Ordering::SeqCst);
            PEAK.store(base, Ordering::SeqCst);
            let t0 = Instant::now();
            let r = mhd_full_map(&dist, &x, 1e-5).unwrap();
            times.push(t0.elapsed());
            peak_extra = peak_extra.max(PEAK.load(Ordering::SeqCst) - base);
            drop(r);
        }
        (times, peak_extra)
    })
    .map_err(|e| e.to_string())?;
    let slowest = *times.iter().max().unwrap();
    let d = h * w;
    let mb = peak_extra as f64 / (1024.0 * 1024.0);
    check(
        slowest < Duration::from_millis(100) && peak_extra < 32 * 1024 * 1024,
        format!(
            "D = {d}, N = {n}, 1 thread: slowest of 5 runs {slowest:.2?}; peak extra memory {mb:.2} MiB \
             (dense Σ would be {:.0} MiB)",
            (d * d * 8) as f64 / (1024.0 * 1024.0)
        ),
    )
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().display().to_string(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

fn c11_serialization(reference: &Path) -> Outcome {
    let path = Path::new("mem.volb");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = Vec::new();

    for _ in 0..50 {
        let slices = rng.random_range(1..4);
        let h = rng.random_range(1..30);
        let w = rng.random_range(1..30);
        let vol = mhdmap::Volume3D::new(
            (0..slices)
                .map(|_| Image2D::from_fn(h, w, |_, _| rng.random::<f32>() as f64 * 4.0 - 2.0))
                .collect(),
        )
        .unwrap();
        let data = VolumeData::Volume(vol);
        let bytes = encode(&data);
        match decode(&bytes, path) {
            Ok(back) if back == data && encode(&back) == bytes => {}
            _ => failures.push("VOLB round trip"),
        }
    }
    let mut bad = encode(&VolumeData::Image(Image2D::zeros(2, 2)));
    bad[..4].copy_from_slice(b"XOLB");
    if !matches!(decode(&bad, path), Err(CliError::Format { offset: 0, .. })) {
        failures.push("bad magic at offset 0");
    }
    let mut short = encode(&VolumeData::Image(Image2D::zeros(2, 2)));
    short.truncate(short.len() - 4);
    match decode(&short, path) {
        Err(e @ CliError::Format { .. }) if e.to_string().contains("truncated") => {}
        _ => failures.push("truncated payload"),
    }
    if !encode_pgm(&Image2D::filled(3, 3, 0.25)).ends_with(&[0u8; 9]) {
        failures.push("constant PGM");
    }
    if encode_pgm(&Image2D::new(1, 2, vec![0.0, 1.0]).unwrap()) != b"P5\n2 1\n255\n\x00\xff" {
        failures.push("two-pixel PGM");
    }
    let mut v = 0.0;
    let ramp: Vec<f64> = (0..200)
        .map(|_| {
            v += rng.random::<f64>();
            v
        })
        .collect();
    let px = encode_pgm(&Image2D::new(1, 200, ramp).unwrap());
    if !px[px.len() - 200..].windows(2).all(|p| p[0] <= p[1]) {
        failures.push("monotone PGM");
    }

    // the benchmark run used the default thread count; repeat with 1 and 8
    let reference_snapshot = dir_snapshot(reference);
    for threads in [1, 8] {
        let dir = tempfile::tempdir().unwrap();
        let run = with_threads(threads, || run_benchmark(dir.path())).map_err(|e| e.to_string())?;
        if let Err(e) = run {
            return Err(format!("pipeline with {threads} threads failed: {e}"));
        }
        if dir_snapshot(dir.path()) != reference_snapshot {
            failures.push(if threads == 1 {
                "pipeline differs with 1 thread"
            } else {
                "pipeline differs with 8 threads"
            });
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "VOLB/PGM byte checks ok; {} pipeline files identical across runs and 1/8 threads",
                reference_snapshot.len()
            )
        } else {
            format!("failed: {}", failures.join(", "))
        },
    )
}

fn main() {
    let bench_dir = tempfile::tempdir().expect("temp dir");
    let bench = run_benchmark(bench_dir.path());

    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "Woodbury vs dense oracle", c1_woodbury_dense()),
        (2, "diagonal reduction", c2_diagonal_reduction()),
        (3, "decomposition identity", c3_decomposition()),
        (4, "joint scaling invariance", c4_scaling()),
        (5, "metric oracles", c5_metric_oracles()),
        (6, "SSIM contracts", c6_ssim()),
        (7, "forward-process statistics", c7_forward_process()),
    ];
    match &bench {
        Ok(b) => {
            results.push((
                8,
                "end-to-end ordering",
                c8_ordering(b, &bench_dir.path().join("eval.csv")),
            ));
            results.push((9, "CM baseline ordering", c9_cm(b)));
        }
        Err(e) => {
            results.push((8, "end-to-end ordering", Err(format!("benchmark failed: {e}"))));
            results.push((9, "CM baseline ordering", Err(format!("benchmark failed: {e}"))));
        }
    }
    results.push((10, "performance", c10_performance()));
    results.push((11, "serialization and determinism", c11_serialization(bench_dir.path())));

    let mut failed = 0;
    for (id, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("[PASS] {id:>2} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {id:>2} {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
