//! Subcommand implementations.
//!
//! Each command computes in parallel and writes its files sequentially
//! through an [`Outputs`] guard, which deletes everything it wrote if the
//! command fails before committing.

use std::path::{Path, PathBuf};

use mhdmap::diffusion::draw_noise;
use mhdmap::metrics::pool_voxels;
use mhdmap::phantom::gen_case;
use mhdmap::scoring::reconstruct_and_score;
use mhdmap::seed::derive_seed;
use mhdmap::{
    evaluate, make_oracle_reconstructor, paired_permutation_test, permutation_test, population_cm_score, BinaryMask,
    Image2D, NoiseKind, NoiseSchedule, ReconstructionStack, ScoringConfig, Variant, Volume3D,
};
use rayon::prelude::*;

use crate::config::{EvalMask, RunConfig, DATASET_KEYS};
use crate::error::{CliError, CliResult};
use crate::manifest::{resolve, CaseEntry, PhantomManifest, ScoreEntry, ScoresManifest};
use crate::pgm::encode_pgm;
use crate::volb::{encode, read_image, read_mask, read_volume, VolumeData};

pub const PHANTOM_MANIFEST: &str = "manifest.txt";
pub const SCORES_MANIFEST: &str = "scores.txt";
pub const CSV_HEADER: [&str; 5] = ["case_id", "variant", "auprc", "dice_best", "threshold"];
pub const POOLED: &str = "pooled";

/// Files written by a command; removed on drop unless committed.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dir(&mut self, path: &Path) -> CliResult<()> {
        let mut missing = Vec::new();
        let mut p = Some(path);
        while let Some(d) = p {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            missing.push(d.to_path_buf());
            p = d.parent();
        }
        std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
        self.dirs.extend(missing.into_iter().rev());
        Ok(())
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        self.files.push(path.to_path_buf());
        std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = std::fs::remove_dir(d);
        }
    }
}

/// Runs `f` on a dedicated pool; `threads == 0` uses available parallelism.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> CliResult<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn dataset_params(cfg: &RunConfig) -> Vec<(String, String)> {
    DATASET_KEYS
        .iter()
        .map(|k| (k.to_string(), cfg.get(k).expect("known key")))
        .collect()
}

fn population_seed(seed: u64) -> u64 {
    derive_seed(seed, 0x9090)
}

fn scoring_seed(seed: u64, case: usize) -> u64 {
    derive_seed(derive_seed(seed, 0x5C0E), case as u64)
}

/// `phantom gen`: cases, healthy population and manifest under `out`.
pub fn phantom_gen(cfg: &RunConfig, out: &Path) -> CliResult<PathBuf> {
    cfg.validate()?;
    let cases = (0..cfg.cases)
        .into_par_iter()
        .map(|i| gen_case(&cfg.phantom, &cfg.perturbation, mhdmap::phantom::case_seed(cfg.seed, i)))
        .collect::<mhdmap::Result<Vec<_>>>()?;
    let population = mhdmap::gen_population(&cfg.phantom, cfg.population_size, population_seed(cfg.seed))?;

    let mut outputs = Outputs::new();
    outputs.dir(out)?;
    let width = cfg.cases.saturating_sub(1).to_string().len().max(3);
    let mut entries = Vec::with_capacity(cases.len());
    for (i, case) in cases.iter().enumerate() {
        let name = |kind: &str| format!("case_{i:0width$}_{kind}.volb");
        let entry = CaseEntry {
            id: i,
            seed: case.seed,
            recon_seed: case.reconstructor_seed,
            image: name("image"),
            healthy: name("healthy"),
            brain: name("brain"),
            lesion: name("lesion"),
        };
        outputs.write(&out.join(&entry.image), &encode(&VolumeData::Image(case.image.clone())))?;
        outputs.write(
            &out.join(&entry.healthy),
            &encode(&VolumeData::Image(case.healthy.clone())),
        )?;
        outputs.write(&out.join(&entry.brain), &encode(&VolumeData::Mask(case.brain.clone())))?;
        outputs.write(
            &out.join(&entry.lesion),
            &encode(&VolumeData::Mask(case.lesion.clone())),
        )?;
        entries.push(entry);
    }
    let population_file = "population.volb".to_string();
    outputs.write(
        &out.join(&population_file),
        &encode(&VolumeData::Volume(Volume3D::new(population)?)),
    )?;

    let manifest = PhantomManifest {
        params: dataset_params(cfg),
        population: population_file,
        cases: entries,
    };
    let manifest_path = out.join(PHANTOM_MANIFEST);
    outputs.write(&manifest_path, manifest.to_text().as_bytes())?;
    outputs.commit();
    Ok(manifest_path)
}

/// Run config with the dataset keys recorded in `manifest` taking precedence.
fn with_dataset_params(cfg: &RunConfig, manifest: &PhantomManifest) -> CliResult<RunConfig> {
    let mut out = cfg.clone();
    for (k, v) in &manifest.params {
        out.set(k, v)
            .map_err(|e| CliError::Data(format!("manifest parameter: {e}")))?;
    }
    Ok(out)
}

struct CaseScores {
    id: usize,
    maps: Vec<(Variant, Image2D)>,
}

/// `score`: S_mean, S_MHD, S_sMHD and the population baseline per case.
pub fn score(cfg: &RunConfig, manifest_path: &Path, out: &Path) -> CliResult<PathBuf> {
    cfg.validate()?;
    let manifest = PhantomManifest::read(manifest_path)?;
    let cfg = with_dataset_params(cfg, &manifest)?;
    let population =
        ReconstructionStack::new(read_volume(&resolve(manifest_path, &manifest.population))?.into_images())?;
    let sched = NoiseSchedule::default();

    let scored = manifest
        .cases
        .par_iter()
        .map(|entry| -> CliResult<CaseScores> {
            let image = read_image(&resolve(manifest_path, &entry.image))?;
            let healthy = read_image(&resolve(manifest_path, &entry.healthy))?;
            let brain = read_mask(&resolve(manifest_path, &entry.brain))?;
            let rec = make_oracle_reconstructor(&healthy, &brain, &cfg.perturbation, entry.recon_seed)?;
            let sc_cfg = ScoringConfig {
                seed: scoring_seed(cfg.seed, entry.id),
                ..cfg.scoring
            };
            let sc = reconstruct_and_score(&image, &rec, &sched, &sc_cfg)?;
            let cm = population_cm_score(&image, &population, &sc_cfg)?;
            Ok(CaseScores {
                id: entry.id,
                maps: vec![
                    (Variant::SMean, sc.s_mean),
                    (Variant::SMhd, sc.s_mhd),
                    (Variant::SSmhd, sc.s_smhd),
                    (Variant::Cm, cm),
                ],
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut outputs = Outputs::new();
    outputs.dir(out)?;
    let width = manifest
        .cases
        .iter()
        .map(|c| c.id)
        .max()
        .unwrap_or(0)
        .to_string()
        .len()
        .max(3);
    let mut entries = Vec::with_capacity(scored.len());
    for case in &scored {
        let mut maps = Vec::new();
        for (variant, map) in &case.maps {
            let stem = format!("case_{:0width$}_{}", case.id, variant.name());
            let file = format!("{stem}.volb");
            outputs.write(&out.join(&file), &encode(&VolumeData::Image(map.clone())))?;
            outputs.write(&out.join(format!("{stem}.pgm")), &encode_pgm(map))?;
            maps.push((variant.name().to_string(), file));
        }
        entries.push(ScoreEntry { id: case.id, maps });
    }
    let manifest_out = out.join(SCORES_MANIFEST);
    outputs.write(&manifest_out, ScoresManifest { cases: entries }.to_text().as_bytes())?;
    outputs.commit();
    Ok(manifest_out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    /// Case id, or `None` for the pooled row.
    pub case_id: Option<usize>,
    pub variant: String,
    pub auprc: f64,
    pub dice_best: f64,
    pub threshold: f64,
}

/// `eval`: per-case and pooled AUPRC and best Dice for every scored variant.
pub fn eval(cfg: &RunConfig, manifest_path: &Path, scores_path: &Path, out_csv: &Path) -> CliResult<Vec<EvalRow>> {
    cfg.validate()?;
    let manifest = PhantomManifest::read(manifest_path)?;
    let scores = ScoresManifest::read(scores_path)?;
    if scores.cases.is_empty() {
        return Err(CliError::Data(format!("{}: no cases", scores_path.display())));
    }
    let variants: Vec<String> = scores.cases[0].maps.iter().map(|(k, _)| k.clone()).collect();
    for c in &scores.cases {
        let names: Vec<&String> = c.maps.iter().map(|(k, _)| k).collect();
        if names != variants.iter().collect::<Vec<_>>() {
            return Err(CliError::Data(format!(
                "case {}: variant list differs from case {}",
                c.id, scores.cases[0].id
            )));
        }
    }

    struct Pooled {
        scores: Vec<f64>,
        labels: Vec<bool>,
        rows: Vec<EvalRow>,
    }
    let per_case = scores
        .cases
        .par_iter()
        .map(|sc| -> CliResult<Vec<Pooled>> {
            let entry = manifest
                .cases
                .iter()
                .find(|c| c.id == sc.id)
                .ok_or_else(|| CliError::Data(format!("case {} not in {}", sc.id, manifest_path.display())))?;
            let lesion = read_mask(&resolve(manifest_path, &entry.lesion))?;
            let brain: Option<BinaryMask> = match cfg.eval_mask {
                EvalMask::All => None,
                EvalMask::Brain => Some(read_mask(&resolve(manifest_path, &entry.brain))?),
            };
            sc.maps
                .iter()
                .map(|(variant, file)| {
                    let map = read_image(&resolve(scores_path, file))?;
                    let (mut s, mut l) = (Vec::new(), Vec::new());
                    pool_voxels(&map, &lesion, brain.as_ref(), &mut s, &mut l)?;
                    let r = evaluate_with(&s, &l, cfg)?;
                    let row = EvalRow {
                        case_id: Some(sc.id),
                        variant: variant.clone(),
                        auprc: r.0,
                        dice_best: r.1,
                        threshold: r.2,
                    };
                    Ok(Pooled {
                        scores: s,
                        labels: l,
                        rows: vec![row],
                    })
                })
                .collect()
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut rows = Vec::new();
    for case in &per_case {
        for p in case {
            rows.extend(p.rows.iter().cloned());
        }
    }
    for (vi, variant) in variants.iter().enumerate() {
        let (mut s, mut l) = (Vec::new(), Vec::new());
        for case in &per_case {
            s.extend_from_slice(&case[vi].scores);
            l.extend_from_slice(&case[vi].labels);
        }
        let r = evaluate_with(&s, &l, cfg)?;
        rows.push(EvalRow {
            case_id: None,
            variant: variant.clone(),
            auprc: r.0,
            dice_best: r.1,
            threshold: r.2,
        });
    }

    let mut outputs = Outputs::new();
    if let Some(parent) = out_csv.parent() {
        outputs.dir(parent)?;
    }
    outputs.write(out_csv, &csv_bytes(&rows)?)?;
    outputs.commit();
    Ok(rows)
}

fn evaluate_with(scores: &[f64], labels: &[bool], cfg: &RunConfig) -> CliResult<(f64, f64, f64)> {
    let auprc = evaluate(scores, labels)?.auprc;
    let sweep = mhdmap::best_dice(scores, labels, cfg.sweep)?;
    Ok((auprc, sweep.dice, sweep.threshold))
}

fn csv_bytes(rows: &[EvalRow]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Data(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        let id = r.case_id.map_or_else(|| POOLED.to_string(), |i| i.to_string());
        w.write_record([
            id,
            r.variant.clone(),
            r.auprc.to_string(),
            r.dice_best.to_string(),
            r.threshold.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Data(format!("csv: {e}")))
}

/// Reads the rows written by [`eval`].
pub fn read_eval_csv(path: &Path) -> CliResult<Vec<EvalRow>> {
    let bad = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(bad(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|_| bad(format!("bad number `{}`", &rec[i])))
        };
        let case_id = match &rec[0] {
            POOLED => None,
            s => Some(s.parse().map_err(|_| bad(format!("bad case id `{s}`")))?),
        };
        rows.push(EvalRow {
            case_id,
            variant: rec[1].to_string(),
            auprc: num(2)?,
            dice_best: num(3)?,
            threshold: num(4)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub n: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub paired: bool,
    pub rounds: usize,
    pub p_value: f64,
}

impl std::fmt::Display for Comparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "a={} b={} n={} mean_auprc_a={} mean_auprc_b={} test={} rounds={} p_value={}",
            self.a,
            self.b,
            self.n,
            self.mean_a,
            self.mean_b,
            if self.paired { "paired" } else { "unpaired" },
            self.rounds,
            self.p_value
        )
    }
}

/// `compare`: permutation test on the per-case AUPRC of two variants.
pub fn compare(
    cfg: &RunConfig,
    csv: &Path,
    a: &str,
    b: &str,
    paired: bool,
    out: Option<&Path>,
) -> CliResult<Comparison> {
    cfg.validate()?;
    let rows = read_eval_csv(csv)?;
    let per_case = |v: &str| -> Vec<(usize, f64)> {
        let mut xs: Vec<(usize, f64)> = rows
            .iter()
            .filter(|r| r.variant == v)
            .filter_map(|r| r.case_id.map(|id| (id, r.auprc)))
            .collect();
        xs.sort_by_key(|&(id, _)| id);
        xs
    };
    let (xa, xb) = (per_case(a), per_case(b));
    for (name, xs) in [(a, &xa), (b, &xb)] {
        if xs.is_empty() {
            return Err(CliError::Data(format!(
                "{}: no per-case rows for variant `{name}`",
                csv.display()
            )));
        }
    }
    if paired && xa.iter().map(|x| x.0).ne(xb.iter().map(|x| x.0)) {
        return Err(CliError::Data(
            "paired comparison needs the same cases for both variants".into(),
        ));
    }
    let va: Vec<f64> = xa.iter().map(|x| x.1).collect();
    let vb: Vec<f64> = xb.iter().map(|x| x.1).collect();
    let p_value = if paired {
        paired_permutation_test(&va, &vb, cfg.permutation_rounds, cfg.seed)?
    } else {
        permutation_test(&va, &vb, cfg.permutation_rounds, cfg.seed)?
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let result = Comparison {
        a: a.to_string(),
        b: b.to_string(),
        n: va.len(),
        mean_a: mean(&va),
        mean_b: mean(&vb),
        paired,
        rounds: cfg.permutation_rounds,
        p_value,
    };
    if let Some(path) = out {
        let mut outputs = Outputs::new();
        if let Some(parent) = path.parent() {
            outputs.dir(parent)?;
        }
        outputs.write(path, format!("{result}\n").as_bytes())?;
        outputs.commit();
    }
    Ok(result)
}

/// `noise preview`: `count` noise fields as one 3D volume, plus a PGM of each
/// slice when `pgm_dir` is given.
pub fn noise_preview(
    kind: NoiseKind,
    count: usize,
    size: usize,
    seed: u64,
    out: &Path,
    pgm_dir: Option<&Path>,
) -> CliResult<()> {
    if count == 0 || size == 0 || size > crate::volb::MAX_DIM as usize {
        return Err(CliError::Config(
            "noise preview needs count >= 1 and 1 <= size <= 65536".into(),
        ));
    }
    let fields: Vec<Image2D> = (0..count)
        .into_par_iter()
        .map(|i| draw_noise(kind, size, size, derive_seed(seed, i as u64)))
        .collect();
    let mut outputs = Outputs::new();
    if let Some(parent) = out.parent() {
        outputs.dir(parent)?;
    }
    if let Some(dir) = pgm_dir {
        outputs.dir(dir)?;
        for (i, f) in fields.iter().enumerate() {
            outputs.write(&dir.join(format!("{kind}_{i:03}.pgm")), &encode_pgm(f))?;
        }
    }
    outputs.write(out, &encode(&VolumeData::Volume(Volume3D::new(fields)?)))?;
    outputs.commit();
    Ok(())
}
