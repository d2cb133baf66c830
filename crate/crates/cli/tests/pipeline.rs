use std::path::{Path, PathBuf};
use std::process::Command;

use mhdmap::{BinaryMask, Image2D};
use mhdmap_cli::pipeline::{self, read_eval_csv, Outputs};
use mhdmap_cli::volb::{decode, encode, read_volume, write_volume, VolumeData};
use mhdmap_cli::{encode_pgm, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mhdmap"));
    c.env_remove(mhdmap_cli::config::THREADS_ENV);
    c
}

fn run(args: &[&str], threads: &str) -> std::process::Output {
    bin()
        .args(args)
        .env(mhdmap_cli::config::THREADS_ENV, threads)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

/// gen → score → eval with the given thread count; returns (phantom dir, score dir, csv).
fn full_run(root: &Path, threads: &str, cases: &str) -> (PathBuf, PathBuf, PathBuf) {
    let ph = root.join("phantoms");
    let sc = root.join("scores");
    let csv = root.join("eval.csv");
    let out = run(
        &["phantom", "gen", "--out", s(&ph), "--seed", "42", "--cases", cases],
        threads,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = ph.join("manifest.txt");
    let out = run(&["score", "--manifest", s(&manifest), "--out", s(&sc)], threads);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(
        &[
            "eval",
            "--manifest",
            s(&manifest),
            "--scores",
            s(&sc.join("scores.txt")),
            "--out",
            s(&csv),
        ],
        threads,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (ph, sc, csv)
}

#[test]
fn volb_round_trip_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dir = tempfile::tempdir().unwrap();
    for i in 0..20 {
        let h = rng.random_range(1..20);
        let w = rng.random_range(1..20);
        let img = Image2D::from_fn(h, w, |_, _| (rng.random::<f32>() * 10.0 - 5.0) as f64);
        let path = dir.path().join(format!("{i}.volb"));
        write_volume(&VolumeData::Image(img.clone()), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(read_volume(&path).unwrap(), VolumeData::Image(img));
        assert_eq!(encode(&decode(&bytes, &path).unwrap()), bytes);

        let mask = BinaryMask::from_fn(h, w, |_, _| rng.random::<bool>());
        write_volume(&VolumeData::Mask(mask.clone()), &path).unwrap();
        assert_eq!(read_volume(&path).unwrap(), VolumeData::Mask(mask));
    }
}

#[test]
fn volb_bad_magic_and_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.volb");
    let mut bytes = encode(&VolumeData::Image(Image2D::zeros(2, 2)));
    bytes[0] = b'X';
    std::fs::write(&path, &bytes).unwrap();
    let err = read_volume(&path).unwrap_err().to_string();
    assert!(err.contains("byte 0") && err.contains("magic"), "{err}");

    let mut bytes = encode(&VolumeData::Image(Image2D::zeros(2, 2)));
    bytes.truncate(16 + 12);
    std::fs::write(&path, &bytes).unwrap();
    let err = read_volume(&path).unwrap_err().to_string();
    assert!(err.contains("truncated payload"), "{err}");
}

#[test]
fn pgm_monotone_ramp() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = rng.random_range(2..300);
        let mut v = 0.0;
        let ramp: Vec<f64> = (0..n)
            .map(|_| {
                v += rng.random::<f64>() * 3.0;
                v
            })
            .collect();
        let bytes = encode_pgm(&Image2D::new(1, n, ramp).unwrap());
        let header = format!("P5\n{n} 1\n255\n");
        assert!(bytes.starts_with(header.as_bytes()));
        let px = &bytes[header.len()..];
        assert_eq!(px.len(), n);
        assert!(px.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(px[0], 0);
        assert_eq!(px[n - 1], 255);
    }
}

#[test]
fn phantom_gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let out = run(
            &[
                "phantom",
                "gen",
                "--out",
                s(&dir.path().join(sub)),
                "--seed",
                "42",
                "--cases",
                "50",
            ],
            "0",
        );
        assert!(out.status.success());
    }
    let a = dir_bytes(&dir.path().join("a"));
    let b = dir_bytes(&dir.path().join("b"));
    assert_eq!(a.len(), 50 * 4 + 2);
    assert_eq!(a, b);
}

#[test]
fn pipeline_is_thread_count_independent() {
    let d1 = tempfile::tempdir().unwrap();
    let d8 = tempfile::tempdir().unwrap();
    let (p1, s1, c1) = full_run(d1.path(), "1", "12");
    let (p8, s8, c8) = full_run(d8.path(), "8", "12");
    assert_eq!(dir_bytes(&p1), dir_bytes(&p8));
    assert_eq!(dir_bytes(&s1), dir_bytes(&s8));
    assert_eq!(std::fs::read(c1).unwrap(), std::fs::read(c8).unwrap());
}

#[test]
fn end_to_end_compare_is_significant() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, csv) = full_run(dir.path(), "0", "50");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("case_id,variant,auprc,dice_best,threshold\n"));
    let rows = read_eval_csv(&csv).unwrap();
    assert_eq!(rows.len(), 50 * 4 + 4);
    let pooled = |v: &str| {
        rows.iter()
            .find(|r| r.case_id.is_none() && r.variant == v)
            .unwrap()
            .auprc
    };
    assert!(pooled("s_smhd") > pooled("s_mhd"));
    assert!(pooled("s_smhd") > pooled("s_mean"));
    assert!(pooled("cm") < pooled("s_smhd"));

    let report = dir.path().join("compare.txt");
    let out = run(
        &[
            "compare",
            "--csv",
            s(&csv),
            "--a",
            "s_smhd",
            "--b",
            "s_mean",
            "--out",
            s(&report),
        ],
        "0",
    );
    assert!(out.status.success());
    let line = std::fs::read_to_string(&report).unwrap();
    let p: f64 = line.trim().rsplit("p_value=").next().unwrap().parse().unwrap();
    assert!(p < 0.05, "{line}");
    let out = run(&["compare", "--csv", s(&csv), "--paired"], "0");
    assert!(String::from_utf8_lossy(&out.stdout).contains("test=paired"));
}

#[test]
fn eval_of_perfect_scores() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        cases: 3,
        population_size: 4,
        ..RunConfig::default()
    };
    let manifest = pipeline::phantom_gen(&cfg, &dir.path().join("ph")).unwrap();
    let ph = mhdmap_cli::manifest::PhantomManifest::read(&manifest).unwrap();
    let scores_dir = dir.path().join("perfect");
    std::fs::create_dir(&scores_dir).unwrap();
    let mut entries = Vec::new();
    for c in &ph.cases {
        let lesion = std::fs::read(dir.path().join("ph").join(&c.lesion)).unwrap();
        let img = read_volume_bytes(&lesion).into_images().remove(0);
        let file = format!("case_{}.volb", c.id);
        write_volume(&VolumeData::Image(img), &scores_dir.join(&file)).unwrap();
        entries.push(mhdmap_cli::manifest::ScoreEntry {
            id: c.id,
            maps: vec![("truth".into(), file)],
        });
    }
    let scores = scores_dir.join("scores.txt");
    std::fs::write(
        &scores,
        mhdmap_cli::manifest::ScoresManifest { cases: entries }.to_text(),
    )
    .unwrap();
    let rows = pipeline::eval(&cfg, &manifest, &scores, &dir.path().join("e.csv")).unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert_eq!(r.auprc, 1.0);
        assert_eq!(r.dice_best, 1.0);
        assert!((0.0..1.0).contains(&r.threshold));
    }
}

fn read_volume_bytes(bytes: &[u8]) -> VolumeData {
    decode(bytes, Path::new("mem")).unwrap()
}

#[test]
fn exit_codes_and_cleanup() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_file = dir.path().join("run.cfg");
    std::fs::write(&cfg_file, "# typo below\nsede = 4\n").unwrap();
    let out = run(
        &[
            "--config",
            s(&cfg_file),
            "phantom",
            "gen",
            "--out",
            s(&dir.path().join("x")),
        ],
        "0",
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("x").exists());

    let out = run(
        &[
            "phantom",
            "gen",
            "--out",
            s(&dir.path().join("x")),
            "--set",
            "symmetry_coupling=2",
        ],
        "0",
    );
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["frobnicate"], "0");
    assert_eq!(out.status.code(), Some(2));

    let out = run(
        &[
            "score",
            "--manifest",
            s(&dir.path().join("missing.txt")),
            "--out",
            s(&dir.path().join("sc")),
        ],
        "0",
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("sc").exists());

    // corrupt one case image: scoring fails with a data error and leaves nothing behind
    let ph = dir.path().join("ph");
    assert!(run(&["phantom", "gen", "--out", s(&ph), "--cases", "3"], "0")
        .status
        .success());
    let target = ph.join("case_001_image.volb");
    let mut bytes = std::fs::read(&target).unwrap();
    bytes[..4].copy_from_slice(b"XOLB");
    std::fs::write(&target, bytes).unwrap();
    let sc = dir.path().join("nested").join("sc");
    let out = run(
        &["score", "--manifest", s(&ph.join("manifest.txt")), "--out", s(&sc)],
        "0",
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("byte 0"));
    assert!(!dir.path().join("nested").exists());

    let out = run(&["phantom", "gen", "--out", s(&ph), "--cases", "3"], "not-a-number");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn outputs_guard_removes_uncommitted_files() {
    let dir = tempfile::tempdir().unwrap();
    let nested = dir.path().join("a").join("b");
    {
        let mut o = Outputs::new();
        o.dir(&nested).unwrap();
        o.write(&nested.join("f"), b"x").unwrap();
    }
    assert!(!dir.path().join("a").exists());
    let mut o = Outputs::new();
    o.dir(&nested).unwrap();
    o.write(&nested.join("f"), b"x").unwrap();
    o.commit();
    assert!(nested.join("f").exists());
}

#[test]
fn noise_preview_writes_volume() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("noise.volb");
    let pgm = dir.path().join("pgm");
    let o = run(
        &[
            "noise",
            "preview",
            "--kind",
            "gaussian",
            "--count",
            "3",
            "--size",
            "32",
            "--out",
            s(&out),
            "--pgm-dir",
            s(&pgm),
        ],
        "0",
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    match read_volume(&out).unwrap() {
        VolumeData::Volume(v) => assert_eq!((v.n_slices(), v.height(), v.width()), (3, 32, 32)),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(std::fs::read_dir(&pgm).unwrap().count(), 3);
    let o = run(&["noise", "preview", "--kind", "pink", "--out", s(&out)], "0");
    assert_eq!(o.status.code(), Some(2));
}
