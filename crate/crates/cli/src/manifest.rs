//! Plain-text manifests tying case ids to files and seeds.
//!
//! Paths inside a manifest are relative to the manifest's directory.
//!
//! ```text
//! mhdmap-phantoms 1
//! param size 64
//! population population.volb
//! case 0 seed=... recon_seed=... image=... healthy=... brain=... lesion=...
//! ```
//!
//! ```text
//! mhdmap-scores 1
//! case 0 s_mean=... s_mhd=... s_smhd=... cm=...
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

pub const PHANTOM_HEADER: &str = "mhdmap-phantoms 1";
pub const SCORES_HEADER: &str = "mhdmap-scores 1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseEntry {
    pub id: usize,
    pub seed: u64,
    pub recon_seed: u64,
    pub image: String,
    pub healthy: String,
    pub brain: String,
    pub lesion: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhantomManifest {
    pub params: Vec<(String, String)>,
    pub population: String,
    pub cases: Vec<CaseEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreEntry {
    pub id: usize,
    /// Variant name to file, in file order.
    pub maps: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScoresManifest {
    pub cases: Vec<ScoreEntry>,
}

fn data_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}:{line}: {msg}", path.display()))
}

fn fields(rest: &[&str], path: &Path, line: usize) -> CliResult<BTreeMap<String, String>> {
    rest.iter()
        .map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| data_err(path, line, format!("expected key=value, got `{tok}`")))
        })
        .collect()
}

fn read_lines(path: &Path, header: &str) -> CliResult<Vec<(usize, Vec<String>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => return Err(data_err(path, 1, format!("missing header `{header}`"))),
    }
    Ok(lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split_whitespace().map(str::to_string).collect()))
        .collect())
}

impl PhantomManifest {
    pub fn to_text(&self) -> String {
        let mut out = format!("{PHANTOM_HEADER}\n");
        for (k, v) in &self.params {
            let _ = writeln!(out, "param {k} {v}");
        }
        let _ = writeln!(out, "population {}", self.population);
        for c in &self.cases {
            let _ = writeln!(
                out,
                "case {} seed={} recon_seed={} image={} healthy={} brain={} lesion={}",
                c.id, c.seed, c.recon_seed, c.image, c.healthy, c.brain, c.lesion
            );
        }
        out
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let mut m = PhantomManifest {
            params: Vec::new(),
            population: String::new(),
            cases: Vec::new(),
        };
        for (line, toks) in read_lines(path, PHANTOM_HEADER)? {
            let toks: Vec<&str> = toks.iter().map(String::as_str).collect();
            match toks.as_slice() {
                ["param", k, v] => m.params.push((k.to_string(), v.to_string())),
                ["population", file] => m.population = file.to_string(),
                ["case", id, rest @ ..] => {
                    let mut f = fields(rest, path, line)?;
                    let mut take = |k: &str| {
                        f.remove(k)
                            .ok_or_else(|| data_err(path, line, format!("missing `{k}`")))
                    };
                    let num = |s: String| {
                        s.parse::<u64>()
                            .map_err(|_| data_err(path, line, format!("bad number `{s}`")))
                    };
                    let entry = CaseEntry {
                        id: id
                            .parse()
                            .map_err(|_| data_err(path, line, format!("bad case id `{id}`")))?,
                        seed: num(take("seed")?)?,
                        recon_seed: num(take("recon_seed")?)?,
                        image: take("image")?,
                        healthy: take("healthy")?,
                        brain: take("brain")?,
                        lesion: take("lesion")?,
                    };
                    m.cases.push(entry);
                }
                _ => return Err(data_err(path, line, "unrecognized line")),
            }
        }
        if m.population.is_empty() {
            return Err(data_err(path, 1, "no population entry"));
        }
        if m.cases.is_empty() {
            return Err(data_err(path, 1, "no cases"));
        }
        Ok(m)
    }
}

impl ScoresManifest {
    pub fn to_text(&self) -> String {
        let mut out = format!("{SCORES_HEADER}\n");
        for c in &self.cases {
            let _ = write!(out, "case {}", c.id);
            for (k, v) in &c.maps {
                let _ = write!(out, " {k}={v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let mut m = ScoresManifest::default();
        for (line, toks) in read_lines(path, SCORES_HEADER)? {
            match toks.first().map(String::as_str) {
                Some("case") if toks.len() >= 2 => {
                    let id = toks[1]
                        .parse()
                        .map_err(|_| data_err(path, line, format!("bad case id `{}`", toks[1])))?;
                    let maps = toks[2..]
                        .iter()
                        .map(|t| {
                            t.split_once('=')
                                .map(|(k, v)| (k.to_string(), v.to_string()))
                                .ok_or_else(|| data_err(path, line, format!("expected variant=file, got `{t}`")))
                        })
                        .collect::<CliResult<_>>()?;
                    m.cases.push(ScoreEntry { id, maps });
                }
                _ => return Err(data_err(path, line, "unrecognized line")),
            }
        }
        Ok(m)
    }
}

/// Resolves a manifest-relative file name.
pub fn resolve(manifest: &Path, file: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join(file)
}
