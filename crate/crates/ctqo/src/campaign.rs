//! Writing a campaign directory and checking one against its manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::CampaignConfig;
use crate::error::CliError;
use crate::experiments;
use crate::summary;
use crate::table::Table;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.toml";
pub const SUMMARY: &str = "summary.json";
pub const SEED_RULE: &str =
    "instance i uses splitmix64(splitmix64(seed) ^ i * 0xD6E8FEB86659FD93) (wrapping)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit: String,
    pub version: String,
    pub experiment: String,
    pub config_sha256: String,
    pub seed: u64,
    pub seed_rule: String,
    pub instance_seeds: Vec<u64>,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<FileEntry>) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(CliError::io(&path))?;
    files.push(FileEntry {
        name: name.into(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
    });
    Ok(())
}

fn pretty(v: &impl Serialize) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Runs a validated campaign and writes its directory. Returns the manifest.
pub fn run(cfg: &CampaignConfig, out: &Path, jobs: Option<usize>) -> Result<Manifest, CliError> {
    cfg.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let tables = pool.install(|| experiments::run(cfg))?;

    fs::create_dir_all(out).map_err(CliError::io(out))?;
    let mut files = Vec::new();
    let config_text = cfg.to_toml();
    write(out, CONFIG, config_text.as_bytes(), &mut files)?;
    for t in &tables {
        write(out, &t.file_name(), &t.to_bytes()?, &mut files)?;
    }
    // Summaries come from the bytes on disk, exactly as verify will see them.
    let reread = read_tables(out, &files)?;
    let summary = summary::summarize(cfg.experiment, &reread)?;
    write(out, SUMMARY, &pretty(&summary)?, &mut files)?;

    let manifest = Manifest {
        toolkit: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: cfg.experiment.name().into(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        seed: cfg.problem.seed,
        seed_rule: SEED_RULE.into(),
        instance_seeds: experiments::instance_seeds(&cfg.problem),
        files,
    };
    let path = out.join(MANIFEST);
    fs::write(&path, pretty(&manifest)?).map_err(CliError::io(&path))?;
    Ok(manifest)
}

fn read_tables(dir: &Path, files: &[FileEntry]) -> Result<Vec<Table>, CliError> {
    files
        .iter()
        .filter_map(|f| f.name.strip_suffix(".csv").map(|stem| (stem, &f.name)))
        .map(|(stem, name)| {
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(CliError::io(&path))?;
            Table::from_bytes(stem, &bytes)
        })
        .collect()
}

/// Accepts a manifest path or the directory holding it.
pub fn locate(target: &Path) -> (PathBuf, PathBuf) {
    if target.is_dir() {
        (target.to_path_buf(), target.join(MANIFEST))
    } else {
        let dir = target
            .parent()
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        (dir, target.to_path_buf())
    }
}

/// Checks hashes, sizes and seeds against the manifest and recomputes the
/// summary from the tables. Every mismatch is reported.
pub fn verify(target: &Path) -> Result<Manifest, CliError> {
    let (dir, manifest_path) = locate(target);
    let text = fs::read(&manifest_path).map_err(CliError::io(&manifest_path))?;
    let manifest: Manifest = serde_json::from_slice(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", manifest_path.display())))?;
    let mut bad = Vec::new();

    for f in &manifest.files {
        let path = dir.join(&f.name);
        match fs::read(&path) {
            Ok(bytes) => {
                if bytes.len() as u64 != f.bytes {
                    bad.push(format!(
                        "{}: {} bytes, manifest says {}",
                        f.name,
                        bytes.len(),
                        f.bytes
                    ));
                }
                let h = sha256_hex(&bytes);
                if h != f.sha256 {
                    bad.push(format!(
                        "{}: sha256 {h}, manifest says {}",
                        f.name, f.sha256
                    ));
                }
            }
            Err(e) => bad.push(format!("{}: {e}", f.name)),
        }
    }

    let config_path = dir.join(CONFIG);
    let cfg = fs::read_to_string(&config_path)
        .map_err(CliError::io(&config_path))
        .and_then(|t| CampaignConfig::from_toml(&t));
    match &cfg {
        Ok(cfg) => {
            if sha256_hex(cfg.to_toml().as_bytes()) != manifest.config_sha256 {
                bad.push("config.toml: resolved config hash differs from manifest".into());
            }
            if cfg.experiment.name() != manifest.experiment {
                bad.push(format!(
                    "experiment: config says {}, manifest says {}",
                    cfg.experiment.name(),
                    manifest.experiment
                ));
            }
            if cfg.problem.seed != manifest.seed {
                bad.push("seed: config and manifest disagree".into());
            }
            if experiments::instance_seeds(&cfg.problem) != manifest.instance_seeds {
                bad.push("instance_seeds: do not follow the seed rule".into());
            }
        }
        Err(e) => bad.push(format!("config.toml: {e}")),
    }

    if let Ok(cfg) = &cfg {
        let recorded = fs::read(dir.join(SUMMARY))
            .ok()
            .and_then(|b| serde_json::from_slice::<serde_json::Value>(&b).ok());
        match (read_tables(&dir, &manifest.files), recorded) {
            (Ok(tables), Some(recorded)) => match summary::summarize(cfg.experiment, &tables) {
                Ok(fresh) => summary::diff(&fresh, &recorded, "", &mut bad),
                Err(e) => bad.push(format!("summary: {e}")),
            },
            (Err(e), _) => bad.push(format!("tables: {e}")),
            (_, None) => bad.push("summary.json: missing or not JSON".into()),
        }
    }

    if bad.is_empty() {
        Ok(manifest)
    } else {
        Err(CliError::Verify(bad))
    }
}
