//! Append-only run directories and manifests.
//!
//! A run directory is named by a hash of the effective configuration and
//! the input digests. Writing a file that already exists is allowed only
//! when the bytes are identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|_| CliError::MissingInput(path.to_path_buf()))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    /// Effective configuration with input paths replaced by digests.
    pub config: String,
    pub inputs: BTreeMap<String, String>,
    pub seed: u64,
    /// Stream layout derived from `seed`.
    pub rng: String,
}

impl Manifest {
    /// Digests every configured input; a missing file is an error.
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let mut inputs = BTreeMap::new();
        let i = &cfg.inputs;
        let named = [
            ("deaths", &i.deaths),
            ("population", &i.population),
            ("reference", &i.reference),
            ("icd_map", &i.icd_map),
            ("asaf", &i.asaf),
            ("tags", &i.tags),
        ];
        for (name, p) in named {
            if let Some(p) = p {
                inputs.insert(name.to_string(), file_digest(p)?);
            }
        }
        for (k, p) in &i.external_forecasts {
            inputs.insert(format!("external_forecasts.{k}"), file_digest(p)?);
        }
        let mut scrubbed = cfg.clone();
        scrubbed.inputs = Default::default();
        scrubbed.out = PathBuf::new();
        let config = scrubbed.canonical();
        let mut text = config.clone();
        for (k, v) in &inputs {
            text.push_str(&format!("{k}={v}\n"));
        }
        Ok(Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: sha256_hex(text.as_bytes())[..16].to_string(),
            config,
            inputs,
            seed: cfg.seed,
            rng: "chacha20; chain k: stream k; initial state k: stream 2^32+k; projection unit u: stream u".into(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Creates `<out>/<config_hash>` and records the manifest.
    pub fn open(out: &Path, manifest: &Manifest) -> Result<Self, CliError> {
        let path = out.join(&manifest.config_hash);
        fs::create_dir_all(&path).map_err(|e| CliError::io(&path, e))?;
        let dir = RunDir { path };
        let json = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
        dir.write("manifest.json", json.as_bytes())?;
        Ok(dir)
    }

    pub fn join(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.path.join(rel)
    }

    /// Writes `rel` unless it already holds exactly `bytes`.
    pub fn write(&self, rel: impl AsRef<Path>, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.join(rel);
        write_once(&path, bytes)
    }

    /// Overwrites `rel`. Only for files outside the determinism contract.
    pub fn replace(&self, rel: impl AsRef<Path>, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.join(rel);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
    }

    /// Fills directory `rel` via `fill`, which writes into a scratch
    /// directory. An existing directory must match file for file.
    pub fn write_dir<F>(&self, rel: impl AsRef<Path>, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&Path) -> Result<(), CliError>,
    {
        let target = self.join(rel.as_ref());
        let flat = rel.as_ref().to_string_lossy().replace(['/', '\\'], "_");
        let scratch = self.join(format!(".tmp-{flat}-{}", std::process::id()));
        if scratch.exists() {
            fs::remove_dir_all(&scratch).map_err(|e| CliError::io(&scratch, e))?;
        }
        fs::create_dir_all(&scratch).map_err(|e| CliError::io(&scratch, e))?;
        let result = fill(&scratch).and_then(|()| {
            if target.exists() {
                compare_dirs(&scratch, &target)
            } else {
                if let Some(parent) = target.parent() {
                    fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
                }
                fs::rename(&scratch, &target).map_err(|e| CliError::io(&target, e))
            }
        });
        if scratch.exists() {
            let _ = fs::remove_dir_all(&scratch);
        }
        result
    }
}

fn write_once(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    match fs::read(path) {
        Ok(existing) if existing == bytes => Ok(()),
        Ok(_) => Err(CliError::OutputConflict(path.to_path_buf())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            fs::write(path, bytes).map_err(|e| CliError::io(path, e))
        }
        Err(e) => Err(CliError::io(path, e)),
    }
}

fn compare_dirs(new: &Path, old: &Path) -> Result<(), CliError> {
    let list = |d: &Path| -> Result<Vec<String>, CliError> {
        let mut v = Vec::new();
        for e in fs::read_dir(d).map_err(|e| CliError::io(d, e))? {
            let e = e.map_err(|e| CliError::io(d, e))?;
            v.push(e.file_name().to_string_lossy().into_owned());
        }
        v.sort();
        Ok(v)
    };
    if list(new)? != list(old)? {
        return Err(CliError::OutputConflict(old.to_path_buf()));
    }
    for name in list(new)? {
        let (a, b) = (new.join(&name), old.join(&name));
        if a.is_dir() {
            compare_dirs(&a, &b)?;
            continue;
        }
        let x = fs::read(&a).map_err(|e| CliError::io(&a, e))?;
        let y = fs::read(&b).map_err(|e| CliError::io(&b, e))?;
        if x != y {
            return Err(CliError::OutputConflict(b));
        }
    }
    Ok(())
}
