//! Output directory handling: stamped JSON, CSV writers and the manifest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

/// A run's output directory together with the stamp written into every
/// JSON artifact.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub dir: PathBuf,
    pub config_hash: String,
    pub seed: u64,
}

impl Workspace {
    pub fn new(dir: PathBuf, config_hash: String, seed: u64) -> Result<Workspace, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::input("io", format!("{}: {e}", dir.display())))?;
        Ok(Workspace { dir, config_hash, seed })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn create(&self, stage: &str, name: &str) -> Result<BufWriter<File>, CliError> {
        let p = self.path(name);
        File::create(&p)
            .map(BufWriter::new)
            .map_err(|e| CliError::input(stage, format!("{}: {e}", p.display())))
    }

    /// Opens an artifact of an earlier stage.
    pub fn open(&self, stage: &str, name: &str) -> Result<BufReader<File>, CliError> {
        open_path(stage, &self.path(name))
    }

    /// Adds `config_hash` and `seed` to a JSON object (or wraps a non-object
    /// value under `data`).
    pub fn stamp<T: Serialize>(&self, value: &T) -> Value {
        let v = serde_json::to_value(value).expect("artifact serializes");
        let mut obj = match v {
            Value::Object(m) => m,
            other => {
                let mut m = serde_json::Map::new();
                m.insert("data".into(), other);
                m
            }
        };
        obj.insert("config_hash".into(), json!(self.config_hash));
        obj.insert("seed".into(), json!(self.seed));
        Value::Object(obj)
    }

    pub fn write_json<T: Serialize>(&self, stage: &str, name: &str, value: &T) -> Result<(), CliError> {
        let mut w = self.create(stage, name)?;
        let text = serde_json::to_string_pretty(&self.stamp(value)).expect("json");
        writeln!(w, "{text}").and_then(|_| w.flush()).map_err(|e| CliError::input(stage, e.to_string()))
    }

    pub fn read_json<T: DeserializeOwned>(&self, stage: &str, name: &str) -> Result<T, CliError> {
        let r = self.open(stage, name)?;
        serde_json::from_reader(r).map_err(|e| CliError::input(stage, format!("{name}: {e}")))
    }

    /// Writes `manifest.json` listing every other file with its SHA-256.
    /// CSV artifacts cannot carry the stamp themselves; the manifest ties
    /// them to the config hash and seed.
    pub fn write_manifest(&self) -> Result<(), CliError> {
        let mut names: Vec<String> = std::fs::read_dir(&self.dir)
            .map_err(|e| CliError::input("manifest", e.to_string()))?
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n != MANIFEST)
            .collect();
        names.sort();
        let mut files = serde_json::Map::new();
        for n in names {
            let bytes = std::fs::read(self.path(&n)).map_err(|e| CliError::input("manifest", e.to_string()))?;
            files.insert(n, json!(hex::encode(Sha256::digest(bytes))));
        }
        self.write_json("manifest", MANIFEST, &json!({ "files": files }))
    }
}

pub fn open_path(stage: &str, p: &Path) -> Result<BufReader<File>, CliError> {
    File::open(p).map(BufReader::new).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::input(stage, format!("missing artifact {}", p.display()))
        } else {
            CliError::input(stage, format!("{}: {e}", p.display()))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stamp_and_manifest() {
        let dir = std::env::temp_dir().join(format!("triage-artifacts-{}", std::process::id()));
        let ws = Workspace::new(dir.clone(), "abc".into(), 5).unwrap();
        ws.write_json("t", "a.json", &json!({"x": 1})).unwrap();
        ws.write_json("t", "b.json", &vec![1, 2]).unwrap();
        let a: Value = ws.read_json("t", "a.json").unwrap();
        assert_eq!(a, json!({"x": 1, "config_hash": "abc", "seed": 5}));
        let b: Value = ws.read_json("t", "b.json").unwrap();
        assert_eq!(b["data"], json!([1, 2]));
        ws.write_manifest().unwrap();
        let m: Value = ws.read_json("t", MANIFEST).unwrap();
        assert_eq!(m["files"].as_object().unwrap().len(), 2);
        let missing = ws.open("train", "nope.csv").unwrap_err();
        assert_eq!(missing.code, 2);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
