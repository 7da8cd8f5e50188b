//! Optional `key = value` defaults file.
//!
//! ```text
//! # pipeline defaults
//! lexicon = data/lexicon.tsv
//! ontology = fixtures/table_setting.onto
//! strip = textures, materials
//! ```
//!
//! Relative paths are taken relative to the config file. Flags given on the
//! command line win over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

pub const KEYS: [&str; 11] = [
    "density",
    "endpoint",
    "fixtures",
    "lexicon",
    "loop_strategy",
    "mesh_root",
    "ontology",
    "port",
    "static",
    "strip",
    "verify_meshes",
];

const PATH_KEYS: [&str; 5] = ["fixtures", "lexicon", "mesh_root", "ontology", "static"];

#[derive(Clone, Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    dir: PathBuf,
}

impl Config {
    pub fn parse(text: &str, dir: &Path) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("config line {}: expected `key = value`", i + 1);
            };
            let k = k.trim();
            if !KEYS.contains(&k) {
                bail!("config line {}: unknown key `{k}` (known: {})", i + 1, KEYS.join(", "));
            }
            if values.insert(k.to_string(), v.trim().to_string()).is_some() {
                bail!("config line {}: `{k}` given twice", i + 1);
            }
        }
        Ok(Self {
            values,
            dir: dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, dir).with_context(|| path.display().to_string())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        debug_assert!(PATH_KEYS.contains(&key));
        self.get(key).map(|v| self.dir.join(v))
    }

    /// Flag value if given, otherwise the config path.
    pub fn or_path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.path(key))
    }

    pub fn or_value<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.get(key) {
            Some(v) => v.parse().map(Some).map_err(|e| anyhow::anyhow!("config `{key}`: {e}")),
            None => Ok(None),
        }
    }
}
