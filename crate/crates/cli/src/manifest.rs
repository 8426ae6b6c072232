use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let mut file = File::open(path).with_context(|| format!("hashing {}", path.display()))?;
        let mut h = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        loop {
            let n = file.read(&mut buf)?;
            if n == 0 {
                break;
            }
            h.update(&buf[..n]);
        }
        let sha256 = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Ok(FileDigest {
            path: path.to_owned(),
            sha256,
        })
    }
}

/// Record of one invocation, written next to its outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_time_secs: f64,
    pub versions: BTreeMap<String, String>,
}

/// Collects the files a run reads and writes.
pub struct Run {
    subcommand: String,
    config: serde_json::Value,
    seed: Option<u64>,
    threads: usize,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl Run {
    pub fn new(
        subcommand: &str,
        config: serde_json::Value,
        seed: Option<u64>,
        threads: usize,
    ) -> Self {
        Run {
            subcommand: subcommand.to_owned(),
            config,
            seed,
            threads,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> PathBuf {
        self.inputs.push(path.to_owned());
        path.to_owned()
    }

    pub fn output(&mut self, path: &Path) -> PathBuf {
        self.outputs.push(path.to_owned());
        path.to_owned()
    }

    /// Writes the manifest to `path` and returns it.
    pub fn finish(self, path: &Path) -> Result<RunManifest> {
        let digests = |paths: &[PathBuf]| {
            paths
                .iter()
                .map(|p| FileDigest::of(p))
                .collect::<Result<Vec<_>>>()
        };
        let mut versions = BTreeMap::new();
        versions.insert("subarticle".to_owned(), subarticle::VERSION.to_owned());
        versions.insert(
            "subarticle-cli".to_owned(),
            env!("CARGO_PKG_VERSION").to_owned(),
        );
        let manifest = RunManifest {
            subcommand: self.subcommand,
            config: self.config,
            seed: self.seed,
            threads: self.threads,
            inputs: digests(&self.inputs)?,
            outputs: digests(&self.outputs)?,
            wall_time_secs: self.started.elapsed().as_secs_f64(),
            versions,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}

/// `out.tsv` → `out.tsv.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_text() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc");
        std::fs::write(&p, "abc").unwrap();
        assert_eq!(
            FileDigest::of(&p).unwrap().sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(
            manifest_path_for(Path::new("a/b/top.tsv")),
            Path::new("a/b/top.tsv.manifest.json")
        );
    }
}
