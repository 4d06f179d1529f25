use std::fs;
use std::path::{Path, PathBuf};

use partreg::bench::RunManifest;

use crate::error::CliResult;

/// One run directory and the manifest describing it.
pub struct RunDir {
    pub path: PathBuf,
    pub manifest: RunManifest,
}

impl RunDir {
    /// Creates `<root>/<name>-<timestamp>`, adding a counter on collisions.
    pub fn create(root: &Path, name: &str, parameters: serde_json::Value) -> CliResult<Self> {
        fs::create_dir_all(root)?;
        let now = chrono::Local::now();
        let stem = format!("{name}-{}", now.format("%Y%m%d-%H%M%S"));
        let mut path = root.join(&stem);
        let mut k = 1;
        loop {
            match fs::create_dir(&path) {
                Ok(()) => break,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    k += 1;
                    path = root.join(format!("{stem}-{k}"));
                }
                Err(e) => return Err(e.into()),
            }
        }
        let mut manifest = RunManifest::new(name, parameters);
        manifest.created = now.to_rfc3339();
        Ok(Self { path, manifest })
    }

    /// Path for an output file, recorded in the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.path.join(name)
    }

    pub fn finish(self) -> CliResult<PathBuf> {
        self.manifest.write_json(&self.path.join("manifest.json"))?;
        Ok(self.path)
    }
}
