//! Output directories with atomic file writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::config::RunConfig;
use crate::error::CliError;

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    /// Creates the directory and writes `config.resolved` and `VERSION`.
    pub fn create(cfg: &RunConfig) -> Result<Self, CliError> {
        let root = cfg.output_dir.clone();
        std::fs::create_dir_all(&root).map_err(CliError::io(&root))?;
        let out = Self { root };
        out.write("config.resolved", cfg.render())?;
        out.write("VERSION", format!("{VERSION}\n"))?;
        Ok(out)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `rel` via a temp file in the same directory and a rename, so
    /// readers never see a partial file.
    pub fn write(&self, rel: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.root.join(rel);
        let dir = path.parent().unwrap_or(&self.root).to_path_buf();
        std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
        let mut tmp = NamedTempFile::new_in(&dir).map_err(CliError::io(&dir))?;
        tmp.write_all(contents.as_ref()).map_err(CliError::io(&path))?;
        tmp.persist(&path).map_err(|e| CliError::Io { path, source: e.error })?;
        Ok(())
    }
}
