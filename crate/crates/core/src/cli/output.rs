use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::Failure;

/// Output directory that refuses to clobber files unless forced.
pub(crate) struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    /// Creates `root` and checks none of `planned` (relative paths) exist unless `force`.
    pub fn prepare(root: &Path, force: bool, planned: &[String]) -> Result<Self, Failure> {
        std::fs::create_dir_all(root)
            .map_err(|e| Failure::input(format!("cannot create output directory {}: {e}", root.display())))?;
        if !force {
            if let Some(p) = planned.iter().map(|p| root.join(p)).find(|p| p.exists()) {
                return Err(Failure::input(format!(
                    "refusing to overwrite {} (pass --force)",
                    p.display()
                )));
            }
        }
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn write_with<F>(&self, rel: &str, body: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.root.join(rel);
        let fail = |e: std::io::Error| Failure::input(format!("cannot write {}: {e}", path.display()));
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(fail)?;
        }
        let mut w = BufWriter::new(File::create(&path).map_err(fail)?);
        body(&mut w).and_then(|_| w.flush()).map_err(fail)
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), Failure> {
        self.write_with(rel, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }
}
