//! Output-directory handling with all-or-nothing semantics. Files are
//! written through an [`OutputGuard`]; if the command fails before calling
//! [`OutputGuard::commit`], everything the guard wrote is removed so a
//! failed run never leaves partial outputs behind.

use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Number formatting for CSV output: 17 significant digits, enough to
/// reproduce any f64 exactly on reparse.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// Builds CSV text from leading comment lines, a header, and rows.
pub fn csv_text(comments: &[String], header: &str, rows: &[String]) -> String {
    let mut text = String::new();
    for c in comments {
        text.push_str("# ");
        text.push_str(c);
        text.push('\n');
    }
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    text
}

/// Tracks files written into an output directory, deleting them on drop
/// unless the run committed.
pub struct OutputGuard {
    dir: PathBuf,
    written: Vec<PathBuf>,
    names: Vec<String>,
    committed: bool,
}

impl OutputGuard {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("create {}: {e}", dir.display())))?;
        Ok(OutputGuard {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            names: Vec::new(),
            committed: false,
        })
    }

    pub fn write(&mut self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, text)
            .map_err(|e| CliError::Io(format!("write {}: {e}", path.display())))?;
        self.written.push(path.clone());
        self.names.push(name.to_string());
        Ok(path)
    }

    /// Names of the files written so far, in write order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for path in &self.written {
            let _ = std::fs::remove_file(path);
        }
    }
}
