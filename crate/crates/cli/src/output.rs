//! CSV artifacts with a versioned schema line.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Shortest round-trip scientific notation.
pub fn fmt_f(v: f64) -> String {
    format!("{v:e}")
}

pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    /// Starts with `# lrsdp <kind> v<version>` and the column header.
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# lrsdp {kind} v{SCHEMA_VERSION}");
        let _ = writeln!(text, "{}", columns.join(","));
        Csv { text, width: columns.len() }
    }

    pub fn row(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.width);
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    pub fn comment(&mut self, line: &str) {
        let _ = writeln!(self.text, "# {line}");
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, &self.text).map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))
    }
}
