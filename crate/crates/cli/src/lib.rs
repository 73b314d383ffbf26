//! Command-line front end for `locc-usd`: instance files in, reports out.

pub mod commands;
pub mod error;
pub mod instance;
pub mod report;

use std::io::Write;
use std::path::Path;

pub use commands::{run, run_path, Command, Options};
pub use error::{exit, CliError};
pub use report::Report;

/// Writes `contents` to `path` via a sibling temporary file and a rename,
/// so readers never observe a partial report.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}
